#include <doctest.h>

#include <cmath>

#include "lorenzlab/errors.hpp"
#include "lorenzlab/lyapunov_entropy.hpp"
#include "oracle_values.hpp"

using namespace lorenzlab;

TEST_CASE("linear field spectrum") {
    Matrix3 a = Matrix3::Zero();
    a.diagonal() << 1, -6, -2;
    const auto s = lyapunov_spectrum(FlowModel::linear(a), State3::Zero(), 100, 1);
    CHECK(s.exponents[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(s.exponents[1] == doctest::Approx(-2.0).epsilon(1e-8));
    CHECK(s.exponents[2] == doctest::Approx(-6.0).epsilon(1e-8));
    CHECK(cu_volume_growth(s) == doctest::Approx(-1.0).epsilon(1e-8));
}

TEST_CASE("argument checks") {
    const auto m = FlowModel::classical();
    CHECK_THROWS_AS(lyapunov_spectrum(m, State3(1, 1, 1), 10, 1), ArgumentError);
    LyapunovOptions o;
    o.initial_frame = Matrix3::Zero();
    CHECK_THROWS_AS(lyapunov_spectrum(m, State3(1, 1, 1), 100, 0.1, {}, o), RenormalizationError);

    Matrix3 a = Matrix3::Zero();
    a.diagonal() << 10, -10, 0;
    CHECK_THROWS_AS(lyapunov_spectrum(FlowModel::linear(a), State3::Zero(), 300, 3),
                    RenormalizationError);
}

TEST_CASE("classical lorenz sum rule and flow direction") {
    const auto s = lyapunov_spectrum(FlowModel::classical(), State3(1, 1, 1), 1e4, 0.1, {},
                                     LyapunovOptions{100});
    const double sum = s.exponents[0] + s.exponents[1] + s.exponents[2];
    CHECK(std::abs(sum + 41.0 / 3.0) <= 0.01 * 41.0 / 3.0);
    CHECK(std::abs(s.exponents[1]) <= 0.01);
    CHECK(s.exponents[0] == doctest::Approx(oracle::kLorenzExponents[0]).epsilon(0.05));
    CHECK(s.exponents[2] == doctest::Approx(oracle::kLorenzExponents[2]).epsilon(0.01));
    CHECK(cu_volume_growth(s) == doctest::Approx(s.exponents[0]).epsilon(0.02));
    CHECK(s.trace.size() == s.trace_times.size());
    CHECK_FALSE(s.trace.empty());
}

TEST_CASE("cu volume growth of a given spectrum") {
    LyapunovSpectrum s;
    s.exponents = {0.9, 0.0, -14.5};
    CHECK(cu_volume_growth(s) == doctest::Approx(0.9));

    LyapunovSpectrum drifting = s;
    drifting.trace = {{1, 0, -1}, {1, 0, -1}, {1, 0, -1}, {2, 0, -1}};
    drifting.trace_times = {1, 2, 3, 4};
    CHECK_THROWS_AS(cu_volume_growth(drifting), ConvergenceError);
}

TEST_CASE("quotient entropy") {
    UlamPartition part{1024};
    InvariantDensity uniform{part, std::vector<double>(1024, 1.0 / 1024)};
    CHECK(quotient_entropy(tent_map(), uniform) == doctest::Approx(std::log(2.0)).epsilon(1e-3));
    CHECK(quotient_entropy(doubling_map(), uniform) == doctest::Approx(std::log(2.0)).epsilon(1e-3));

    const ContractingLorenzMap t(4.0, 2.0);
    auto h_at = [&](int bins) {
        const auto d = stationary_density(build_ulam(t.as_piecewise(), UlamPartition{bins}), 1e-12);
        return quotient_entropy(t, d);
    };
    const double h512 = h_at(512);
    const double h1024 = h_at(1024);
    CHECK(h1024 > 0.0);
    CHECK(std::abs(h512 - h1024) <= 0.05 * h1024);
    CHECK(h1024 == doctest::Approx(oracle::kRho4QuotientEntropy).epsilon(0.03));
}

TEST_CASE("abramov normalization") {
    const auto e = entropy_estimate(0.6, 3.0, 0.2);
    CHECK(e.h_flow == doctest::Approx(0.2));
    CHECK(e.residual == doctest::Approx(0.0));
    CHECK(e.within_tolerance);
    CHECK_THROWS_AS(entropy_estimate(0.6, 0.0, 0.2), ArgumentError);
}

TEST_CASE("tent suspension with unit roof") {
    // Suspension of the tent map under constant return time 1: the unstable
    // exponent of the suspension flow is log 2 by construction.
    const auto d = stationary_density(build_ulam(tent_map(), UlamPartition{1024}), 1e-12);
    ReturnTimeStats roof;
    roof.mean = roof.min = roof.max = 1.0;
    roof.count = 1;
    LyapunovSpectrum s;
    s.exponents = {std::log(2.0), 0.0, -1.0};
    const auto e = entropy_formula_residual(tent_map(), d, roof, s);
    CHECK(e.residual <= 1e-3);
    CHECK(e.within_tolerance);
}

TEST_CASE("return times at rho = 4") {
    const auto p = GeomLorenzParams::contracting_defaults();
    const auto st = orbit_return_times(p, SectionPoint::raw(0.1234567, 0.1), 200000);
    CHECK(st.count == 200000);
    CHECK(st.mean == doctest::Approx(oracle::kRho4MeanReturnTime).epsilon(0.02));
    CHECK(st.min >= p.tau_out);
}

TEST_CASE("entropy formula on contracting defaults") {
    const auto model = FlowModel::geometric(GeomLorenzParams::contracting_defaults());
    const EntropyCheck c = run_entropy_check(model);
    CHECK(c.estimate.relative_residual <= 0.15);
    CHECK(c.estimate.within_tolerance);
    CHECK(c.estimate.lambda_plus == doctest::Approx(oracle::kRho4LambdaPlus).epsilon(0.02));
    CHECK(c.estimate.mean_return_time ==
          doctest::Approx(oracle::kRho4MeanReturnTime).epsilon(0.02));
    CHECK(std::abs(c.spectrum.exponents[1]) < 0.01);
}
