#include <doctest.h>

#include <cmath>
#include <numeric>

#include "lorenzlab/errors.hpp"
#include "lorenzlab/transfer_operator.hpp"
#include "oracle_values.hpp"

using namespace lorenzlab;

namespace {

double uniform_l1(const InvariantDensity& d) {
    const double u = 1.0 / static_cast<double>(d.weights.size());
    double e = 0.0;
    for (double w : d.weights) e += std::abs(w - u);
    return e;
}

InvariantDensity density_of(const PiecewiseMap& m, int bins, int samples = 100) {
    UlamOptions o;
    o.samples_per_bin = samples;
    return stationary_density(build_ulam(m, UlamPartition{bins}, o), 1e-12);
}

}  // namespace

TEST_CASE("partition") {
    UlamPartition p{4};
    CHECK(p.width() == 0.25);
    CHECK(p.center(0) == -0.375);
    CHECK(p.bin_of(0.5) == 3);
    CHECK(p.bin_of(-0.5) == 0);
    CHECK(p.bin_of(-0.24) == 1);
    CHECK_THROWS_AS((UlamPartition{1}.validate()), ArgumentError);
    CHECK_THROWS_AS((UlamPartition{8, 0.5, 0.5}.validate()), ArgumentError);
}

TEST_CASE("identity map gives the identity matrix") {
    const UlamMatrix u = build_ulam(identity_map(), UlamPartition{32});
    for (int i = 0; i < 32; ++i) {
        CHECK(u.p.coeff(i, i) == doctest::Approx(1.0));
        CHECK(u.p.row(i).sum() == doctest::Approx(1.0));
    }
    CHECK(u.p.nonZeros() == 32);
}

TEST_CASE("tent map rows split in halves") {
    UlamOptions o;
    o.samples_per_bin = 10000;
    o.sampling = UlamSampling::monte_carlo;
    o.seed = 9;
    const UlamMatrix u = build_ulam(tent_map(), UlamPartition{64}, o);
    for (int i = 0; i < 64; ++i) {
        double top = 0, second = 0;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(u.p, i); it; ++it) {
            if (it.value() > top) {
                second = top;
                top = it.value();
            } else if (it.value() > second) {
                second = it.value();
            }
        }
        CHECK(top == doctest::Approx(0.5).epsilon(2e-2));
        CHECK(second == doctest::Approx(0.5).epsilon(2e-2));
    }
}

TEST_CASE("contracting map matrix is stochastic and sparse") {
    const auto m = ContractingLorenzMap(4.0, 2.0).as_piecewise();
    const UlamMatrix u = build_ulam(m, UlamPartition{256});
    for (int i = 0; i < 256; ++i) {
        CHECK(u.p.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
    // each bin image is a short interval except next to the discontinuity
    CHECK(u.p.nonZeros() < 256 * 40);
}

TEST_CASE("uniform densities") {
    CHECK(uniform_l1(density_of(tent_map(), 1024)) <= 0.02);
    CHECK(uniform_l1(density_of(doubling_map(), 256)) <= 0.02);
}

TEST_CASE("exact density at rho = 4") {
    const auto m = ContractingLorenzMap(4.0, 2.0).as_piecewise();
    // Coarse-grained L1 error against the arcsine masses; the endpoint
    // singularities make it decay like bins^-1/2.
    auto coarse_error = [&](int bins) {
        const InvariantDensity d = density_of(m, bins);
        CHECK(d.total_mass() == doctest::Approx(1.0));
        const int f = bins / 64;
        double l1 = 0.0;
        for (int b = 0; b < 64; ++b) {
            double mass = 0.0;
            for (int k = 0; k < f; ++k) mass += d.weights[static_cast<std::size_t>(f * b + k)];
            l1 += std::abs(mass - oracle::kRho4Masses64[static_cast<std::size_t>(b)]);
        }
        return l1;
    };
    const double e1 = coarse_error(1024);
    const double e4 = coarse_error(4096);
    CHECK(e1 <= 0.03);
    CHECK(e4 <= 0.6 * e1);
}

TEST_CASE("density matches the orbit histogram") {
    const ContractingLorenzMap t(4.0, 2.0);
    const UlamPartition part{1024};
    const InvariantDensity d = density_of(t.as_piecewise(), 1024);
    std::vector<double> hist(1024, 0.0);
    double x = 0.1234567;
    const long n = 10'000'000;
    for (long i = 0; i < n; ++i) {
        x = t.eval(x);
        if (x == 0.0) x = 1e-300;
        hist[static_cast<std::size_t>(part.bin_of(x))] += 1.0 / n;
    }
    double l1 = 0.0;
    for (int i = 0; i < 1024; ++i) l1 += std::abs(hist[static_cast<std::size_t>(i)] - d.weights[static_cast<std::size_t>(i)]);
    CHECK(l1 <= 0.05);
}

TEST_CASE("push_forward preserves mass") {
    const UlamMatrix u = build_ulam(tent_map(), UlamPartition{16});
    std::vector<double> w(16, 0.0);
    w[3] = 1.0;
    const auto q = push_forward(u, w);
    CHECK(std::accumulate(q.begin(), q.end(), 0.0) == doctest::Approx(1.0));
}

TEST_CASE("distances") {
    const UlamPartition part{8};
    InvariantDensity a{part, std::vector<double>(8, 0.0)};
    InvariantDensity b = a;
    a.weights[1] = 1.0;
    b.weights[5] = 1.0;
    CHECK(density_distance_w1(a, a) == 0.0);
    CHECK(density_distance_w1(a, b) == doctest::Approx(std::abs(part.center(1) - part.center(5))));
    CHECK(density_distance_l1(a, b) == doctest::Approx(2.0));
    InvariantDensity c{UlamPartition{4}, std::vector<double>(4, 0.25)};
    CHECK_THROWS_AS(density_distance_w1(a, c), ArgumentError);
}

TEST_CASE("w1 ordering near the base parameter") {
    auto at = [](double rho) { return density_of(ContractingLorenzMap(rho, 2.0).as_piecewise(), 1024); };
    const InvariantDensity base = at(3.2);
    CHECK(density_distance_w1(base, at(3.2 * 1.001)) <= density_distance_w1(base, at(3.2 * 1.1)));
}

TEST_CASE("monte carlo matrix does not depend on jobs") {
    const auto m = ContractingLorenzMap(3.5, 2.0).as_piecewise();
    UlamOptions o;
    o.sampling = UlamSampling::monte_carlo;
    o.seed = 4;
    const UlamMatrix a = build_ulam(m, UlamPartition{128}, o);
    o.jobs = 4;
    const UlamMatrix b = build_ulam(m, UlamPartition{128}, o);
    CHECK((Eigen::MatrixXd(a.p) - Eigen::MatrixXd(b.p)).norm() == 0.0);
}

TEST_CASE("power iteration budget") {
    const UlamMatrix u = build_ulam(ContractingLorenzMap(4.0, 2.0).as_piecewise(), UlamPartition{256});
    CHECK_THROWS_AS(stationary_density(u, 1e-14, 2), ConvergenceError);
}
