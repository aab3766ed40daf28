#include <doctest.h>

#include <cmath>
#include <vector>

#include "lorenzlab/errors.hpp"
#include "lorenzlab/poincare.hpp"
#include "lorenzlab/quotient_maps.hpp"
#include "lorenzlab/rng.hpp"

using namespace lorenzlab;

TEST_CASE("analytic return formulas") {
    const auto p = GeomLorenzParams::contracting_defaults();
    const ReturnSample r = analytic_return_contracting(p, SectionPoint::on_sigma(0.5, 0.0));
    CHECK(r.to.u == doctest::Approx(-0.5));
    CHECK(r.to.v == doctest::Approx(0.1));
    CHECK(r.tau == doctest::Approx(std::log(2.0) + p.tau_out));

    const ReturnSample near = analytic_return_contracting(p, SectionPoint::on_sigma(1e-9, 0.3));
    CHECK(near.to.u == doctest::Approx(0.5).epsilon(1e-12));

    const ReturnSample a = analytic_return_contracting(p, SectionPoint::on_sigma(0.3, 0.2));
    // H is odd in u at fixed v
    const ReturnSample b = analytic_return_contracting(p, SectionPoint::on_sigma(-0.3, 0.2));
    CHECK(b.to.u == doctest::Approx(-a.to.u));
    CHECK(b.to.v == doctest::Approx(-a.to.v));
    CHECK(b.tau == doctest::Approx(a.tau));

    CHECK_THROWS_AS(analytic_return_contracting(p, SectionPoint::on_sigma(0.0, 0.1)),
                    StableManifoldError);
}

TEST_CASE("numeric return agrees with the closed form") {
    const auto p = GeomLorenzParams::contracting_defaults();
    const auto m = FlowModel::geometric(p);
    const SectionPoint sp = SectionPoint::on_sigma(0.25, 0.1);
    const ReturnSample n = numeric_return(m, sp, {});
    const ReturnSample a = analytic_return_contracting(p, sp);
    CHECK(std::abs(n.to.u - a.to.u) < 1e-6);
    CHECK(std::abs(n.to.v - a.to.v) < 1e-6);
    CHECK(std::abs(n.tau - a.tau) < 1e-6);
    CHECK_THROWS_AS(numeric_return(m, SectionPoint::on_sigma(0.0, 0.1), {}),
                    StableManifoldError);

    auto c = FlowModel::classical();
    c.section_level = 27.0;
    const ReturnSample cr = numeric_return(c, SectionPoint::raw(1.0, 1.0), {});
    CHECK(cr.tau > 0.0);
}

TEST_CASE("projection and commutation with the quotient map") {
    CHECK(quotient_project(SectionPoint::raw(0.3, -0.2)) == 0.3);
    CHECK(quotient_project(SectionPoint::raw(0.0, 0.5)) == 0.0);

    const auto p = GeomLorenzParams::contracting_defaults();
    const auto t = ContractingLorenzMap::from_params(p);
    CounterRng rng(11);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        double u = rng.uniform(-0.5, 0.5);
        if (std::abs(u) < 1e-4) continue;
        const SectionPoint sp = SectionPoint::on_sigma(u, rng.uniform(-0.5, 0.5));
        const ReturnSample r = analytic_return_contracting(p, sp);
        worst = std::max(worst, std::abs(quotient_project(r.to) - t.eval(quotient_project(sp))));
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("return time statistics") {
    std::vector<ReturnSample> one(1);
    one[0].tau = 2.0;
    CHECK(return_time_stats(one).mean == 2.0);
    std::vector<ReturnSample> two(2);
    two[0].tau = 1.0;
    two[1].tau = 3.0;
    const ReturnTimeStats s = return_time_stats(two);
    CHECK(s.mean == 2.0);
    CHECK(s.min == 1.0);
    CHECK(s.max == 3.0);
    CHECK(s.count == 2);

    const auto p = GeomLorenzParams::contracting_defaults();
    const ReturnSample deep = analytic_return_contracting(p, SectionPoint::on_sigma(1e-6, 0.0));
    CHECK(deep.tau == doctest::Approx(-std::log(1e-6) / p.lambda1 + p.tau_out));
}

TEST_CASE("hybrid trajectory reproduces the return sequence") {
    const auto p = GeomLorenzParams::contracting_defaults();
    SectionPoint sp = SectionPoint::on_sigma(0.1234567, 0.1);
    auto traj = HybridTrajectory::from_section(p, sp);
    double t = 0.0;
    for (int k = 0; k < 20; ++k) {
        const ReturnSample a = analytic_return_contracting(p, sp);
        const auto r = traj.next_return();
        t += a.tau;
        CHECK(r.to.u == doctest::Approx(a.to.u).epsilon(1e-9));
        CHECK(r.to.v == doctest::Approx(a.to.v).epsilon(1e-9));
        CHECK(traj.time() == doctest::Approx(t).epsilon(1e-12));
        sp = a.to;
    }
    // advance splits consistently
    auto x = HybridTrajectory::from_section(p, SectionPoint::on_sigma(0.3, 0.0));
    auto y = x;
    x.advance(2.5);
    y.advance(1.0);
    y.advance(1.5);
    CHECK((x.position() - y.position()).norm() < 1e-12);
    CHECK_THROWS_AS(HybridTrajectory(p, State3(0.0, 0.1, 1.0)), StableManifoldError);
}
