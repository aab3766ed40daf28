#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lorenzlab/errors.hpp"
#include "lorenzlab/flow_models.hpp"
#include "lorenzlab/rng.hpp"
#include "oracle_values.hpp"

using namespace lorenzlab;

TEST_CASE("classical field values") {
    const auto m = FlowModel::classical();
    CHECK(eval_field(m, State3::Zero()).norm() == 0.0);
    const State3 g = eval_field(m, State3(1, 1, 1));
    CHECK(g.x() == doctest::Approx(0.0));
    CHECK(g.y() == doctest::Approx(26.0));
    CHECK(g.z() == doctest::Approx(-5.0 / 3.0));
}

TEST_CASE("geometric field is linear inside the cube") {
    const auto m = FlowModel::geometric(GeomLorenzParams::contracting_defaults());
    const State3 g = eval_field(m, State3(0.3, 0.1, 0.5));
    CHECK(g.x() == doctest::Approx(0.3));
    CHECK(g.y() == doctest::Approx(-0.6));
    CHECK(g.z() == doctest::Approx(-1.0));
    const Matrix3 j = eval_jacobian(m, State3(0.2, -0.4, 0.7));
    CHECK((j - Matrix3(State3(1, -6, -2).asDiagonal())).norm() == 0.0);
}

TEST_CASE("classical jacobian at origin and by finite differences") {
    const ClassicalLorenzParams c;
    const auto m = FlowModel::classical(c);
    Matrix3 expect;
    expect << -c.sigma, c.sigma, 0, c.rayleigh, -1, 0, 0, 0, -c.beta;
    CHECK((eval_jacobian(m, State3::Zero()) - expect).norm() < 1e-14);

    CounterRng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const State3 p(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(0, 50));
        const double h = 1e-5;
        Matrix3 fd;
        for (int k = 0; k < 3; ++k) {
            State3 e = State3::Zero();
            e[k] = h;
            fd.col(k) = (eval_field(m, p + e) - eval_field(m, p - e)) / (2 * h);
        }
        CHECK((fd - eval_jacobian(m, p)).cwiseAbs().maxCoeff() <= 1e-6);
    }
}

TEST_CASE("divergence") {
    const auto m = FlowModel::classical();
    CHECK(divergence(m, State3(3, -2, 11)) == doctest::Approx(-(10 + 1 + 8.0 / 3.0)));
    const auto g = FlowModel::geometric(GeomLorenzParams::contracting_defaults());
    CHECK(divergence(g, State3(0.1, 0.1, 0.1)) == doctest::Approx(-7.0));
}

TEST_CASE("linear region exit closed form") {
    const auto p = GeomLorenzParams::contracting_defaults();
    const LinearExit e = linear_region_exit(p, SectionPoint::on_sigma(0.5, 0.1));
    CHECK(e.exit.x() == doctest::Approx(1.0));
    CHECK(e.exit.y() == doctest::Approx(oracle::kExitY).epsilon(1e-14));
    CHECK(e.exit.z() == doctest::Approx(oracle::kExitZ).epsilon(1e-14));
    CHECK(e.elapsed == doctest::Approx(oracle::kExitTime).epsilon(1e-14));

    const LinearExit flat = linear_region_exit(p, SectionPoint::on_sigma(0.5, 0.0));
    CHECK(flat.exit.y() == 0.0);
    CHECK(flat.exit.z() == doctest::Approx(0.25));

    const LinearExit neg = linear_region_exit(p, SectionPoint::on_sigma(-0.5, 0.1));
    CHECK(neg.exit.x() == doctest::Approx(-1.0));

    CHECK_THROWS_AS(linear_region_exit(p, SectionPoint::on_sigma(0.0, 0.2)),
                    StableManifoldError);
}

TEST_CASE("linear flow composes") {
    const auto p = GeomLorenzParams::contracting_defaults();
    const State3 x(0.2, 0.3, 0.9);
    const State3 a = linear_flow(p, linear_flow(p, x, 0.4), 0.3);
    CHECK((a - linear_flow(p, x, 0.7)).norm() < 1e-15);
}

TEST_CASE("gluing lands on sigma with the quotient formula") {
    const auto p = GeomLorenzParams::contracting_defaults();
    const SectionPoint sp = apply_gluing(p, State3(1.0, 0.0, 0.25));
    CHECK(sp.u == doctest::Approx(-0.5));
    CHECK(sp.v == doctest::Approx(0.1));
    const SectionPoint sm = apply_gluing(p, State3(-1.0, 0.0, 0.25));
    CHECK(sm.u == doctest::Approx(0.5));
    CHECK(sm.v == doctest::Approx(-0.1));
}

TEST_CASE("validate_params") {
    const auto ok = validate_params(FlowModel::geometric(GeomLorenzParams::contracting_defaults()));
    CHECK(ok.ok());
    REQUIRE(ok.r);
    CHECK(*ok.r == doctest::Approx(6.0));
    CHECK(*ok.s == doctest::Approx(2.0));

    auto bad = GeomLorenzParams::contracting_defaults();
    bad.lambda2 = -2;
    bad.lambda3 = -6;
    bad.rho = 4;
    const auto f = validate_params(FlowModel::geometric(bad)).failures();
    CHECK(std::find(f.begin(), f.end(), "-lambda2 > -lambda3") != f.end());

    auto edge = GeomLorenzParams::contracting_defaults();
    edge.lambda2 = -5;
    const auto fe = validate_params(FlowModel::geometric(edge)).failures();
    REQUIRE(fe.size() == 1);
    CHECK(fe[0] == "r > s + 3");

    auto big = GeomLorenzParams::contracting_defaults();
    big.rho = 4.5;
    CHECK_FALSE(validate_params(FlowModel::geometric(big)).ok());

    auto far = GeomLorenzParams::contracting_defaults();
    far.c_offset = 0.5;
    const auto ff = validate_params(FlowModel::geometric(far)).failures();
    CHECK(std::find(ff.begin(), ff.end(), "gluing lands in Sigma") != ff.end());

    CHECK(validate_params(FlowModel::geometric(GeomLorenzParams::expanding_defaults())).ok());
    CHECK(validate_params(FlowModel::classical()).ok());
}

TEST_CASE("section point bounds") {
    CHECK_THROWS_AS(SectionPoint::on_sigma(0.6, 0.0), DomainError);
    CHECK_THROWS_AS(SectionPoint::on_sigma(NAN, 0.0), DomainError);
    CHECK(SectionPoint::on_sigma(-0.2, 0.1).side == Side::minus);
}
