#include <doctest.h>

#include <cmath>

#include "lorenzlab/ergodic_stats.hpp"
#include "lorenzlab/errors.hpp"
#include "lorenzlab/rng.hpp"

using namespace lorenzlab;

namespace {

const FlowModel& contracting() {
    static const FlowModel m = FlowModel::geometric(GeomLorenzParams::contracting_defaults());
    return m;
}

HistogramGrid grid_for(const FlowModel& m, int n = 32) {
    return HistogramGrid{default_trapping_box(m), n, n, n};
}

}  // namespace

TEST_CASE("birkhoff averages of trivial observables") {
    const auto sinks = FlowModel::two_sink();
    const State3 eq(1, 0, 0);
    const auto bx = birkhoff_average(sinks, eq, [](const State3& p) { return p.x(); }, 20, 0);
    CHECK(bx.value == 1.0);
    CHECK(bx.trace.size() == 10);
    const auto one = birkhoff_average(contracting(), State3(0.2, 0.1, 1.0),
                                      [](const State3&) { return 1.0; }, 50, 5);
    CHECK(one.value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("birkhoff average is linear and shift invariant") {
    const State3 p0(0.2, 0.1, 1.0);
    auto f = [](const State3& p) { return p.z(); };
    auto g = [](const State3& p) { return p.x() * p.x(); };
    const double a = birkhoff_average(contracting(), p0, f, 200, 0).value;
    const double b = birkhoff_average(contracting(), p0, g, 200, 0).value;
    const double ab = birkhoff_average(contracting(), p0,
                                       [&](const State3& p) { return 2 * f(p) - 3 * g(p); }, 200, 0)
                          .value;
    CHECK(ab == doctest::Approx(2 * a - 3 * b).epsilon(1e-12));

    // starting further along the orbit changes the long average only a little
    TrajectorySampler s(contracting(), p0, {});
    s.advance(7.3);
    const double far = birkhoff_average(contracting(), s.position(), f, 2e4, 0).value;
    const double near = birkhoff_average(contracting(), p0, f, 2e4, 0).value;
    CHECK(std::abs(far - near) < 1e-2);
}

TEST_CASE("classical lorenz z-average from two seeds") {
    const auto m = FlowModel::classical();
    auto z = [](const State3& p) { return p.z(); };
    const double a = birkhoff_average(m, State3(1, 1, 1), z, 1e4, 50).value;
    const double b = birkhoff_average(m, State3(-3, 5, 30), z, 1e4, 50).value;
    CHECK(std::abs(a - b) / std::abs(a) <= 5e-3);
}

TEST_CASE("empirical measure basics") {
    const auto sinks = FlowModel::two_sink();
    const auto run = empirical_measure(sinks, State3(-1, 0, 0), 10, 0, grid_for(sinks));
    CHECK(run.measure.nonzero().size() == 1);
    CHECK(run.measure.total_mass() == doctest::Approx(1.0));

    const auto c = empirical_measure(contracting(), State3(0.3, 0.1, 1.0), 500, 10,
                                     grid_for(contracting()));
    CHECK(c.measure.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c.measure.nonzero().size() > 10);

    HistogramGrid tiny{Box{State3::Constant(-0.1), State3::Constant(0.1)}, 4, 4, 4};
    CHECK_THROWS_AS(empirical_measure(contracting(), State3(0.3, 0.1, 1.0), 10, 0, tiny),
                    EscapeError);
}

TEST_CASE("dictionary is normalized") {
    const Box box = default_trapping_box(contracting());
    const auto dict = ObservableDictionary::standard(box);
    CHECK(dict.size() == 3 + 6 + 23);
    CounterRng rng(2);
    for (const auto& phi : dict.functions) {
        for (int i = 0; i < 200; ++i) {
            const State3 p(rng.uniform(box.lo.x(), box.hi.x()), rng.uniform(box.lo.y(), box.hi.y()),
                           rng.uniform(box.lo.z(), box.hi.z()));
            const State3 q = p + 1e-3 * State3(rng.uniform(-1, 1), rng.uniform(-1, 1),
                                               rng.uniform(-1, 1));
            CHECK(std::abs(phi(p)) <= 1.0 + 1e-12);
            CHECK(std::abs(phi(p) - phi(q)) <= (p - q).norm() * (1.0 + 1e-6));
        }
    }
}

TEST_CASE("dual lipschitz pseudometric") {
    const Box box = default_trapping_box(contracting());
    const auto dict = ObservableDictionary::standard(box);
    const auto p = EmpiricalMeasure::from_points({State3(0.1, 0.2, 0.3)});
    const auto q = EmpiricalMeasure::from_points({State3(-0.2, 0.1, 0.6)});
    CHECK(dual_lipschitz_distance(p, p, dict) == 0.0);
    const double d = dual_lipschitz_distance(p, q, dict);
    CHECK(d > 0.0);
    CHECK(d <= (State3(0.1, 0.2, 0.3) - State3(-0.2, 0.1, 0.6)).norm());
    const auto r = EmpiricalMeasure::from_points({State3(0.4, -0.3, 0.9)});
    CHECK(d <= dual_lipschitz_distance(p, r, dict) + dual_lipschitz_distance(r, q, dict) + 1e-15);
    CHECK(dual_lipschitz_distance(q, p, dict) == d);
    CHECK_THROWS_AS(dual_lipschitz_distance(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}),
                    ArgumentError);
}

TEST_CASE("running measures converge along one orbit") {
    const auto& m = contracting();
    const auto dict = ObservableDictionary::standard(default_trapping_box(m));
    const State3 p0(0.3, 0.1, 1.0);
    const auto grid = grid_for(m);
    const auto ref = integrate(dict, empirical_measure(m, p0, 2e5, 100, grid).measure);
    double prev = 1e9;
    for (double T : {1e3, 1e4, 1e5}) {
        const double d =
            dual_lipschitz_distance(integrate(dict, empirical_measure(m, p0, T, 100, grid).measure), ref);
        CHECK(d < prev);
        prev = d;
    }
}

TEST_CASE("two seeds of the contracting model share their measure") {
    const auto& m = contracting();
    const auto dict = ObservableDictionary::standard(default_trapping_box(m));
    const auto grid = grid_for(m, 64);
    const auto a = empirical_measure(m, State3(0.3, 0.1, 1.0), 1e5, 5e3, grid).measure;
    const auto b = empirical_measure(m, State3(-0.41, -0.2, 0.8), 1e5, 5e3, grid).measure;
    CHECK(dual_lipschitz_distance(a, b, dict) <= 0.02);
}

TEST_CASE("basin agreement") {
    const auto sinks = FlowModel::two_sink();
    const auto dict = ObservableDictionary::standard(default_trapping_box(sinks));
    const std::vector<State3> seeds{State3(0.5, 0.3, 0.2), State3(-0.4, 0.1, -0.2),
                                    State3(1.5, -0.5, 0.5), State3(-1.2, 0.4, 0.0)};
    BasinOptions opt;
    opt.jobs = 2;
    const BasinResult r = basin_agreement(sinks, seeds, dict, 200, 0.02, opt);
    CHECK(r.clusters == 2);
    CHECK(r.assignment == std::vector<int>{0, 1, 0, 1});
    CHECK(r.distances.size() == 16);

    // seeds along one orbit
    TrajectorySampler s(contracting(), State3(0.3, 0.1, 1.0), {});
    std::vector<State3> along;
    for (int i = 0; i < 4; ++i) {
        along.push_back(s.position());
        s.advance(3.7);
    }
    const auto dc = ObservableDictionary::standard(default_trapping_box(contracting()));
    const BasinResult one = basin_agreement(contracting(), along, dc, 2e4, 0.02);
    CHECK(one.clusters == 1);
}
