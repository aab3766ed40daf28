// Runs the twelve acceptance checks and prints one PASS/FAIL line per check.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lorenzlab/cli.hpp"
#include "lorenzlab/ergodic_stats.hpp"
#include "lorenzlab/errors.hpp"
#include "lorenzlab/expansiveness_probe.hpp"
#include "lorenzlab/integrator.hpp"
#include "lorenzlab/lyapunov_entropy.hpp"
#include "lorenzlab/poincare.hpp"
#include "lorenzlab/quotient_maps.hpp"
#include "lorenzlab/rng.hpp"
#include "lorenzlab/stability_lab.hpp"
#include "lorenzlab/transfer_operator.hpp"
#include "oracle_values.hpp"

using namespace lorenzlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

FlowModel contracting() { return FlowModel::geometric(GeomLorenzParams::contracting_defaults()); }

Outcome linear_region() {
    const auto p = GeomLorenzParams::contracting_defaults();
    const FlowModel m = FlowModel::geometric(p);
    StepConfig cfg;
    cfg.abs_tol = cfg.rel_tol = 1e-13;
    cfg.event_time_tol = 1e-14;
    CounterRng rng(1);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        double u = 0.0;
        while (u == 0.0) u = rng.uniform(-0.5, 0.5);
        const SectionPoint sp = SectionPoint::on_sigma(u, rng.uniform(-0.5, 0.5));
        const Crossing c = integrate_to_crossing(
            m, State3(sp.u, sp.v, 1.0), [](const State3& q) { return std::abs(q.x()) - 1.0; }, cfg);
        const State3 exact = linear_region_exit(p, sp).exit;
        worst = std::max(worst, (c.point - exact).norm() / exact.norm());
    }
    return {worst <= 1e-8, fmt("max relative error %.3g", worst)};
}

Outcome rk4_order() {
    const FlowModel m = FlowModel::classical();
    const State3 ref(oracle::kLorenzAtOne[0], oracle::kLorenzAtOne[1], oracle::kLorenzAtOne[2]);
    auto err = [&](double h) {
        StepConfig c;
        c.method = StepMethod::rk4_fixed;
        c.h = h;
        return (flow(m, State3(1, 1, 1), 1.0, c) - ref).cwiseAbs().maxCoeff();
    };
    const double ratio = err(0.005) / err(0.0025);
    return {ratio >= std::pow(2.0, 3.5) && ratio <= std::pow(2.0, 4.5),
            fmt("error ratio %.3f", ratio)};
}

Outcome lyapunov_sum() {
    const auto s = lyapunov_spectrum(FlowModel::classical(), State3(1, 1, 1), 1e4, 0.1, {},
                                     LyapunovOptions{100});
    const double sum = s.exponents[0] + s.exponents[1] + s.exponents[2];
    const double rel = std::abs(sum + 41.0 / 3.0) / (41.0 / 3.0);
    char buf[160];
    std::snprintf(buf, sizeof buf, "exponents (%.4f, %.4f, %.4f), sum error %.2e, middle %.4f",
                  s.exponents[0], s.exponents[1], s.exponents[2], rel, s.exponents[1]);
    return {rel <= 0.01 && std::abs(s.exponents[1]) <= 0.01, buf};
}

Outcome tent_ulam() {
    const auto d = stationary_density(build_ulam(tent_map(), UlamPartition{1024}), 1e-12);
    double l1 = 0.0;
    for (double w : d.weights) l1 += std::abs(w - 1.0 / 1024);
    return {l1 <= 0.02, fmt("L1 to uniform %.3g", l1)};
}

Outcome commutation() {
    const auto p = GeomLorenzParams::contracting_defaults();
    const ContractingLorenzMap t = ContractingLorenzMap::from_params(p);
    CounterRng rng(5);
    double worst = 0.0;
    int n = 0;
    while (n < 10000) {
        const double u = rng.uniform(-0.5, 0.5);
        if (std::abs(u) < 1e-4) continue;
        const SectionPoint sp = SectionPoint::on_sigma(u, rng.uniform(-0.5, 0.5));
        worst = std::max(worst, std::abs(quotient_project(analytic_return_contracting(p, sp).to) -
                                         t.eval(quotient_project(sp))));
        ++n;
    }
    return {worst <= 1e-8, fmt("max deviation %.3g", worst)};
}

Outcome map_properties() {
    const ContractingLorenzMap t = ContractingLorenzMap::from_params(GeomLorenzParams::contracting_defaults());
    const MapDiagnostics d = check_properties(t);
    bool ok = true;
    for (std::size_t k : {0u, 1u, 2u, 3u, 5u}) ok = ok && d.items[k].verdict == Verdict::pass;
    double worst = 0.0;
    const double h = 1e-4;
    for (int i = 0; i < 100; ++i) {
        // grid avoiding the discontinuity and the domain edges
        const double x = -0.49 + 0.98 * (i + 0.5) / 100.0;
        if (std::abs(x) < 4 * h) continue;
        auto f = [&](double y) { return t.eval(y); };
        const double d1 = (f(x + h) - f(x - h)) / (2 * h);
        const double d2 = (f(x + h) - 2 * f(x) + f(x - h)) / (h * h);
        const double d3 = (f(x + 2 * h) - 2 * f(x + h) + 2 * f(x - h) - f(x - 2 * h)) / (2 * h * h * h);
        const double fd = d3 / d1 - 1.5 * (d2 / d1) * (d2 / d1);
        const double exact = schwarzian_closed_form(t, x);
        worst = std::max(worst, std::abs(fd - exact) / std::abs(exact));
    }
    return {ok && worst <= 1e-2,
            std::string(ok ? "items 1-4,6 pass" : "item failure") + fmt(", Schwarzian rel error %.2e", worst)};
}

Outcome eventually_onto() {
    const auto m = ContractingLorenzMap::from_params(GeomLorenzParams::contracting_defaults()).as_piecewise();
    CounterRng rng(7);
    int reached = 0;
    int worst = 0;
    for (int i = 0; i < 50; ++i) {
        const double len = std::pow(10.0, rng.uniform(-3.0, -1.0));
        const double lo = rng.uniform(-0.5, 0.5 - len);
        const auto r = locally_eventually_onto(m, {lo, lo + len}, 500);
        if (r.n) {
            ++reached;
            worst = std::max(worst, *r.n);
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "%d/50 covered, largest n = %d", reached, worst);
    return {reached == 50, buf};
}

Outcome entropy_formula() {
    const EntropyCheck c = run_entropy_check(contracting());
    char buf[200];
    std::snprintf(buf, sizeof buf, "h_flow %.5f, lambda+ %.5f, relative residual %.4f",
                  c.estimate.h_flow, c.estimate.lambda_plus, c.estimate.relative_residual);
    return {c.estimate.relative_residual <= 0.15, buf};
}

Outcome physical_measure() {
    const FlowModel m = contracting();
    CounterRng rng(9);
    // U: a box around Sigma whose points exit with z x^2 <= 1/4, so they glue back into Sigma.
    std::vector<State3> seeds;
    while (seeds.size() < 20) {
        const State3 p(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(0, 1));
        if (p.x() != 0.0) seeds.push_back(p);
    }
    const auto dict = ObservableDictionary::standard(default_trapping_box(m));
    const BasinResult r = basin_agreement(m, seeds, dict, 1e5, 0.02);
    double dmax = 0.0;
    for (double d : r.distances) dmax = std::max(dmax, d);

    const FlowModel sinks = FlowModel::two_sink();
    CounterRng rs(10);
    std::vector<State3> ss;
    while (ss.size() < 20) {
        const State3 p(rs.uniform(-1.5, 1.5), rs.uniform(-1, 1), rs.uniform(-1, 1));
        if (std::abs(p.x()) > 1e-3) ss.push_back(p);
    }
    const auto dict2 = ObservableDictionary::standard(default_trapping_box(sinks));
    const BasinResult r2 = basin_agreement(sinks, ss, dict2, 200, 0.02);
    char buf[160];
    std::snprintf(buf, sizeof buf, "contracting: %d cluster(s), max distance %.4f; two-sink: %d clusters",
                  r.clusters, dmax, r2.clusters);
    return {r.clusters == 1 && r2.clusters == 2, buf};
}

Outcome stability_sweep() {
    const SweepResult r = quotient_stability_sweep(FamilySpec{});
    const double rho = distance_trend(r);
    const ModulusFit fit = modulus_report(r);
    char buf[160];
    std::snprintf(buf, sizeof buf, "Spearman %.3f, kappa %.3f, r2 %.3f", rho, fit.kappa, fit.r2);
    return {rho >= 0.8 && fit.kappa > 0.0 && fit.r2 >= 0.7, buf};
}

Outcome expansiveness() {
    const FlowModel m = contracting();
    const auto reps = expansiveness_scan(m, 0.02, 0.5, 100, 50, 11);
    int violations = 0;
    std::map<std::string, int> counts;
    for (const auto& r : reps) {
        violations += r.violation;
        ++counts[std::string(to_string(r.kind)) + "/" + to_string(r.verdict)];
    }
    // explicit same-leaf and opposite-side pairs
    CounterRng rng(12);
    const ContractingLorenzMap t = ContractingLorenzMap::from_params(m.geom());
    int leaf_ok = 0, opp_ok = 0;
    const int n = 10;
    for (int i = 0; i < n; ++i) {
        const State3 x = sample_attractor_point(m, rng, {});
        const State3 y(x.x(), std::clamp(x.y() + 0.01, -0.5, 0.5), 1.0);
        leaf_ok += probe_pair(m, x, y, 0.02, 0.5, 50).verdict == SeparationVerdict::time_shift_contained;

        // straddle the preimage of the discontinuity, u* = sqrt(1/(2 rho))
        const double us = std::sqrt(0.5 / m.geom().rho) * (i % 2 ? 1 : -1);
        const double off = rng.uniform(1e-3, 5e-3);
        const double v = rng.uniform(-0.4, 0.4);
        const State3 a(us - off, v, 1.0), b(us + off, v, 1.0);
        if (t.eval(a.x()) * t.eval(b.x()) >= 0.0) continue;
        opp_ok += probe_pair(m, a, b, 0.02, 0.5, 50).verdict == SeparationVerdict::separated;
    }
    std::string tally;
    for (const auto& [k, c] : counts) tally += " " + k + "=" + std::to_string(c);
    char buf[120];
    std::snprintf(buf, sizeof buf, "%d violations; same-leaf contained %d/%d; opposite-side separated %d/%d;",
                  violations, leaf_ok, n, opp_ok, n);
    return {violations == 0 && leaf_ok == n && opp_ok == n, buf + tally};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        std::ifstream f(e.path(), std::ios::binary);
        std::ostringstream s;
        s << f.rdbuf();
        out[e.path().filename().string()] = s.str();
    }
    return out;
}

Outcome reproducibility() {
    const fs::path dir = fs::temp_directory_path() / "lorenzlab_acceptance_repro";
    const std::vector<std::string> budget{
        "experiment.measure.T=2000",         "experiment.lyapunov.T=2000",
        "experiment.entropy-check.T=20000",  "experiment.entropy-check.returns=20000",
        "experiment.expansiveness-probe.n_pairs=20"};
    int same = 0;
    std::string bad;
    const auto& subs = cli::subcommands();
    for (const auto& sub : subs) {
        std::map<std::string, std::string> first;
        for (int rep = 0; rep < 2; ++rep) {
            fs::remove_all(dir);
            std::vector<std::string> args{"lorenzlab", "--out", dir.string(), "--seed", "2024",
                                          "--jobs", rep == 0 ? "1" : "2"};
            for (const auto& b : budget) {
                args.push_back("--set");
                args.push_back(b);
            }
            args.push_back(sub);
            std::vector<char*> argv;
            for (auto& a : args) argv.push_back(a.data());
            std::ostringstream out, err;
            if (cli::run(static_cast<int>(argv.size()), argv.data(), out, err) != 0) {
                bad += " " + sub + "(exit)";
                break;
            }
            if (rep == 0) {
                first = snapshot(dir);
            } else if (snapshot(dir) == first && !first.empty()) {
                ++same;
            } else {
                bad += " " + sub;
            }
        }
    }
    fs::remove_all(dir);
    return {same == static_cast<int>(subs.size()),
            std::to_string(same) + "/" + std::to_string(subs.size()) +
                " subcommands byte-identical across reruns" + (bad.empty() ? "" : "; differing:" + bad)};
}

struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> all{
        {1, "linear-region exit vs closed form", 10, linear_region},
        {2, "RK4 order under step halving", 5, rk4_order},
        {3, "Lyapunov sum rule (classical Lorenz)", 120, lyapunov_sum},
        {4, "tent-map Ulam density", 30, tent_ulam},
        {5, "skew-product commutation", 5, commutation},
        {6, "quotient map properties and Schwarzian", 5, map_properties},
        {7, "locally eventually onto", 30, eventually_onto},
        {8, "entropy formula residual", 600, entropy_formula},
        {9, "unique physical measure clustering", 900, physical_measure},
        {10, "statistical stability sweep", 600, stability_sweep},
        {11, "expansiveness scan", 900, expansiveness},
        {12, "byte-identical reruns", 600, reproducibility},
    };
    int failures = 0;
    for (const auto& c : all) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs <= c.limit_s;
        const bool pass = o.pass && in_time;
        failures += !pass;
        std::printf("[%s] %2d %s: %s (%.2f s, limit %.0f s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.c_str(), secs, c.limit_s);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(all.size()) - failures, all.size());
    return failures == 0 ? 0 : 1;
}
