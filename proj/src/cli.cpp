#include "lorenzlab/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "lorenzlab/ergodic_stats.hpp"
#include "lorenzlab/errors.hpp"
#include "lorenzlab/expansiveness_probe.hpp"
#include "lorenzlab/lyapunov_entropy.hpp"
#include "lorenzlab/poincare.hpp"
#include "lorenzlab/quotient_maps.hpp"
#include "lorenzlab/stability_lab.hpp"
#include "lorenzlab/transfer_operator.hpp"

namespace lorenzlab::cli {

namespace fs = std::filesystem;

Json default_config() {
    Json c;
    c["seed"] = 0;
    c["output_dir"] = "out";
    c["model"] = {
        {"variant", "geometric"},
        {"mode", "contracting"},
        {"lambda1", nullptr},
        {"lambda2", nullptr},
        {"lambda3", nullptr},
        {"rho", nullptr},
        {"rho_scale", 1.0},
        {"c_offset", 0.1},
        {"tau_out", 1.0},
        {"sigma", 10.0},
        {"rayleigh", 28.0},
        {"beta", 8.0 / 3.0},
        {"matrix", Json::array({Json::array({1.0, 0.0, 0.0}), Json::array({0.0, -6.0, 0.0}),
                                Json::array({0.0, 0.0, -2.0})})},
        {"section_level", nullptr},
    };
    c["integrator"] = {
        {"method", "rk45"},      {"h", 1e-2},           {"abs_tol", 1e-10},
        {"rel_tol", 1e-10},      {"max_steps", 50'000'000}, {"event_time_tol", 1e-10},
        {"blowup_norm", 1e4},    {"singular_speed", 1e-9},
    };
    Json e;
    e["simulate"] = {{"x0", nullptr}, {"T", 50.0}, {"dt", 0.01}};
    e["poincare"] = {{"method", nullptr}, {"x0", nullptr}, {"u0", 0.1234567}, {"v0", 0.1},
                     {"n_returns", 1000}};
    e["mapcheck"] = {{"horizon", 10000}, {"tol", 1e-9}};
    e["orbit1d"] = {{"x0", 0.1234567}, {"n", 1000}, {"lower_bound", 1e-6}};
    e["ulam"] = {{"bins", 1024},   {"samples_per_bin", 100}, {"sampling", "stratified"},
                 {"tol", 1e-12},   {"max_iters", 200000}};
    e["measure"] = {{"x0", nullptr},
                    {"T", 1e4},
                    {"burn_in_fraction", 0.05},
                    {"sample_dt", 0.01},
                    {"grid", {{"n", Json::array({64, 64, 64})}, {"lo", nullptr}, {"hi", nullptr}}},
                    {"bumps", 23}};
    e["lyapunov"] = {{"x0", nullptr}, {"T", 1e4}, {"renorm_dt", nullptr}, {"burn_in", 100.0}};
    e["entropy-check"] = {{"bins", 1024}, {"samples_per_bin", 100}, {"T", 2e5},
                          {"renorm_dt", 1.0}, {"burn_in", 1000.0}, {"returns", 200000},
                          {"tolerance", 0.15}, {"u0", 0.1234567}, {"v0", 0.1}};
    e["expansiveness-probe"] = {
        {"delta", 0.02},       {"epsilon", 0.5},        {"n_pairs", 100},
        {"horizon", 50.0},     {"sample_dt", 0.05},     {"shift_window", 10.0},
        {"knot_budget", 64},   {"delta0", 0.05},        {"containment_tol", 1e-6},
        {"tail", {{"enabled", true}, {"n", 20}, {"delta_prime", 0.01}, {"seeds", 10},
                  {"candidates", 200}}},
    };
    e["stability-sweep"] = {
        {"family", "quotient"},
        {"parameter", "rho"},
        {"offsets", Json::array({0.0, 0.1, -0.1, 0.01, -0.01, 0.001, -0.001})},
        {"relative", true},
        {"rho_scale", 0.8},
        {"bins", 1024},
        {"samples_per_bin", 100},
        {"T", 1e5},
        {"seeds", 4},
        {"sample_dt", 0.01},
        {"burn_in_fraction", 0.05},
        {"lyapunov_T", 2e4},
        {"renorm_dt", 0.1},
        {"returns", 100000},
    };
    c["experiment"] = e;
    return c;
}

namespace {

std::string type_name(const Json& j) {
    if (j.is_null()) return "null";
    if (j.is_boolean()) return "boolean";
    if (j.is_number()) return "number";
    if (j.is_string()) return "string";
    if (j.is_array()) return "array";
    return "object";
}

void check_type(const Json& def, const Json& val, const std::string& key) {
    if (def.is_null()) {
        // Nullable keys: points and grid corners are arrays, method is a
        // string, the rest are numbers.
        if (val.is_null()) {
            return;
        }
        const std::string leaf = key.substr(key.rfind('.') + 1);
        const std::string want = leaf == "x0" || leaf == "lo" || leaf == "hi" ? "array"
                                 : leaf == "method"                            ? "string"
                                                                               : "number";
        if (type_name(val) != want) {
            throw ConfigError("config key '" + key + "' expects null or " + want + ", got " +
                              type_name(val));
        }
        return;
    }
    if (val.is_null() || type_name(def) != type_name(val)) {
        throw ConfigError("config key '" + key + "' expects " + type_name(def) + ", got " +
                          type_name(val));
    }
}

void merge(Json& target, const Json& def, const Json& user, const std::string& prefix) {
    if (!user.is_object()) {
        throw ConfigError("config section '" + (prefix.empty() ? "<root>" : prefix) +
                          "' must be an object");
    }
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!def.contains(it.key())) {
            throw ConfigError("unknown config key '" + key + "'");
        }
        const Json& d = def.at(it.key());
        if (d.is_object()) {
            merge(target[it.key()], d, it.value(), key);
        } else {
            check_type(d, it.value(), key);
            target[it.key()] = it.value();
        }
    }
}

double num(const Json& section, const char* key) { return section.at(key).get<double>(); }

long integer(const Json& section, const char* key) {
    const double v = section.at(key).get<double>();
    if (v != std::floor(v) || std::abs(v) > 9e15) {
        throw ConfigError(std::string("config key '") + key + "' must be an integer");
    }
    return static_cast<long>(v);
}

State3 vec3(const Json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) {
        throw ConfigError(std::string(what) + " must be an array of 3 numbers");
    }
    State3 p;
    for (int i = 0; i < 3; ++i) {
        if (!j[static_cast<std::size_t>(i)].is_number()) {
            throw ConfigError(std::string(what) + " must be an array of 3 numbers");
        }
        p[i] = j[static_cast<std::size_t>(i)].get<double>();
    }
    return p;
}

State3 default_start(const FlowModel& model) {
    if (model.is_geometric()) {
        return State3(0.1234567, 0.1, 1.0);
    }
    if (std::holds_alternative<ClassicalLorenzParams>(model.variant)) {
        return State3(1.0, 1.0, 20.0);
    }
    return State3(0.5, 0.1, 0.1);
}

State3 start_from(const Json& x0, const FlowModel& model) {
    return x0.is_null() ? default_start(model) : vec3(x0, "x0");
}

Json to_json(const State3& p) { return Json::array({p[0], p[1], p[2]}); }

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string fmt(const std::optional<double>& x) { return x ? fmt(*x) : std::string(); }

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
    }
    return q + "\"";
}

struct Context {
    Json config;
    Json meta;
    FlowModel model;
    StepConfig cfg;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    fs::path out_dir;
    std::ostream* out = nullptr;
    std::vector<std::string> written;

    const Json& exp(const std::string& name) const { return config.at("experiment").at(name); }

    std::ofstream open(const std::string& name) {
        fs::create_directories(out_dir);
        const fs::path p = out_dir / name;
        std::ofstream f(p, std::ios::binary);
        if (!f) {
            throw ConfigError("cannot write output file " + p.string());
        }
        written.push_back(p.string());
        return f;
    }

    // CSV with the metadata line first.
    std::ofstream csv(const std::string& name, const Json& extra = Json::object()) {
        std::ofstream f = open(name);
        Json m = meta;
        for (auto it = extra.begin(); it != extra.end(); ++it) {
            m[it.key()] = it.value();
        }
        f << "# " << m.dump() << "\n";
        return f;
    }

    void json_file(const std::string& name, Json body) {
        body["meta"] = meta;
        std::ofstream f = open(name);
        f << body.dump(2) << "\n";
    }
};

void require_geometric(const Context& ctx, const char* what) {
    if (!ctx.model.is_geometric()) {
        throw DomainError(std::string(what) + " needs a geometric model (contracting or expanding)");
    }
}

PiecewiseMap quotient_map_of(const FlowModel& model) {
    const GeomLorenzParams& gp = model.geom();
    if (gp.mode == GeomMode::contracting) {
        return ContractingLorenzMap::from_params(gp).as_piecewise();
    }
    return expanding_quotient_map(gp);
}

void require_valid(const FlowModel& model) {
    const DiagnosticsReport rep = validate_params(model);
    if (!rep.ok()) {
        std::string msg = "model parameters violate constraints:";
        for (const auto& c : rep.checks) {
            if (!c.passed) {
                msg += " [" + c.name + ": " + c.detail + "]";
            }
        }
        throw DomainError(msg);
    }
}

// ---------------------------------------------------------------- commands

void cmd_simulate(Context& ctx) {
    const Json& e = ctx.exp("simulate");
    const double T = num(e, "T");
    const double dt = num(e, "dt");
    if (!(dt > 0.0) || !(T >= 0.0)) {
        throw ConfigError("simulate needs T >= 0 and dt > 0");
    }
    const long n = static_cast<long>(std::floor(T / dt + 1e-9));
    TrajectorySampler traj(ctx.model, start_from(e.at("x0"), ctx.model), ctx.cfg);
    auto f = ctx.csv("trajectory.csv");
    f << "t,x,y,z\n";
    for (long k = 0; k <= n; ++k) {
        if (k > 0) {
            traj.advance(dt);
        }
        const State3& p = traj.position();
        f << fmt(k * dt) << ',' << fmt(p[0]) << ',' << fmt(p[1]) << ',' << fmt(p[2]) << '\n';
    }
    *ctx.out << "simulate: " << n + 1 << " samples\n";
}

void cmd_poincare(Context& ctx) {
    const Json& e = ctx.exp("poincare");
    const long n = integer(e, "n_returns");
    if (n < 1) {
        throw ConfigError("poincare.n_returns must be >= 1");
    }
    std::string method;
    if (e.at("method").is_null()) {
        method = ctx.model.is_geometric() && ctx.model.geom().mode == GeomMode::contracting
                     ? "analytic"
                     : "numeric";
    } else {
        method = e.at("method").get<std::string>();
    }
    if (method != "analytic" && method != "numeric") {
        throw ConfigError("experiment.poincare.method must be 'analytic' or 'numeric'");
    }
    SectionPoint sp;
    if (ctx.model.is_geometric()) {
        sp = SectionPoint::on_sigma(num(e, "u0"), num(e, "v0"));
    } else {
        const SectionHit hit =
            advance_to_section(ctx.model, start_from(e.at("x0"), ctx.model), ctx.cfg);
        sp = SectionPoint::raw(hit.point[0], hit.point[1]);
    }
    if (method == "analytic" &&
        !(ctx.model.is_geometric() && ctx.model.geom().mode == GeomMode::contracting)) {
        throw DomainError("analytic returns exist only for the contracting model");
    }
    std::vector<ReturnSample> samples;
    samples.reserve(static_cast<std::size_t>(n));
    for (long k = 0; k < n; ++k) {
        ReturnSample r = method == "analytic" ? analytic_return_contracting(ctx.model.geom(), sp)
                                              : numeric_return(ctx.model, sp, ctx.cfg);
        sp = r.to;
        samples.push_back(r);
    }
    auto f = ctx.csv("returns.csv", {{"method", method}});
    f << "k,u_from,v_from,u_to,v_to,tau,side\n";
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const auto& r = samples[k];
        f << k << ',' << fmt(r.from.u) << ',' << fmt(r.from.v) << ',' << fmt(r.to.u) << ','
          << fmt(r.to.v) << ',' << fmt(r.tau) << ',' << to_string(r.to.side) << '\n';
    }
    const ReturnTimeStats st = return_time_stats(samples);
    ctx.json_file("poincare.json", {{"method", method},
                                    {"returns", st.count},
                                    {"mean_return_time", st.mean},
                                    {"min_return_time", st.min},
                                    {"max_return_time", st.max}});
    *ctx.out << "poincare: " << st.count << " returns, mean time " << fmt(st.mean) << "\n";
}

void cmd_mapcheck(Context& ctx) {
    require_geometric(ctx, "mapcheck");
    const Json& e = ctx.exp("mapcheck");
    const PiecewiseMap map = quotient_map_of(ctx.model);
    const MapDiagnostics d = check_properties(map, integer(e, "horizon"), num(e, "tol"));
    Json items = Json::array();
    bool all = true;
    for (std::size_t i = 0; i < d.items.size(); ++i) {
        items.push_back({{"item", i + 1},
                         {"verdict", to_string(d.items[i].verdict)},
                         {"pass", d.items[i].verdict == Verdict::pass},
                         {"evidence", d.items[i].evidence}});
        all = all && d.items[i].verdict == Verdict::pass;
    }
    Json body = {{"map", map.name()},
                 {"items", items},
                 {"all_pass", all},
                 {"c_minus", d.c_minus},
                 {"c_plus", d.c_plus},
                 {"min_abs_derivative", d.min_abs_derivative}};
    ctx.json_file("mapcheck.json", body);
    body["meta"] = ctx.meta;
    *ctx.out << body.dump(2) << "\n";
}

void cmd_orbit1d(Context& ctx) {
    require_geometric(ctx, "orbit1d");
    const Json& e = ctx.exp("orbit1d");
    const PiecewiseMap map = quotient_map_of(ctx.model);
    const OrbitResult r = orbit(map, num(e, "x0"), integer(e, "n"), num(e, "lower_bound"));
    std::vector<bool> near(r.values.size(), false);
    for (std::size_t i : r.near_critical) {
        near[i] = true;
    }
    auto f = ctx.csv("orbit.csv", {{"hit_critical", r.hit_critical}});
    f << "k,x,near_critical\n";
    for (std::size_t k = 0; k < r.values.size(); ++k) {
        f << k << ',' << fmt(r.values[k]) << ',' << (near[k] ? 1 : 0) << '\n';
    }
    *ctx.out << "orbit1d: " << r.values.size() << " iterates, " << r.near_critical.size()
             << " near the critical point" << (r.hit_critical ? ", hit it exactly" : "") << "\n";
}

UlamSampling sampling_of(const Json& e) {
    const std::string s = e.at("sampling").get<std::string>();
    if (s == "stratified") return UlamSampling::stratified;
    if (s == "monte_carlo") return UlamSampling::monte_carlo;
    throw ConfigError("experiment.ulam.sampling must be 'stratified' or 'monte_carlo'");
}

void cmd_ulam(Context& ctx) {
    require_geometric(ctx, "ulam");
    const Json& e = ctx.exp("ulam");
    const PiecewiseMap map = quotient_map_of(ctx.model);
    UlamPartition part;
    part.n_bins = static_cast<int>(integer(e, "bins"));
    UlamOptions opt;
    opt.samples_per_bin = static_cast<int>(integer(e, "samples_per_bin"));
    opt.sampling = sampling_of(e);
    opt.seed = ctx.seed;
    opt.jobs = ctx.jobs;
    SolveInfo info;
    const InvariantDensity d = stationary_density(build_ulam(map, part, opt), num(e, "tol"),
                                                  static_cast<int>(integer(e, "max_iters")), &info);
    auto f = ctx.csv("density.csv");
    f << "bin,center,lo,hi,weight,density\n";
    for (int i = 0; i < part.n_bins; ++i) {
        const double w = d.weights[static_cast<std::size_t>(i)];
        f << i << ',' << fmt(part.center(i)) << ',' << fmt(part.edge(i)) << ',' << fmt(part.edge(i + 1)) << ',' << fmt(w) << ','
          << fmt(w / part.width()) << '\n';
    }
    Json body = {{"bins", part.n_bins},
                 {"iterations", info.iterations},
                 {"residual", info.residual},
                 {"total_mass", d.total_mass()}};
    try {
        body["quotient_entropy"] = quotient_entropy(map, d);
    } catch (const Error& err) {
        body["quotient_entropy"] = nullptr;
        body["quotient_entropy_error"] = err.what();
    }
    ctx.json_file("ulam.json", body);
    *ctx.out << "ulam: " << part.n_bins << " bins, " << info.iterations << " iterations\n";
}

HistogramGrid grid_from(const Json& g, const FlowModel& model) {
    HistogramGrid grid{default_trapping_box(model)};
    const Json& n = g.at("n");
    if (!n.is_array() || n.size() != 3) {
        throw ConfigError("grid.n must be an array of 3 integers");
    }
    grid.nx = n[0].get<int>();
    grid.ny = n[1].get<int>();
    grid.nz = n[2].get<int>();
    if (!g.at("lo").is_null()) grid.box.lo = vec3(g.at("lo"), "grid.lo");
    if (!g.at("hi").is_null()) grid.box.hi = vec3(g.at("hi"), "grid.hi");
    return grid;
}

void cmd_measure(Context& ctx) {
    const Json& e = ctx.exp("measure");
    const double T = num(e, "T");
    const double burn = num(e, "burn_in_fraction") * T;
    const HistogramGrid grid = grid_from(e.at("grid"), ctx.model);
    SamplingOptions so;
    so.sample_dt = num(e, "sample_dt");
    so.cfg = ctx.cfg;
    const ObservableDictionary dict =
        ObservableDictionary::standard(grid.box, static_cast<int>(integer(e, "bumps")));
    const MeasureRun run =
        empirical_measure(ctx.model, start_from(e.at("x0"), ctx.model), T, burn, grid, so, &dict);
    const Json gspec = {{"n", Json::array({grid.nx, grid.ny, grid.nz})},
                        {"lo", to_json(grid.box.lo)},
                        {"hi", to_json(grid.box.hi)}};
    auto f = ctx.csv("measure.csv", {{"grid", gspec}, {"T", T}, {"burn_in", burn}});
    f << "i,j,k,weight\n";
    for (const auto& [idx, w] : run.measure.nonzero()) {
        const auto t = grid.triple(idx);
        f << t[0] << ',' << t[1] << ',' << t[2] << ',' << fmt(w) << '\n';
    }
    Json integrals = Json::object();
    const std::vector<double> vals = integrate(dict, run.measure);
    for (std::size_t i = 0; i < dict.size(); ++i) {
        integrals[dict.functions[i].id] = vals[i];
    }
    Json trace = Json::array();
    for (std::size_t c = 1; c < run.checkpoints.size(); ++c) {
        trace.push_back(dual_lipschitz_distance(run.checkpoints[c], run.checkpoints[c - 1]));
    }
    ctx.json_file("measure.json", {{"grid", gspec},
                                   {"T", T},
                                   {"burn_in", burn},
                                   {"samples", run.measure.samples},
                                   {"occupied_cells", run.measure.nonzero().size()},
                                   {"integrals", integrals},
                                   {"checkpoint_changes", trace}});
    *ctx.out << "measure: " << run.measure.samples << " samples in "
             << run.measure.nonzero().size() << " cells\n";
}

Json spectrum_json(const LyapunovSpectrum& s) {
    Json trace = Json::array();
    for (std::size_t i = 0; i < s.trace.size(); ++i) {
        trace.push_back({{"t", s.trace_times[i]},
                         {"exponents", Json::array({s.trace[i][0], s.trace[i][1], s.trace[i][2]})}});
    }
    return {{"exponents", Json::array({s.exponents[0], s.exponents[1], s.exponents[2]})},
            {"sum", s.exponents[0] + s.exponents[1] + s.exponents[2]},
            {"T", s.T},
            {"renorm_dt", s.renorm_dt},
            {"burn_in", s.burn_in},
            {"trace", trace}};
}

void cmd_lyapunov(Context& ctx) {
    const Json& e = ctx.exp("lyapunov");
    const double renorm =
        e.at("renorm_dt").is_null() ? (ctx.model.is_geometric() ? 1.0 : 0.1) : num(e, "renorm_dt");
    const LyapunovSpectrum s =
        lyapunov_spectrum(ctx.model, start_from(e.at("x0"), ctx.model), num(e, "T"), renorm,
                          ctx.cfg, LyapunovOptions{num(e, "burn_in"), {}, 40});
    Json body = spectrum_json(s);
    try {
        body["cu_volume_growth"] = cu_volume_growth(s);
    } catch (const ConvergenceError& err) {
        body["cu_volume_growth"] = nullptr;
        body["cu_volume_growth_error"] = err.what();
    }
    ctx.json_file("lyapunov.json", body);
    *ctx.out << "lyapunov: " << fmt(s.exponents[0]) << ' ' << fmt(s.exponents[1]) << ' '
             << fmt(s.exponents[2]) << "\n";
}

void cmd_entropy_check(Context& ctx) {
    const Json& e = ctx.exp("entropy-check");
    EntropyCheckOptions opt;
    opt.partition.n_bins = static_cast<int>(integer(e, "bins"));
    opt.ulam.samples_per_bin = static_cast<int>(integer(e, "samples_per_bin"));
    opt.ulam.seed = ctx.seed;
    opt.ulam.jobs = ctx.jobs;
    opt.T = num(e, "T");
    opt.renorm_dt = num(e, "renorm_dt");
    opt.burn_in = num(e, "burn_in");
    opt.returns = integer(e, "returns");
    opt.tolerance = num(e, "tolerance");
    opt.start = SectionPoint::on_sigma(num(e, "u0"), num(e, "v0"));
    const EntropyCheck ec = run_entropy_check(ctx.model, opt);
    const EntropyEstimate& est = ec.estimate;
    ctx.json_file("entropy.json", {{"h_quotient", est.h_quotient},
                                   {"mean_return_time", est.mean_return_time},
                                   {"h_flow", est.h_flow},
                                   {"lambda_plus", est.lambda_plus},
                                   {"residual", est.residual},
                                   {"relative_residual", est.relative_residual},
                                   {"tolerance", est.tolerance},
                                   {"within_tolerance", est.within_tolerance},
                                   {"ulam_iterations", ec.solve.iterations},
                                   {"spectrum", spectrum_json(ec.spectrum)}});
    *ctx.out << "entropy-check: h_flow " << fmt(est.h_flow) << ", lambda+ "
             << fmt(est.lambda_plus) << ", relative residual " << fmt(est.relative_residual)
             << (est.within_tolerance ? " (ok)" : " (above tolerance)") << "\n";
}

void cmd_expansiveness(Context& ctx) {
    const Json& e = ctx.exp("expansiveness-probe");
    ProbeOptions po;
    po.sample_dt = num(e, "sample_dt");
    po.shift_window = num(e, "shift_window");
    po.knot_budget = static_cast<int>(integer(e, "knot_budget"));
    po.delta0 = num(e, "delta0");
    po.containment_tol = num(e, "containment_tol");
    const double delta = num(e, "delta");
    const double eps = num(e, "epsilon");
    const double horizon = num(e, "horizon");
    const auto reps = expansiveness_scan(ctx.model, delta, eps,
                                         static_cast<std::size_t>(integer(e, "n_pairs")), horizon,
                                         ctx.seed, ctx.cfg, po, ctx.jobs);
    std::map<std::string, int> counts;
    int violations = 0;
    auto f = ctx.open("expansiveness.jsonl");
    f << Json{{"meta", ctx.meta}}.dump() << "\n";
    for (const auto& r : reps) {
        ++counts[to_string(r.verdict)];
        violations += r.violation ? 1 : 0;
        Json line = {{"pair_id", r.pair_id},
                     {"kind", to_string(r.kind)},
                     {"x", to_json(r.x)},
                     {"y", to_json(r.y)},
                     {"delta", r.delta},
                     {"epsilon", r.epsilon},
                     {"horizon", r.horizon},
                     {"horizon_limited", true},
                     {"verdict", to_string(r.verdict)},
                     {"max_distance", r.max_distance},
                     {"containment_shift", r.containment_shift ? Json(*r.containment_shift)
                                                               : Json(nullptr)},
                     {"violation", r.violation},
                     {"h_knots", r.best_h.knots()},
                     {"h_values", r.best_h.values()}};
        f << line.dump() << "\n";
    }
    Json summary = {{"pairs", reps.size()},
                    {"verdicts", counts},
                    {"violations", violations},
                    {"delta", delta},
                    {"delta0", po.delta0},
                    {"epsilon", eps},
                    {"horizon", horizon}};
    const Json& tail = e.at("tail");
    if (tail.at("enabled").get<bool>()) {
        TailEntropyOptions to;
        to.candidates = static_cast<int>(integer(tail, "candidates"));
        to.seed = ctx.seed;
        to.jobs = ctx.jobs;
        const TailEntropyResult te = tail_entropy_estimate(
            ctx.model, delta, static_cast<int>(integer(tail, "n")), num(tail, "delta_prime"),
            static_cast<int>(integer(tail, "seeds")), ctx.cfg, to);
        summary["tail_entropy"] = {{"estimate", te.estimate},
                                   {"per_seed", te.per_seed},
                                   {"ball_sizes", te.ball_sizes},
                                   {"cover_counts", te.cover_counts},
                                   {"initial_counts", te.initial_counts}};
    }
    ctx.json_file("expansiveness.json", summary);
    *ctx.out << "expansiveness-probe: " << reps.size() << " pairs, " << violations
             << " violations\n";
}

void cmd_stability_sweep(Context& ctx) {
    const Json& e = ctx.exp("stability-sweep");
    FamilySpec fam;
    const std::string family = e.at("family").get<std::string>();
    if (family == "quotient") {
        fam.kind = FamilySpec::Kind::quotient;
    } else if (family == "flow") {
        fam.kind = FamilySpec::Kind::flow;
    } else {
        throw ConfigError("experiment.stability-sweep.family must be 'quotient' or 'flow'");
    }
    fam.base = ctx.model;
    if (ctx.model.is_geometric() && !e.at("rho_scale").is_null()) {
        auto& g = std::get<GeomLorenzParams>(fam.base.variant);
        g.rho = num(e, "rho_scale") * g.rho_max();
    }
    fam.parameter = e.at("parameter").get<std::string>();
    fam.offsets.clear();
    for (const auto& a : e.at("offsets")) {
        if (!a.is_number()) {
            throw ConfigError("experiment.stability-sweep.offsets must be numbers");
        }
        fam.offsets.push_back(a.get<double>());
    }
    fam.relative = e.at("relative").get<bool>();
    fam.seed = ctx.seed;
    SweepBudget& b = fam.budget;
    b.partition.n_bins = static_cast<int>(integer(e, "bins"));
    b.ulam.samples_per_bin = static_cast<int>(integer(e, "samples_per_bin"));
    b.ulam.seed = ctx.seed;
    b.T = num(e, "T");
    b.seeds = static_cast<int>(integer(e, "seeds"));
    b.sampling.sample_dt = num(e, "sample_dt");
    b.sampling.cfg = ctx.cfg;
    b.burn_in_fraction = num(e, "burn_in_fraction");
    b.lyapunov_T = num(e, "lyapunov_T");
    b.renorm_dt = num(e, "renorm_dt");
    b.returns = integer(e, "returns");
    try {
        fam.validate();
    } catch (const ArgumentError& err) {
        throw ConfigError(err.what());
    }

    SweepResult res;
    if (fam.kind == FamilySpec::Kind::quotient) {
        res = quotient_stability_sweep(fam, ctx.jobs);
    } else {
        const Box box = default_trapping_box(fam.base);
        res = flow_stability_sweep(fam, ObservableDictionary::standard(box), ctx.jobs);
    }
    auto f = ctx.csv("sweep.csv");
    f << "a,parameter_value,distance,h_quotient,h_flow,lambda_plus,entropy_residual,convergence,"
         "diagnostics\n";
    for (const auto& r : res.rows) {
        f << fmt(r.a) << ',' << fmt(r.parameter_value) << ',' << fmt(r.distance) << ','
          << fmt(r.h_quotient) << ',' << fmt(r.h_flow) << ',' << fmt(r.lambda_plus) << ','
          << fmt(r.entropy_residual) << ',' << fmt(r.convergence) << ','
          << csv_quote(r.diagnostics) << '\n';
    }
    auto plot = ctx.csv("sweep_plot.csv");
    plot << "abs_a,distance\n";
    for (const auto& r : res.rows) {
        if (r.a != 0.0 && r.distance) {
            plot << fmt(std::abs(r.a)) << ',' << fmt(*r.distance) << '\n';
        }
    }
    Json summary = {{"family", family}, {"parameter", fam.parameter}, {"failures", res.failures()}};
    try {
        summary["spearman"] = distance_trend(res);
    } catch (const Error& err) {
        summary["spearman"] = nullptr;
        summary["spearman_error"] = err.what();
    }
    try {
        const ModulusFit fit = modulus_report(res);
        summary["fit"] = {{"C", fit.C}, {"kappa", fit.kappa}, {"r2", fit.r2},
                          {"rows", fit.rows_used}};
    } catch (const Error& err) {
        summary["fit"] = nullptr;
        summary["fit_error"] = err.what();
    }
    ctx.json_file("sweep_summary.json", summary);
    *ctx.out << "stability-sweep: " << res.rows.size() << " rows, " << res.failures().size()
             << " failures\n";
}

using Command = void (*)(Context&);

const std::map<std::string, Command>& command_table() {
    static const std::map<std::string, Command> table = {
        {"simulate", cmd_simulate},
        {"poincare", cmd_poincare},
        {"mapcheck", cmd_mapcheck},
        {"orbit1d", cmd_orbit1d},
        {"ulam", cmd_ulam},
        {"measure", cmd_measure},
        {"lyapunov", cmd_lyapunov},
        {"entropy-check", cmd_entropy_check},
        {"expansiveness-probe", cmd_expansiveness},
        {"stability-sweep", cmd_stability_sweep},
    };
    return table;
}

}  // namespace

void apply_override(Json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' is not of the form key=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    Json value = Json::parse(raw, nullptr, false);
    if (value.is_discarded()) {
        value = raw;
    }
    const Json defaults = default_config();
    const Json* def = &defaults;
    Json* target = &config;
    std::size_t pos = 0;
    while (true) {
        const auto dot = key.find('.', pos);
        const std::string part = key.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (!def->is_object() || !def->contains(part)) {
            throw ConfigError("unknown config key '" + key + "'");
        }
        def = &def->at(part);
        target = &(*target)[part];
        if (dot == std::string::npos) {
            break;
        }
        pos = dot + 1;
    }
    if (def->is_object()) {
        merge(*target, *def, value, key);
    } else {
        check_type(*def, value, key);
        *target = value;
    }
}

Json resolve_config(const std::optional<std::string>& path,
                    const std::vector<std::string>& overrides,
                    const std::optional<std::uint64_t>& seed,
                    const std::optional<std::string>& out_dir) {
    const Json defaults = default_config();
    Json config = defaults;
    if (path) {
        std::ifstream f(*path, std::ios::binary);
        if (!f) {
            throw ConfigError("cannot open config file '" + *path + "'");
        }
        Json user = Json::parse(f, nullptr, false, true);
        if (user.is_discarded()) {
            throw ConfigError("config file '" + *path + "' is not valid JSON");
        }
        merge(config, defaults, user, "");
    }
    for (const auto& o : overrides) {
        apply_override(config, o);
    }
    if (seed) {
        config["seed"] = *seed;
    }
    if (out_dir) {
        config["output_dir"] = *out_dir;
    }
    const Json& s = config.at("seed");
    if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() && s.get<long long>() < 0)) {
        throw ConfigError("config key 'seed' must be a non-negative integer");
    }
    return config;
}

FlowModel build_model(Json& m) {
    const std::string variant = m.at("variant").get<std::string>();
    const std::string mode = m.at("mode").get<std::string>();
    FlowModel model;
    if (variant == "geometric") {
        if (mode != "contracting" && mode != "expanding") {
            throw ConfigError("model.mode must be 'contracting' or 'expanding' (got '" + mode +
                              "')");
        }
        GeomLorenzParams gp = mode == "contracting" ? GeomLorenzParams::contracting_defaults()
                                                    : GeomLorenzParams::expanding_defaults();
        if (!m.at("lambda1").is_null()) gp.lambda1 = num(m, "lambda1");
        if (!m.at("lambda2").is_null()) gp.lambda2 = num(m, "lambda2");
        if (!m.at("lambda3").is_null()) gp.lambda3 = num(m, "lambda3");
        gp.rho = m.at("rho").is_null() ? num(m, "rho_scale") * gp.rho_max() : num(m, "rho");
        gp.c_offset = num(m, "c_offset");
        gp.tau_out = num(m, "tau_out");
        m["lambda1"] = gp.lambda1;
        m["lambda2"] = gp.lambda2;
        m["lambda3"] = gp.lambda3;
        m["rho"] = gp.rho;
        model = FlowModel::geometric(gp);
    } else if (variant == "classical") {
        model = FlowModel::classical({num(m, "sigma"), num(m, "rayleigh"), num(m, "beta")});
    } else if (variant == "linear") {
        const Json& a = m.at("matrix");
        if (!a.is_array() || a.size() != 3) {
            throw ConfigError("model.matrix must be a 3x3 array");
        }
        Matrix3 mat;
        for (int i = 0; i < 3; ++i) {
            mat.row(i) = vec3(a[static_cast<std::size_t>(i)], "model.matrix row").transpose();
        }
        model = FlowModel::linear(mat);
    } else if (variant == "two_sink") {
        model = FlowModel::two_sink();
    } else {
        throw ConfigError("model.variant must be one of geometric, classical, linear, two_sink "
                          "(got '" + variant + "')");
    }
    if (!m.at("section_level").is_null()) {
        model.section_level = num(m, "section_level");
    }
    return model;
}

StepConfig build_step_config(const Json& s) {
    StepConfig c;
    const std::string method = s.at("method").get<std::string>();
    if (method == "rk45") {
        c.method = StepMethod::rk45_adaptive;
    } else if (method == "rk4") {
        c.method = StepMethod::rk4_fixed;
    } else {
        throw ConfigError("integrator.method must be 'rk45' or 'rk4'");
    }
    c.h = num(s, "h");
    c.abs_tol = num(s, "abs_tol");
    c.rel_tol = num(s, "rel_tol");
    c.max_steps = integer(s, "max_steps");
    c.event_time_tol = num(s, "event_time_tol");
    c.blowup_norm = num(s, "blowup_norm");
    c.singular_speed = num(s, "singular_speed");
    try {
        c.validate();
    } catch (const ArgumentError& e) {
        throw ConfigError(std::string("integrator: ") + e.what());
    }
    return c;
}

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& [name, cmd] : command_table()) {
            v.push_back(name);
        }
        return v;
    }();
    return names;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Contracting Lorenz flow laboratory"};
    app.set_version_flag("--version", kVersion);
    std::string config_path;
    std::vector<std::string> sets;
    unsigned jobs = 1;
    std::string out_dir;
    std::uint64_t seed = 0;
    auto* opt_config = app.add_option("--config", config_path, "JSON config file");
    app.add_option("--set", sets, "dotted.key=value override (repeatable)");
    app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    auto* opt_out = app.add_option("--out", out_dir, "output directory");
    auto* opt_seed = app.add_option("--seed", seed, "64-bit seed");
    app.require_subcommand(1);
    std::map<std::string, CLI::App*> subs;
    const std::map<std::string, std::string> about{
        {"simulate", "sample a trajectory"},
        {"poincare", "first-return samples on the section"},
        {"mapcheck", "check the quotient map properties"},
        {"orbit1d", "iterate the quotient map"},
        {"ulam", "invariant density of the quotient map"},
        {"measure", "empirical measure of a trajectory"},
        {"lyapunov", "Lyapunov spectrum"},
        {"entropy-check", "quotient entropy vs unstable exponent"},
        {"expansiveness-probe", "separation scan of nearby orbit pairs"},
        {"stability-sweep", "parameter sweep of the invariant measure"},
    };
    for (const auto& name : subcommands()) {
        subs[name] = app.add_subcommand(name, about.at(name));
        subs[name]->fallthrough();
    }
    // Shorthands for experiment.ulam keys.
    std::optional<long> ulam_bins, ulam_samples;
    std::optional<double> ulam_tol;
    subs["ulam"]->add_option("--bins", ulam_bins, "number of bins");
    subs["ulam"]->add_option("--samples", ulam_samples, "samples per bin");
    subs["ulam"]->add_option("--tol", ulam_tol, "power-iteration tolerance");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }
    std::string sub;
    for (const auto& [name, ptr] : subs) {
        if (ptr->parsed()) {
            sub = name;
        }
    }
    if (ulam_bins) sets.push_back("experiment.ulam.bins=" + std::to_string(*ulam_bins));
    if (ulam_samples) {
        sets.push_back("experiment.ulam.samples_per_bin=" + std::to_string(*ulam_samples));
    }
    if (ulam_tol) sets.push_back("experiment.ulam.tol=" + fmt(*ulam_tol));
    try {
        Context ctx;
        ctx.config = resolve_config(
            opt_config->count() ? std::optional<std::string>(config_path) : std::nullopt, sets,
            opt_seed->count() ? std::optional<std::uint64_t>(seed) : std::nullopt,
            opt_out->count() ? std::optional<std::string>(out_dir) : std::nullopt);
        ctx.model = build_model(ctx.config["model"]);
        ctx.cfg = build_step_config(ctx.config.at("integrator"));
        ctx.seed = ctx.config.at("seed").get<std::uint64_t>();
        ctx.jobs = jobs;
        ctx.out_dir = ctx.config.at("output_dir").get<std::string>();
        ctx.out = &out;
        ctx.meta = {{"tool", kToolName},
                    {"version", kVersion},
                    {"subcommand", sub},
                    {"config", ctx.config},
                    {"seed", ctx.seed}};
        if (ctx.model.is_geometric() && sub != "mapcheck") {
            require_valid(ctx.model);
        }
        command_table().at(sub)(ctx);
        for (const auto& p : ctx.written) {
            out << "wrote " << p << "\n";
        }
        return 0;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const Json::exception& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace lorenzlab::cli
