#include "lorenzlab/stability_lab.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lorenzlab/errors.hpp"
#include "lorenzlab/lyapunov_entropy.hpp"
#include "lorenzlab/parallel.hpp"
#include "lorenzlab/quotient_maps.hpp"
#include "lorenzlab/rng.hpp"

namespace lorenzlab {

namespace {

double* param_slot(FlowModel& m, const std::string& name) {
    if (auto* g = std::get_if<GeomLorenzParams>(&m.variant)) {
        if (name == "lambda1") return &g->lambda1;
        if (name == "lambda2") return &g->lambda2;
        if (name == "lambda3") return &g->lambda3;
        if (name == "rho") return &g->rho;
        if (name == "c_offset") return &g->c_offset;
        if (name == "tau_out") return &g->tau_out;
        return nullptr;
    }
    if (auto* c = std::get_if<ClassicalLorenzParams>(&m.variant)) {
        if (name == "sigma") return &c->sigma;
        if (name == "rayleigh") return &c->rayleigh;
        if (name == "beta") return &c->beta;
    }
    return nullptr;
}

void sort_rows(std::vector<SweepRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& l, const SweepRow& r) {
        if (std::abs(l.a) != std::abs(r.a)) {
            return std::abs(l.a) < std::abs(r.a);
        }
        return l.a < r.a;
    });
}

std::string failed_checks(const DiagnosticsReport& rep) {
    std::string s = "invalid parameters:";
    for (const auto& name : rep.failures()) {
        s += " " + name;
    }
    return s;
}

// Mean of -ln|x| over the density, with one-sided midpoints in the bin at 0.
double mean_log_depth(const InvariantDensity& d) {
    double acc = 0.0;
    for (int i = 0; i < d.partition.n_bins; ++i) {
        const double a = d.partition.edge(i);
        const double b = d.partition.edge(i + 1);
        double v;
        if (a < 0.0 && b > 0.0) {
            v = (-a * -std::log(-0.5 * a) + b * -std::log(0.5 * b)) / (b - a);
        } else {
            v = -std::log(std::abs(0.5 * (a + b)));
        }
        acc += d.weights[static_cast<std::size_t>(i)] * v;
    }
    return acc;
}

}  // namespace

void FamilySpec::validate() const {
    if (offsets.empty() || std::find(offsets.begin(), offsets.end(), 0.0) == offsets.end()) {
        throw ArgumentError("sweep grid must contain the offset 0");
    }
    for (double a : offsets) {
        if (!std::isfinite(a)) {
            throw ArgumentError("sweep offsets must be finite");
        }
    }
    if (kind == Kind::quotient) {
        if (!base.is_geometric()) {
            throw ArgumentError("quotient sweeps need a geometric base model");
        }
        if (parameter != "rho" && parameter != "s") {
            throw ArgumentError("quotient sweeps vary rho or s, not '" + parameter + "'");
        }
        return;
    }
    FlowModel probe = base;
    if (!param_slot(probe, parameter)) {
        throw ArgumentError("unknown sweep parameter '" + parameter + "' for model " +
                            base.kind());
    }
}

double FamilySpec::value_at(double a) const {
    double base_value;
    if (kind == Kind::quotient && parameter == "s") {
        base_value = base.geom().s();
    } else {
        FlowModel m = base;
        const double* slot = param_slot(m, parameter);
        if (!slot) {
            throw ArgumentError("unknown sweep parameter '" + parameter + "'");
        }
        base_value = *slot;
    }
    return relative ? base_value * (1.0 + a) : base_value + a;
}

FlowModel FamilySpec::model_at(double a) const {
    FlowModel m = base;
    const double v = value_at(a);
    if (kind == Kind::quotient && parameter == "s") {
        auto& g = std::get<GeomLorenzParams>(m.variant);
        g.lambda3 = -v * g.lambda1;
        return m;
    }
    *param_slot(m, parameter) = v;
    return m;
}

std::vector<std::string> SweepResult::failures() const {
    std::vector<std::string> out;
    for (const auto& r : rows) {
        if (!r.diagnostics.empty()) {
            out.push_back("a=" + std::to_string(r.a) + ": " + r.diagnostics);
        }
    }
    return out;
}

SweepResult quotient_stability_sweep(const FamilySpec& family, unsigned jobs) {
    family.validate();
    const std::size_t n = family.offsets.size();
    const SweepBudget& bud = family.budget;

    struct Point {
        std::optional<InvariantDensity> density;
        std::optional<InvariantDensity> half;
        SweepRow row;
    };
    std::vector<Point> pts(n);
    parallel_for(n, jobs, [&](std::size_t k) {
        Point& p = pts[k];
        p.row.a = family.offsets[k];
        try {
            p.row.parameter_value = family.value_at(p.row.a);
            const FlowModel model = family.model_at(p.row.a);
            const DiagnosticsReport rep = validate_params(model);
            if (!rep.ok()) {
                p.row.diagnostics = failed_checks(rep);
                return;
            }
            const GeomLorenzParams& gp = model.geom();
            const PiecewiseMap map = ContractingLorenzMap::from_params(gp).as_piecewise();
            p.density = stationary_density(build_ulam(map, bud.partition, bud.ulam), 1e-12,
                                           200'000);
            UlamOptions half = bud.ulam;
            half.samples_per_bin = std::max(10, bud.ulam.samples_per_bin / 2);
            p.half = stationary_density(build_ulam(map, bud.partition, half), 1e-12, 200'000);
            p.row.convergence = density_distance_w1(*p.density, *p.half);

            const double hq = quotient_entropy(map, *p.density);
            const double mean_tau = mean_log_depth(*p.density) / gp.lambda1 + gp.tau_out;
            p.row.h_quotient = hq;
            p.row.h_flow = hq / mean_tau;
            const LyapunovSpectrum spec =
                lyapunov_spectrum(model, State3(0.1234567, 0.1, 1.0), bud.lyapunov_T, 1.0, {},
                                  LyapunovOptions{0.05 * bud.lyapunov_T, {}, 40});
            p.row.lambda_plus = spec.exponents[0] + spec.exponents[1];
            p.row.entropy_residual = std::abs(*p.row.h_flow - *p.row.lambda_plus);
        } catch (const Error& e) {
            p.row.diagnostics = e.what();
        }
    });

    const auto base_it = std::find(family.offsets.begin(), family.offsets.end(), 0.0);
    const Point& base = pts[static_cast<std::size_t>(base_it - family.offsets.begin())];
    SweepResult out;
    out.family = family;
    for (auto& p : pts) {
        if (p.density && base.density) {
            p.row.distance = density_distance_w1(*p.density, *base.density);
        } else if (p.row.diagnostics.empty()) {
            p.row.diagnostics = "base point failed";
        }
        out.rows.push_back(p.row);
    }
    sort_rows(out.rows);
    return out;
}

SweepResult flow_stability_sweep(const FamilySpec& family, const ObservableDictionary& dict,
                                 unsigned jobs) {
    family.validate();
    if (family.kind != FamilySpec::Kind::flow) {
        throw ArgumentError("flow_stability_sweep needs a flow family");
    }
    const SweepBudget& bud = family.budget;
    if (bud.seeds < 1) {
        throw ArgumentError("sweep needs at least one seed");
    }
    const std::size_t n = family.offsets.size();
    const std::size_t s = static_cast<std::size_t>(bud.seeds);
    const HistogramGrid grid =
        bud.grid ? *bud.grid : HistogramGrid{default_trapping_box(family.base)};

    // Fixed seed set shared by every grid point.
    std::vector<State3> seeds(s);
    {
        const CounterRng root(family.seed, 0x5eed);
        for (std::size_t i = 0; i < s; ++i) {
            CounterRng rng = root.split(i);
            if (family.base.is_geometric()) {
                double u = 0.0;
                while (u == 0.0) {
                    u = rng.uniform(-0.5, 0.5);
                }
                seeds[i] = State3(u, rng.uniform(-0.5, 0.5), 1.0);
            } else {
                seeds[i] = State3(1.0, 1.0, 20.0) +
                           State3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
            }
        }
    }

    // Work items: (grid point, seed) measures, then one spectrum per point.
    std::vector<std::vector<std::vector<double>>> traces(n * s);
    std::vector<std::string> errors(n * s);
    std::vector<bool> valid(n, false);
    std::vector<std::string> invalid(n);
    for (std::size_t k = 0; k < n; ++k) {
        try {
            const DiagnosticsReport rep = validate_params(family.model_at(family.offsets[k]));
            valid[k] = rep.ok();
            if (!rep.ok()) {
                invalid[k] = failed_checks(rep);
            }
        } catch (const Error& e) {
            invalid[k] = e.what();
        }
    }
    parallel_for(n * s, jobs, [&](std::size_t w) {
        const std::size_t k = w / s;
        if (!valid[k]) {
            return;
        }
        try {
            const FlowModel model = family.model_at(family.offsets[k]);
            traces[w] = empirical_measure(model, seeds[w % s], bud.T, bud.burn_in_fraction * bud.T,
                                          grid, bud.sampling, &dict)
                            .checkpoints;
        } catch (const Error& e) {
            errors[w] = e.what();
        }
    });
    std::vector<SweepRow> rows(n);
    parallel_for(n, jobs, [&](std::size_t k) {
        SweepRow& row = rows[k];
        row.a = family.offsets[k];
        row.parameter_value = family.value_at(row.a);
        if (!valid[k]) {
            row.diagnostics = invalid[k];
            return;
        }
        const FlowModel model = family.model_at(row.a);
        try {
            if (model.is_geometric() && model.geom().mode == GeomMode::contracting) {
                EntropyCheckOptions opt;
                opt.ulam = UlamOptions{bud.ulam.samples_per_bin, bud.ulam.sampling,
                                       bud.ulam.seed, 1};
                opt.partition = bud.partition;
                opt.T = bud.lyapunov_T;
                opt.burn_in = 0.05 * bud.lyapunov_T;
                opt.returns = bud.returns;
                const EntropyCheck ec = run_entropy_check(model, opt);
                row.h_quotient = ec.estimate.h_quotient;
                row.h_flow = ec.estimate.h_flow;
                row.lambda_plus = ec.estimate.lambda_plus;
                row.entropy_residual = ec.estimate.residual;
            } else {
                const State3 p0 = model.is_geometric() ? State3(0.1234567, 0.1, 1.0) : seeds[0];
                const double dt = model.is_geometric() ? 1.0 : bud.renorm_dt;
                const LyapunovSpectrum spec = lyapunov_spectrum(
                    model, p0, bud.lyapunov_T, dt, bud.sampling.cfg,
                    LyapunovOptions{0.05 * bud.lyapunov_T, {}, 40});
                row.lambda_plus = cu_volume_growth(spec);
            }
        } catch (const Error& e) {
            row.diagnostics = std::string("spectrum: ") + e.what();
        }
    });

    auto pooled = [&](std::size_t k, std::size_t checkpoint_from_end) {
        std::vector<double> acc(dict.size(), 0.0);
        for (std::size_t i = 0; i < s; ++i) {
            const auto& tr = traces[k * s + i];
            const auto& v = tr[tr.size() - 1 - checkpoint_from_end];
            for (std::size_t f = 0; f < acc.size(); ++f) {
                acc[f] += v[f] / static_cast<double>(s);
            }
        }
        return acc;
    };
    auto complete = [&](std::size_t k) {
        if (!valid[k]) {
            return false;
        }
        for (std::size_t i = 0; i < s; ++i) {
            if (!errors[k * s + i].empty()) {
                return false;
            }
        }
        return true;
    };
    const std::size_t b = static_cast<std::size_t>(
        std::find(family.offsets.begin(), family.offsets.end(), 0.0) - family.offsets.begin());
    const bool base_ok = complete(b);
    const std::vector<double> base_int = base_ok ? pooled(b, 0) : std::vector<double>{};
    for (std::size_t k = 0; k < n; ++k) {
        SweepRow& row = rows[k];
        for (std::size_t i = 0; i < s; ++i) {
            if (!errors[k * s + i].empty()) {
                row.diagnostics += (row.diagnostics.empty() ? "" : "; ") + std::string("seed ") +
                                   std::to_string(i) + ": " + errors[k * s + i];
            }
        }
        if (!complete(k)) {
            continue;
        }
        row.convergence = dual_lipschitz_distance(pooled(k, 0), pooled(k, 1));
        if (base_ok) {
            row.distance = dual_lipschitz_distance(pooled(k, 0), base_int);
        } else if (row.diagnostics.empty()) {
            row.diagnostics = "base point failed";
        }
    }
    SweepResult out;
    out.family = family;
    out.rows = std::move(rows);
    sort_rows(out.rows);
    return out;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw ArgumentError("spearman needs two equal-length samples of size >= 2");
    }
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) {
                ++j;
            }
            const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        return r;
    };
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        return 0.0;
    }
    return sxy / std::sqrt(sxx * syy);
}

double distance_trend(const SweepResult& sweep) {
    std::vector<double> a, d;
    for (const auto& r : sweep.rows) {
        if (r.a != 0.0 && r.distance) {
            a.push_back(std::abs(r.a));
            d.push_back(*r.distance);
        }
    }
    return spearman(a, d);
}

ModulusFit modulus_report(const SweepResult& sweep) {
    std::vector<double> lx, ly;
    for (const auto& r : sweep.rows) {
        if (r.a != 0.0 && r.distance && *r.distance > 0.0) {
            lx.push_back(std::log(std::abs(r.a)));
            ly.push_back(std::log(*r.distance));
        }
    }
    if (lx.size() < 4) {
        throw ArgumentError("modulus fit needs at least 4 rows with positive distance");
    }
    const double n = static_cast<double>(lx.size());
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (sxx == 0.0) {
        throw ArgumentError("modulus fit needs distinct offsets");
    }
    ModulusFit fit;
    fit.kappa = sxy / sxx;
    fit.C = std::exp(my - fit.kappa * mx);
    fit.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    fit.rows_used = lx.size();
    return fit;
}

}  // namespace lorenzlab
