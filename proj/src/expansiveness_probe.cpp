#include "lorenzlab/expansiveness_probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include "lorenzlab/ergodic_stats.hpp"
#include "lorenzlab/errors.hpp"
#include "lorenzlab/parallel.hpp"
#include "lorenzlab/poincare.hpp"
#include "lorenzlab/quotient_maps.hpp"

namespace lorenzlab {

Reparam::Reparam(std::vector<double> knots, std::vector<double> values)
    : knots_(std::move(knots)), values_(std::move(values)) {
    if (knots_.size() < 2 || knots_.size() != values_.size()) {
        throw ArgumentError("reparametrization needs >= 2 knots with matching values");
    }
    for (std::size_t i = 0; i < knots_.size(); ++i) {
        if (!std::isfinite(knots_[i]) || !std::isfinite(values_[i])) {
            throw ArgumentError("reparametrization knots must be finite");
        }
        if (i > 0 && (knots_[i] <= knots_[i - 1] || values_[i] <= values_[i - 1])) {
            throw ArgumentError("reparametrization must be strictly increasing");
        }
    }
}

double Reparam::operator()(double t) const {
    if (t <= knots_.front()) {
        return values_.front() + (t - knots_.front());
    }
    if (t >= knots_.back()) {
        return values_.back() + (t - knots_.back());
    }
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - knots_.begin());
    const double w = (t - knots_[k - 1]) / (knots_[k] - knots_[k - 1]);
    return values_[k - 1] + w * (values_[k] - values_[k - 1]);
}

namespace {

bool uses_backward(const FlowModel& model, const ProbeOptions& opt) {
    return opt.backward.value_or(!model.is_geometric());
}

long steps_for(double span, double dt) {
    return static_cast<long>(std::ceil(span / dt - 1e-9));
}

double point_segment_distance(const State3& q, const State3& a, const State3& b) {
    const State3 ab = b - a;
    const double len2 = ab.squaredNorm();
    double w = len2 > 0.0 ? (q - a).dot(ab) / len2 : 0.0;
    w = std::clamp(w, 0.0, 1.0);
    return (q - (a + w * ab)).norm();
}

double sup_distance(const SampledOrbit& xs, const SampledOrbit& ys, const Reparam& h) {
    double d = 0.0;
    for (std::size_t i = 0; i < xs.points.size(); ++i) {
        const double t = xs.t0 + static_cast<double>(i) * xs.dt;
        d = std::max(d, (xs.points[i] - ys.at(h(t))).norm());
    }
    return d;
}

}  // namespace

double probe_start(const FlowModel& model, double T_horizon, const ProbeOptions& opt) {
    return uses_backward(model, opt) ? -T_horizon : 0.0;
}

State3 SampledOrbit::at(double t) const {
    const double f = std::clamp((t - t0) / dt, 0.0, static_cast<double>(points.size() - 1));
    const std::size_t i = static_cast<std::size_t>(std::floor(f));
    const double w = f - static_cast<double>(i);
    if (w == 0.0 || i + 1 >= points.size()) {
        return points[i];
    }
    return (1.0 - w) * points[i] + w * points[i + 1];
}

SampledOrbit sample_orbit(const FlowModel& model, const State3& p, double t_lo, double t_hi,
                          double dt, const StepConfig& cfg) {
    if (!(dt > 0.0) || t_lo > 0.0 || t_hi < 0.0) {
        throw ArgumentError("sample_orbit needs dt > 0 and t_lo <= 0 <= t_hi");
    }
    const long nb = t_lo < 0.0 ? steps_for(-t_lo, dt) : 0;
    const long nf = t_hi > 0.0 ? steps_for(t_hi, dt) : 0;
    if (nb > 0 && model.is_geometric()) {
        throw ArgumentError("geometric models are probed forward in time only");
    }
    SampledOrbit out;
    out.dt = dt;
    out.t0 = -static_cast<double>(nb) * dt;
    out.points.resize(static_cast<std::size_t>(nb + nf + 1));
    out.points[static_cast<std::size_t>(nb)] = p;
    State3 q = p;
    for (long k = 1; k <= nb; ++k) {
        q = flow(model, q, -dt, cfg);
        out.points[static_cast<std::size_t>(nb - k)] = q;
    }
    TrajectorySampler traj(model, p, cfg);
    for (long k = 1; k <= nf; ++k) {
        traj.advance(dt);
        out.points[static_cast<std::size_t>(nb + k)] = traj.position();
    }
    return out;
}

double aligned_distance(const FlowModel& model, const State3& x, const State3& y, double T_horizon,
                        const Reparam& h, const StepConfig& cfg, const ProbeOptions& opt) {
    if (!(T_horizon > 0.0)) {
        throw ArgumentError("T_horizon must be positive");
    }
    const double t_lo = probe_start(model, T_horizon, opt);
    const SampledOrbit xs = sample_orbit(model, x, t_lo, T_horizon, opt.sample_dt, cfg);
    const double h_lo = h(xs.t0);
    const double h_hi = h(xs.t_end());
    if (h_lo < 0.0 && !uses_backward(model, opt)) {
        throw ArgumentError("time change reaches negative times on a forward-only model");
    }
    const SampledOrbit ys = sample_orbit(model, y, std::min(0.0, h_lo), std::max(0.0, h_hi),
                                         opt.sample_dt, cfg);
    return sup_distance(xs, ys, h);
}

namespace {

struct Alignment {
    AlignmentResult result;
    SampledOrbit xs;
    SampledOrbit ys;
};

Alignment align(const FlowModel& model, const State3& x, const State3& y, double T_horizon,
                int knot_budget, const StepConfig& cfg, const ProbeOptions& opt) {
    if (knot_budget < 2) {
        throw ArgumentError("knot_budget must be >= 2");
    }
    if (!(T_horizon > 0.0)) {
        throw ArgumentError("T_horizon must be positive");
    }
    const double dt = opt.sample_dt;
    const double t_lo = probe_start(model, T_horizon, opt);
    Alignment a;
    a.xs = sample_orbit(model, x, t_lo, T_horizon, dt, cfg);
    const double y_lo = uses_backward(model, opt) ? t_lo - opt.shift_window : 0.0;
    a.ys = sample_orbit(model, y, y_lo, T_horizon + opt.shift_window, dt, cfg);

    const auto& X = a.xs.points;
    const auto& Y = a.ys.points;
    const std::size_t n = X.size();
    const std::size_t m = Y.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    auto dist = [&](std::size_t i, std::size_t j) { return (X[i] - Y[j]).norm(); };

    // Pass 1: bottleneck value over monotone matchings, free start/end on y.
    std::vector<double> prev(m), cur(m);
    for (std::size_t j = 0; j < m; ++j) {
        prev[j] = dist(0, j);
    }
    for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double best = prev[j];
            if (j > 0) {
                best = std::min({best, prev[j - 1], cur[j - 1]});
            }
            cur[j] = std::max(best, dist(i, j));
        }
        std::swap(prev, cur);
    }
    const double bottleneck = *std::min_element(prev.begin(), prev.end());

    // Pass 2: least total distance among matchings within the bottleneck band.
    const double band = bottleneck * (1.0 + 1e-12) + 1e-300;
    std::vector<std::uint8_t> back(n * m, 0);
    std::vector<double> cp(m), cc(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double d = dist(0, j);
        cp[j] = d <= band ? d : inf;
    }
    for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double d = dist(i, j);
            if (d > band) {
                cc[j] = inf;
                continue;
            }
            double best = cp[j];
            std::uint8_t from = 1;  // (i-1, j)
            if (j > 0) {
                if (cp[j - 1] <= best) {
                    best = cp[j - 1];
                    from = 0;  // (i-1, j-1)
                }
                if (cc[j - 1] < best) {
                    best = cc[j - 1];
                    from = 2;  // (i, j-1)
                }
            }
            cc[j] = best + d;
            back[i * m + j] = from;
        }
        std::swap(cp, cc);
    }
    std::size_t j = static_cast<std::size_t>(std::min_element(cp.begin(), cp.end()) - cp.begin());

    // Backtrack; keep the first and last matched y index of every x sample.
    std::vector<std::size_t> jlo(n), jhi(n);
    std::size_t i = n - 1;
    jhi[i] = j;
    jlo[i] = j;
    while (i > 0) {
        const std::uint8_t from = back[i * m + j];
        if (from == 2) {
            --j;
            jlo[i] = j;
            continue;
        }
        --i;
        if (from == 0) {
            --j;
        }
        jhi[i] = j;
        jlo[i] = j;
    }
    // Row 0 is a free start: the matching begins at (0, j).

    const std::size_t k_count = std::min<std::size_t>(static_cast<std::size_t>(knot_budget), n);
    std::vector<double> knots(k_count), values(k_count);
    for (std::size_t k = 0; k < k_count; ++k) {
        const std::size_t ik = k_count == 1 ? 0 : (k * (n - 1) + (k_count - 1) / 2) / (k_count - 1);
        knots[k] = a.xs.t0 + static_cast<double>(ik) * dt;
        const double jm = 0.5 * static_cast<double>(jlo[ik] + jhi[ik]);
        values[k] = a.ys.t0 + jm * dt;
        if (k > 0 && values[k] <= values[k - 1]) {
            values[k] = values[k - 1] + 1e-6 * dt;
        }
    }
    a.result.h = Reparam(std::move(knots), std::move(values));
    a.result.bottleneck = bottleneck;
    a.result.achieved = sup_distance(a.xs, a.ys, a.result.h);
    return a;
}

}  // namespace

AlignmentResult optimize_reparam(const FlowModel& model, const State3& x, const State3& y,
                                 double T_horizon, double /*delta*/, int knot_budget,
                                 const StepConfig& cfg, const ProbeOptions& opt) {
    return align(model, x, y, T_horizon, knot_budget, cfg, opt).result;
}

const char* to_string(SeparationVerdict v) {
    switch (v) {
        case SeparationVerdict::separated:
            return "separated";
        case SeparationVerdict::time_shift_contained:
            return "time-shift-contained";
        case SeparationVerdict::undetermined:
            return "undetermined";
    }
    return "undetermined";
}

const char* to_string(PairKind k) {
    switch (k) {
        case PairKind::generic:
            return "generic";
        case PairKind::same_leaf:
            return "same-leaf";
        case PairKind::opposite_side:
            return "opposite-side";
        case PairKind::same_orbit:
            return "same-orbit";
    }
    return "generic";
}

SeparationReport probe_pair(const FlowModel& model, const State3& x, const State3& y,
                            double delta, double epsilon, double T_horizon, const StepConfig& cfg,
                            const ProbeOptions& opt) {
    if (!(delta > 0.0) || !(epsilon > 0.0)) {
        throw ArgumentError("delta and epsilon must be positive");
    }
    const Alignment a = align(model, x, y, T_horizon, opt.knot_budget, cfg, opt);
    SeparationReport rep;
    rep.x = x;
    rep.y = y;
    rep.delta = delta;
    rep.epsilon = epsilon;
    rep.horizon = T_horizon;
    rep.best_h = a.result.h;
    rep.max_distance = a.result.achieved;

    if (a.result.bottleneck > delta) {
        rep.verdict = SeparationVerdict::separated;
        return rep;
    }
    if (a.result.achieved > delta) {
        rep.verdict = SeparationVerdict::undetermined;
        return rep;
    }
    // Containment: phi_h(t0)(y) within tol of x's orbit over [t0 - eps, t0 + eps].
    const auto& X = a.xs.points;
    const long reach = static_cast<long>(std::floor(epsilon / a.xs.dt + 1e-9));
    const long n = static_cast<long>(X.size());
    for (long i = 0; i < n; ++i) {
        const double t0 = a.xs.t0 + static_cast<double>(i) * a.xs.dt;
        const State3 q = a.ys.at(rep.best_h(t0));
        const long lo = std::max<long>(0, i - reach);
        const long hi = std::min<long>(n - 1, i + reach);
        double best = (q - X[static_cast<std::size_t>(lo)]).norm();
        for (long k = lo; k < hi; ++k) {
            best = std::min(best, point_segment_distance(q, X[static_cast<std::size_t>(k)],
                                                         X[static_cast<std::size_t>(k + 1)]));
        }
        if (best <= opt.containment_tol) {
            rep.verdict = SeparationVerdict::time_shift_contained;
            rep.containment_shift = t0;
            return rep;
        }
    }
    rep.verdict = SeparationVerdict::undetermined;
    rep.violation = true;
    return rep;
}

State3 sample_attractor_point(const FlowModel& model, CounterRng& rng, const StepConfig& cfg,
                              int burn_returns) {
    if (model.is_geometric()) {
        const GeomLorenzParams& gp = model.geom();
        double u = 0.0;
        while (u == 0.0) {
            u = rng.uniform(-0.5, 0.5);
        }
        SectionPoint sp = SectionPoint::raw(u, rng.uniform(-0.5, 0.5));
        for (int k = 0; k < burn_returns; ++k) {
            sp = gp.mode == GeomMode::contracting ? analytic_return_contracting(gp, sp).to
                                                  : numeric_return(model, sp, cfg).to;
        }
        return State3(sp.u, sp.v, 1.0);
    }
    const Box box = default_trapping_box(model);
    State3 p;
    if (std::holds_alternative<ClassicalLorenzParams>(model.variant)) {
        p = State3(1.0, 1.0, 20.0) + State3(rng.uniform(-1, 1), rng.uniform(-1, 1),
                                            rng.uniform(-1, 1));
    } else {
        for (int d = 0; d < 3; ++d) {
            p[d] = rng.uniform(0.5 * box.lo[d], 0.5 * box.hi[d]);
        }
    }
    return flow(model, p, 20.0 * burn_returns / 50.0, cfg);
}

std::vector<SeparationReport> expansiveness_scan(const FlowModel& model, double delta,
                                                 double epsilon, std::size_t n_pairs,
                                                 double T_horizon, std::uint64_t seed,
                                                 const StepConfig& cfg, const ProbeOptions& opt,
                                                 unsigned jobs) {
    if (!(delta > 0.0) || !(delta < opt.delta0)) {
        throw ArgumentError("delta must lie in (0, delta0)");
    }
    std::vector<SeparationReport> out(n_pairs);
    const CounterRng root(seed, 0x5ca1ab1e);
    parallel_for(n_pairs, jobs, [&](std::size_t k) {
        CounterRng rng = root.split(k);
        const State3 x = sample_attractor_point(model, rng, cfg);
        State3 y = x;
        PairKind kind = PairKind::generic;
        if (model.is_geometric()) {
            const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
            y[0] = std::clamp(x[0] + 0.5 * delta * std::cos(theta), -0.5, 0.5);
            y[1] = std::clamp(x[1] + 0.5 * delta * std::sin(theta), -0.5, 0.5);
            if (y[0] == 0.0) {
                y[0] = x[0];
            }
            if (y[0] == x[0]) {
                kind = PairKind::same_leaf;
            } else if (model.geom().mode == GeomMode::contracting) {
                const ContractingLorenzMap t = ContractingLorenzMap::from_params(model.geom());
                if (t.eval(x[0]) * t.eval(y[0]) < 0.0) {
                    kind = PairKind::opposite_side;
                }
            } else if (x[0] * y[0] < 0.0) {
                kind = PairKind::opposite_side;
            }
        } else {
            State3 dir(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
            if (dir.norm() == 0.0) {
                dir = State3::UnitX();
            }
            y = x + 0.5 * delta * dir.normalized();
        }
        SeparationReport rep = probe_pair(model, x, y, delta, epsilon, T_horizon, cfg, opt);
        rep.pair_id = k;
        rep.kind = kind;
        out[k] = std::move(rep);
    });
    return out;
}

std::size_t greedy_cover_count(const std::vector<std::vector<State3>>& orbits, int upto,
                               double radius) {
    const std::size_t n = orbits.size();
    std::vector<bool> covered(n, false);
    std::size_t count = 0;
    for (std::size_t c = 0; c < n; ++c) {
        if (covered[c]) {
            continue;
        }
        ++count;
        covered[c] = true;
        for (std::size_t j = c + 1; j < n; ++j) {
            if (covered[j]) {
                continue;
            }
            double d = 0.0;
            for (int k = 0; k <= upto && d <= radius; ++k) {
                d = std::max(d, (orbits[c][static_cast<std::size_t>(k)] -
                                 orbits[j][static_cast<std::size_t>(k)])
                                    .norm());
            }
            if (d <= radius) {
                covered[j] = true;
            }
        }
    }
    return count;
}

TailEntropyResult tail_entropy_estimate(const FlowModel& model, double delta, int n,
                                        double delta_prime, int n_seeds, const StepConfig& cfg,
                                        const TailEntropyOptions& opt) {
    if (!(delta > 0.0) || !(delta_prime > 0.0) || !(delta_prime < delta)) {
        throw ArgumentError("need 0 < delta_prime < delta");
    }
    if (n < 1 || n_seeds < 1 || opt.candidates < 1) {
        throw ArgumentError("n, n_seeds and candidates must be >= 1");
    }
    const std::size_t seeds = static_cast<std::size_t>(n_seeds);
    TailEntropyResult out;
    out.per_seed.resize(seeds);
    out.ball_sizes.resize(seeds);
    out.cover_counts.resize(seeds);
    out.initial_counts.resize(seeds);
    const CounterRng root(opt.seed, 0x7a11);

    auto unit_orbit = [&](const State3& p, double lead) {
        TrajectorySampler traj(model, p, cfg);
        traj.advance(lead);
        std::vector<State3> pts{traj.position()};
        for (int k = 0; k < n; ++k) {
            traj.advance(1.0);
            pts.push_back(traj.position());
        }
        return pts;
    };

    parallel_for(seeds, opt.jobs, [&](std::size_t s) {
        CounterRng rng = root.split(s);
        const State3 x = sample_attractor_point(model, rng, cfg);
        std::vector<std::vector<State3>> kept{unit_orbit(x, 0.0)};
        const std::vector<State3> xo = kept.front();
        for (int c = 0; c < opt.candidates; ++c) {
            State3 y = x;
            double lead = 0.0;
            if (model.is_geometric()) {
                // Section displacement at a log-uniform scale plus a short
                // slide along the flow.
                const double r = delta * std::pow(10.0, -8.0 * rng.uniform());
                const double th = rng.uniform(0.0, 2.0 * std::numbers::pi);
                y[0] = std::clamp(x[0] + r * std::cos(th), -0.5, 0.5);
                y[1] = std::clamp(x[1] + r * std::sin(th), -0.5, 0.5);
                lead = rng.uniform(0.0, 0.25 * delta);
                if (y[0] == 0.0) {
                    continue;
                }
            } else {
                State3 dir;
                do {
                    dir = State3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
                } while (dir.squaredNorm() > 1.0);
                y = x + delta * std::pow(10.0, -8.0 * rng.uniform()) * dir;
            }
            std::vector<State3> yo = unit_orbit(y, lead);
            bool inside = true;
            for (int k = 0; k <= n && inside; ++k) {
                inside = (yo[static_cast<std::size_t>(k)] - xo[static_cast<std::size_t>(k)])
                             .norm() <= delta;
            }
            if (inside) {
                kept.push_back(std::move(yo));
            }
        }
        const std::size_t nn = greedy_cover_count(kept, n, delta_prime);
        const std::size_t n0 = greedy_cover_count(kept, 0, delta_prime);
        out.ball_sizes[s] = kept.size();
        out.cover_counts[s] = nn;
        out.initial_counts[s] = n0;
        out.per_seed[s] =
            (std::log(static_cast<double>(nn)) - std::log(static_cast<double>(n0))) / n;
    });
    out.estimate = *std::max_element(out.per_seed.begin(), out.per_seed.end());
    return out;
}

}  // namespace lorenzlab
