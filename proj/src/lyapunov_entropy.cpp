#include "lorenzlab/lyapunov_entropy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "lorenzlab/errors.hpp"

namespace lorenzlab {

namespace {

constexpr double kMaxCondition = 1e12;

std::array<double, 3> sorted_desc(std::array<double, 3> v) {
    std::sort(v.begin(), v.end(), std::greater<>());
    return v;
}

// QR of the evolved frame; returns log|R_ii| and replaces m by Q.
std::array<double, 3> renormalize(Matrix3& m, double t) {
    if (!m.allFinite()) {
        throw RenormalizationError("tangent frame is not finite at t = " + std::to_string(t));
    }
    const State3 sv = Eigen::JacobiSVD<Matrix3>(m).singularValues();
    if (!(sv[2] > 0.0) || sv[0] / sv[2] > kMaxCondition) {
        std::ostringstream msg;
        msg << "tangent frame degenerate at t = " << t << " (condition " << sv[0] / sv[2] << ")";
        throw RenormalizationError(msg.str());
    }
    Eigen::HouseholderQR<Matrix3> qr(m);
    const Matrix3 r = qr.matrixQR().triangularView<Eigen::Upper>();
    Matrix3 q = qr.householderQ();
    std::array<double, 3> logs{};
    for (int i = 0; i < 3; ++i) {
        if (r(i, i) < 0.0) {
            q.col(i) = -q.col(i);
        }
        logs[i] = std::log(std::abs(r(i, i)));
    }
    m = q;
    return logs;
}

}  // namespace

LyapunovSpectrum lyapunov_spectrum(const FlowModel& model, const State3& p0, double T,
                                   double renorm_dt, const StepConfig& cfg,
                                   const LyapunovOptions& opt) {
    if (!(renorm_dt > 0.0) || !std::isfinite(T) || T < 100.0 * renorm_dt) {
        throw ArgumentError("lyapunov_spectrum needs renorm_dt > 0 and T >= 100 renorm_dt");
    }
    if (opt.burn_in < 0.0 || opt.burn_in >= T) {
        throw ArgumentError("burn_in must lie in [0, T)");
    }
    if (!is_finite(p0)) {
        throw DomainError("p0 is not finite");
    }

    Matrix3 frame = opt.initial_frame.value_or(Matrix3::Identity());
    {
        Matrix3 probe = frame;
        renormalize(probe, 0.0);
    }

    // One renormalization window: frame <- D phi_dt * frame.
    std::function<void(double)> step;
    std::optional<HybridTrajectory> hybrid;
    State3 base = p0;
    if (model.is_geometric()) {
        const GeomLorenzParams gp = model.geom();
        hybrid.emplace(gp, p0);
        const State3 lam(gp.lambda1, gp.lambda2, gp.lambda3);
        step = [&, gp, lam](double dt) {
            hybrid->advance(
                dt,
                [&](double d) { frame = (lam * d).array().exp().matrix().asDiagonal() * frame; },
                [&](const HybridTrajectory::Return& ret) {
                    const State3 entry(ret.to.u, ret.to.v, 1.0);
                    frame = gluing_jacobian(gp, ret.exit_point, entry) * frame;
                });
        };
    } else {
        cfg.validate();
        step = [&](double dt) {
            const TangentState ts = flow_with_tangent(model, base, dt, cfg);
            base = ts.base;
            frame = ts.frame * frame;
        };
    }

    const long n_burn = static_cast<long>(std::floor(opt.burn_in / renorm_dt + 1e-9));
    const long n_total = static_cast<long>(std::floor(T / renorm_dt + 1e-9));
    const long n_acc = n_total - n_burn;
    if (n_acc < 1) {
        throw ArgumentError("no accumulation window after burn-in");
    }
    const long stride = std::max<long>(1, n_acc / std::max(1, opt.trace_points));

    LyapunovSpectrum out;
    out.T = T;
    out.renorm_dt = renorm_dt;
    out.burn_in = n_burn * renorm_dt;
    std::array<double, 3> sums{};
    for (long k = 1; k <= n_total; ++k) {
        step(renorm_dt);
        const auto logs = renormalize(frame, k * renorm_dt);
        if (k <= n_burn) {
            continue;
        }
        for (int i = 0; i < 3; ++i) {
            sums[i] += logs[i];
        }
        const long done = k - n_burn;
        if (done % stride == 0 || k == n_total) {
            const double span = done * renorm_dt;
            out.trace_times.push_back(out.burn_in + span);
            out.trace.push_back(sorted_desc({sums[0] / span, sums[1] / span, sums[2] / span}));
        }
    }
    out.exponents = out.trace.back();
    return out;
}

double cu_volume_growth(const LyapunovSpectrum& spectrum) {
    const double value = spectrum.exponents[0] + spectrum.exponents[1];
    const auto& tr = spectrum.trace;
    if (tr.size() >= 4) {
        const auto& q = tr[(tr.size() * 3) / 4];
        const double earlier = q[0] + q[1];
        const double change = std::abs(value - earlier);
        if (change > 0.01 * std::abs(value)) {
            throw ConvergenceError("center-unstable growth rate not converged over the last "
                                   "quarter of the trace",
                                   change);
        }
    }
    return value;
}

double quotient_entropy(const PiecewiseMap& map, const InvariantDensity& density) {
    const UlamPartition& part = density.partition;
    const auto cuts = map.breakpoints();
    double h = 0.0;
    for (int i = 0; i < part.n_bins; ++i) {
        const double w = density.weights[static_cast<std::size_t>(i)];
        if (w <= 0.0) {
            continue;
        }
        const double a = part.edge(i);
        const double b = part.edge(i + 1);
        std::vector<double> pts{a};
        for (double c : cuts) {
            if (c > a && c < b) {
                pts.push_back(c);
            }
        }
        pts.push_back(b);
        double acc = 0.0;
        for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
            const double mid = 0.5 * (pts[k] + pts[k + 1]);
            acc += (pts[k + 1] - pts[k]) * std::log(std::abs(map.derivative(mid, 1)));
        }
        h += w * acc / (b - a);
    }
    return h;
}

double quotient_entropy(const ContractingLorenzMap& map, const InvariantDensity& density) {
    return quotient_entropy(map.as_piecewise(), density);
}

EntropyEstimate entropy_estimate(double h_quotient, double mean_return_time, double lambda_plus,
                                 double tolerance) {
    if (!(mean_return_time > 0.0)) {
        throw ArgumentError("mean return time must be positive");
    }
    EntropyEstimate e;
    e.h_quotient = h_quotient;
    e.mean_return_time = mean_return_time;
    e.h_flow = h_quotient / mean_return_time;
    e.lambda_plus = lambda_plus;
    e.residual = std::abs(e.h_flow - lambda_plus);
    e.relative_residual = e.residual / std::max(std::abs(lambda_plus), 1e-300);
    e.tolerance = tolerance;
    e.within_tolerance = e.relative_residual <= tolerance;
    return e;
}

EntropyEstimate entropy_formula_residual(const PiecewiseMap& map, const InvariantDensity& density,
                                         const ReturnTimeStats& returns,
                                         const LyapunovSpectrum& spectrum, double tolerance) {
    return entropy_estimate(quotient_entropy(map, density), returns.mean,
                            cu_volume_growth(spectrum), tolerance);
}

ReturnTimeStats orbit_return_times(const GeomLorenzParams& params, SectionPoint sp, long n,
                                   long skip) {
    if (n < 1 || skip < 0) {
        throw ArgumentError("need n >= 1 and skip >= 0");
    }
    std::vector<ReturnSample> samples;
    samples.reserve(static_cast<std::size_t>(n));
    for (long k = 0; k < skip + n; ++k) {
        ReturnSample r = analytic_return_contracting(params, sp);
        sp = r.to;
        if (k >= skip) {
            samples.push_back(r);
        }
    }
    return return_time_stats(samples);
}

EntropyCheck run_entropy_check(const FlowModel& model, const EntropyCheckOptions& opt) {
    if (!model.is_geometric() || model.geom().mode != GeomMode::contracting) {
        throw ArgumentError("entropy check needs a contracting geometric model");
    }
    const GeomLorenzParams& gp = model.geom();
    const PiecewiseMap map = ContractingLorenzMap::from_params(gp).as_piecewise();

    EntropyCheck out;
    const UlamMatrix ulam = build_ulam(map, opt.partition, opt.ulam);
    out.density = stationary_density(ulam, 1e-12, 200'000, &out.solve);
    out.returns = orbit_return_times(gp, opt.start, opt.returns);
    out.spectrum = lyapunov_spectrum(model, State3(opt.start.u, opt.start.v, 1.0), opt.T,
                                     opt.renorm_dt, {}, LyapunovOptions{opt.burn_in, {}, 40});
    out.estimate = entropy_formula_residual(map, out.density, out.returns, out.spectrum,
                                            opt.tolerance);
    return out;
}

}  // namespace lorenzlab
