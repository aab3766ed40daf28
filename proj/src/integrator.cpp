#include "lorenzlab/integrator.hpp"

#include <cmath>
#include <limits>

#include "lorenzlab/errors.hpp"
#include "ode_core.hpp"

namespace lorenzlab {

using detail::Stepper;
using detail::Vec;

void StepConfig::validate() const {
    if (!(h > 0.0) || !std::isfinite(h)) {
        throw ArgumentError("integrator: h must be positive");
    }
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) {
        throw ArgumentError("integrator: tolerances must be positive");
    }
    if (max_steps < 1) {
        throw ArgumentError("integrator: max_steps must be >= 1");
    }
    if (!(event_time_tol > 0.0)) {
        throw ArgumentError("integrator: event_time_tol must be positive");
    }
}

State3 flow(const FlowModel& model, const State3& p, double T, const StepConfig& cfg) {
    if (!is_finite(p) || !std::isfinite(T)) {
        throw DomainError("flow: non-finite input");
    }
    if (T == 0.0) {
        return p;
    }
    const double dir = T < 0.0 ? -1.0 : 1.0;
    auto rhs = [&](const Vec<3>& y) -> Vec<3> { return eval_field(model, y); };
    Stepper<3, decltype(rhs)> st(rhs, p, cfg, dir);
    const double span = std::abs(T);
    while (st.advance(span)) {
    }
    return st.y();
}

namespace {

Vec<12> pack(const State3& p, const Matrix3& m) {
    Vec<12> y;
    y.head<3>() = p;
    y.tail<9>() = Eigen::Map<const Vec<9>>(m.data());
    return y;
}

TangentState unpack(const Vec<12>& y) {
    TangentState ts;
    ts.base = y.head<3>();
    ts.frame = Eigen::Map<const Matrix3>(y.tail<9>().data());
    return ts;
}

}  // namespace

TangentState flow_with_tangent(const FlowModel& model, const State3& p, double T,
                               const StepConfig& cfg) {
    if (!is_finite(p) || !std::isfinite(T)) {
        throw DomainError("flow_with_tangent: non-finite input");
    }
    if (T == 0.0) {
        return TangentState{p, Matrix3::Identity()};
    }
    const double dir = T < 0.0 ? -1.0 : 1.0;
    auto rhs = [&](const Vec<12>& y) -> Vec<12> {
        const State3 x = y.head<3>();
        const Eigen::Map<const Matrix3> m(y.tail<9>().data());
        const Matrix3 dm = eval_jacobian(model, x) * m;
        Vec<12> out;
        out.head<3>() = eval_field(model, x);
        out.tail<9>() = Eigen::Map<const Vec<9>>(dm.data());
        return out;
    };
    Stepper<12, decltype(rhs)> st(rhs, pack(p, Matrix3::Identity()), cfg, dir);
    const double span = std::abs(T);
    while (st.advance(span)) {
    }
    return unpack(st.y());
}

Crossing integrate_to_crossing(const FlowModel& model, const State3& p,
                               const std::function<double(const State3&)>& g,
                               const StepConfig& cfg) {
    if (!is_finite(p)) {
        throw DomainError("integrate_to_crossing: non-finite start");
    }
    auto rhs = [&](const Vec<3>& y) -> Vec<3> { return eval_field(model, y); };
    Stepper<3, decltype(rhs)> st(rhs, p, cfg);
    const double horizon = std::numeric_limits<double>::infinity();
    Vec<3> prev = p;
    double t_prev = 0.0;
    double g_prev = g(prev);
    while (true) {
        st.advance(horizon);
        const Vec<3> cur = st.y();
        const double g_cur = g(cur);
        if (g_prev < 0.0 && g_cur >= 0.0) {
            // Bisection on the step length; each trial re-integrates one step
            // from the bracket start.
            double lo = 0.0;
            double hi = st.t() - t_prev;
            Vec<3> y_hi = cur;
            while (hi - lo > cfg.event_time_tol) {
                const double mid = 0.5 * (lo + hi);
                const Vec<3> y_mid = st.trial_step(prev, mid);
                if (g(y_mid) >= 0.0) {
                    hi = mid;
                    y_hi = y_mid;
                } else {
                    lo = mid;
                }
            }
            return Crossing{y_hi, t_prev + hi};
        }
        const double speed = eval_field(model, cur).norm();
        if (speed < cfg.singular_speed * std::max(1.0, cur.norm())) {
            throw StableManifoldError(
                "integrate_to_crossing: trajectory converges to an equilibrium");
        }
        prev = cur;
        t_prev = st.t();
        g_prev = g_cur;
    }
}

SectionHit advance_to_section(const FlowModel& model, const State3& p, const StepConfig& cfg) {
    if (!is_finite(p)) {
        throw DomainError("advance_to_section: non-finite start");
    }
    if (model.is_geometric()) {
        const auto& g = model.geom();
        if (p.x() == 0.0) {
            throw StableManifoldError(
                "advance_to_section: start lies on the stable manifold x = 0");
        }
        if (std::abs(p.x()) > 1.0) {
            throw DomainError("advance_to_section: start outside the linear cube");
        }
        const Crossing exit = integrate_to_crossing(
            model, p, [](const State3& q) { return std::abs(q.x()) - 1.0; }, cfg);
        State3 face = exit.point;
        face.x() = p.x() < 0.0 ? -1.0 : 1.0;
        const SectionPoint sp = apply_gluing(g, face);
        return SectionHit{State3(sp.u, sp.v, 1.0), exit.time + g.tau_out, sp.side};
    }
    const double level = model.section_z();
    const Crossing c = integrate_to_crossing(
        model, p, [level](const State3& q) { return level - q.z(); }, cfg);
    return SectionHit{c.point, c.time, c.point.x() < 0.0 ? Side::minus : Side::plus};
}

void sample_flow(const FlowModel& model, const State3& p, double dt, long n,
                 const StepConfig& cfg,
                 const std::function<void(double, const State3&)>& observer) {
    if (!(dt > 0.0) || n < 0) {
        throw ArgumentError("sample_flow: dt must be positive and n non-negative");
    }
    if (!is_finite(p)) {
        throw DomainError("sample_flow: non-finite start");
    }
    auto rhs = [&](const Vec<3>& y) -> Vec<3> { return eval_field(model, y); };
    Stepper<3, decltype(rhs)> st(rhs, p, cfg);
    observer(0.0, p);
    for (long k = 1; k <= n; ++k) {
        const double target = static_cast<double>(k) * dt;
        while (st.advance(target)) {
        }
        observer(target, st.y());
    }
}

}  // namespace lorenzlab
