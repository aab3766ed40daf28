#pragma once

// Explicit Runge-Kutta stepping on fixed-size Eigen vectors. Internal header.

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "lorenzlab/errors.hpp"
#include "lorenzlab/integrator.hpp"

namespace lorenzlab::detail {

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;

template <int N, class Rhs>
Vec<N> rk4_step(const Rhs& f, const Vec<N>& y, double h) {
    const Vec<N> k1 = f(y);
    const Vec<N> k2 = f(y + 0.5 * h * k1);
    const Vec<N> k3 = f(y + 0.5 * h * k2);
    const Vec<N> k4 = f(y + h * k3);
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// One Dormand-Prince 5(4) step. Returns the 5th-order solution and writes
/// the embedded error vector.
template <int N, class Rhs>
Vec<N> dopri_step(const Rhs& f, const Vec<N>& y, double h, Vec<N>& err) {
    const Vec<N> k1 = f(y);
    const Vec<N> k2 = f(y + h * (1.0 / 5.0) * k1);
    const Vec<N> k3 = f(y + h * ((3.0 / 40.0) * k1 + (9.0 / 40.0) * k2));
    const Vec<N> k4 = f(y + h * ((44.0 / 45.0) * k1 - (56.0 / 15.0) * k2 + (32.0 / 9.0) * k3));
    const Vec<N> k5 =
        f(y + h * ((19372.0 / 6561.0) * k1 - (25360.0 / 2187.0) * k2 +
                   (64448.0 / 6561.0) * k3 - (212.0 / 729.0) * k4));
    const Vec<N> k6 =
        f(y + h * ((9017.0 / 3168.0) * k1 - (355.0 / 33.0) * k2 + (46732.0 / 5247.0) * k3 +
                   (49.0 / 176.0) * k4 - (5103.0 / 18656.0) * k5));
    const Vec<N> y5 = y + h * ((35.0 / 384.0) * k1 + (500.0 / 1113.0) * k3 +
                               (125.0 / 192.0) * k4 - (2187.0 / 6784.0) * k5 +
                               (11.0 / 84.0) * k6);
    const Vec<N> k7 = f(y5);
    err = h * ((71.0 / 57600.0) * k1 - (71.0 / 16695.0) * k3 + (71.0 / 1920.0) * k4 -
               (17253.0 / 339200.0) * k5 + (22.0 / 525.0) * k6 - (1.0 / 40.0) * k7);
    return y5;
}

/// Steps an autonomous system forward (or backward when direction < 0),
/// one accepted step at a time.
template <int N, class Rhs>
class Stepper {
public:
    Stepper(const Rhs& f, const Vec<N>& y0, const StepConfig& cfg, double direction = 1.0)
        : f_(f), cfg_(cfg), y_(y0), dir_(direction < 0.0 ? -1.0 : 1.0), h_(cfg.h) {}

    double t() const { return t_; }
    const Vec<N>& y() const { return y_; }
    long steps() const { return steps_; }

    /// Advances by one accepted step, never past t_stop (|t| measured along
    /// the direction of integration). Returns false when already at t_stop.
    bool advance(double t_stop) {
        const double remaining = t_stop - t_;
        if (remaining <= 0.0) {
            return false;
        }
        if (++steps_ > cfg_.max_steps) {
            throw BudgetError("integrator: max_steps exceeded");
        }
        if (cfg_.method == StepMethod::rk4_fixed) {
            const double h = std::min(cfg_.h, remaining);
            y_ = rk4_step<N>(f_, y_, dir_ * h);
            t_ = (h == remaining) ? t_stop : t_ + h;
        } else {
            while (true) {
                double h = std::min(h_, remaining);
                Vec<N> err;
                const Vec<N> y_new = dopri_step<N>(f_, y_, dir_ * h, err);
                const double e = error_norm(y_, y_new, err);
                if (!std::isfinite(e)) {
                    throw BlowUpError("integrator: non-finite state");
                }
                if (e <= 1.0) {
                    y_ = y_new;
                    t_ = (h == remaining) ? t_stop : t_ + h;
                    const double grow = e == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(e, -0.2), 0.2, 5.0);
                    if (h == h_ || grow < 1.0) {
                        h_ = h * grow;
                    }
                    break;
                }
                h_ = h * std::max(0.2, 0.9 * std::pow(e, -0.2));
                if (h_ < 1e-14 * std::max(1.0, std::abs(t_))) {
                    throw BudgetError("integrator: step size underflow");
                }
                if (++steps_ > cfg_.max_steps) {
                    throw BudgetError("integrator: max_steps exceeded");
                }
            }
        }
        check_state();
        return true;
    }

    /// Single step of length h (>= 0) from state y, same scheme as advance().
    /// Used by event bisection.
    Vec<N> trial_step(const Vec<N>& y, double h) const {
        if (h == 0.0) {
            return y;
        }
        if (cfg_.method == StepMethod::rk4_fixed) {
            return rk4_step<N>(f_, y, dir_ * h);
        }
        Vec<N> err;
        return dopri_step<N>(f_, y, dir_ * h, err);
    }

private:
    double error_norm(const Vec<N>& y0, const Vec<N>& y1, const Vec<N>& err) const {
        double acc = 0.0;
        for (int i = 0; i < N; ++i) {
            const double sc =
                cfg_.abs_tol + cfg_.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
            const double q = err[i] / sc;
            acc += q * q;
        }
        return std::sqrt(acc / N);
    }

    void check_state() const {
        if (!y_.allFinite()) {
            throw BlowUpError("integrator: non-finite state");
        }
        if (y_.template head<3>().norm() > cfg_.blowup_norm) {
            throw BlowUpError("integrator: state norm exceeded blow-up guard");
        }
    }

    const Rhs& f_;
    const StepConfig& cfg_;
    Vec<N> y_;
    double dir_;
    double h_;
    double t_ = 0.0;
    long steps_ = 0;
};

}  // namespace lorenzlab::detail
