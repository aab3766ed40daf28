#pragma once

#include <functional>

#include "lorenzlab/flow_models.hpp"

namespace lorenzlab {

enum class StepMethod { rk4_fixed, rk45_adaptive };

struct StepConfig {
    StepMethod method = StepMethod::rk45_adaptive;
    /// Fixed step (rk4) or initial step (rk45).
    double h = 1e-2;
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    long max_steps = 50'000'000;
    /// Bisection stops once the bracketing interval is shorter than this.
    double event_time_tol = 1e-10;
    /// States with norm above this abort with BlowUpError.
    double blowup_norm = 1e4;
    /// ||G|| below this (times max(1, ||p||)) counts as convergence to an
    /// equilibrium during section searches.
    double singular_speed = 1e-9;

    /// Throws ArgumentError when a field is out of range.
    void validate() const;
};

struct TangentState {
    State3 base;
    /// Accumulated D phi_t.
    Matrix3 frame = Matrix3::Identity();
};

struct SectionHit {
    State3 point;
    double time = 0.0;
    Side side = Side::plus;
};

/// phi_T(p) by numerical integration of eval_field. Negative T integrates the
/// reversed field.
State3 flow(const FlowModel& model, const State3& p, double T, const StepConfig& cfg);

/// phi_T(p) together with the solution of M' = DG(phi_t p) M, M(0) = I.
TangentState flow_with_tangent(const FlowModel& model, const State3& p, double T,
                               const StepConfig& cfg);

/// Numerically integrates until the crossing function g changes sign from
/// negative to non-negative; the crossing time is refined by bisection.
/// Returns the crossing point and the elapsed time.
struct Crossing {
    State3 point;
    double time = 0.0;
};
Crossing integrate_to_crossing(const FlowModel& model, const State3& p,
                               const std::function<double(const State3&)>& g,
                               const StepConfig& cfg);

/// Next downward crossing of the model's section plane.
///
/// Classical/test models: numerical integration with a z = section_z()
/// crossing event. Geometric models: numerical integration of the linear
/// field up to the exit face |x| = 1, followed by the gluing jump, which lands
/// on Sigma after the transit time tau_out.
SectionHit advance_to_section(const FlowModel& model, const State3& p, const StepConfig& cfg);

/// Calls observer(t, state) at t = t0 + k dt for k = 0..n, integrating with
/// cfg between samples. Used for trajectory dumps and Birkhoff sums of the
/// smooth models.
void sample_flow(const FlowModel& model, const State3& p, double dt, long n,
                 const StepConfig& cfg,
                 const std::function<void(double, const State3&)>& observer);

}  // namespace lorenzlab
