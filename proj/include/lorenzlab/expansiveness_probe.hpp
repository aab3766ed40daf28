#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lorenzlab/flow_models.hpp"
#include "lorenzlab/integrator.hpp"
#include "lorenzlab/rng.hpp"

namespace lorenzlab {

/// Increasing piecewise-linear time change. Outside the knot range it
/// continues with slope 1, so it is a surjection of the real line.
class Reparam {
public:
    Reparam() : Reparam({0.0, 1.0}, {0.0, 1.0}) {}
    /// Throws ArgumentError unless both sequences have the same length >= 2
    /// and are strictly increasing.
    Reparam(std::vector<double> knots, std::vector<double> values);

    static Reparam identity() { return Reparam(); }
    static Reparam shift(double tau) { return Reparam({0.0, 1.0}, {tau, 1.0 + tau}); }

    double operator()(double t) const;
    Reparam inverse() const { return Reparam(values_, knots_); }
    const std::vector<double>& knots() const { return knots_; }
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<double> knots_;
    std::vector<double> values_;
};

struct ProbeOptions {
    /// Orbit sampling step.
    double sample_dt = 0.05;
    /// Extra time sampled on the y orbit on each side, room for time changes.
    double shift_window = 10.0;
    int knot_budget = 64;
    /// Half the gap between cross-sections; delta must stay below it.
    double delta0 = 0.05;
    /// Distance to the epsilon-orbit segment accepted as containment.
    double containment_tol = 1e-6;
    /// Backward time is used for models with a globally defined reversed
    /// field; the hybrid geometric flows are probed forward only.
    std::optional<bool> backward;
};

/// Time window [t_lo, T_horizon] probed for this model.
double probe_start(const FlowModel& model, double T_horizon, const ProbeOptions& opt);

/// Orbit sampled at t = t0 + k dt, with linear interpolation in between.
struct SampledOrbit {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<State3> points;

    double t_end() const { return t0 + dt * static_cast<double>(points.size() - 1); }
    State3 at(double t) const;
};

/// Samples phi_t(p) for t in [t_lo, t_hi] (t_lo <= 0 <= t_hi).
SampledOrbit sample_orbit(const FlowModel& model, const State3& p, double t_lo, double t_hi,
                          double dt, const StepConfig& cfg);

/// sup over the sample grid of t in the probe window of d(phi_t x, phi_h(t) y).
double aligned_distance(const FlowModel& model, const State3& x, const State3& y, double T_horizon,
                        const Reparam& h, const StepConfig& cfg = {},
                        const ProbeOptions& opt = {});

struct AlignmentResult {
    Reparam h;
    /// sup distance actually achieved by h on the grid.
    double achieved = 0.0;
    /// Bottleneck value of the discrete monotone matching (a lower bound for
    /// any h on this grid).
    double bottleneck = 0.0;
};

/// Minimizes the sup distance over monotone matchings of the sampled orbits
/// (bottleneck dynamic time warping with free start and end on the y orbit)
/// and compresses the optimal matching to at most knot_budget knots.
AlignmentResult optimize_reparam(const FlowModel& model, const State3& x, const State3& y,
                                 double T_horizon, double delta, int knot_budget,
                                 const StepConfig& cfg = {}, const ProbeOptions& opt = {});

enum class SeparationVerdict { separated, time_shift_contained, undetermined };
const char* to_string(SeparationVerdict v);

enum class PairKind { generic, same_leaf, opposite_side, same_orbit };
const char* to_string(PairKind k);

struct SeparationReport {
    std::size_t pair_id = 0;
    PairKind kind = PairKind::generic;
    State3 x = State3::Zero();
    State3 y = State3::Zero();
    double delta = 0.0;
    double epsilon = 0.0;
    double horizon = 0.0;
    SeparationVerdict verdict = SeparationVerdict::undetermined;
    Reparam best_h;
    double max_distance = 0.0;
    std::optional<double> containment_shift;
    /// delta-shadowed without a time-shift containment.
    bool violation = false;
};

/// Classifies one pair: separated when the best h found keeps the orbits
/// farther than delta apart, time-shift-contained when some t0 puts
/// phi_h(t0)(y) on the epsilon-segment of x's orbit around t0.
SeparationReport probe_pair(const FlowModel& model, const State3& x, const State3& y,
                            double delta, double epsilon, double T_horizon,
                            const StepConfig& cfg = {}, const ProbeOptions& opt = {});

/// Attractor point: a section point after burn_returns returns of the
/// contracting model, or the end of a burn-in run for the other models.
State3 sample_attractor_point(const FlowModel& model, CounterRng& rng, const StepConfig& cfg,
                              int burn_returns = 50);

/// Samples n_pairs attractor points x with partners y at distance delta/2
/// along the section (or in space for smooth models) and probes each pair.
/// Throws ArgumentError unless 0 < delta < delta0.
std::vector<SeparationReport> expansiveness_scan(const FlowModel& model, double delta,
                                                 double epsilon, std::size_t n_pairs,
                                                 double T_horizon, std::uint64_t seed,
                                                 const StepConfig& cfg = {},
                                                 const ProbeOptions& opt = {},
                                                 unsigned jobs = 1);

struct TailEntropyOptions {
    /// Candidate points drawn around each seed.
    int candidates = 200;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
};

struct TailEntropyResult {
    /// max over seeds of (log N_n - log N_0) / n.
    double estimate = 0.0;
    std::vector<double> per_seed;
    /// Points that stayed in the forward ball up to time n.
    std::vector<std::size_t> ball_sizes;
    /// Greedy (n, delta')-cover counts N_n and their time-0 counterparts N_0.
    std::vector<std::size_t> cover_counts;
    std::vector<std::size_t> initial_counts;
};

/// For each seed x, keeps candidates y with d(phi_k y, phi_k x) <= delta for
/// k = 0..n, covers them greedily by (n, delta')-dynamical balls and reports
/// the growth of the cover count relative to the time-0 cover.
TailEntropyResult tail_entropy_estimate(const FlowModel& model, double delta, int n,
                                        double delta_prime, int n_seeds,
                                        const StepConfig& cfg = {},
                                        const TailEntropyOptions& opt = {});

/// Greedy cover count of the sampled orbits under the max-over-time metric
/// on samples [0, upto]. Exposed for tests.
std::size_t greedy_cover_count(const std::vector<std::vector<State3>>& orbits, int upto,
                               double radius);

}  // namespace lorenzlab
