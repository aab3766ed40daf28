#pragma once

#include <array>
#include <optional>
#include <vector>

#include "lorenzlab/flow_models.hpp"
#include "lorenzlab/integrator.hpp"
#include "lorenzlab/poincare.hpp"
#include "lorenzlab/quotient_maps.hpp"
#include "lorenzlab/transfer_operator.hpp"

namespace lorenzlab {

struct LyapunovSpectrum {
    /// Sorted descending.
    std::array<double, 3> exponents{};
    double T = 0.0;
    double renorm_dt = 0.0;
    double burn_in = 0.0;
    /// Running (sorted) exponents at increasing times after burn-in.
    std::vector<double> trace_times;
    std::vector<std::array<double, 3>> trace;
};

struct LyapunovOptions {
    /// Time discarded before accumulation starts (the frame is still evolved).
    double burn_in = 0.0;
    /// Initial tangent frame; must be invertible.
    std::optional<Matrix3> initial_frame;
    int trace_points = 40;
};

/// Benettin reorthonormalization: the tangent frame is evolved over windows
/// of length renorm_dt and QR-factored after each window; the exponents are
/// the averaged log |R_ii| over [burn_in, T]. Geometric models use the exact
/// hybrid tangent map (diagonal inside the cube, gluing Jacobian on each jump).
/// Throws RenormalizationError when a window's frame has condition number
/// above 1e12.
LyapunovSpectrum lyapunov_spectrum(const FlowModel& model, const State3& p0, double T,
                                   double renorm_dt, const StepConfig& cfg = {},
                                   const LyapunovOptions& opt = {});

/// Sum of the two largest exponents. Requires the running sum to have moved
/// by less than 1% over the last quarter of the trace (ConvergenceError
/// otherwise); spectra without a trace are taken as given.
double cu_volume_growth(const LyapunovSpectrum& spectrum);

/// sum_i weight_i log|T'(x_i)| with x_i the bin midpoint, or the midpoints of
/// the one-sided pieces for bins containing a breakpoint.
double quotient_entropy(const PiecewiseMap& map, const InvariantDensity& density);
double quotient_entropy(const ContractingLorenzMap& map, const InvariantDensity& density);

struct EntropyEstimate {
    double h_quotient = 0.0;
    double mean_return_time = 0.0;
    double h_flow = 0.0;
    double lambda_plus = 0.0;
    /// |h_flow - lambda_plus|.
    double residual = 0.0;
    double relative_residual = 0.0;
    double tolerance = 0.15;
    bool within_tolerance = false;
};

EntropyEstimate entropy_estimate(double h_quotient, double mean_return_time, double lambda_plus,
                                 double tolerance = 0.15);

EntropyEstimate entropy_formula_residual(const PiecewiseMap& map, const InvariantDensity& density,
                                         const ReturnTimeStats& returns,
                                         const LyapunovSpectrum& spectrum,
                                         double tolerance = 0.15);

/// Statistics of n consecutive first-return times along the orbit of sp,
/// after `skip` returns. Contracting model only.
ReturnTimeStats orbit_return_times(const GeomLorenzParams& params, SectionPoint sp, long n,
                                   long skip = 100);

struct EntropyCheckOptions {
    UlamPartition partition{};
    UlamOptions ulam{};
    double T = 2e5;
    double renorm_dt = 1.0;
    double burn_in = 1e3;
    long returns = 200'000;
    double tolerance = 0.15;
    SectionPoint start = SectionPoint::raw(0.1234567, 0.1);
};

struct EntropyCheck {
    EntropyEstimate estimate;
    LyapunovSpectrum spectrum;
    ReturnTimeStats returns;
    InvariantDensity density;
    SolveInfo solve;
};

/// Full Entropy Formula check for a contracting geometric model: Ulam density
/// of the quotient map, Rokhlin entropy, Abramov normalization by the mean
/// return time, and lambda+ from the hybrid spectrum.
EntropyCheck run_entropy_check(const FlowModel& model, const EntropyCheckOptions& opt = {});

}  // namespace lorenzlab
