#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lorenzlab/ergodic_stats.hpp"
#include "lorenzlab/flow_models.hpp"
#include "lorenzlab/integrator.hpp"
#include "lorenzlab/transfer_operator.hpp"

namespace lorenzlab {

struct SweepBudget {
    // Quotient rows.
    UlamPartition partition{};
    UlamOptions ulam{};
    // Flow rows.
    double T = 1e5;
    double burn_in_fraction = 0.05;
    SamplingOptions sampling{};
    std::optional<HistogramGrid> grid;
    int seeds = 4;
    // Spectra (both kinds).
    double lyapunov_T = 2e4;
    double renorm_dt = 0.1;
    long returns = 100'000;
};

struct FamilySpec {
    enum class Kind { quotient, flow };
    Kind kind = Kind::quotient;
    /// Base model. Quotient families read (rho, s) from its geometric params.
    FlowModel base = FlowModel::geometric(GeomLorenzParams::contracting_defaults(0.8));
    /// Quotient: "rho" or "s". Flow: a field of the base parameters, e.g.
    /// "lambda3", "rho", "c_offset", "rayleigh", "sigma", "beta".
    std::string parameter = "rho";
    /// Offsets a; must contain 0.
    std::vector<double> offsets{0.0, 1e-1, -1e-1, 1e-2, -1e-2, 1e-3, -1e-3};
    /// value = base * (1 + a) when set, base + a otherwise.
    bool relative = true;
    SweepBudget budget{};
    std::uint64_t seed = 0;

    /// Throws ArgumentError for an empty grid, a grid without 0 or an unknown
    /// parameter name.
    void validate() const;
    /// Model at offset a (unvalidated).
    FlowModel model_at(double a) const;
    double value_at(double a) const;
};

struct SweepRow {
    double a = 0.0;
    double parameter_value = 0.0;
    std::optional<double> distance;
    std::optional<double> h_quotient;
    std::optional<double> h_flow;
    std::optional<double> lambda_plus;
    std::optional<double> entropy_residual;
    /// Quotient rows: W1 between densities at the full and half sample budget.
    /// Flow rows: largest last-checkpoint change of the seeds' measures.
    std::optional<double> convergence;
    std::string diagnostics;
};

struct SweepResult {
    FamilySpec family;
    /// Sorted by |a|, then a.
    std::vector<SweepRow> rows;

    std::vector<std::string> failures() const;
};

SweepResult quotient_stability_sweep(const FamilySpec& family, unsigned jobs = 1);
SweepResult flow_stability_sweep(const FamilySpec& family, const ObservableDictionary& dict,
                                 unsigned jobs = 1);

struct ModulusFit {
    double C = 0.0;
    double kappa = 0.0;
    double r2 = 0.0;
    std::size_t rows_used = 0;
};

/// Least-squares fit log d = log C + kappa log|a| over rows with a != 0 and a
/// positive distance. Throws ArgumentError with fewer than 4 such rows.
ModulusFit modulus_report(const SweepResult& sweep);

/// Spearman rank correlation (average ranks for ties).
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// Spearman correlation of (|a|, distance) over rows with a != 0 and a distance.
double distance_trend(const SweepResult& sweep);

}  // namespace lorenzlab
