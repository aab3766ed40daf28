#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Sparse>

#include "lorenzlab/quotient_maps.hpp"

namespace lorenzlab {

struct UlamPartition {
    int n_bins = 1024;
    double lo = -0.5;
    double hi = 0.5;

    /// Throws ArgumentError unless n_bins >= 2 and lo < hi.
    void validate() const;
    double width() const { return (hi - lo) / n_bins; }
    double center(int i) const { return lo + (i + 0.5) * width(); }
    double edge(int i) const { return i == n_bins ? hi : lo + i * width(); }
    /// Bin index of x, clamped to the partition.
    int bin_of(double x) const;
    bool operator==(const UlamPartition&) const = default;
};

enum class UlamSampling { stratified, monte_carlo };

struct UlamOptions {
    int samples_per_bin = 100;
    UlamSampling sampling = UlamSampling::stratified;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
};

/// Row-stochastic Ulam matrix: entry (i, j) is the fraction of bin i that the
/// map sends into bin j.
struct UlamMatrix {
    UlamPartition partition;
    Eigen::SparseMatrix<double, Eigen::RowMajor> p;
};

/// Bins containing a branch boundary are sub-split there so every sample is
/// evaluated on its own branch; sample counts in the pieces are proportional
/// to their lengths.
UlamMatrix build_ulam(const PiecewiseMap& map, const UlamPartition& partition,
                      const UlamOptions& options = {});

struct InvariantDensity {
    UlamPartition partition;
    /// Bin masses; non-negative, summing to 1.
    std::vector<double> weights;

    double total_mass() const;
};

struct SolveInfo {
    int iterations = 0;
    double residual = 0.0;
};

/// Power iteration of the lazy adjoint action p <- (P^T p + p)/2 from the
/// uniform vector until the residual |P^T p - p|_1 is <= tol. Throws
/// ConvergenceError after max_iters.
InvariantDensity stationary_density(const UlamMatrix& matrix, double tol = 1e-10,
                                    int max_iters = 100'000, SolveInfo* info = nullptr);

/// One application of the adjoint action (mass-preserving).
std::vector<double> push_forward(const UlamMatrix& matrix, const std::vector<double>& weights);

/// Wasserstein-1 distance between the two histograms: the L1 distance of the
/// cumulative distribution functions.
double density_distance_w1(const InvariantDensity& a, const InvariantDensity& b);

double density_distance_l1(const InvariantDensity& a, const InvariantDensity& b);

}  // namespace lorenzlab
