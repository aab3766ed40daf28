#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lorenzlab/flow_models.hpp"
#include "lorenzlab/integrator.hpp"
#include "lorenzlab/poincare.hpp"

namespace lorenzlab {

/// Forward trajectory of any model: exact hybrid passage for the geometric
/// variants, numerical integration otherwise.
class TrajectorySampler {
public:
    TrajectorySampler(const FlowModel& model, const State3& start, const StepConfig& cfg);

    const State3& position() const { return position_; }
    double time() const { return time_; }
    void advance(double dt);
    /// Non-null for geometric models.
    const HybridTrajectory* hybrid() const { return hybrid_ ? &*hybrid_ : nullptr; }

private:
    const FlowModel* model_;
    StepConfig cfg_;
    std::optional<HybridTrajectory> hybrid_;
    State3 position_;
    double time_ = 0.0;
};

/// Default trapping box of a model (the region histograms are built on).
Box default_trapping_box(const FlowModel& model);

/// A bounded Lipschitz test function, scaled so that |phi| <= 1 and
/// Lip(phi) <= 1 on the dictionary's region.
struct Observable {
    enum class Kind { coordinate, quadratic, bump };
    Kind kind = Kind::coordinate;
    std::string id;
    int i = 0;
    int j = 0;
    State3 center = State3::Zero();
    double width = 1.0;
    /// Normalization factor 1 / max(sup|phi|, Lip(phi)).
    double scale = 1.0;
    /// Box center and half widths used to reduce coordinates to [-1, 1].
    State3 mid = State3::Zero();
    State3 half = State3::Ones();
    double lipschitz = 1.0;

    double operator()(const State3& p) const;
};

struct ObservableDictionary {
    Box region;
    std::vector<Observable> functions;

    /// 3 coordinates, 6 quadratic monomials and `bumps` Gaussian bumps centred
    /// on a rank-1 (Korobov) lattice of the region.
    static ObservableDictionary standard(const Box& region, int bumps = 23);

    std::size_t size() const { return functions.size(); }
};

struct BirkhoffResult {
    std::string observable_id;
    double value = 0.0;
    double T = 0.0;
    /// Running averages at burn_in + k (T - burn_in)/10, k = 1..10.
    std::vector<double> trace;
};

struct SamplingOptions {
    double sample_dt = 0.01;
    StepConfig cfg{};
};

/// Time average of phi over [burn_in, T] by the trapezoidal rule on samples
/// spaced (at most) sample_dt apart.
BirkhoffResult birkhoff_average(const FlowModel& model, const State3& p0,
                                const std::function<double(const State3&)>& phi, double T,
                                double burn_in, const SamplingOptions& opt = {},
                                std::string id = "phi");

/// Uniform cell grid over a box.
struct HistogramGrid {
    Box box;
    int nx = 64;
    int ny = 64;
    int nz = 64;

    std::size_t cells() const { return static_cast<std::size_t>(nx) * ny * nz; }
    /// Linear cell index, or nullopt outside the box.
    std::optional<std::size_t> index(const State3& p) const;
    State3 center(std::size_t idx) const;
    std::array<int, 3> triple(std::size_t idx) const;
    bool operator==(const HistogramGrid& o) const {
        return box.lo == o.box.lo && box.hi == o.box.hi && nx == o.nx && ny == o.ny &&
               nz == o.nz;
    }
};

struct EmpiricalMeasure {
    enum class Representation { histogram3d, sample_cloud };
    Representation representation = Representation::histogram3d;
    HistogramGrid grid;
    /// Cell masses (histogram3d), dense over grid.cells().
    std::vector<double> weights;
    /// Points with equal mass (sample_cloud).
    std::vector<State3> points;
    double total_time = 0.0;
    double burn_in = 0.0;
    std::size_t samples = 0;

    static EmpiricalMeasure from_points(std::vector<State3> pts);
    double total_mass() const;
    /// (cell index, weight) for non-empty cells, ascending.
    std::vector<std::pair<std::size_t, double>> nonzero() const;
};

struct MeasureRun {
    EmpiricalMeasure measure;
    /// Dictionary integrals of the running measure at the 10 checkpoints
    /// (filled when a dictionary is supplied).
    std::vector<std::vector<double>> checkpoints;
};

/// Histogram of the trajectory samples taken every sample_dt after burn_in.
/// A sample outside the grid raises EscapeError.
MeasureRun empirical_measure(const FlowModel& model, const State3& p0, double T, double burn_in,
                             const HistogramGrid& grid, const SamplingOptions& opt = {},
                             const ObservableDictionary* dict = nullptr);

/// (integral of phi_k dm)_k over the dictionary.
std::vector<double> integrate(const ObservableDictionary& dict, const EmpiricalMeasure& m);

/// max_k |int phi_k dm1 - int phi_k dm2|.
double dual_lipschitz_distance(const EmpiricalMeasure& m1, const EmpiricalMeasure& m2,
                               const ObservableDictionary& dict);
double dual_lipschitz_distance(const std::vector<double>& integrals1,
                               const std::vector<double>& integrals2);

struct BasinOptions {
    double burn_in_fraction = 0.05;
    SamplingOptions sampling{};
    std::optional<HistogramGrid> grid;
    unsigned jobs = 1;
};

struct BasinResult {
    int clusters = 0;
    std::vector<int> assignment;
    /// Seeds whose last checkpoint moved by more than tol/2.
    std::vector<bool> unconverged;
    /// Pairwise dual-Lipschitz distances, row-major n x n.
    std::vector<double> distances;
};

/// Single-linkage clustering of the seeds' empirical measures with threshold
/// tol. Cluster labels are numbered in order of the first seed carrying them.
BasinResult basin_agreement(const FlowModel& model, const std::vector<State3>& seeds,
                            const ObservableDictionary& dict, double T, double tol,
                            const BasinOptions& opt = {});

}  // namespace lorenzlab
