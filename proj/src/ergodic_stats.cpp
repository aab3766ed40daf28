#include "lorenzlab/ergodic_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "lorenzlab/errors.hpp"
#include "lorenzlab/parallel.hpp"

namespace lorenzlab {

TrajectorySampler::TrajectorySampler(const FlowModel& model, const State3& start,
                                     const StepConfig& cfg)
    : model_(&model), cfg_(cfg), position_(start) {
    if (!is_finite(start)) {
        throw DomainError("trajectory start is not finite");
    }
    if (model.is_geometric()) {
        hybrid_.emplace(model.geom(), start);
    } else {
        cfg_.validate();
    }
}

void TrajectorySampler::advance(double dt) {
    if (dt < 0.0 || !std::isfinite(dt)) {
        throw ArgumentError("advance needs a finite dt >= 0");
    }
    if (dt == 0.0) {
        return;
    }
    if (hybrid_) {
        hybrid_->advance(dt);
        position_ = hybrid_->position();
        time_ = hybrid_->time();
    } else {
        position_ = flow(*model_, position_, dt, cfg_);
        time_ += dt;
    }
}

Box default_trapping_box(const FlowModel& model) {
    if (model.is_geometric()) {
        return Box{State3(-1.05, -0.55, -0.05), State3(1.05, 0.55, 1.05)};
    }
    if (std::holds_alternative<ClassicalLorenzParams>(model.variant)) {
        const auto& c = model.classical_params();
        const double zmax = 2.2 * (c.rayleigh + c.sigma);
        const double w = 0.8 * zmax;
        return Box{State3(-w, -w, -5.0), State3(w, w, zmax)};
    }
    // Shifted by half a default cell: integer points (the test fields'
    // equilibria) become cell centres instead of cell corners.
    constexpr double half_cell = 2.0 / 64.0;
    return Box{State3::Constant(-2.0 - half_cell), State3::Constant(2.0 - half_cell)};
}

double Observable::operator()(const State3& p) const {
    switch (kind) {
        case Kind::coordinate:
            return scale * (p[i] - mid[i]) / half[i];
        case Kind::quadratic:
            return scale * ((p[i] - mid[i]) / half[i]) * ((p[j] - mid[j]) / half[j]);
        case Kind::bump:
            return scale * std::exp(-(p - center).squaredNorm() / (2.0 * width * width));
    }
    return 0.0;
}

ObservableDictionary ObservableDictionary::standard(const Box& region, int bumps) {
    if (!((region.hi.array() > region.lo.array()).all())) {
        throw ArgumentError("dictionary region is empty");
    }
    if (bumps < 0) {
        throw ArgumentError("bump count must be >= 0");
    }
    ObservableDictionary dict;
    dict.region = region;
    const State3 mid = 0.5 * (region.lo + region.hi);
    const State3 half = 0.5 * (region.hi - region.lo);
    const char* names = "xyz";

    auto finish = [&](Observable o, double sup, double lip) {
        o.mid = mid;
        o.half = half;
        o.scale = 1.0 / std::max(sup, lip);
        o.lipschitz = lip * o.scale;
        dict.functions.push_back(std::move(o));
    };

    for (int i = 0; i < 3; ++i) {
        Observable o;
        o.kind = Observable::Kind::coordinate;
        o.i = i;
        o.id = std::string(1, names[i]);
        finish(o, 1.0, 1.0 / half[i]);
    }
    for (int i = 0; i < 3; ++i) {
        for (int j = i; j < 3; ++j) {
            Observable o;
            o.kind = Observable::Kind::quadratic;
            o.i = i;
            o.j = j;
            o.id = std::string(1, names[i]) + names[j];
            const double lip = i == j ? 2.0 / half[i]
                                      : std::sqrt(1.0 / (half[i] * half[i]) +
                                                  1.0 / (half[j] * half[j]));
            finish(o, 1.0, lip);
        }
    }
    // Rank-1 lattice with generator (1, 7, 49) mod n.
    const double width = 0.25 * (region.hi - region.lo).minCoeff();
    const int a = 7;
    for (int k = 0; k < bumps; ++k) {
        const double t = (k + 0.5) / bumps;
        State3 frac;
        frac[0] = t;
        frac[1] = std::fmod(t * a, 1.0);
        frac[2] = std::fmod(t * a * a, 1.0);
        Observable o;
        o.kind = Observable::Kind::bump;
        o.center = region.lo + frac.cwiseProduct(region.hi - region.lo);
        o.width = width;
        o.id = "bump" + std::to_string(k);
        finish(o, 1.0, 1.0 / (width * std::sqrt(std::exp(1.0))));
    }
    return dict;
}

namespace {

void check_window(double T, double burn_in, double sample_dt) {
    if (!std::isfinite(T) || !std::isfinite(burn_in) || burn_in < 0.0 || T <= burn_in) {
        throw ArgumentError("need T > burn_in >= 0");
    }
    if (!(sample_dt > 0.0) || !std::isfinite(sample_dt)) {
        throw ArgumentError("sample_dt must be positive");
    }
}

// Sample count over [burn_in, T], a multiple of 10 so checkpoints fall on samples.
long sample_count(double T, double burn_in, double sample_dt) {
    const double raw = (T - burn_in) / sample_dt;
    const long n = static_cast<long>(std::ceil(raw / 10.0 - 1e-9)) * 10;
    return std::max<long>(n, 10);
}

}  // namespace

BirkhoffResult birkhoff_average(const FlowModel& model, const State3& p0,
                                const std::function<double(const State3&)>& phi, double T,
                                double burn_in, const SamplingOptions& opt, std::string id) {
    check_window(T, burn_in, opt.sample_dt);
    const long n = sample_count(T, burn_in, opt.sample_dt);
    const double dt = (T - burn_in) / n;

    TrajectorySampler traj(model, p0, opt.cfg);
    traj.advance(burn_in);

    BirkhoffResult out;
    out.observable_id = std::move(id);
    out.T = T;
    out.trace.reserve(10);
    const long per_checkpoint = n / 10;
    double prev = phi(traj.position());
    double sum = 0.0;
    for (long k = 1; k <= n; ++k) {
        traj.advance(dt);
        const double cur = phi(traj.position());
        sum += 0.5 * (prev + cur);
        prev = cur;
        if (k % per_checkpoint == 0) {
            out.trace.push_back(sum / k);
        }
    }
    out.value = sum / n;
    return out;
}

std::optional<std::size_t> HistogramGrid::index(const State3& p) const {
    if (!box.contains(p)) {
        return std::nullopt;
    }
    const std::array<int, 3> dims{nx, ny, nz};
    std::array<int, 3> c{};
    for (int d = 0; d < 3; ++d) {
        const double f = (p[d] - box.lo[d]) / (box.hi[d] - box.lo[d]);
        c[d] = std::clamp(static_cast<int>(f * dims[d]), 0, dims[d] - 1);
    }
    return (static_cast<std::size_t>(c[0]) * ny + c[1]) * nz + c[2];
}

std::array<int, 3> HistogramGrid::triple(std::size_t idx) const {
    const int k = static_cast<int>(idx % nz);
    idx /= nz;
    const int j = static_cast<int>(idx % ny);
    const int i = static_cast<int>(idx / ny);
    return {i, j, k};
}

State3 HistogramGrid::center(std::size_t idx) const {
    const auto t = triple(idx);
    const std::array<int, 3> dims{nx, ny, nz};
    State3 c;
    for (int d = 0; d < 3; ++d) {
        c[d] = box.lo[d] + (t[d] + 0.5) * (box.hi[d] - box.lo[d]) / dims[d];
    }
    return c;
}

EmpiricalMeasure EmpiricalMeasure::from_points(std::vector<State3> pts) {
    if (pts.empty()) {
        throw ArgumentError("sample cloud is empty");
    }
    EmpiricalMeasure m;
    m.representation = Representation::sample_cloud;
    m.samples = pts.size();
    m.points = std::move(pts);
    return m;
}

double EmpiricalMeasure::total_mass() const {
    if (representation == Representation::sample_cloud) {
        return points.empty() ? 0.0 : 1.0;
    }
    return std::accumulate(weights.begin(), weights.end(), 0.0);
}

std::vector<std::pair<std::size_t, double>> EmpiricalMeasure::nonzero() const {
    std::vector<std::pair<std::size_t, double>> out;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] > 0.0) {
            out.emplace_back(i, weights[i]);
        }
    }
    return out;
}

MeasureRun empirical_measure(const FlowModel& model, const State3& p0, double T, double burn_in,
                             const HistogramGrid& grid, const SamplingOptions& opt,
                             const ObservableDictionary* dict) {
    check_window(T, burn_in, opt.sample_dt);
    if (grid.nx < 1 || grid.ny < 1 || grid.nz < 1 ||
        !((grid.box.hi.array() > grid.box.lo.array()).all())) {
        throw ArgumentError("invalid histogram grid");
    }
    const long n = sample_count(T, burn_in, opt.sample_dt);
    const double dt = (T - burn_in) / n;

    TrajectorySampler traj(model, p0, opt.cfg);
    traj.advance(burn_in);

    std::vector<std::uint64_t> counts(grid.cells(), 0);
    // Cells in order of first visit, with cached dictionary values.
    std::vector<std::size_t> touched;
    std::vector<std::vector<double>> cell_values;

    MeasureRun run;
    const long per_checkpoint = n / 10;
    for (long k = 0; k < n; ++k) {
        if (k > 0) {
            traj.advance(dt);
        }
        const State3& p = traj.position();
        const auto idx = grid.index(p);
        if (!idx) {
            std::ostringstream msg;
            msg << "trajectory left the histogram grid at t = " << traj.time() << ", p = ("
                << p[0] << ", " << p[1] << ", " << p[2] << ")";
            throw EscapeError(msg.str());
        }
        if (counts[*idx]++ == 0 && dict) {
            touched.push_back(*idx);
            const State3 c = grid.center(*idx);
            std::vector<double> vals(dict->size());
            for (std::size_t f = 0; f < dict->size(); ++f) {
                vals[f] = dict->functions[f](c);
            }
            cell_values.push_back(std::move(vals));
        }
        if (dict && (k + 1) % per_checkpoint == 0) {
            std::vector<double> acc(dict->size(), 0.0);
            for (std::size_t t = 0; t < touched.size(); ++t) {
                const double w = static_cast<double>(counts[touched[t]]);
                for (std::size_t f = 0; f < acc.size(); ++f) {
                    acc[f] += w * cell_values[t][f];
                }
            }
            for (double& a : acc) {
                a /= static_cast<double>(k + 1);
            }
            run.checkpoints.push_back(std::move(acc));
        }
    }

    EmpiricalMeasure& m = run.measure;
    m.representation = EmpiricalMeasure::Representation::histogram3d;
    m.grid = grid;
    m.total_time = T;
    m.burn_in = burn_in;
    m.samples = static_cast<std::size_t>(n);
    m.weights.assign(grid.cells(), 0.0);
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] > 0) {
            m.weights[i] = static_cast<double>(counts[i]) / static_cast<double>(n);
        }
    }
    return run;
}

std::vector<double> integrate(const ObservableDictionary& dict, const EmpiricalMeasure& m) {
    std::vector<double> out(dict.size(), 0.0);
    if (m.representation == EmpiricalMeasure::Representation::sample_cloud) {
        if (m.points.empty()) {
            throw ArgumentError("sample cloud is empty");
        }
        for (const State3& p : m.points) {
            for (std::size_t f = 0; f < out.size(); ++f) {
                out[f] += dict.functions[f](p);
            }
        }
        for (double& v : out) {
            v /= static_cast<double>(m.points.size());
        }
        return out;
    }
    for (std::size_t i = 0; i < m.weights.size(); ++i) {
        const double w = m.weights[i];
        if (w <= 0.0) {
            continue;
        }
        const State3 c = m.grid.center(i);
        for (std::size_t f = 0; f < out.size(); ++f) {
            out[f] += w * dict.functions[f](c);
        }
    }
    return out;
}

double dual_lipschitz_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw ArgumentError("integral vectors differ in length");
    }
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, std::abs(a[i] - b[i]));
    }
    return d;
}

double dual_lipschitz_distance(const EmpiricalMeasure& m1, const EmpiricalMeasure& m2,
                               const ObservableDictionary& dict) {
    const bool h1 = m1.representation == EmpiricalMeasure::Representation::histogram3d;
    const bool h2 = m2.representation == EmpiricalMeasure::Representation::histogram3d;
    if (h1 && h2 && !(m1.grid == m2.grid)) {
        throw ArgumentError("measures live on different grids");
    }
    return dual_lipschitz_distance(integrate(dict, m1), integrate(dict, m2));
}

namespace {

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) {
            parent[std::max(a, b)] = std::min(a, b);
        }
    }
};

}  // namespace

BasinResult basin_agreement(const FlowModel& model, const std::vector<State3>& seeds,
                            const ObservableDictionary& dict, double T, double tol,
                            const BasinOptions& opt) {
    if (seeds.size() < 2) {
        throw ArgumentError("basin agreement needs at least 2 seeds");
    }
    if (!(tol > 0.0)) {
        throw ArgumentError("tol must be positive");
    }
    if (opt.burn_in_fraction < 0.0 || opt.burn_in_fraction >= 1.0) {
        throw ArgumentError("burn_in_fraction must lie in [0, 1)");
    }
    const HistogramGrid grid = opt.grid ? *opt.grid : HistogramGrid{default_trapping_box(model)};
    const std::size_t n = seeds.size();
    std::vector<std::vector<std::vector<double>>> traces(n);
    parallel_for(n, opt.jobs, [&](std::size_t i) {
        traces[i] = empirical_measure(model, seeds[i], T, opt.burn_in_fraction * T, grid,
                                      opt.sampling, &dict)
                        .checkpoints;
    });

    BasinResult out;
    out.unconverged.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& tr = traces[i];
        out.unconverged[i] =
            dual_lipschitz_distance(tr[tr.size() - 1], tr[tr.size() - 2]) > tol / 2.0;
    }
    out.distances.assign(n * n, 0.0);
    UnionFind uf(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = dual_lipschitz_distance(traces[i].back(), traces[j].back());
            out.distances[i * n + j] = d;
            out.distances[j * n + i] = d;
            if (d <= tol) {
                uf.unite(i, j);
            }
        }
    }
    std::vector<int> label(n, -1);
    out.assignment.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t root = uf.find(i);
        if (label[root] < 0) {
            label[root] = out.clusters++;
        }
        out.assignment[i] = label[root];
    }
    return out;
}

}  // namespace lorenzlab
