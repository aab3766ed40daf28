#include "lorenzlab/transfer_operator.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "lorenzlab/errors.hpp"
#include "lorenzlab/parallel.hpp"
#include "lorenzlab/rng.hpp"

namespace lorenzlab {

void UlamPartition::validate() const {
    if (n_bins < 2) {
        throw ArgumentError("Ulam partition needs at least 2 bins");
    }
    if (!(lo < hi)) {
        throw ArgumentError("Ulam partition needs lo < hi");
    }
}

int UlamPartition::bin_of(double x) const {
    const int i = static_cast<int>(std::floor((x - lo) / width()));
    return std::clamp(i, 0, n_bins - 1);
}

namespace {

using Triplet = Eigen::Triplet<double>;

std::vector<std::pair<int, double>> assemble_row(const PiecewiseMap& map,
                                                 const UlamPartition& part, int i,
                                                 const UlamOptions& opt) {
    const double a = part.edge(i);
    const double b = part.edge(i + 1);
    const double len = b - a;
    // Pieces of the bin on which a single branch applies.
    std::vector<double> cuts{a};
    for (double bp : map.breakpoints()) {
        if (bp > a && bp < b) {
            cuts.push_back(bp);
        }
    }
    cuts.push_back(b);

    std::map<int, double> row;
    CounterRng rng(opt.seed, static_cast<std::uint64_t>(i));
    const double slack = 1e-9 * (map.hi() - map.lo());
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double pa = cuts[k];
        const double pb = cuts[k + 1];
        const double frac = (pb - pa) / len;
        const int n = std::max(
            1, static_cast<int>(std::lround(opt.samples_per_bin * frac)));
        const double w = frac / n;
        for (int m = 0; m < n; ++m) {
            double x;
            if (opt.sampling == UlamSampling::stratified) {
                x = pa + (pb - pa) * (m + 0.5) / n;
            } else {
                x = rng.uniform(pa, pb);
                if (x == pa) {
                    x = 0.5 * (pa + pb);
                }
            }
            const double y = map(x);
            if (y < part.lo - slack || y > part.hi + slack) {
                throw ArgumentError("build_ulam: map image leaves the partition");
            }
            row[part.bin_of(y)] += w;
        }
    }
    return {row.begin(), row.end()};
}

}  // namespace

UlamMatrix build_ulam(const PiecewiseMap& map, const UlamPartition& partition,
                      const UlamOptions& options) {
    partition.validate();
    if (options.samples_per_bin < 10) {
        throw ArgumentError("build_ulam: samples_per_bin must be >= 10");
    }
    const auto n = static_cast<std::size_t>(partition.n_bins);
    std::vector<std::vector<std::pair<int, double>>> rows(n);
    parallel_for(n, options.jobs, [&](std::size_t i) {
        rows[i] = assemble_row(map, partition, static_cast<int>(i), options);
    });
    std::vector<Triplet> trips;
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (const auto& [j, w] : rows[i]) {
            sum += w;
        }
        for (const auto& [j, w] : rows[i]) {
            trips.emplace_back(static_cast<int>(i), j, w / sum);
        }
    }
    UlamMatrix m;
    m.partition = partition;
    m.p.resize(partition.n_bins, partition.n_bins);
    m.p.setFromTriplets(trips.begin(), trips.end());
    m.p.makeCompressed();
    return m;
}

double InvariantDensity::total_mass() const {
    double s = 0.0;
    for (double w : weights) {
        s += w;
    }
    return s;
}

std::vector<double> push_forward(const UlamMatrix& matrix, const std::vector<double>& weights) {
    if (weights.size() != static_cast<std::size_t>(matrix.p.rows())) {
        throw ArgumentError("push_forward: size mismatch");
    }
    std::vector<double> out(weights.size(), 0.0);
    for (int i = 0; i < matrix.p.outerSize(); ++i) {
        const double wi = weights[static_cast<std::size_t>(i)];
        if (wi == 0.0) {
            continue;
        }
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(matrix.p, i); it; ++it) {
            out[static_cast<std::size_t>(it.col())] += wi * it.value();
        }
    }
    return out;
}

InvariantDensity stationary_density(const UlamMatrix& matrix, double tol, int max_iters,
                                    SolveInfo* info) {
    matrix.partition.validate();
    const auto n = static_cast<std::size_t>(matrix.partition.n_bins);
    std::vector<double> p(n, 1.0 / static_cast<double>(n));
    double change = 0.0;
    // Lazy chain (P + I)/2: same stationary vector, no periodic oscillation.
    for (int it = 1; it <= max_iters; ++it) {
        std::vector<double> q = push_forward(matrix, p);
        double mass = 0.0;
        for (double v : q) {
            mass += v;
        }
        change = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            q[k] /= mass;
            change += std::abs(q[k] - p[k]);
            q[k] = 0.5 * (q[k] + p[k]);
        }
        p.swap(q);
        if (change <= tol) {
            if (info) {
                *info = SolveInfo{it, change};
            }
            return InvariantDensity{matrix.partition, std::move(p)};
        }
    }
    if (info) {
        *info = SolveInfo{max_iters, change};
    }
    throw ConvergenceError("stationary_density: no convergence within max_iters", change);
}

namespace {

void require_same(const InvariantDensity& a, const InvariantDensity& b) {
    if (!(a.partition == b.partition) || a.weights.size() != b.weights.size()) {
        throw ArgumentError("density distance: partitions differ");
    }
}

}  // namespace

double density_distance_w1(const InvariantDensity& a, const InvariantDensity& b) {
    require_same(a, b);
    double cdf = 0.0;
    double acc = 0.0;
    for (std::size_t k = 0; k < a.weights.size(); ++k) {
        cdf += a.weights[k] - b.weights[k];
        acc += std::abs(cdf);
    }
    return acc * a.partition.width();
}

double density_distance_l1(const InvariantDensity& a, const InvariantDensity& b) {
    require_same(a, b);
    double acc = 0.0;
    for (std::size_t k = 0; k < a.weights.size(); ++k) {
        acc += std::abs(a.weights[k] - b.weights[k]);
    }
    return acc;
}

}  // namespace lorenzlab
