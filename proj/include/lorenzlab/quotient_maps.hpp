#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lorenzlab/flow_models.hpp"

namespace lorenzlab {

/// One monotone C^3 piece of an interval map. eval(x, k) returns the k-th
/// derivative (k = 0..3). The formula must extend continuously to the closed
/// interval [lo, hi]; endpoint values are read as one-sided limits.
struct Branch {
    double lo = 0.0;
    double hi = 0.0;
    std::function<double(double, int)> eval;
};

/// Piecewise-monotone map of [lo, hi] into itself with finitely many branches.
class PiecewiseMap {
public:
    PiecewiseMap(double lo, double hi, std::vector<Branch> branches, std::string name = {});

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    const std::vector<Branch>& branches() const { return branches_; }
    const std::string& name() const { return name_; }
    /// Interior branch boundaries.
    std::vector<double> breakpoints() const;

    /// Throws CriticalPointError at an interior breakpoint.
    double operator()(double x) const { return derivative(x, 0); }
    double derivative(double x, int order) const;
    /// One-sided limit of the k-th derivative at x, from the right when
    /// from_right is set.
    double limit(double x, bool from_right, int order = 0) const;

private:
    const Branch& branch_at(double x) const;

    double lo_;
    double hi_;
    std::vector<Branch> branches_;
    std::string name_;
};

/// T(x) = sgn(x) (-rho |x|^s + 1/2) on [-1/2, 1/2].
class ContractingLorenzMap {
public:
    /// Checked: rho > 0, s > 1, rho <= (1/2)^(-s).
    ContractingLorenzMap(double rho, double s);
    /// Unchecked, for boundary cases such as s = 1.
    static ContractingLorenzMap unchecked(double rho, double s);
    static ContractingLorenzMap from_params(const GeomLorenzParams& params);

    double rho() const { return rho_; }
    double s() const { return s_; }

    /// Throws CriticalPointError at x = 0 and DomainError outside [-1/2, 1/2].
    double eval(double x) const;
    double derivative(double x, int order) const;
    /// T(0^-), T(0^+).
    std::pair<double, double> limits_at_zero() const { return {-0.5, 0.5}; }

    PiecewiseMap as_piecewise() const;

private:
    ContractingLorenzMap(double rho, double s, bool);
    double rho_;
    double s_;
};

/// Quotient map of the expanding geometric model; same formula with
/// s = -lambda3/lambda1 < 1, so |T'| blows up at 0.
PiecewiseMap expanding_quotient_map(const GeomLorenzParams& params);

PiecewiseMap identity_map();
/// Tent map 1 - 2|x| rescaled to [-1/2, 1/2].
PiecewiseMap tent_map();
/// Doubling map rescaled to [-1/2, 1/2].
PiecewiseMap doubling_map();

/// S(T)(x) = T'''/T' - (3/2) (T''/T')^2.
double schwarzian(const PiecewiseMap& map, double x);
double schwarzian(const ContractingLorenzMap& map, double x);
/// -(s^2 - 1) / (2 x^2), the closed form for the pure-power branches.
double schwarzian_closed_form(const ContractingLorenzMap& map, double x);

enum class Verdict { pass, fail, undetermined };
const char* to_string(Verdict v);

struct PropertyResult {
    Verdict verdict = Verdict::undetermined;
    std::string evidence;
};

struct MapDiagnostics {
    /// Items (1)-(6): two onto C^3 branches with T' = O(|x|^(s-1)); T(0^+-) =
    /// +-1/2; T' < 0; max |T'| at the endpoints +-1/2; +-1/2 preperiodic
    /// repelling; negative Schwarzian.
    std::array<PropertyResult, 6> items;
    double c_minus = 0.0;
    double c_plus = 0.0;
    /// min |T'| over the sample grid; the expanding regime wants > sqrt(2).
    double min_abs_derivative = 0.0;
};

/// horizon: iterations scanned when searching the endpoint orbits for a
/// cycle; tol: revisit distance that counts as closing the cycle.
MapDiagnostics check_properties(const PiecewiseMap& map, long horizon = 10'000, double tol = 1e-9);
MapDiagnostics check_properties(const ContractingLorenzMap& map, long horizon = 10'000,
                                double tol = 1e-9);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double length() const { return hi - lo; }
};

struct EventuallyOntoResult {
    std::optional<int> n;
    double final_length = 0.0;
    Interval final_image;
};

/// Iterates J until its image covers [c-, c+]. Images straddling the
/// discontinuity are split there; when the union of the two one-sided images
/// does not cover, iteration continues with the longer piece.
EventuallyOntoResult locally_eventually_onto(const PiecewiseMap& map, Interval j, int n_max);

struct OrbitResult {
    std::vector<double> values;
    /// Indices of iterates with |x - breakpoint| < lower_bound.
    std::vector<std::size_t> near_critical;
    /// Set when an iterate lands exactly on a breakpoint; the orbit stops there.
    bool hit_critical = false;
};

OrbitResult orbit(const PiecewiseMap& map, double x0, long n, double lower_bound = 0.0);

}  // namespace lorenzlab
