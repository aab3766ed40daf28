#include "lorenzlab/quotient_maps.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "lorenzlab/errors.hpp"

namespace lorenzlab {

namespace {

std::string num(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

// k-th derivative of the right branch x -> -rho x^s + 1/2 at x > 0.
double power_branch(double rho, double s, double x, int order) {
    if (order == 0) {
        return -rho * std::pow(x, s) + 0.5;
    }
    double coeff = -rho;
    double e = s;
    for (int k = 0; k < order; ++k) {
        coeff *= e;
        e -= 1.0;
    }
    return coeff == 0.0 ? 0.0 : coeff * std::pow(x, e);
}

// Odd extension: T(x) = -T(-x), so T^(k)(x) = (-1)^(k+1) T^(k)(-x).
double odd_power_map(double rho, double s, double x, int order) {
    if (x > 0.0) {
        return power_branch(rho, s, x, order);
    }
    const double v = power_branch(rho, s, -x, order);
    return (order % 2 == 0) ? -v : v;
}

PiecewiseMap power_map(double rho, double s, std::string name) {
    std::vector<Branch> b;
    b.push_back(Branch{-0.5, 0.0, [rho, s](double x, int k) {
                           const double ax = std::max(-x, 0.0);
                           const double v = power_branch(rho, s, ax, k);
                           return (k % 2 == 0) ? -v : v;
                       }});
    b.push_back(Branch{0.0, 0.5, [rho, s](double x, int k) {
                           return power_branch(rho, s, std::max(x, 0.0), k);
                       }});
    return PiecewiseMap(-0.5, 0.5, std::move(b), std::move(name));
}

Branch affine_branch(double lo, double hi, double slope, double intercept) {
    return Branch{lo, hi, [slope, intercept](double x, int k) {
                      if (k == 0) {
                          return slope * x + intercept;
                      }
                      return k == 1 ? slope : 0.0;
                  }};
}

}  // namespace

PiecewiseMap::PiecewiseMap(double lo, double hi, std::vector<Branch> branches, std::string name)
    : lo_(lo), hi_(hi), branches_(std::move(branches)), name_(std::move(name)) {
    if (!(lo < hi) || branches_.empty()) {
        throw ArgumentError("piecewise map: empty domain or no branches");
    }
    if (branches_.front().lo != lo || branches_.back().hi != hi) {
        throw ArgumentError("piecewise map: branches must cover the domain");
    }
    for (std::size_t i = 0; i < branches_.size(); ++i) {
        if (!(branches_[i].lo < branches_[i].hi) || !branches_[i].eval) {
            throw ArgumentError("piecewise map: degenerate branch");
        }
        if (i > 0 && branches_[i].lo != branches_[i - 1].hi) {
            throw ArgumentError("piecewise map: branches must be contiguous");
        }
    }
}

std::vector<double> PiecewiseMap::breakpoints() const {
    std::vector<double> out;
    for (std::size_t i = 1; i < branches_.size(); ++i) {
        out.push_back(branches_[i].lo);
    }
    return out;
}

const Branch& PiecewiseMap::branch_at(double x) const {
    if (!std::isfinite(x) || x < lo_ || x > hi_) {
        throw DomainError("piecewise map: x = " + num(x) + " outside the domain");
    }
    for (std::size_t i = 0; i < branches_.size(); ++i) {
        const Branch& b = branches_[i];
        if (x < b.hi || i + 1 == branches_.size()) {
            if (i > 0 && x == b.lo) {
                throw CriticalPointError("piecewise map: x = " + num(x) +
                                         " is a branch boundary");
            }
            return b;
        }
        if (x == b.hi) {
            throw CriticalPointError("piecewise map: x = " + num(x) + " is a branch boundary");
        }
    }
    return branches_.back();
}

double PiecewiseMap::derivative(double x, int order) const {
    if (order < 0 || order > 3) {
        throw ArgumentError("derivative order must be in 0..3");
    }
    return branch_at(x).eval(x, order);
}

double PiecewiseMap::limit(double x, bool from_right, int order) const {
    for (const Branch& b : branches_) {
        if (from_right ? (x >= b.lo && x < b.hi) : (x > b.lo && x <= b.hi)) {
            return b.eval(x, order);
        }
    }
    throw DomainError("piecewise map: no one-sided limit at " + num(x));
}

ContractingLorenzMap::ContractingLorenzMap(double rho, double s, bool) : rho_(rho), s_(s) {}

ContractingLorenzMap::ContractingLorenzMap(double rho, double s) : rho_(rho), s_(s) {
    if (!(rho > 0.0) || !(s > 1.0) || !std::isfinite(rho) || !std::isfinite(s)) {
        throw ArgumentError("contracting Lorenz map needs rho > 0 and s > 1");
    }
    if (rho > std::pow(0.5, -s) * (1.0 + 1e-15)) {
        throw ArgumentError("contracting Lorenz map needs rho <= (1/2)^(-s)");
    }
}

ContractingLorenzMap ContractingLorenzMap::unchecked(double rho, double s) {
    return ContractingLorenzMap(rho, s, true);
}

ContractingLorenzMap ContractingLorenzMap::from_params(const GeomLorenzParams& params) {
    return ContractingLorenzMap(params.rho, params.s());
}

double ContractingLorenzMap::eval(double x) const { return derivative(x, 0); }

double ContractingLorenzMap::derivative(double x, int order) const {
    if (order < 0 || order > 3) {
        throw ArgumentError("derivative order must be in 0..3");
    }
    if (!std::isfinite(x) || std::abs(x) > 0.5) {
        throw DomainError("contracting map: x = " + num(x) + " outside [-1/2, 1/2]");
    }
    if (x == 0.0) {
        throw CriticalPointError("contracting map: x = 0 is the critical point");
    }
    return odd_power_map(rho_, s_, x, order);
}

PiecewiseMap ContractingLorenzMap::as_piecewise() const {
    return power_map(rho_, s_, "contracting-lorenz(rho=" + num(rho_) + ", s=" + num(s_) + ")");
}

PiecewiseMap expanding_quotient_map(const GeomLorenzParams& params) {
    return power_map(params.rho, params.s(), "expanding-lorenz");
}

PiecewiseMap identity_map() {
    return PiecewiseMap(-0.5, 0.5, {affine_branch(-0.5, 0.5, 1.0, 0.0)}, "identity");
}

PiecewiseMap tent_map() {
    return PiecewiseMap(-0.5, 0.5,
                        {affine_branch(-0.5, 0.0, 2.0, 0.5), affine_branch(0.0, 0.5, -2.0, 0.5)},
                        "tent");
}

PiecewiseMap doubling_map() {
    return PiecewiseMap(-0.5, 0.5,
                        {affine_branch(-0.5, 0.0, 2.0, 0.5), affine_branch(0.0, 0.5, 2.0, -0.5)},
                        "doubling");
}

namespace {

double schwarzian_from(double d1, double d2, double d3) {
    if (d1 == 0.0 || !std::isfinite(d1)) {
        throw SingularityError("schwarzian: degenerate first derivative");
    }
    const double q = d2 / d1;
    return d3 / d1 - 1.5 * q * q;
}

}  // namespace

double schwarzian(const PiecewiseMap& map, double x) {
    return schwarzian_from(map.derivative(x, 1), map.derivative(x, 2), map.derivative(x, 3));
}

double schwarzian(const ContractingLorenzMap& map, double x) {
    return schwarzian_from(map.derivative(x, 1), map.derivative(x, 2), map.derivative(x, 3));
}

double schwarzian_closed_form(const ContractingLorenzMap& map, double x) {
    if (x == 0.0) {
        throw CriticalPointError("schwarzian: x = 0 is the critical point");
    }
    const double s = map.s();
    return -(s * s - 1.0) / (2.0 * x * x);
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::pass:
            return "pass";
        case Verdict::fail:
            return "fail";
        case Verdict::undetermined:
            return "undetermined";
    }
    return "undetermined";
}

namespace {

constexpr int kGrid = 1000;

// Interior sample points of a branch, avoiding both ends.
std::vector<double> branch_grid(const Branch& b) {
    std::vector<double> xs;
    xs.reserve(kGrid);
    for (int i = 0; i < kGrid; ++i) {
        xs.push_back(b.lo + (b.hi - b.lo) * (i + 0.5) / kGrid);
    }
    return xs;
}

PropertyResult make(bool ok, std::string evidence) {
    return PropertyResult{ok ? Verdict::pass : Verdict::fail, std::move(evidence)};
}

// Orbit of an endpoint: look for a cycle and classify it by the derivative
// product along the cycle.
PropertyResult endpoint_cycle(const PiecewiseMap& map, double x0, long horizon, double tol) {
    std::map<double, long> seen;
    std::vector<double> xs{x0};
    seen.emplace(x0, 0);
    for (long k = 1; k <= horizon; ++k) {
        double next;
        try {
            next = map(xs.back());
        } catch (const CriticalPointError&) {
            return {Verdict::undetermined,
                    "orbit of " + num(x0) + " hits a breakpoint at step " + num(k)};
        }
        long match = -1;
        auto it = seen.lower_bound(next - tol);
        for (; it != seen.end() && it->first <= next + tol; ++it) {
            if (match < 0 || it->second < match) {
                match = it->second;
            }
        }
        if (match >= 0) {
            double product = 1.0;
            for (long i = match; i < k; ++i) {
                product *= std::abs(map.derivative(xs[static_cast<std::size_t>(i)], 1));
            }
            const long period = k - match;
            std::string ev = "orbit of " + num(x0) + ": preperiod " + num(match) + ", period " +
                             num(period) + ", |multiplier| " + num(product);
            return {product > 1.0 ? Verdict::pass : Verdict::fail, ev};
        }
        seen.emplace(next, k);
        xs.push_back(next);
    }
    return {Verdict::undetermined,
            "no cycle within " + num(horizon) + " iterates of " + num(x0)};
}

}  // namespace

MapDiagnostics check_properties(const PiecewiseMap& map, long horizon, double tol) {
    if (horizon < 1) {
        throw ArgumentError("check_properties: horizon must be >= 1");
    }
    MapDiagnostics d;
    const auto& br = map.branches();
    const auto bps = map.breakpoints();
    const double crit = bps.empty() ? 0.5 * (map.lo() + map.hi()) : bps.front();
    d.c_minus = map.limit(crit, false);
    d.c_plus = map.limit(crit, true);
    const double span = map.hi() - map.lo();
    constexpr double kTol = 1e-9;

    // (1) two branches, each onto, derivative vanishing at the breakpoint.
    {
        bool ok = br.size() == 2;
        std::ostringstream ev;
        ev << br.size() << " branches";
        for (const Branch& b : br) {
            const double a = b.eval(b.lo, 0);
            const double c = b.eval(b.hi, 0);
            const double img = std::abs(c - a);
            ev << "; image [" << num(std::min(a, c)) << ", " << num(std::max(a, c)) << "]";
            ok = ok && img >= span * (1.0 - kTol);
        }
        if (!bps.empty()) {
            // |T'(c + h)| ~ |h|^alpha; alpha > 0 means T' = O(|x|^alpha).
            double alpha = std::numeric_limits<double>::infinity();
            for (double side : {-1.0, 1.0}) {
                const double d1 = std::abs(map.derivative(crit + side * 1e-3, 1));
                const double d2 = std::abs(map.derivative(crit + side * 1e-5, 1));
                const double a = (d1 > 0.0 && d2 > 0.0) ? std::log(d1 / d2) / std::log(100.0)
                                                        : std::numeric_limits<double>::infinity();
                alpha = std::min(alpha, a);
            }
            ev << "; derivative order at breakpoint " << num(alpha);
            ok = ok && alpha > 0.01;
        } else {
            ok = false;
        }
        d.items[0] = make(ok, ev.str());
    }
    // (2) one-sided limits at the breakpoint are the domain endpoints.
    d.items[1] = make(std::abs(d.c_plus - map.hi()) <= kTol && std::abs(d.c_minus - map.lo()) <= kTol,
                      "T(0-) = " + num(d.c_minus) + ", T(0+) = " + num(d.c_plus));
    // (3) T' < 0 and (4) max |T'| at the outer endpoints; (6) S(T) < 0.
    {
        double max_d1 = -std::numeric_limits<double>::infinity();
        double max_s = -std::numeric_limits<double>::infinity();
        bool item4 = true;
        std::ostringstream ev4;
        d.min_abs_derivative = std::numeric_limits<double>::infinity();
        for (std::size_t bi = 0; bi < br.size(); ++bi) {
            const Branch& b = br[bi];
            const double outer = (b.hi <= crit) ? b.lo : b.hi;
            const double at_outer = std::abs(b.eval(outer, 1));
            double max_abs = 0.0;
            for (double x : branch_grid(b)) {
                const double d1 = b.eval(x, 1);
                max_d1 = std::max(max_d1, d1);
                max_abs = std::max(max_abs, std::abs(d1));
                d.min_abs_derivative = std::min(d.min_abs_derivative, std::abs(d1));
                if (d1 != 0.0) {
                    const double q = b.eval(x, 2) / d1;
                    max_s = std::max(max_s, b.eval(x, 3) / d1 - 1.5 * q * q);
                } else {
                    max_s = std::numeric_limits<double>::infinity();
                }
            }
            item4 = item4 && max_abs <= at_outer * (1.0 + 1e-12);
            ev4 << (bi ? "; " : "") << "max |T'| " << num(max_abs) << " vs |T'(" << num(outer)
                << ")| = " << num(at_outer);
        }
        d.items[2] = make(max_d1 < 0.0, "max sampled T' = " + num(max_d1));
        d.items[3] = make(item4, ev4.str());
        d.items[5] = make(max_s < 0.0, "max sampled S(T) = " + num(max_s));
    }
    // (5) both endpoints preperiodic to a repelling cycle.
    {
        const PropertyResult a = endpoint_cycle(map, map.lo(), horizon, tol);
        const PropertyResult b = endpoint_cycle(map, map.hi(), horizon, tol);
        Verdict v = Verdict::pass;
        if (a.verdict == Verdict::fail || b.verdict == Verdict::fail) {
            v = Verdict::fail;
        } else if (a.verdict == Verdict::undetermined || b.verdict == Verdict::undetermined) {
            v = Verdict::undetermined;
        }
        d.items[4] = PropertyResult{v, a.evidence + "; " + b.evidence};
    }
    return d;
}

MapDiagnostics check_properties(const ContractingLorenzMap& map, long horizon, double tol) {
    return check_properties(map.as_piecewise(), horizon, tol);
}

namespace {

// Image of an interval lying inside one branch (monotone, so endpoints map to
// endpoints). Endpoints at a breakpoint use the branch's one-sided limit.
Interval branch_image(const Branch& b, double lo, double hi) {
    const double a = b.eval(lo, 0);
    const double c = b.eval(hi, 0);
    return Interval{std::min(a, c), std::max(a, c)};
}

bool covers(const Interval& j, double a, double b) {
    constexpr double eps = 1e-12;
    return j.lo <= std::min(a, b) + eps && j.hi >= std::max(a, b) - eps;
}

}  // namespace

EventuallyOntoResult locally_eventually_onto(const PiecewiseMap& map, Interval j, int n_max) {
    if (!(j.lo < j.hi) || !std::isfinite(j.lo) || !std::isfinite(j.hi)) {
        throw ArgumentError("locally_eventually_onto: degenerate interval");
    }
    if (j.lo < map.lo() || j.hi > map.hi()) {
        throw ArgumentError("locally_eventually_onto: interval outside the domain");
    }
    const auto bps = map.breakpoints();
    if (bps.empty()) {
        throw ArgumentError("locally_eventually_onto: map has no discontinuity");
    }
    const double crit = bps.front();
    const double cm = map.limit(crit, false);
    const double cp = map.limit(crit, true);
    EventuallyOntoResult res;
    if (covers(j, cm, cp)) {
        res.n = 0;
        res.final_image = j;
        res.final_length = j.length();
        return res;
    }
    const auto& br = map.branches();
    auto branch_of = [&](double lo, double hi) -> const Branch& {
        const double mid = 0.5 * (lo + hi);
        for (const Branch& b : br) {
            if (mid >= b.lo && mid <= b.hi) {
                return b;
            }
        }
        return br.back();
    };
    for (int n = 1; n <= n_max; ++n) {
        if (j.lo < crit && j.hi > crit) {
            const Interval left = branch_image(branch_of(j.lo, crit), j.lo, crit);
            const Interval right = branch_image(branch_of(crit, j.hi), crit, j.hi);
            const bool joined = left.lo <= right.hi + 1e-12 && right.lo <= left.hi + 1e-12;
            if (joined) {
                const Interval u{std::min(left.lo, right.lo), std::max(left.hi, right.hi)};
                if (covers(u, cm, cp)) {
                    res.n = n;
                    res.final_image = u;
                    res.final_length = u.length();
                    return res;
                }
            }
            j = left.length() >= right.length() ? left : right;
        } else {
            j = branch_image(branch_of(j.lo, j.hi), j.lo, j.hi);
            if (covers(j, cm, cp)) {
                res.n = n;
                res.final_image = j;
                res.final_length = j.length();
                return res;
            }
        }
        if (!(j.length() > 0.0)) {
            break;
        }
    }
    res.final_image = j;
    res.final_length = j.length();
    return res;
}

OrbitResult orbit(const PiecewiseMap& map, double x0, long n, double lower_bound) {
    if (n < 0) {
        throw ArgumentError("orbit: negative length");
    }
    const auto bps = map.breakpoints();
    auto near = [&](double x) {
        for (double b : bps) {
            if (std::abs(x - b) < lower_bound) {
                return true;
            }
        }
        return false;
    };
    OrbitResult out;
    out.values.reserve(static_cast<std::size_t>(n) + 1);
    out.values.push_back(x0);
    if (near(x0)) {
        out.near_critical.push_back(0);
    }
    double x = x0;
    for (long k = 1; k <= n; ++k) {
        try {
            x = map(x);
        } catch (const CriticalPointError&) {
            out.hit_critical = true;
            return out;
        }
        out.values.push_back(x);
        if (near(x)) {
            out.near_critical.push_back(static_cast<std::size_t>(k));
        }
    }
    return out;
}

}  // namespace lorenzlab
