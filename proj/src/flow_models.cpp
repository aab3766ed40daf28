#include "lorenzlab/flow_models.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "lorenzlab/errors.hpp"

namespace lorenzlab {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_finite(const State3& p, const char* where) {
    if (!is_finite(p)) {
        throw DomainError(std::string(where) + ": non-finite state");
    }
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

double sgn(double x) { return x < 0.0 ? -1.0 : 1.0; }

}  // namespace

SectionPoint SectionPoint::on_sigma(double u, double v, double hit_time) {
    if (!std::isfinite(u) || !std::isfinite(v) || !std::isfinite(hit_time)) {
        throw DomainError("section point: non-finite coordinate");
    }
    if (std::abs(u) > 0.5 || std::abs(v) > 0.5) {
        throw DomainError("section point (" + fmt(u) + ", " + fmt(v) + ") outside Sigma");
    }
    if (hit_time < 0.0) {
        throw DomainError("section point: negative hit time");
    }
    return raw(u, v, hit_time);
}

double GeomLorenzParams::rho_max() const { return std::pow(0.5, -s()); }

GeomLorenzParams GeomLorenzParams::contracting_defaults(double rho_scale) {
    GeomLorenzParams p;
    p.rho = rho_scale * p.rho_max();
    return p;
}

GeomLorenzParams GeomLorenzParams::expanding_defaults(double rho_scale) {
    GeomLorenzParams p;
    p.lambda1 = 1.0;
    p.lambda2 = -3.0;
    p.lambda3 = -0.6;
    p.mode = GeomMode::expanding;
    p.rho = rho_scale * p.rho_max();
    return p;
}

GluingSpec gluing_spec(const GeomLorenzParams& params) {
    return GluingSpec{std::numbers::pi / 2.0, params.rho, 0.5, params.c_offset, params.tau_out};
}

FlowModel FlowModel::classical(ClassicalLorenzParams p) {
    FlowModel m;
    m.variant = p;
    return m;
}

FlowModel FlowModel::geometric(GeomLorenzParams p) {
    FlowModel m;
    m.variant = p;
    m.linear_cube = Box{};
    return m;
}

FlowModel FlowModel::linear(const Matrix3& a) {
    FlowModel m;
    m.variant = LinearFieldParams{a};
    return m;
}

FlowModel FlowModel::two_sink() {
    FlowModel m;
    m.variant = TwoSinkParams{};
    return m;
}

const GeomLorenzParams& FlowModel::geom() const {
    if (const auto* g = std::get_if<GeomLorenzParams>(&variant)) {
        return *g;
    }
    throw ArgumentError("model is not a geometric Lorenz flow");
}

const ClassicalLorenzParams& FlowModel::classical_params() const {
    if (const auto* c = std::get_if<ClassicalLorenzParams>(&variant)) {
        return *c;
    }
    throw ArgumentError("model is not the classical Lorenz flow");
}

double FlowModel::section_z() const {
    if (section_level) {
        return *section_level;
    }
    if (const auto* c = std::get_if<ClassicalLorenzParams>(&variant)) {
        return c->rayleigh - 1.0;
    }
    return 1.0;
}

std::string FlowModel::kind() const {
    return std::visit(overloaded{
                          [](const ClassicalLorenzParams&) { return std::string("classical"); },
                          [](const GeomLorenzParams& g) {
                              return std::string(g.mode == GeomMode::contracting
                                                     ? "geometric-contracting"
                                                     : "geometric-expanding");
                          },
                          [](const LinearFieldParams&) { return std::string("linear"); },
                          [](const TwoSinkParams&) { return std::string("two_sink"); },
                      },
                      variant);
}

State3 eval_field(const FlowModel& model, const State3& p) {
    require_finite(p, "eval_field");
    return std::visit(
        overloaded{
            [&](const ClassicalLorenzParams& c) -> State3 {
                return {c.sigma * (p.y() - p.x()), p.x() * (c.rayleigh - p.z()) - p.y(),
                        p.x() * p.y() - c.beta * p.z()};
            },
            [&](const GeomLorenzParams& g) -> State3 {
                return {g.lambda1 * p.x(), g.lambda2 * p.y(), g.lambda3 * p.z()};
            },
            [&](const LinearFieldParams& l) -> State3 { return l.a * p; },
            [&](const TwoSinkParams&) -> State3 {
                return {p.x() - p.x() * p.x() * p.x(), -p.y(), -p.z()};
            },
        },
        model.variant);
}

Matrix3 eval_jacobian(const FlowModel& model, const State3& p) {
    require_finite(p, "eval_jacobian");
    return std::visit(overloaded{
                          [&](const ClassicalLorenzParams& c) -> Matrix3 {
                              Matrix3 j;
                              j << -c.sigma, c.sigma, 0.0,  //
                                  c.rayleigh - p.z(), -1.0, -p.x(),  //
                                  p.y(), p.x(), -c.beta;
                              return j;
                          },
                          [&](const GeomLorenzParams& g) -> Matrix3 {
                              return State3(g.lambda1, g.lambda2, g.lambda3).asDiagonal();
                          },
                          [&](const LinearFieldParams& l) -> Matrix3 { return l.a; },
                          [&](const TwoSinkParams&) -> Matrix3 {
                              return State3(1.0 - 3.0 * p.x() * p.x(), -1.0, -1.0).asDiagonal();
                          },
                      },
                      model.variant);
}

double divergence(const FlowModel& model, const State3& p) {
    return eval_jacobian(model, p).trace();
}

LinearExit linear_region_exit(const GeomLorenzParams& params, const SectionPoint& entry) {
    return linear_region_exit(params, State3(entry.u, entry.v, 1.0));
}

LinearExit linear_region_exit(const GeomLorenzParams& params, const State3& p) {
    require_finite(p, "linear_region_exit");
    const double ax = std::abs(p.x());
    if (ax == 0.0) {
        throw StableManifoldError(
            "linear_region_exit: x = 0 lies on the stable manifold of the singularity");
    }
    if (ax > 1.0) {
        throw DomainError("linear_region_exit: start point is outside the linear cube");
    }
    const double s = params.s();
    const double r = params.r();
    LinearExit out;
    out.exit = State3(sgn(p.x()), p.y() * std::pow(ax, r), p.z() * std::pow(ax, s));
    out.elapsed = -std::log(ax) / params.lambda1;
    return out;
}

State3 linear_flow(const GeomLorenzParams& params, const State3& p, double t) {
    return State3(p.x() * std::exp(params.lambda1 * t), p.y() * std::exp(params.lambda2 * t),
                  p.z() * std::exp(params.lambda3 * t));
}

SectionPoint apply_gluing(const GeomLorenzParams& params, const State3& exit_point) {
    const double side = sgn(exit_point.x());
    const double u = side * (0.5 - params.rho * exit_point.z());
    const double v = side * (exit_point.y() + params.c_offset);
    if (!(std::abs(u) <= 0.5) || !(std::abs(v) <= 0.5)) {
        throw GluingError("gluing jump lands at (" + fmt(u) + ", " + fmt(v) +
                          ") outside Sigma; check rho and c_offset");
    }
    return SectionPoint::raw(u, v);
}

Matrix3 gluing_jacobian(const GeomLorenzParams& params, const State3& exit_point,
                        const State3& entry_point) {
    const double side = sgn(exit_point.x());
    const State3 g_exit(params.lambda1 * exit_point.x(), params.lambda2 * exit_point.y(),
                        params.lambda3 * exit_point.z());
    const State3 g_entry(params.lambda1 * entry_point.x(), params.lambda2 * entry_point.y(),
                         params.lambda3 * entry_point.z());
    Matrix3 from;
    from.col(0) = g_exit;
    from.col(1) = State3::UnitY();
    from.col(2) = State3::UnitZ();
    Matrix3 to;
    to.col(0) = g_entry;
    to.col(1) = State3::UnitX();
    to.col(2) = State3::UnitY();
    // (alpha, dy', dz') -> (alpha, du, dv) with du = -side rho dz', dv = side dy'.
    Matrix3 coeff = Matrix3::Zero();
    coeff(0, 0) = 1.0;
    coeff(1, 2) = -side * params.rho;
    coeff(2, 1) = side;
    return to * coeff * from.inverse();
}

bool DiagnosticsReport::ok() const {
    for (const auto& c : checks) {
        if (!c.passed) {
            return false;
        }
    }
    return true;
}

std::vector<std::string> DiagnosticsReport::failures() const {
    std::vector<std::string> out;
    for (const auto& c : checks) {
        if (!c.passed) {
            out.push_back(c.name);
        }
    }
    return out;
}

namespace {

void add(DiagnosticsReport& rep, std::string name, bool ok, std::string detail = {}) {
    rep.checks.push_back(ConstraintCheck{std::move(name), ok, std::move(detail)});
}

void validate_geometric(const GeomLorenzParams& g, double gluing_tol, DiagnosticsReport& rep) {
    const double l1 = g.lambda1;
    const double l2 = g.lambda2;
    const double l3 = g.lambda3;
    const bool finite = std::isfinite(l1) && std::isfinite(l2) && std::isfinite(l3) &&
                        std::isfinite(g.rho) && std::isfinite(g.c_offset) &&
                        std::isfinite(g.tau_out);
    add(rep, "finite parameters", finite);
    if (!finite) {
        return;
    }
    add(rep, "lambda1 > 0", l1 > 0.0, "lambda1 = " + fmt(l1));
    if (l1 <= 0.0) {
        return;
    }
    rep.r = g.r();
    rep.s = g.s();
    const double r = g.r();
    const double s = g.s();
    if (g.mode == GeomMode::contracting) {
        add(rep, "-lambda2 > -lambda3", -l2 > -l3, fmt(-l2) + " vs " + fmt(-l3));
        add(rep, "-lambda3 > lambda1", -l3 > l1, fmt(-l3) + " vs " + fmt(l1));
        add(rep, "r > s + 3", r > s + 3.0, "r = " + fmt(r) + ", s = " + fmt(s));
        add(rep, "lambda1 + lambda3 < 0", l1 + l3 < 0.0, fmt(l1 + l3));
    } else {
        add(rep, "-lambda2 > lambda1", -l2 > l1, fmt(-l2) + " vs " + fmt(l1));
        add(rep, "lambda1 > -lambda3", l1 > -l3, fmt(l1) + " vs " + fmt(-l3));
        add(rep, "-lambda3 > 0", -l3 > 0.0, fmt(-l3));
        add(rep, "lambda1 + lambda3 > 0", l1 + l3 > 0.0, fmt(l1 + l3));
    }
    add(rep, "rho > 0", g.rho > 0.0, "rho = " + fmt(g.rho));
    add(rep, "rho <= (1/2)^(-s)", g.rho <= g.rho_max() * (1.0 + 1e-15),
        "rho = " + fmt(g.rho) + ", bound = " + fmt(g.rho_max()));
    add(rep, "c_offset > 0", g.c_offset > 0.0, "c = " + fmt(g.c_offset));
    add(rep, "tau_out > 0", g.tau_out > 0.0, "tau_out = " + fmt(g.tau_out));

    // Gluing consistency: every glued image of a Sigma passage must land back
    // in Sigma. Sampled on a grid of entry points, both sides.
    double worst = 0.0;
    constexpr int n = 41;
    for (int i = 0; i < n; ++i) {
        const double u = 0.5 * (i + 1) / n;
        for (int j = 0; j < n; ++j) {
            const double v = -0.5 + static_cast<double>(j) / (n - 1);
            for (double side : {-1.0, 1.0}) {
                const State3 exit(side, v * std::pow(u, r), std::pow(u, s));
                const double gu = side * (0.5 - g.rho * exit.z());
                const double gv = side * (exit.y() + g.c_offset);
                worst = std::max({worst, std::abs(gu) - 0.5, std::abs(gv) - 0.5});
            }
        }
    }
    add(rep, "gluing lands in Sigma", worst <= gluing_tol, "max excess = " + fmt(worst));
}

}  // namespace

DiagnosticsReport validate_params(const FlowModel& model, double gluing_tol) {
    DiagnosticsReport rep;
    std::visit(overloaded{
                   [&](const ClassicalLorenzParams& c) {
                       add(rep, "sigma > 0", c.sigma > 0.0, fmt(c.sigma));
                       add(rep, "rayleigh > 0", c.rayleigh > 0.0, fmt(c.rayleigh));
                       add(rep, "beta > 0", c.beta > 0.0, fmt(c.beta));
                   },
                   [&](const GeomLorenzParams& g) { validate_geometric(g, gluing_tol, rep); },
                   [&](const LinearFieldParams& l) {
                       add(rep, "finite matrix", l.a.allFinite());
                   },
                   [&](const TwoSinkParams&) {},
               },
               model.variant);
    return rep;
}

}  // namespace lorenzlab
