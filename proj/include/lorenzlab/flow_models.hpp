#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "lorenzlab/section.hpp"
#include "lorenzlab/types.hpp"

namespace lorenzlab {

struct ClassicalLorenzParams {
    double sigma = 10.0;
    double rayleigh = 28.0;
    double beta = 8.0 / 3.0;
};

enum class GeomMode { expanding, contracting };

/// Eigenvalues of the singularity plus the constants of the return map
///   T(x) = sgn(x) (-rho |x|^s + 1/2),  H(x, y) = sgn(x) (y |x|^r + c).
struct GeomLorenzParams {
    double lambda1 = 1.0;
    double lambda2 = -6.0;
    double lambda3 = -2.0;
    GeomMode mode = GeomMode::contracting;
    double rho = 4.0;
    double c_offset = 0.1;
    /// Transit time of the passage outside the cube.
    double tau_out = 1.0;

    double r() const { return -lambda2 / lambda1; }
    double s() const { return -lambda3 / lambda1; }
    /// Largest admissible rho, (1/2)^(-s).
    double rho_max() const;

    /// lambda = (1, -6, -2), rho = rho_scale * (1/2)^(-s), c = 0.1.
    static GeomLorenzParams contracting_defaults(double rho_scale = 1.0);
    /// lambda = (1, -3, -0.6): geometric (expanding) Lorenz regime.
    static GeomLorenzParams expanding_defaults(double rho_scale = 1.0);
};

/// The outside-the-cube passage: a quarter turn taking the exit face x = +-1
/// back to Sigma, an expansion by rho along the z -> u direction and a
/// translation (1/2, c), completed in transit_time.
struct GluingSpec {
    double rotation_angle = 0.0;
    double expansion = 0.0;
    double translation_u = 0.0;
    double translation_v = 0.0;
    double transit_time = 0.0;
};

GluingSpec gluing_spec(const GeomLorenzParams& params);

/// Test hook: G(p) = A p.
struct LinearFieldParams {
    Matrix3 a = Matrix3::Identity();
};

/// Test hook with two attracting equilibria at (+-1, 0, 0):
/// G(p) = (x - x^3, -y, -z).
struct TwoSinkParams {};

struct Box {
    State3 lo = State3::Constant(-1.0);
    State3 hi = State3::Constant(1.0);

    bool contains(const State3& p) const {
        return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
    }
};

struct FlowModel {
    using Variant =
        std::variant<ClassicalLorenzParams, GeomLorenzParams, LinearFieldParams, TwoSinkParams>;

    Variant variant;
    std::optional<Box> linear_cube;
    /// Level of the section plane z = level used for classical Lorenz returns;
    /// defaults to rayleigh - 1.
    std::optional<double> section_level;

    static FlowModel classical(ClassicalLorenzParams p = {});
    static FlowModel geometric(GeomLorenzParams p);
    static FlowModel linear(const Matrix3& a);
    static FlowModel two_sink();

    bool is_geometric() const { return std::holds_alternative<GeomLorenzParams>(variant); }
    const GeomLorenzParams& geom() const;
    const ClassicalLorenzParams& classical_params() const;
    /// z-level of the Poincare section for this model.
    double section_z() const;
    std::string kind() const;
};

/// G(p). Geometric variants return the linear field (lambda1 x, lambda2 y,
/// lambda3 z); the passage outside the cube is modeled by the gluing jump, not
/// by a vector field.
State3 eval_field(const FlowModel& model, const State3& p);

Matrix3 eval_jacobian(const FlowModel& model, const State3& p);

/// div G(p).
double divergence(const FlowModel& model, const State3& p);

struct LinearExit {
    State3 exit;
    double elapsed = 0.0;
};

/// Closed-form passage from Sigma to the face x = sgn(u): for u > 0,
/// (u, v, 1) -> (1, v u^r, u^s) after time -ln(u)/lambda1.
LinearExit linear_region_exit(const GeomLorenzParams& params, const SectionPoint& entry);

/// Same passage from an arbitrary point of the cube with x != 0.
LinearExit linear_region_exit(const GeomLorenzParams& params, const State3& p);

/// Position at time t along the linear flow started at p.
State3 linear_flow(const GeomLorenzParams& params, const State3& p, double t);

/// Image of an exit-face point under the gluing jump (lands on Sigma).
SectionPoint apply_gluing(const GeomLorenzParams& params, const State3& exit_point);

/// Derivative of the full outside passage as a linear map between the tangent
/// spaces at the exit point and at the re-entry point: face directions follow
/// the affine jump and the flow direction G(exit) goes to G(entry).
Matrix3 gluing_jacobian(const GeomLorenzParams& params, const State3& exit_point,
                        const State3& entry_point);

struct ConstraintCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct DiagnosticsReport {
    std::vector<ConstraintCheck> checks;
    std::optional<double> r;
    std::optional<double> s;

    bool ok() const;
    /// Names of failed checks.
    std::vector<std::string> failures() const;
};

/// Checks every parameter constraint of the model. Never throws; failures are
/// reported. gluing_tol bounds how far a glued point may land outside Sigma.
DiagnosticsReport validate_params(const FlowModel& model, double gluing_tol = 1e-12);

}  // namespace lorenzlab
