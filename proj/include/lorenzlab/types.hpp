#pragma once

#include <Eigen/Dense>

namespace lorenzlab {

/// A point of phase space R^3 (cube units for the geometric models).
using State3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;

inline bool is_finite(const State3& p) { return p.allFinite(); }

enum class Side { minus, plus };

inline const char* to_string(Side s) { return s == Side::plus ? "plus" : "minus"; }

}  // namespace lorenzlab
