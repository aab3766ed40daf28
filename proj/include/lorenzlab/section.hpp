#pragma once

#include "lorenzlab/types.hpp"

namespace lorenzlab {

/// A point on the cross-section. For the geometric models this is
/// Sigma = [-1/2,1/2] x [-1/2,1/2] x {1}; u is the quotient coordinate
/// (transverse to the stable leaves) and v runs along the leaf.
struct SectionPoint {
    double u = 0.0;
    double v = 0.0;
    Side side = Side::plus;
    double hit_time = 0.0;

    /// Checked constructor for points of the geometric section.
    static SectionPoint on_sigma(double u, double v, double hit_time = 0.0);

    /// Unchecked constructor (classical sections are unbounded).
    static SectionPoint raw(double u, double v, double hit_time = 0.0) {
        return SectionPoint{u, v, u < 0.0 ? Side::minus : Side::plus, hit_time};
    }
};

struct ReturnSample {
    SectionPoint from;
    SectionPoint to;
    double tau = 0.0;
};

}  // namespace lorenzlab
