#pragma once

#include <functional>
#include <span>
#include <vector>

#include "lorenzlab/flow_models.hpp"
#include "lorenzlab/integrator.hpp"
#include "lorenzlab/section.hpp"

namespace lorenzlab {

/// First return of the contracting model in closed form:
/// (u, v) -> (T(u), H(u, v)) with tau = -ln|u|/lambda1 + tau_out.
ReturnSample analytic_return_contracting(const GeomLorenzParams& params, const SectionPoint& sp);

/// First return computed by integration. Geometric models integrate the
/// linear field to the exit face and glue; classical models integrate to the
/// next downward crossing of z = section_z(), with (u, v) read as (x, y).
ReturnSample numeric_return(const FlowModel& model, const SectionPoint& sp,
                            const StepConfig& cfg);

inline double quotient_project(const SectionPoint& sp) { return sp.u; }

struct ReturnTimeStats {
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
    std::size_t count = 0;
};

ReturnTimeStats return_time_stats(std::span<const ReturnSample> samples);

/// Exact trajectory of a geometric model: closed-form linear flow inside the
/// cube, then a transit of duration tau_out along the straight segment from
/// the exit point to its glued image on Sigma.
class HybridTrajectory {
public:
    struct Return {
        SectionPoint from;
        SectionPoint to;
        double tau = 0.0;
        State3 exit_point;
    };

    /// Start at a point of the cube with x != 0. Throws StableManifoldError for
    /// x = 0 and GluingError when the first glued image misses Sigma.
    HybridTrajectory(const GeomLorenzParams& params, const State3& start);
    static HybridTrajectory from_section(const GeomLorenzParams& params, const SectionPoint& sp);

    double time() const { return time_; }
    State3 position() const;
    bool in_transit() const { return in_transit_; }
    /// Section point of the most recent entry (or the start projected to (x, y)).
    const SectionPoint& last_entry() const { return entry_; }

    /// Moves forward by dt >= 0. lin(duration) is called for each stretch spent
    /// inside the cube and jump(ret) when a transit ends on Sigma, in order.
    template <class OnLinear, class OnJump>
    void advance(double dt, OnLinear&& lin, OnJump&& jump);

    void advance(double dt) {
        advance(dt, [](double) {}, [](const Return&) {});
    }

    /// Runs until the next arrival on Sigma and returns it.
    Return next_return();

private:
    void start_passage(const State3& p, const SectionPoint& from);

    GeomLorenzParams params_;
    double time_ = 0.0;
    bool in_transit_ = false;
    // Inside phase: start point, elapsed time since it, total passage time.
    State3 inside_start_;
    double phase_elapsed_ = 0.0;
    double inside_duration_ = 0.0;
    State3 exit_point_;
    SectionPoint entry_;
    SectionPoint next_entry_;
    double passage_start_time_ = 0.0;
};

template <class OnLinear, class OnJump>
void HybridTrajectory::advance(double dt, OnLinear&& lin, OnJump&& jump) {
    double left = dt;
    while (left > 0.0) {
        if (!in_transit_) {
            const double rem = inside_duration_ - phase_elapsed_;
            if (left < rem) {
                phase_elapsed_ += left;
                time_ += left;
                lin(left);
                return;
            }
            phase_elapsed_ = 0.0;
            time_ += rem;
            left -= rem;
            lin(rem);
            in_transit_ = true;
        } else {
            const double rem = params_.tau_out - phase_elapsed_;
            if (left < rem) {
                phase_elapsed_ += left;
                time_ += left;
                return;
            }
            time_ += rem;
            left -= rem;
            SectionPoint to = next_entry_;
            to.hit_time = time_;
            const Return ret{entry_, to, time_ - passage_start_time_, exit_point_};
            start_passage(State3(to.u, to.v, 1.0), to);
            jump(ret);
        }
    }
}

}  // namespace lorenzlab
