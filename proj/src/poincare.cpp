#include "lorenzlab/poincare.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lorenzlab/errors.hpp"

namespace lorenzlab {

ReturnSample analytic_return_contracting(const GeomLorenzParams& params, const SectionPoint& sp) {
    if (sp.u == 0.0) {
        throw StableManifoldError("analytic return: u = 0 lies on the stable manifold");
    }
    const double au = std::abs(sp.u);
    const double side = sp.u < 0.0 ? -1.0 : 1.0;
    const double tu = side * (-params.rho * std::pow(au, params.s()) + 0.5);
    const double hv = side * (sp.v * std::pow(au, params.r()) + params.c_offset);
    if (std::abs(hv) > 0.5 || std::abs(tu) > 0.5) {
        throw GluingError("analytic return leaves Sigma; check rho and c_offset");
    }
    const double tau = -std::log(au) / params.lambda1 + params.tau_out;
    ReturnSample out;
    out.from = sp;
    out.to = SectionPoint::raw(tu, hv, sp.hit_time + tau);
    out.tau = tau;
    return out;
}

ReturnSample numeric_return(const FlowModel& model, const SectionPoint& sp,
                            const StepConfig& cfg) {
    State3 p;
    if (model.is_geometric()) {
        if (sp.u == 0.0) {
            throw StableManifoldError("numeric return: u = 0 lies on the stable manifold");
        }
        p = State3(sp.u, sp.v, 1.0);
    } else {
        p = State3(sp.u, sp.v, model.section_z());
    }
    const SectionHit hit = advance_to_section(model, p, cfg);
    ReturnSample out;
    out.from = sp;
    out.to = SectionPoint::raw(hit.point.x(), hit.point.y(), sp.hit_time + hit.time);
    out.tau = hit.time;
    return out;
}

ReturnTimeStats return_time_stats(std::span<const ReturnSample> samples) {
    if (samples.empty()) {
        throw ArgumentError("return_time_stats: empty sample set");
    }
    ReturnTimeStats st;
    st.min = std::numeric_limits<double>::infinity();
    st.max = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (const auto& s : samples) {
        sum += s.tau;
        st.min = std::min(st.min, s.tau);
        st.max = std::max(st.max, s.tau);
    }
    st.count = samples.size();
    st.mean = sum / static_cast<double>(samples.size());
    return st;
}

HybridTrajectory::HybridTrajectory(const GeomLorenzParams& params, const State3& start)
    : params_(params) {
    if (!is_finite(start)) {
        throw DomainError("hybrid trajectory: non-finite start");
    }
    start_passage(start, SectionPoint::raw(start.x(), start.y()));
}

HybridTrajectory HybridTrajectory::from_section(const GeomLorenzParams& params,
                                                const SectionPoint& sp) {
    return HybridTrajectory(params, State3(sp.u, sp.v, 1.0));
}

void HybridTrajectory::start_passage(const State3& p, const SectionPoint& from) {
    const LinearExit ex = linear_region_exit(params_, p);
    exit_point_ = ex.exit;
    next_entry_ = apply_gluing(params_, ex.exit);
    inside_start_ = p;
    inside_duration_ = ex.elapsed;
    phase_elapsed_ = 0.0;
    in_transit_ = false;
    entry_ = from;
    passage_start_time_ = time_;
}

State3 HybridTrajectory::position() const {
    if (!in_transit_) {
        return linear_flow(params_, inside_start_, phase_elapsed_);
    }
    const double w = phase_elapsed_ / params_.tau_out;
    const State3 target(next_entry_.u, next_entry_.v, 1.0);
    return (1.0 - w) * exit_point_ + w * target;
}

HybridTrajectory::Return HybridTrajectory::next_return() {
    if (!in_transit_) {
        time_ += inside_duration_ - phase_elapsed_;
        phase_elapsed_ = 0.0;
        in_transit_ = true;
    }
    time_ += params_.tau_out - phase_elapsed_;
    SectionPoint to = next_entry_;
    to.hit_time = time_;
    const Return ret{entry_, to, time_ - passage_start_time_, exit_point_};
    start_passage(State3(to.u, to.v, 1.0), to);
    return ret;
}

}  // namespace lorenzlab
