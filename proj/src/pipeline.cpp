#include "startrack/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace startrack {

namespace {

int count_spikes(const IdResult& res) {
    return static_cast<int>(
        std::count(res.ids.begin(), res.ids.end(), star_id::kSpike));
}

WahbaSolution solve_attitude(const Frame& frame, const IdResult& res,
                             const std::vector<Star>& stars) {
    std::vector<Vec3> obs, ref;
    std::vector<double> weights;
    for (size_t i = 0; i < res.ids.size(); ++i) {
        if (res.ids[i] < 0) continue;
        obs.push_back(frame.obs[i]);
        ref.push_back(stars[static_cast<size_t>(res.ids[i])].direction);
        weights.push_back(1.0 / static_cast<double>(res.n_identified));
    }
    return solve_wahba(obs, ref, weights);
}

/// Second-order phase fit over the window; returns (rate at t_end, accel).
/// Falls back to the linear estimate when the window is too short.
std::pair<double, double> quadratic_rate(const QuaternionWindow& window,
                                         const OmegaEstimate& est,
                                         const QuateraConfig& qcfg) {
    if (window.size() < 4) return {est.magnitude, 0.0};
    const PlaneFit fit = fit_plane(window, qcfg.sigma2_margin);
    const AngleSeries series = project_and_phase(window, fit);
    const size_t n = series.times.size();
    const double t_end = series.times.back();
    Eigen::Matrix3d hth = Eigen::Matrix3d::Zero();
    Eigen::Vector3d hty = Eigen::Vector3d::Zero();
    for (size_t i = 0; i < n; ++i) {
        const double dt = series.times[i] - t_end;  // center for conditioning
        const Eigen::Vector3d h(1.0, dt, dt * dt);
        hth += h * h.transpose();
        hty += h * series.phis[i];
    }
    Eigen::Vector3d beta = hth.ldlt().solve(hty);
    double rate = beta(1);  // dPhi/dt at t_end
    double accel = 2.0 * beta(2);
    // The projected phases may run backwards relative to the reported
    // magnitude; align signs with the omega >= 0 convention.
    if (rate < 0.0) {
        rate = -rate;
        accel = -accel;
    }
    return {rate, accel};
}

}  // namespace

StepReport pipeline_step(PipelineState& state, const Frame& frame,
                         const PipelineConfig& config, const std::vector<Star>& stars,
                         const PairDatabase& db, const KVector& kv) {
    StepReport report;
    report.t = frame.t;
    report.n_obs = static_cast<int>(frame.obs.size());

    // Frame gate: more than 3 potential stars required.
    if (frame.obs.size() <= 3) {
        report.method = StepMethod::skipped;
        ++state.stats.frames_skipped;
        report.window_n = static_cast<int>(state.window.size());
        return report;
    }

    std::optional<IdResult> id;
    const bool can_recurse = state.k > 1 && state.rsi_state.has_value() &&
                             state.last_estimate.has_value();
    std::optional<WahbaSolution> attitude;

    if (can_recurse) {
        report.method = StepMethod::recursive;
        ++state.stats.rsi_calls;

        RsiConfig rsi_cfg;
        rsi_cfg.epsilon = config.epsilon_floor;
        rsi_cfg.theta_min = std::max(config.theta_min, 2.0 * rsi_cfg.epsilon);
        rsi_cfg.wahba_cost_coeff = config.wahba_cost_coeff;
        // A short window predicts the rate with a lag of about one sample of
        // rate slope; widen the rotation-magnitude gate until it fills out.
        rsi_cfg.principal_angle_tol = state.window.size() < 10
                                          ? 2.0 * config.principal_floor
                                          : config.principal_floor;
        rsi_cfg.pair_tolerance = config.pair_tolerance;
        rsi_cfg.min_recurrent = config.min_recurrent;

        const auto outcome = rsi_identify(*state.rsi_state, frame, rsi_cfg, stars, db, kv,
                                          config.fov);
        if (outcome.ok) {
            id = outcome.result;
            attitude = outcome.attitude;
        } else {
            ++state.stats.rsi_aborts;
            report.abort_reason = outcome.reason;
            // Stale dynamics: drop the window so the estimate re-initializes
            // from two fresh lost-in-space solves.
            if (config.reset_window_on_abort) {
                state.window.clear();
                state.last_estimate.reset();
                state.rsi_state.reset();
                state.accel_estimate = 0.0;
            }
        }
    }

    if (!id) {
        // Direct LISA, or fallback after an RSI abort (abort_reason records it).
        report.method = StepMethod::pyramid;
        ++state.stats.pyramid_calls;
        id = pyramid_identify(frame, stars, db, kv, config.pair_tolerance,
                              &state.pyramid_scan_offset);
    }

    report.window_n = static_cast<int>(state.window.size());
    if (!id || id->n_identified < 2) {
        ++state.stats.failures;
        return report;  // k unchanged, take a new frame
    }

    if (!attitude) attitude = solve_attitude(frame, *id, stars);

    report.success = true;
    report.ids = *id;
    report.n_identified = id->n_identified;
    report.n_spikes_discarded = count_spikes(*id);
    report.has_attitude = true;
    report.attitude = attitude->q;

    state.window.push(frame.t, attitude->q);
    report.window_n = static_cast<int>(state.window.size());

    if (state.window.size() >= 2) {
        try {
            OmegaEstimate est = quatera_estimate(state.window, config.quatera);
            report.window_n = static_cast<int>(state.window.size());
            state.last_estimate = est;
            report.has_estimate = true;
            report.estimate = est;

            auto [rate, accel] = config.accel_compensation
                                     ? quadratic_rate(state.window, est, config.quatera)
                                     : std::make_pair(est.magnitude, 0.0);
            state.rate_for_prediction = std::max(rate, 0.0);
            state.accel_estimate = accel;

            Frame identified = frame;
            identified.ids = id->ids;
            state.rsi_state = RsiState{std::move(identified), attitude->q.to_dcm(),
                                       est.axis, state.rate_for_prediction,
                                       state.accel_estimate, frame.t, {}};
            state.rsi_state->close_pairs =
                close_id_pairs(state.rsi_state->prev_frame, config.theta_min);
        } catch (const EstimationError&) {
            // Rate unobservable (e.g. no rotation between samples): keep the
            // window, drop the estimate, fall back to LISA next frame.
            state.last_estimate.reset();
            state.rsi_state.reset();
        }
    }

    ++state.k;
    return report;
}

RunReport run_pipeline(PipelineState& state, const FrameSource& source,
                       const PipelineConfig& config, const std::vector<Star>& stars,
                       const PairDatabase& db, const KVector& kv, int k_stop) {
    RunReport report;
    while (auto item = source()) {
        RunRow row;
        row.step = pipeline_step(state, item->first, config, stars, db, kv);
        if (item->second && row.step.has_estimate) {
            const auto& truth = *item->second;
            row.has_truth = true;
            row.truth_axis = truth.omega_axis;
            row.truth_rate = truth.omega_mag;
            // atan2(sin, cos) of the separation keeps precision at small
            // angles, where acos(dot) bottoms out near sqrt(machine epsilon).
            row.axis_err_arcsec =
                std::atan2(row.step.estimate.axis.cross(truth.omega_axis).norm(),
                           row.step.estimate.axis.dot(truth.omega_axis)) /
                kArcsec;
            row.rate_err = std::abs(row.step.estimate.magnitude - truth.omega_mag);
            // Signed tangent components in a deterministic basis of the axis.
            const Vec3 seed = std::abs(truth.omega_axis.z()) < 0.9
                                  ? Vec3::UnitZ()
                                  : Vec3::UnitX();
            const Vec3 t1 = truth.omega_axis.cross(seed).normalized();
            const Vec3 t2 = truth.omega_axis.cross(t1);
            row.axis_err_t1 = row.step.estimate.axis.dot(t1);
            row.axis_err_t2 = row.step.estimate.axis.dot(t2);
        }
        report.rows.push_back(std::move(row));
        if (k_stop > 0 && state.k >= k_stop) break;
    }
    report.stats = state.stats;
    report.final_k = state.k;
    return report;
}

}  // namespace startrack
