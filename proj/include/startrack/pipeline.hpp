#pragma once

#include <functional>

#include "startrack/rsi.hpp"
#include "startrack/simulator.hpp"

namespace startrack {

struct PipelineConfig {
    Fov fov;
    double centroid_sigma = (10.0 / 3.0) * kArcsec;

    // Pair-match tolerance for range searches (Pyramid and RSI step-3 logic):
    // 3 sigma of the inter-star angle noise.
    double pair_tolerance = 3.0 * std::sqrt(2.0) * (10.0 / 3.0) * kArcsec;

    // Recurrent-match cone. Sized so centroid noise never rejects a correct
    // match while a stale rate estimate (axis drift over one sample) does.
    double epsilon_floor = 20.0 * kArcsec;
    // Principal-angle validation tolerance. Sized so the rotation-angle noise
    // between two single-frame attitude solutions (a few arcsec typically,
    // worse in star-poor fields) never trips it in a healthy run, while a
    // dynamics change or a misidentification (arcminutes off) still does.
    double principal_floor = 60.0 * kArcsec;
    // Wahba cost threshold coefficient; threshold = n * coeff.
    double wahba_cost_coeff = 9.0 * (10.0 / 3.0) * kArcsec * (10.0 / 3.0) * kArcsec;

    double theta_min = 2.0 * 30.0 * kArcsec;
    int min_recurrent = 3;

    size_t window_n_max = 50;
    QuateraConfig quatera;

    // Discard the quaternion window after an RSI abort, so re-initialization
    // takes two lost-in-space solves (fresh dynamics need fresh history).
    bool reset_window_on_abort = true;

    // Correct the regression's rate lag with a quadratic phase fit before
    // predicting; the linear model trails the current rate under sustained
    // angular acceleration by accel * window_span / 2.
    bool accel_compensation = true;
};

enum class StepMethod { skipped, pyramid, recursive };

struct StepReport {
    double t = 0.0;
    StepMethod method = StepMethod::skipped;
    bool success = false;
    AbortReason abort_reason = AbortReason::none;  // RSI abort before fallback
    int n_obs = 0;
    int n_identified = 0;
    int n_spikes_discarded = 0;
    int window_n = 0;
    bool has_estimate = false;
    OmegaEstimate estimate;
    bool has_attitude = false;
    Quat attitude;
    IdResult ids;
};

struct PipelineState {
    int k = 0;  // valid-frame counter
    QuaternionWindow window;
    std::optional<RsiState> rsi_state;
    std::optional<OmegaEstimate> last_estimate;
    size_t pyramid_scan_offset = 0;
    double accel_estimate = 0.0;  // rad/s^2, from the quadratic phase fit
    double rate_for_prediction = 0.0;

    struct Stats {
        int pyramid_calls = 0;
        int rsi_calls = 0;
        int rsi_aborts = 0;
        int frames_skipped = 0;
        int failures = 0;
    } stats;

    explicit PipelineState(const PipelineConfig& cfg) : window(cfg.window_n_max) {}
};

/// One pass of the frame loop: gate, LISA / RSI with fallback, attitude
/// solve, window append, rate estimate update.
StepReport pipeline_step(PipelineState& state, const Frame& frame,
                         const PipelineConfig& config, const std::vector<Star>& stars,
                         const PairDatabase& db, const KVector& kv);

struct TruthInfo {
    Vec3 omega_axis;
    double omega_mag;
};

struct RunRow {
    StepReport step;
    double axis_err_arcsec = std::numeric_limits<double>::quiet_NaN();
    double rate_err = std::numeric_limits<double>::quiet_NaN();  // rad/s
    // Estimated-axis error resolved into two fixed transverse directions of
    // the true axis, so Monte Carlo runs can average error vectors (the
    // per-trial sign information survives, unlike in axis_err_arcsec).
    double axis_err_t1 = std::numeric_limits<double>::quiet_NaN();  // rad
    double axis_err_t2 = std::numeric_limits<double>::quiet_NaN();  // rad
    bool has_truth = false;
    Vec3 truth_axis = Vec3::UnitZ();
    double truth_rate = 0.0;  // rad/s
};

struct RunReport {
    std::vector<RunRow> rows;
    PipelineState::Stats stats;
    int final_k = 0;
};

/// Drives pipeline_step over a frame stream until it ends or k reaches
/// k_stop (0 = no limit). Truth, when supplied, fills the error columns.
using FrameSource =
    std::function<std::optional<std::pair<Frame, std::optional<TruthInfo>>>()>;
RunReport run_pipeline(PipelineState& state, const FrameSource& source,
                       const PipelineConfig& config, const std::vector<Star>& stars,
                       const PairDatabase& db, const KVector& kv, int k_stop = 0);

}  // namespace startrack
