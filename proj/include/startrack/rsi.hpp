#pragma once

#include <algorithm>
#include <optional>

#include "startrack/pyramid.hpp"
#include "startrack/quatera.hpp"

namespace startrack {

struct RsiConfig {
    double epsilon = 0.0;             // recurrent-match cone, rad
    double theta_min = 0.0;           // minimum inter-star separation among expected, rad
    double wahba_cost_coeff = 0.0;    // cost threshold = n_identified * coeff
    double principal_angle_tol = 0.0; // rad
    double pair_tolerance = 0.0;      // range-search tolerance for remaining-star ID, rad
    int min_recurrent = 3;
};

/// Everything the recursive step needs from the previous valid frame.
struct RsiState {
    Frame prev_frame;                // with ids filled in
    Mat3 prev_attitude;              // inertial -> camera at prev_time
    Vec3 omega_axis = Vec3::UnitZ(); // prediction AOR
    double omega_mag = 0.0;          // prediction AVM, rad/s
    double omega_dot = 0.0;          // AVM slope, rad/s^2 (0 if unknown)
    double prev_time = 0.0;
    /// Identified prev_frame index pairs closer than the ambiguity threshold.
    /// Pairwise angles are rotation invariant, so this is computed once per
    /// state (close_id_pairs) instead of once per prediction; when both stars
    /// of a pair survive the field-of-view cull, neither is a match target.
    std::vector<std::pair<int32_t, int32_t>> close_pairs;
};

/// Pairs of identified stars in `frame` separated by less than theta_min.
std::vector<std::pair<int32_t, int32_t>> close_id_pairs(const Frame& frame,
                                                        double theta_min);

/// Rotation angle expected between prev_time and t, second-order in the
/// rate history. Clamped at zero: the rate convention is non-negative, so a
/// negative extrapolation means the rotation has stopped, not reversed.
inline double expected_rotation(const RsiState& state, double t) {
    const double dt = t - state.prev_time;
    return std::max(0.0, state.omega_mag * dt + 0.5 * state.omega_dot * dt * dt);
}

enum class AbortReason { none, too_few_recurrent, wahba_cost, principal_angle };

struct RsiOutcome {
    bool ok = false;
    AbortReason reason = AbortReason::none;
    IdResult result;
    WahbaSolution attitude;  // valid when ok
    int n_recurrent = 0;
};

/// Previously identified stars rotated by delta_c to time t_next, FOV-culled.
std::vector<AnchorStar> predict_stars(const RsiState& state, double t_next, const Fov& fov,
                                      const std::vector<Star>& stars);

/// Cone matching: observation j is recurrent to expected star i iff
/// b_j . E{b_i} > cos(eps) for i and b_j . E{b_l} < cos(eps) for every other l.
/// One-to-one: observations claiming two expected stars, or expected stars
/// claimed twice, stay unmatched.
std::vector<std::pair<int, int32_t>> match_recurrent(const std::vector<AnchorStar>& expected,
                                                     const Frame& observed, double epsilon);

/// Both post-identification checks: Wahba cost and principal angle vs the
/// propagated rotation angle.
struct ValidationResult {
    bool ok = false;
    AbortReason reason = AbortReason::none;
};
ValidationResult validate(const Mat3& prev_attitude, const WahbaSolution& solution,
                          double expected_phi, const RsiConfig& config);

/// Identification stage of the recursive step: predict, match, identify the
/// rest with the same per-star confirmation the pyramid search uses. `ok` is
/// false when fewer than `min_recurrent` recurrent stars matched.
struct RsiMatch {
    bool ok = false;
    int n_recurrent = 0;
    IdResult result;  // valid when ok
};
RsiMatch rsi_match(const RsiState& state, const Frame& frame, const RsiConfig& config,
                   const std::vector<Star>& stars, const PairDatabase& db,
                   const KVector& kv, const Fov& fov);

/// Full recursive identification: predict, match, identify the rest with the
/// Pyramid step-3 logic, solve the attitude, validate.
RsiOutcome rsi_identify(const RsiState& state, const Frame& frame, const RsiConfig& config,
                        const std::vector<Star>& stars, const PairDatabase& db,
                        const KVector& kv, const Fov& fov);

}  // namespace startrack
