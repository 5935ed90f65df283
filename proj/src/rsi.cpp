#include "startrack/rsi.hpp"

#include <algorithm>
#include <cmath>

namespace startrack {

std::vector<std::pair<int32_t, int32_t>> close_id_pairs(const Frame& frame,
                                                        double theta_min) {
    std::vector<std::pair<int32_t, int32_t>> pairs;
    if (theta_min <= 0.0) return pairs;
    const double cos_min = std::cos(theta_min);
    const int n = static_cast<int>(frame.obs.size());
    for (int i = 0; i < n; ++i) {
        if (frame.ids[i] < 0) continue;
        for (int j = i + 1; j < n; ++j) {
            if (frame.ids[j] < 0) continue;
            if (frame.obs[i].dot(frame.obs[j]) > cos_min) pairs.push_back({i, j});
        }
    }
    return pairs;
}

std::vector<AnchorStar> predict_stars(const RsiState& state, double t_next, const Fov& fov,
                                      const std::vector<Star>& /*stars*/) {
    if (t_next <= state.prev_time) {
        throw InvalidInput("predict_stars: t_next must exceed the previous frame time");
    }
    const double phi = expected_rotation(state, t_next);
    const Mat3 dc = phi != 0.0 ? delta_c(state.omega_axis, phi) : Mat3::Identity();
    std::vector<AnchorStar> expected;
    expected.reserve(state.prev_frame.obs.size());
    thread_local std::vector<int32_t> slot;  // prev index -> expected index
    slot.assign(state.prev_frame.obs.size(), -1);
    for (size_t i = 0; i < state.prev_frame.obs.size(); ++i) {
        if (state.prev_frame.ids[i] < 0) continue;
        const Vec3 e = dc * state.prev_frame.obs[i];
        if (!fov.contains(e)) continue;
        slot[i] = static_cast<int32_t>(expected.size());
        expected.push_back({e, state.prev_frame.ids[i]});
    }
    // Expected stars closer than the ambiguity threshold are unusable match
    // targets, but only while both of the pair remain in the field of view.
    if (!state.close_pairs.empty()) {
        thread_local std::vector<char> drop;
        drop.assign(expected.size(), 0);
        bool any = false;
        for (const auto& [a, b] : state.close_pairs) {
            if (slot[a] >= 0 && slot[b] >= 0) {
                drop[slot[a]] = drop[slot[b]] = 1;
                any = true;
            }
        }
        if (any) {
            size_t w = 0;
            for (size_t i = 0; i < expected.size(); ++i) {
                if (!drop[i]) expected[w++] = expected[i];
            }
            expected.resize(w);
        }
    }
    return expected;
}

std::vector<std::pair<int, int32_t>> match_recurrent(const std::vector<AnchorStar>& expected,
                                                     const Frame& observed, double epsilon) {
    if (epsilon <= 0.0) throw InvalidInput("match_recurrent: epsilon must be positive");
    const double cos_eps = std::cos(epsilon);
    std::vector<std::pair<int, int32_t>> matches;  // (obs index, expected index)
    matches.reserve(expected.size());
    thread_local std::vector<int> expected_claims;
    expected_claims.assign(expected.size(), 0);
    // Contiguous layout so the inner dot-product loop vectorizes.
    const Eigen::Index n_exp = static_cast<Eigen::Index>(expected.size());
    thread_local Eigen::Matrix3Xd exp_dirs;
    exp_dirs.resize(3, n_exp);
    for (Eigen::Index i = 0; i < n_exp; ++i) exp_dirs.col(i) = expected[i].dir;
    for (int j = 0; j < static_cast<int>(observed.obs.size()); ++j) {
        int hit = -1;
        bool unique = true;
        const Vec3& b = observed.obs[j];
        for (Eigen::Index i = 0; i < n_exp; ++i) {
            if (exp_dirs.col(i).dot(b) > cos_eps) {
                if (hit >= 0) {
                    unique = false;
                    break;
                }
                hit = static_cast<int>(i);
            }
        }
        if (hit >= 0 && unique) {
            matches.emplace_back(j, hit);
            ++expected_claims[hit];
        }
    }
    // Two observations inside one expected cone: ambiguous, drop both.
    std::erase_if(matches, [&](const auto& m) { return expected_claims[m.second] > 1; });
    for (auto& m : matches) m.second = expected[m.second].cat;
    return matches;
}

namespace {

/// Three well-spread anchors: the widest pair, then the star maximizing the
/// minimum separation from both.
std::array<int, 3> pick_base(const Frame& frame,
                             const std::vector<std::pair<int, int32_t>>& matches) {
    const size_t m = matches.size();
    size_t bi = 0, bj = 1;
    double best = 2.0;
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = i + 1; j < m; ++j) {
            const double c = frame.obs[matches[i].first].dot(frame.obs[matches[j].first]);
            if (c < best) {
                best = c;
                bi = i;
                bj = j;
            }
        }
    }
    size_t bk = 0;
    double best_min = 2.0;
    for (size_t k = 0; k < m; ++k) {
        if (k == bi || k == bj) continue;
        const double c = std::max(frame.obs[matches[k].first].dot(frame.obs[matches[bi].first]),
                                  frame.obs[matches[k].first].dot(frame.obs[matches[bj].first]));
        if (c < best_min) {
            best_min = c;
            bk = k;
        }
    }
    return {static_cast<int>(bi), static_cast<int>(bj), static_cast<int>(bk)};
}

}  // namespace

ValidationResult validate(const Mat3& prev_attitude, const WahbaSolution& solution,
                          double expected_phi, const RsiConfig& config) {
    if (solution.cost > config.wahba_cost_coeff * solution.n_stars) {
        return {false, AbortReason::wahba_cost};
    }
    const double phi = principal_angle(prev_attitude, solution.q.to_dcm());
    if (std::abs(phi - expected_phi) > config.principal_angle_tol) {
        return {false, AbortReason::principal_angle};
    }
    return {true, AbortReason::none};
}

RsiMatch rsi_match(const RsiState& state, const Frame& frame, const RsiConfig& config,
                   const std::vector<Star>& stars, const PairDatabase& db,
                   const KVector& kv, const Fov& fov) {
    RsiMatch out;

    const auto expected = predict_stars(state, frame.t, fov, stars);
    const auto matches = match_recurrent(expected, frame, config.epsilon);
    out.n_recurrent = static_cast<int>(matches.size());
    if (out.n_recurrent < config.min_recurrent) return out;

    // Nothing left to confirm: every observation matched a predicted star.
    if (matches.size() == frame.obs.size()) {
        out.result.ids.assign(frame.obs.size(), star_id::kUnidentified);
        for (const auto& m : matches) out.result.ids[static_cast<size_t>(m.first)] = m.second;
        out.result.n_identified = static_cast<int>(matches.size());
        out.result.method = IdMethod::recursive;
        out.ok = true;
        return out;
    }

    const auto base_idx = pick_base(frame, matches);
    std::array<AnchorStar, 3> base;
    for (int b = 0; b < 3; ++b) {
        const auto& m = matches[static_cast<size_t>(base_idx[b])];
        base[b] = {frame.obs[m.first], m.second};
    }
    thread_local std::vector<int32_t> confirmed_obs, confirmed_ids;
    confirmed_obs.clear();
    confirmed_ids.clear();
    for (const auto& m : matches) {
        confirmed_obs.push_back(m.first);
        confirmed_ids.push_back(m.second);
    }
    out.result = identify_remaining(frame, base, confirmed_obs, confirmed_ids, stars, db, kv,
                                    config.pair_tolerance);
    out.result.method = IdMethod::recursive;
    out.ok = true;
    return out;
}

RsiOutcome rsi_identify(const RsiState& state, const Frame& frame, const RsiConfig& config,
                        const std::vector<Star>& stars, const PairDatabase& db,
                        const KVector& kv, const Fov& fov) {
    RsiOutcome out;
    RsiMatch match = rsi_match(state, frame, config, stars, db, kv, fov);
    out.n_recurrent = match.n_recurrent;
    out.result = std::move(match.result);
    if (!match.ok) {
        out.reason = AbortReason::too_few_recurrent;
        return out;
    }

    std::vector<Vec3> obs, ref;
    std::vector<double> weights;
    for (size_t i = 0; i < out.result.ids.size(); ++i) {
        if (out.result.ids[i] < 0) continue;
        obs.push_back(frame.obs[i]);
        ref.push_back(stars[static_cast<size_t>(out.result.ids[i])].direction);
        weights.push_back(1.0 / static_cast<double>(out.result.n_identified));
    }
    out.attitude = solve_wahba(obs, ref, weights);

    const double expected_phi = expected_rotation(state, frame.t);
    const auto check = validate(state.prev_attitude, out.attitude, expected_phi, config);
    if (!check.ok) {
        out.reason = check.reason;
        return out;
    }
    out.ok = true;
    return out;
}

}  // namespace startrack
