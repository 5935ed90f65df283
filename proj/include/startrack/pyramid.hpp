#pragma once

#include <array>
#include <optional>

#include "startrack/catalog.hpp"
#include "startrack/frame.hpp"

namespace startrack {

/// Observation-index triple plus the unique catalog triple it resolved to.
struct Triangle {
    int i, j, k;              // observation indices
    int32_t ci, cj, ck;       // star-list indices
};

/// An identified anchor star: camera-frame direction plus star-list index.
struct AnchorStar {
    Vec3 dir;
    int32_t cat;
};

/// Star-list index of the single catalog star consistent with the measured
/// angles from `dir` to all three anchors, or nullopt when zero or several
/// candidates survive.
std::optional<int32_t> confirm_star(const Vec3& dir,
                                    const std::array<AnchorStar, 3>& base,
                                    const std::vector<Star>& stars,
                                    const PairDatabase& db, const KVector& kv,
                                    double tolerance);

/// Step 1: scan observation triples (sliding-window order, rotated by
/// *scan_offset) for one whose three inter-star angles admit exactly one
/// consistent catalog triple.
std::optional<Triangle> find_unique_triangle(const Frame& frame,
                                             const std::vector<Star>& stars,
                                             const PairDatabase& db, const KVector& kv,
                                             double tolerance,
                                             size_t* scan_offset = nullptr);

/// Step 2: reference star confirming the triangle. Returns the observation
/// index and its resolved star-list index.
std::optional<std::pair<int, int32_t>> find_reference_star(
    const Frame& frame, const Triangle& tri, const std::vector<Star>& stars,
    const PairDatabase& db, const KVector& kv, double tolerance);

/// Step 3: identify every remaining observation against the confirmed base,
/// discarding inconsistent ones as spikes.
IdResult identify_remaining(const Frame& frame, const std::array<AnchorStar, 3>& base,
                            const std::vector<int32_t>& confirmed_obs,
                            const std::vector<int32_t>& confirmed_ids,
                            const std::vector<Star>& stars,
                            const PairDatabase& db, const KVector& kv,
                            double tolerance);

/// Full lost-in-space identification (steps 1-3). nullopt = Pyramid reports
/// it cannot identify any stars.
std::optional<IdResult> pyramid_identify(const Frame& frame,
                                         const std::vector<Star>& stars,
                                         const PairDatabase& db, const KVector& kv,
                                         double tolerance,
                                         size_t* scan_offset = nullptr);

}  // namespace startrack
