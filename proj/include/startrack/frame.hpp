#pragma once

#include <vector>

#include "startrack/attitude.hpp"

namespace startrack {

namespace star_id {
inline constexpr int32_t kUnidentified = -1;
inline constexpr int32_t kSpike = -2;
}  // namespace star_id

/// Timestamped set of observed star direction unit vectors. After
/// identification, `ids` holds a catalog index per observation (or the
/// unidentified / spike markers above).
struct Frame {
    double t = 0.0;
    std::vector<Vec3> obs;    // camera-frame unit vectors
    std::vector<int32_t> ids; // parallel to obs when non-empty
};

enum class IdMethod { pyramid, recursive };

struct IdResult {
    std::vector<int32_t> ids;  // per observation: catalog index | spike | unidentified
    int n_identified = 0;
    IdMethod method = IdMethod::pyramid;
};

/// Rectangular field of view, symmetric about the +z boresight.
struct Fov {
    double tan_half_x = 0.0;
    double tan_half_y = 0.0;

    bool contains(const Vec3& v) const {
        return v.z() > 0.0 && std::abs(v.x()) <= tan_half_x * v.z() &&
               std::abs(v.y()) <= tan_half_y * v.z();
    }

    /// Full diagonal angle, boresight corner to corner.
    double diagonal() const {
        return 2.0 * std::atan(std::hypot(tan_half_x, tan_half_y));
    }
};

}  // namespace startrack
