#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "startrack/attitude.hpp"

namespace startrack {

struct Star {
    int32_t catalog_id = 0;
    Vec3 direction = Vec3::UnitX();  // inertial, epoch-fixed
    double magnitude = 0.0;          // visual magnitude
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyCatalog : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Unit direction from right ascension / declination (radians).
inline Vec3 radec_to_unit(double ra, double dec) {
    const double cd = std::cos(dec);
    return {cd * std::cos(ra), cd * std::sin(ra), std::sin(dec)};
}

/// Reads a CSV catalog (header `id,ra_deg,dec_deg,vmag`) keeping stars with
/// magnitude strictly below the threshold.
std::vector<Star> load_catalog(std::istream& in, double magnitude_threshold);
std::vector<Star> load_catalog(const std::string& path, double magnitude_threshold);

struct PairEntry {
    double cos_angle;   // cosine of the inter-star angle
    int32_t a, b;       // indices into the star list, a < b
};

/// All admissible star pairs (inter-star angle within the FOV diagonal plus
/// margin), sorted ascending by cos_angle.
struct PairDatabase {
    std::vector<PairEntry> entries;
    double max_pair_angle = 0.0;  // radians
};

PairDatabase build_pair_database(const std::vector<Star>& stars,
                                 double fov_diagonal, double margin);

/// Linear-map range-search accelerator over the sorted pair entries.
///
/// k[j] counts entries with cos_angle below the line value at bin j, so any
/// query interval maps to a candidate index range that only needs end
/// trimming. Databases with fewer than 2 entries fall back to a direct scan.
struct KVector {
    std::vector<int32_t> k;  // length m + 1, nondecreasing, k[0] = 0, k[m] = m
    double slope = 0.0;
    double intercept = 0.0;
    bool direct_scan = false;
};

KVector build_kvector(const PairDatabase& db);

/// Entries with cos_angle in [cos_lo, cos_hi], as a contiguous span of the
/// sorted database.
std::span<const PairEntry> kvector_range(const KVector& kv, const PairDatabase& db,
                                         double cos_lo, double cos_hi);

/// CSV round trip of a built database, so benchmark runs can skip the
/// O(n^2) rebuild. Format: header `cos_angle,a,b` preceded by a
/// `# max_pair_angle=<radians>` line.
void save_pair_database(const PairDatabase& db, const std::string& path);
PairDatabase load_pair_database(const std::string& path);

void save_catalog(const std::vector<Star>& stars, const std::string& path);

}  // namespace startrack
