#include "startrack/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace startrack {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    return out;
}

}  // namespace

std::vector<Star> load_catalog(std::istream& in, double magnitude_threshold) {
    std::vector<Star> stars;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;  // header row `id,ra_deg,dec_deg,vmag`
            continue;
        }
        const auto fields = split_csv(line);
        if (fields.size() != 4) {
            throw ParseError("catalog line " + std::to_string(line_no) +
                             ": expected 4 fields, got " + std::to_string(fields.size()));
        }
        Star s;
        try {
            s.catalog_id = std::stoi(fields[0]);
            const double ra = std::stod(fields[1]) * kDegToRad;
            const double dec = std::stod(fields[2]) * kDegToRad;
            s.magnitude = std::stod(fields[3]);
            s.direction = radec_to_unit(ra, dec);
        } catch (const std::exception&) {
            throw ParseError("catalog line " + std::to_string(line_no) + ": malformed record");
        }
        if (s.magnitude < magnitude_threshold) stars.push_back(s);
    }
    if (stars.empty()) throw EmptyCatalog("no stars below the magnitude threshold");
    return stars;
}

std::vector<Star> load_catalog(const std::string& path, double magnitude_threshold) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open catalog file: " + path);
    return load_catalog(in, magnitude_threshold);
}

PairDatabase build_pair_database(const std::vector<Star>& stars,
                                 double fov_diagonal, double margin) {
    if (stars.empty()) throw EmptyCatalog("build_pair_database: no stars");
    PairDatabase db;
    db.max_pair_angle = fov_diagonal + margin;
    const double cos_min = std::cos(db.max_pair_angle);
    const auto n = static_cast<int32_t>(stars.size());
    for (int32_t i = 0; i < n; ++i) {
        for (int32_t j = i + 1; j < n; ++j) {
            const double c = stars[i].direction.dot(stars[j].direction);
            if (c >= cos_min) db.entries.push_back({c, i, j});
        }
    }
    std::sort(db.entries.begin(), db.entries.end(),
              [](const PairEntry& x, const PairEntry& y) {
                  // Total order keeps rebuilds bit-identical.
                  return x.cos_angle != y.cos_angle
                             ? x.cos_angle < y.cos_angle
                             : std::tie(x.a, x.b) < std::tie(y.a, y.b);
              });
    return db;
}

KVector build_kvector(const PairDatabase& db) {
    KVector kv;
    const auto m = static_cast<int32_t>(db.entries.size());
    if (m < 2) {
        kv.direct_scan = true;
        return kv;
    }
    const double y_min = db.entries.front().cos_angle;
    const double y_max = db.entries.back().cos_angle;
    if (y_max <= y_min) {
        kv.direct_scan = true;
        return kv;
    }
    // Line through the extremes, widened by one ulp-scale epsilon so the
    // first and last entries fall strictly inside the first and last bins.
    const double eps = (y_max - y_min) * 1e-13 + 1e-15;
    kv.slope = (y_max - y_min + 2.0 * eps) / static_cast<double>(m - 1);
    kv.intercept = y_min - eps;
    kv.k.assign(m + 1, 0);
    int32_t idx = 0;
    for (int32_t j = 0; j <= m; ++j) {
        const double y = kv.intercept + kv.slope * static_cast<double>(j);
        while (idx < m && db.entries[idx].cos_angle <= y) ++idx;
        kv.k[j] = idx;
    }
    kv.k[m] = m;
    return kv;
}

std::span<const PairEntry> kvector_range(const KVector& kv, const PairDatabase& db,
                                         double cos_lo, double cos_hi) {
    if (cos_lo > cos_hi) throw InvalidInput("kvector_range: cos_lo > cos_hi");
    const auto m = static_cast<int32_t>(db.entries.size());
    if (m == 0) return {};

    int32_t first, last;  // candidate range [first, last)
    if (kv.direct_scan) {
        first = 0;
        last = m;
    } else {
        auto bin = [&](double y) {
            const double j = (y - kv.intercept) / kv.slope;
            return static_cast<int32_t>(std::clamp(j, 0.0, static_cast<double>(m)));
        };
        // Widen by one bin on each side; completeness over speed at the edges.
        first = kv.k[std::max(bin(cos_lo) - 1, 0)];
        last = kv.k[std::min(bin(cos_hi) + 1, m)];
    }
    const PairEntry* base = db.entries.data();
    while (first < last && base[first].cos_angle < cos_lo) ++first;
    while (last > first && base[last - 1].cos_angle > cos_hi) --last;
    return {base + first, static_cast<size_t>(last - first)};
}

void save_pair_database(const PairDatabase& db, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out.precision(17);
    out << "# max_pair_angle=" << db.max_pair_angle << "\n";
    out << "cos_angle,a,b\n";
    for (const auto& e : db.entries) {
        out << e.cos_angle << ',' << e.a << ',' << e.b << '\n';
    }
}

PairDatabase load_pair_database(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open pair database: " + path);
    PairDatabase db;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line.rfind("# max_pair_angle=", 0) == 0) {
            db.max_pair_angle = std::stod(line.substr(17));
            continue;
        }
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        const auto fields = split_csv(line);
        if (fields.size() != 3) {
            throw ParseError("pair database line " + std::to_string(line_no) + ": malformed");
        }
        db.entries.push_back({std::stod(fields[0]),
                              static_cast<int32_t>(std::stoi(fields[1])),
                              static_cast<int32_t>(std::stoi(fields[2]))});
    }
    if (!std::is_sorted(db.entries.begin(), db.entries.end(),
                        [](const PairEntry& x, const PairEntry& y) {
                            return x.cos_angle < y.cos_angle;
                        })) {
        throw ParseError("pair database is not sorted: " + path);
    }
    return db;
}

void save_catalog(const std::vector<Star>& stars, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out.precision(17);
    out << "id,ra_deg,dec_deg,vmag\n";
    for (const auto& s : stars) {
        const double ra = std::atan2(s.direction.y(), s.direction.x());
        const double dec = std::asin(std::clamp(s.direction.z(), -1.0, 1.0));
        out << s.catalog_id << ',' << ra / kDegToRad << ',' << dec / kDegToRad << ','
            << s.magnitude << '\n';
    }
}

}  // namespace startrack
