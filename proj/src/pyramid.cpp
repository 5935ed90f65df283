#include "startrack/pyramid.hpp"

#include <algorithm>
#include <cmath>

namespace startrack {

namespace {

/// Candidate pair span for a measured inter-star angle, widened by the
/// matching tolerance (both in radians via the cosine).
std::span<const PairEntry> pairs_near(const PairDatabase& db, const KVector& kv,
                                      double cos_angle, double tolerance) {
    const double angle = safe_acos(cos_angle);
    const double lo = std::cos(std::min(angle + tolerance, M_PI));
    const double hi = std::cos(std::max(angle - tolerance, 0.0));
    return kvector_range(kv, db, lo, hi);
}

bool span_has_pair(std::span<const PairEntry> s, int32_t a, int32_t b) {
    if (a > b) std::swap(a, b);
    for (const auto& e : s) {
        if (e.a == a && e.b == b) return true;
    }
    return false;
}

/// Partner stars of `cat` among the candidate pairs.
void partners_of(std::span<const PairEntry> s, int32_t cat, std::vector<int32_t>& out) {
    out.clear();
    for (const auto& e : s) {
        if (e.a == cat) out.push_back(e.b);
        else if (e.b == cat) out.push_back(e.a);
    }
}

/// Triple number `index` of the sliding-window scan over n observations:
/// outer loops widen the index gaps (dj, dk), the inner loop slides the base
/// index i, yielding (i, i+dj, i+dj+dk). Every unordered triple appears once.
std::array<int, 3> triple_at(int n, size_t index) {
    for (int dj = 1; dj <= n - 2; ++dj) {
        for (int dk = 1; dk <= n - 1 - dj; ++dk) {
            const size_t run = static_cast<size_t>(n - dj - dk);
            if (index < run) {
                const int i = static_cast<int>(index);
                return {i, i + dj, i + dj + dk};
            }
            index -= run;
        }
    }
    return {0, 1, 2};  // unreachable for index < C(n, 3)
}

}  // namespace

std::optional<int32_t> confirm_star(const Vec3& dir,
                                    const std::array<AnchorStar, 3>& base,
                                    const std::vector<Star>& /*stars*/,
                                    const PairDatabase& db, const KVector& kv,
                                    double tolerance) {
    thread_local std::vector<int32_t> c0, c1, c2, common;
    partners_of(pairs_near(db, kv, dir.dot(base[0].dir), tolerance), base[0].cat, c0);
    partners_of(pairs_near(db, kv, dir.dot(base[1].dir), tolerance), base[1].cat, c1);
    common.clear();
    for (const int32_t s : c0) {
        if (std::find(c1.begin(), c1.end(), s) != c1.end()) common.push_back(s);
    }
    if (common.empty()) return std::nullopt;
    partners_of(pairs_near(db, kv, dir.dot(base[2].dir), tolerance), base[2].cat, c2);

    int32_t found = -1;
    for (const int32_t s : common) {
        if (std::find(c2.begin(), c2.end(), s) == c2.end()) continue;
        if (found >= 0) return std::nullopt;  // ambiguous
        found = s;
    }
    if (found < 0) return std::nullopt;
    return found;
}

std::optional<Triangle> find_unique_triangle(const Frame& frame,
                                             const std::vector<Star>& /*stars*/,
                                             const PairDatabase& db, const KVector& kv,
                                             double tolerance,
                                             size_t* scan_offset) {
    const int n = static_cast<int>(frame.obs.size());
    if (n < 3) return std::nullopt;

    // Sliding-window scan order: for each pair of index gaps (dj, dk) slide the
    // base index across the frame, so consecutive triples share at most two
    // observations. A fake star then spoils only a short run of triples instead
    // of every triple built on a low index, which keeps the scan cheap when the
    // frame is polluted. The persistent offset rotates the order so a retry
    // after a failed pyramid starts elsewhere.
    const size_t total =
        static_cast<size_t>(n) * (n - 1) * (n - 2) / 6;
    const size_t start = scan_offset ? *scan_offset % total : 0;

    for (size_t step = 0; step < total; ++step) {
        const auto [i, j, k] = triple_at(n, (start + step) % total);
        const auto pij = pairs_near(db, kv, frame.obs[i].dot(frame.obs[j]), tolerance);
        if (pij.empty()) continue;
        const auto pik = pairs_near(db, kv, frame.obs[i].dot(frame.obs[k]), tolerance);
        if (pik.empty()) continue;
        const auto pjk = pairs_near(db, kv, frame.obs[j].dot(frame.obs[k]), tolerance);
        if (pjk.empty()) continue;

        int solutions = 0;
        Triangle tri{i, j, k, -1, -1, -1};
        for (const auto& e1 : pij) {
            for (const auto& e2 : pik) {
                // The star common to both pairs is the candidate for obs i.
                const std::array<std::array<int32_t, 3>, 4> combos{{
                    {e1.a, e1.b, e2.b},  // e1.a == e2.a
                    {e1.a, e1.b, e2.a},  // e1.a == e2.b
                    {e1.b, e1.a, e2.b},  // e1.b == e2.a
                    {e1.b, e1.a, e2.a},  // e1.b == e2.b
                }};
                const std::array<bool, 4> match{e1.a == e2.a, e1.a == e2.b,
                                                e1.b == e2.a, e1.b == e2.b};
                for (int c = 0; c < 4; ++c) {
                    if (!match[c]) continue;
                    const auto [ci, cj, ck] = combos[c];
                    if (cj == ck) continue;
                    if (!span_has_pair(pjk, cj, ck)) continue;
                    if (++solutions > 1) break;
                    tri.ci = ci;
                    tri.cj = cj;
                    tri.ck = ck;
                }
                if (solutions > 1) break;
            }
            if (solutions > 1) break;
        }
        if (solutions == 1) {
            if (scan_offset) *scan_offset = (start + step) % total;
            return tri;
        }
    }
    return std::nullopt;
}

std::optional<std::pair<int, int32_t>> find_reference_star(
    const Frame& frame, const Triangle& tri, const std::vector<Star>& stars,
    const PairDatabase& db, const KVector& kv, double tolerance) {
    const std::array<AnchorStar, 3> base{{{frame.obs[tri.i], tri.ci},
                                          {frame.obs[tri.j], tri.cj},
                                          {frame.obs[tri.k], tri.ck}}};
    const int n = static_cast<int>(frame.obs.size());
    for (int r = 0; r < n; ++r) {
        if (r == tri.i || r == tri.j || r == tri.k) continue;
        const auto cat = confirm_star(frame.obs[r], base, stars, db, kv, tolerance);
        if (cat && *cat != tri.ci && *cat != tri.cj && *cat != tri.ck) {
            return std::make_pair(r, *cat);
        }
    }
    return std::nullopt;
}

IdResult identify_remaining(const Frame& frame, const std::array<AnchorStar, 3>& base,
                            const std::vector<int32_t>& confirmed_obs,
                            const std::vector<int32_t>& confirmed_ids,
                            const std::vector<Star>& stars,
                            const PairDatabase& db, const KVector& kv,
                            double tolerance) {
    const int n = static_cast<int>(frame.obs.size());
    IdResult res;
    res.ids.assign(n, star_id::kUnidentified);
    thread_local std::vector<int32_t> used;
    used.assign(confirmed_ids.begin(), confirmed_ids.end());
    for (size_t c = 0; c < confirmed_obs.size(); ++c) {
        res.ids[confirmed_obs[c]] = confirmed_ids[c];
    }
    for (int s = 0; s < n; ++s) {
        if (res.ids[s] != star_id::kUnidentified) continue;
        const auto cat = confirm_star(frame.obs[s], base, stars, db, kv, tolerance);
        if (cat && std::find(used.begin(), used.end(), *cat) == used.end()) {
            res.ids[s] = *cat;
            used.push_back(*cat);
        } else {
            res.ids[s] = star_id::kSpike;
        }
    }
    res.n_identified = static_cast<int>(
        std::count_if(res.ids.begin(), res.ids.end(), [](int32_t v) { return v >= 0; }));
    return res;
}

std::optional<IdResult> pyramid_identify(const Frame& frame,
                                         const std::vector<Star>& stars,
                                         const PairDatabase& db, const KVector& kv,
                                         double tolerance,
                                         size_t* scan_offset) {
    if (frame.obs.size() < 3) return std::nullopt;
    size_t local_offset = 0;
    size_t* offset = scan_offset ? scan_offset : &local_offset;

    const size_t n = frame.obs.size();
    const size_t max_triangles = n * (n - 1) * (n - 2) / 6;
    for (size_t attempt = 0; attempt < max_triangles; ++attempt) {
        const auto tri = find_unique_triangle(frame, stars, db, kv, tolerance, offset);
        if (!tri) return std::nullopt;
        const auto ref = find_reference_star(frame, *tri, stars, db, kv, tolerance);
        if (!ref) {
            *offset += 1;  // retry from the next triple
            continue;
        }
        const std::array<AnchorStar, 3> base{{{frame.obs[tri->i], tri->ci},
                                              {frame.obs[tri->j], tri->cj},
                                              {frame.obs[tri->k], tri->ck}}};
        auto res = identify_remaining(frame, base,
                                      {tri->i, tri->j, tri->k, ref->first},
                                      {tri->ci, tri->cj, tri->ck, ref->second},
                                      stars, db, kv, tolerance);
        res.method = IdMethod::pyramid;
        return res;
    }
    return std::nullopt;
}

}  // namespace startrack
