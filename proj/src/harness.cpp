#include "startrack/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace startrack {

namespace {

using Clock = std::chrono::steady_clock;

volatile int64_t g_sink = 0;  // keeps timed calls from being optimized away

double micros(Clock::duration d) {
    return std::chrono::duration<double, std::micro>(d).count();
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double trimmed_mean(std::vector<double> v, double frac = 0.01) {
    if (v.size() < 10) return mean_of(v);
    std::sort(v.begin(), v.end());
    const auto cut = static_cast<size_t>(static_cast<double>(v.size()) * frac);
    return std::accumulate(v.begin() + static_cast<long>(cut),
                           v.end() - static_cast<long>(cut), 0.0) /
           static_cast<double>(v.size() - 2 * cut);
}

/// In-FOV truth directions cached once, so per-run frame synthesis touches
/// only the visible stars instead of the whole catalog.
struct FovView {
    std::vector<Vec3> dirs;        // camera-frame truth directions
    std::vector<int32_t> indices;  // star-list indices
};

FovView view_of(const std::vector<Star>& stars, const Mat3& attitude, const Fov& fov) {
    FovView view;
    for (size_t i = 0; i < stars.size(); ++i) {
        const Vec3 b = attitude * stars[i].direction;
        if (!fov.contains(b)) continue;
        view.dirs.push_back(b);
        view.indices.push_back(static_cast<int32_t>(i));
    }
    return view;
}

Frame frame_from_view(const FovView& view, const Fov& fov, double sigma, double t,
                      int n_spikes, Rng& rng, std::vector<int32_t>* truth_ids) {
    std::vector<Vec3> obs;
    std::vector<int32_t> truth;
    for (size_t i = 0; i < view.dirs.size(); ++i) {
        obs.push_back(perturb_direction(view.dirs[i], sigma, rng));
        truth.push_back(view.indices[i]);
    }
    for (int s = 0; s < n_spikes; ++s) {
        obs.push_back(random_fov_direction(fov, rng));
        truth.push_back(star_id::kSpike);
    }
    std::vector<size_t> order(obs.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Frame frame;
    frame.t = t;
    std::vector<int32_t> shuffled_truth;
    for (const size_t i : order) {
        frame.obs.push_back(obs[i]);
        shuffled_truth.push_back(truth[i]);
    }
    if (truth_ids) *truth_ids = std::move(shuffled_truth);
    return frame;
}

struct BenchSetup {
    Mat3 attitude;
    FovView view;
    RsiState rsi;
};

/// Random boresight with enough visible stars, plus a perfectly identified
/// previous frame feeding the recursive step.
BenchSetup make_setup(const std::vector<Star>& stars, const CameraModel& camera,
                      const Vec3& pred_axis, double pred_mag, Rng& rng) {
    const Fov fov = camera.fov();
    for (;;) {
        const Mat3 c = random_quaternion(rng).to_dcm();
        FovView view = view_of(stars, c, fov);
        if (view.dirs.size() < 6) continue;
        std::vector<int32_t> truth;
        Frame prev = frame_from_view(view, fov, camera.centroid_sigma, 0.0, 0, rng, &truth);
        prev.ids = std::move(truth);
        BenchSetup setup;
        setup.attitude = c;
        setup.view = std::move(view);
        setup.rsi = RsiState{std::move(prev), c, pred_axis, pred_mag, 0.0, 0.0, {}};
        setup.rsi.close_pairs = close_id_pairs(setup.rsi.prev_frame, PipelineConfig{}.theta_min);
        return setup;
    }
}

std::vector<BenchmarkRecord> bench_impl(const std::vector<Star>& stars,
                                        const PairDatabase& db, const KVector& kv,
                                        const CameraModel& camera, int n_runs,
                                        int max_spikes, uint64_t seed, bool worst) {
    if (n_runs <= 0 || max_spikes < 0) return {};
    PipelineConfig pc;
    pc.fov = camera.fov();
    const RsiConfig rsi_cfg{pc.epsilon_floor,    pc.theta_min,      pc.wahba_cost_coeff,
                            pc.principal_floor,  pc.pair_tolerance, pc.min_recurrent};
    const Fov fov = camera.fov();
    // Worst case: a prediction orthogonal to the boresight sweeps every
    // previously seen star out of the field, so no recurrent match survives.
    const Vec3 pred_axis = worst ? Vec3::UnitX() : Vec3::UnitZ();
    const double pred_mag = worst ? 30.0 * kDeg : 0.0;
    const double dt = 1.0;

    // The same boresights serve every spike count, so the rows differ only in
    // the number of injected fake stars and the ratios are comparable.
    const int n_setups = std::clamp(n_runs / 100, 1, 64);
    std::vector<BenchSetup> setups;
    {
        Rng setup_rng(seed);
        for (int s = 0; s < n_setups; ++s)
            setups.push_back(make_setup(stars, camera, pred_axis, pred_mag, setup_rng));
    }

    std::vector<BenchmarkRecord> records;
    for (int n_spikes = 0; n_spikes <= max_spikes; ++n_spikes) {
        Rng rng(seed + 0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(n_spikes + 1));

        std::vector<double> t_pyr, t_rec;
        t_pyr.reserve(static_cast<size_t>(n_runs));
        t_rec.reserve(static_cast<size_t>(n_runs));
        for (int run = 0; run < n_runs; ++run) {
            const BenchSetup& setup = setups[static_cast<size_t>(run) % setups.size()];
            const Frame frame = frame_from_view(setup.view, fov, camera.centroid_sigma,
                                                dt, n_spikes, rng, nullptr);
            // Both sides are timed on identification only: pyramid_identify and
            // rsi_match each turn observations into catalog ids, and the attitude
            // solve that follows is the same work either way. The worst case adds
            // the pyramid fallback after the aborted recursive attempt, which is
            // the full cost of a failed prediction. Whichever side runs second
            // sees caches warmed by the first, so the order alternates per run
            // and the bias cancels in the means.
            const auto time_pyramid = [&] {
                const auto t0 = Clock::now();
                const auto pyr = pyramid_identify(frame, stars, db, kv, pc.pair_tolerance);
                const auto t1 = Clock::now();
                g_sink = g_sink + (pyr ? pyr->n_identified : -1);
                t_pyr.push_back(micros(t1 - t0));
            };
            const auto time_recursive = [&] {
                const auto t0 = Clock::now();
                int ident = -1;
                if (worst) {
                    const RsiOutcome out =
                        rsi_identify(setup.rsi, frame, rsi_cfg, stars, db, kv, fov);
                    if (out.ok) {
                        ident = out.result.n_identified;
                    } else {
                        const auto fb =
                            pyramid_identify(frame, stars, db, kv, pc.pair_tolerance);
                        ident = fb ? fb->n_identified : -1;
                    }
                } else {
                    const RsiMatch out =
                        rsi_match(setup.rsi, frame, rsi_cfg, stars, db, kv, fov);
                    ident = out.ok ? out.result.n_identified : -1;
                }
                const auto t1 = Clock::now();
                g_sink = g_sink + ident;
                t_rec.push_back(micros(t1 - t0));
            };
            if (run % 2 == 0) {
                time_pyramid();
                time_recursive();
            } else {
                time_recursive();
                time_pyramid();
            }
        }

        BenchmarkRecord rec;
        rec.n_spikes = n_spikes;
        rec.n_runs = n_runs;
        rec.pyramid_mean_us = mean_of(t_pyr);
        rec.recursive_mean_us = mean_of(t_rec);
        rec.pyramid_trimmed_us = trimmed_mean(t_pyr);
        rec.recursive_trimmed_us = trimmed_mean(t_rec);
        // Trimmed means for the headline ratio: scheduler hiccups land on
        // whichever side is running and would otherwise dominate the tails.
        // Best case reports the pyramid/recursive speedup; worst case reports
        // the overhead of the aborted recursive attempt plus fallback relative
        // to calling the pyramid search directly.
        if (worst) {
            rec.ratio = rec.pyramid_trimmed_us > 0.0
                            ? rec.recursive_trimmed_us / rec.pyramid_trimmed_us
                            : 0.0;
        } else {
            rec.ratio = rec.recursive_trimmed_us > 0.0
                            ? rec.pyramid_trimmed_us / rec.recursive_trimmed_us
                            : 0.0;
        }
        records.push_back(rec);
    }
    return records;
}

uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string label_for(double period) {
    char buf[32];
    if (period >= 60.0) {
        std::snprintf(buf, sizeof buf, "%gmin", period / 60.0);
    } else if (period >= 1.0) {
        std::snprintf(buf, sizeof buf, "%gs", period);
    } else {
        std::snprintf(buf, sizeof buf, "%gHz", 1.0 / period);
    }
    return buf;
}

}  // namespace

std::vector<BenchmarkRecord> bench_best_case(const std::vector<Star>& stars,
                                             const PairDatabase& db, const KVector& kv,
                                             const CameraModel& camera, int n_runs,
                                             int max_spikes, uint64_t seed) {
    return bench_impl(stars, db, kv, camera, n_runs, max_spikes, seed, false);
}

std::vector<BenchmarkRecord> bench_worst_case(const std::vector<Star>& stars,
                                              const PairDatabase& db, const KVector& kv,
                                              const CameraModel& camera, int n_runs,
                                              int max_spikes, uint64_t seed) {
    return bench_impl(stars, db, kv, camera, n_runs, max_spikes, seed, true);
}

ScenarioConfig scenario_for_case(int case_id, double sample_period, uint64_t trial_seed) {
    ScenarioConfig sc;
    sc.sample_period = sample_period;
    sc.rng_seed = trial_seed;
    switch (case_id) {
        case 1:
            sc.kind = ScenarioKind::stellar_compass;
            sc.duration = 8.0 * 3600.0;
            break;
        case 2:
            sc.kind = ScenarioKind::geo;
            sc.duration = 8.0 * 3600.0;
            break;
        case 3:
            sc.kind = ScenarioKind::bang_bang;
            sc.duration = 1e12;  // capped at the maneuver end
            break;
        case 4:
            sc.kind = ScenarioKind::time_varying;
            sc.duration = 120.0;
            break;
        default:
            throw InvalidInput("scenario_for_case: case_id must be 1..4");
    }
    return sc;
}

PipelineConfig pipeline_config_for_case(int case_id, const CameraModel& camera,
                                        size_t window_n_max) {
    PipelineConfig pc;
    pc.fov = camera.fov();
    pc.centroid_sigma = camera.centroid_sigma;
    pc.window_n_max = window_n_max;
    // The slow scenarios are exactly pure spin: the out-of-plane signal is
    // just attitude noise (floor near 1e-8 for deep windows), so a tight
    // tolerance would starve the long-window averaging. The fast
    // time-varying case keeps the tight tolerance that drives adaptation.
    pc.quatera.sigma3_tol = case_id == 4 ? 8e-10 : 1e-7;
    return pc;
}

double default_window_n_max(int case_id) {
    // The slow scenarios yield at most 97 valid frames over the full run;
    // keep them all. The fast scenarios use the standard 50-deep window.
    return (case_id == 1 || case_id == 2) ? 100 : 50;
}

std::vector<double> default_sample_periods(int case_id) {
    switch (case_id) {
        case 1:
        case 2:
            return {300.0, 600.0, 1800.0, 3600.0};
        case 3:
            return {1.0};
        case 4:
            return {1.0, 0.2};
        default:
            throw InvalidInput("default_sample_periods: case_id must be 1..4");
    }
}

std::vector<CaseSeries> run_case(const CampaignConfig& cfg, const std::vector<Star>& stars,
                                 const PairDatabase& db, const KVector& kv,
                                 const CameraModel& camera) {
    if (cfg.case_id < 1 || cfg.case_id > 4)
        throw InvalidInput("run_case: case_id must be 1..4");
    if (cfg.n_trials <= 0) throw InvalidInput("run_case: n_trials must be positive");
    const std::vector<double> periods =
        cfg.sample_periods.empty() ? default_sample_periods(cfg.case_id) : cfg.sample_periods;
    const size_t n_max = cfg.window_n_max != 0
                             ? cfg.window_n_max
                             : static_cast<size_t>(default_window_n_max(cfg.case_id));

    std::vector<CaseSeries> result;
    for (size_t p = 0; p < periods.size(); ++p) {
        CaseSeries series;
        series.label = label_for(periods[p]);
        series.sample_period = periods[p];
        series.trials.resize(static_cast<size_t>(cfg.n_trials));
        const PipelineConfig pc = pipeline_config_for_case(cfg.case_id, camera, n_max);

#ifdef _OPENMP
        const int n_threads = cfg.threads > 0 ? cfg.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(n_threads)
#endif
        for (int trial = 0; trial < cfg.n_trials; ++trial) {
            // Seeded per (seed, series, trial) so the result is independent
            // of scheduling and thread count.
            const uint64_t trial_seed =
                mix64(cfg.seed ^ (p * 0x100000001b3ULL) ^ static_cast<uint64_t>(trial));
            const ScenarioConfig sc =
                scenario_for_case(cfg.case_id, periods[p], trial_seed);
            ScenarioRun run(sc, stars, camera);
            PipelineState state(pc);
            const FrameSource source =
                [&run]() -> std::optional<std::pair<Frame, std::optional<TruthInfo>>> {
                auto item = run.next();
                if (!item) return std::nullopt;
                return std::make_pair(
                    std::move(item->frame),
                    std::optional<TruthInfo>(
                        TruthInfo{item->truth.omega_axis, item->truth.omega_mag}));
            };
            series.trials[static_cast<size_t>(trial)] =
                run_pipeline(state, source, pc, stars, db, kv);
        }
        result.push_back(std::move(series));
    }
    return result;
}

double pyramid_rate_excluding_init(const RunReport& report) {
    int frames = 0, pyramid = 0;
    for (const RunRow& row : report.rows) {
        if (row.step.method == StepMethod::skipped) continue;
        ++frames;
        if (row.step.method == StepMethod::pyramid) ++pyramid;
    }
    if (frames <= 2) return 0.0;
    return static_cast<double>(std::max(0, pyramid - 2)) / static_cast<double>(frames - 2);
}

}  // namespace startrack
