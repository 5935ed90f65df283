#pragma once

#include "startrack/pipeline.hpp"

namespace startrack {

struct BenchmarkRecord {
    int n_spikes = 0;
    double pyramid_mean_us = 0.0;
    double recursive_mean_us = 0.0;
    double pyramid_trimmed_us = 0.0;   // 1% outlier-trimmed means
    double recursive_trimmed_us = 0.0;
    double ratio = 0.0;                // pyramid / recursive
    int n_runs = 0;
};

/// Best-case recursive timing: zero angular velocity, so every star in the
/// new frame was identified in the previous one; fresh spikes and noise per
/// frame. Times pyramid_identify vs rsi_identify on identical frames.
std::vector<BenchmarkRecord> bench_best_case(const std::vector<Star>& stars,
                                             const PairDatabase& db, const KVector& kv,
                                             const CameraModel& camera, int n_runs,
                                             int max_spikes, uint64_t seed);

/// Worst-case recursive timing: a deliberately orthogonal rate estimate
/// leaves no recurrent stars, so RSI aborts and Pyramid runs; the recursive
/// column times abort + Pyramid together.
std::vector<BenchmarkRecord> bench_worst_case(const std::vector<Star>& stars,
                                              const PairDatabase& db, const KVector& kv,
                                              const CameraModel& camera, int n_runs,
                                              int max_spikes, uint64_t seed);

struct CaseSeries {
    std::string label;        // e.g. "5min", "1Hz"
    double sample_period = 0.0;
    std::vector<RunReport> trials;
};

struct CampaignConfig {
    int case_id = 1;
    int n_trials = 1000;
    uint64_t seed = 1;
    int threads = 0;  // 0 = library default
    std::vector<double> sample_periods;  // empty = per-case defaults
    size_t window_n_max = 0;             // 0 = per-case default
};

/// Monte Carlo campaign over one of the four dynamic scenarios. Trials are
/// independent (seed + trial index) so the result is thread-count invariant.
std::vector<CaseSeries> run_case(const CampaignConfig& cfg, const std::vector<Star>& stars,
                                 const PairDatabase& db, const KVector& kv,
                                 const CameraModel& camera);

/// Scenario + pipeline configuration used by run_case for a given case,
/// exposed so tests can reuse the exact campaign setup.
ScenarioConfig scenario_for_case(int case_id, double sample_period, uint64_t trial_seed);
PipelineConfig pipeline_config_for_case(int case_id, const CameraModel& camera,
                                        size_t window_n_max);
double default_window_n_max(int case_id);
std::vector<double> default_sample_periods(int case_id);

/// Pyramid-call fraction excluding the two mandatory initialization solves.
double pyramid_rate_excluding_init(const RunReport& report);

}  // namespace startrack
