// startrack CLI: catalog/database generation, identification benchmarks,
// Monte Carlo scenario campaigns, and quaternion-log replay.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "startrack/harness.hpp"
#include "startrack/simulator.hpp"

using namespace startrack;
using nlohmann::json;

namespace {

struct GlobalOpts {
    uint64_t seed = 1;
    std::string catalog;   // empty = built-in synthetic sky
    std::string out;       // empty = stdout
    std::string format = "csv";
};

std::ostream& open_out(const GlobalOpts& g, std::ofstream& file) {
    if (g.out.empty()) return std::cout;
    file.open(g.out);
    if (!file) throw CLI::RuntimeError("cannot open output file: " + g.out, 2);
    return file;
}

std::vector<Star> load_stars(const GlobalOpts& g, const CameraModel& camera) {
    std::vector<Star> visible;
    if (!g.catalog.empty()) {
        visible = load_catalog(g.catalog, camera.magnitude_threshold);
    } else {
        for (const auto& s : synthetic_sky())
            if (s.magnitude < camera.magnitude_threshold) visible.push_back(s);
    }
    return visible;
}

// Rows as (column -> value) with a fixed column order.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::map<std::string, std::string> meta;
};

void write_table(std::ostream& os, const Table& t, const std::string& format) {
    if (format == "json") {
        json j;
        j["meta"] = t.meta;
        j["columns"] = t.columns;
        j["rows"] = t.rows;
        os << j.dump(2) << "\n";
        return;
    }
    for (const auto& [k, v] : t.meta) os << "# " << k << "=" << v << "\n";
    for (size_t c = 0; c < t.columns.size(); ++c)
        os << t.columns[c] << (c + 1 < t.columns.size() ? "," : "\n");
    os.precision(12);
    for (const auto& row : t.rows)
        for (size_t c = 0; c < row.size(); ++c)
            os << row[c] << (c + 1 < row.size() ? "," : "\n");
}

int run_build_db(const GlobalOpts& g) {
    CameraModel camera;
    const auto stars = load_stars(g, camera);
    const auto db = build_pair_database(stars, camera.fov().diagonal(), 0.5 * kDeg);
    const std::string path = g.out.empty() ? "pairs.csv" : g.out;
    save_pair_database(db, path);
    std::cerr << "stars: " << stars.size() << ", pairs: " << db.entries.size()
              << ", max pair angle: " << db.max_pair_angle / kDeg << " deg -> " << path
              << "\n";
    return 0;
}

int run_gen_catalog(const GlobalOpts& g, int n_stars, double mag_max) {
    const auto sky = synthetic_sky(g.seed == 1 ? 20200615 : g.seed, n_stars, -1.0, mag_max);
    const std::string path = g.out.empty() ? "catalog.csv" : g.out;
    save_catalog(sky, path);
    std::cerr << "wrote " << sky.size() << " stars -> " << path << "\n";
    return 0;
}

int run_bench(const GlobalOpts& g, const std::string& mode, int n_runs, int max_spikes,
              bool check) {
    CameraModel camera;
    const auto stars = load_stars(g, camera);
    const auto db = build_pair_database(stars, camera.fov().diagonal(), 0.5 * kDeg);
    const auto kv = build_kvector(db);
    const auto records = mode == "best"
                             ? bench_best_case(stars, db, kv, camera, n_runs, max_spikes,
                                               g.seed)
                             : bench_worst_case(stars, db, kv, camera, n_runs, max_spikes,
                                                g.seed);

    Table t;
    t.meta["mode"] = mode;
    t.meta["clock"] = "std::chrono::steady_clock";
    t.meta["runs_per_spike_count"] = std::to_string(n_runs);
    t.columns = {"n_spikes",           "pyramid_mean_us",  "recursive_mean_us",
                 "pyramid_trimmed_us", "recursive_trimmed_us", "ratio"};
    for (const auto& r : records)
        t.rows.push_back({double(r.n_spikes), r.pyramid_mean_us, r.recursive_mean_us,
                          r.pyramid_trimmed_us, r.recursive_trimmed_us, r.ratio});
    std::ofstream f;
    write_table(open_out(g, f), t, g.format);

    if (!check) return 0;
    bool ok = true;
    if (mode == "best") {
        if (records.front().ratio < 5.0) ok = false;
        if (records.back().ratio < 3.0) ok = false;
        // Nonincreasing in spike count, allowing 10% timing noise per step.
        for (size_t i = 1; i < records.size(); ++i)
            if (records[i].ratio > 1.10 * records[i - 1].ratio) ok = false;
    } else {
        for (const auto& r : records)
            if (r.recursive_trimmed_us > 1.10 * r.pyramid_trimmed_us) ok = false;
    }
    if (!ok) std::cerr << "bench " << mode << ": threshold violation\n";
    return ok ? 0 : 1;
}

struct SeriesStats {
    // Monte Carlo vector-mean axis error and its +3 sigma-of-the-mean band,
    // at a given time (arcsec).
    double mc_mean_as = 0.0;
    double plus3_as = 0.0;
    double mean_abs_as = 0.0;
    int n = 0;
};

SeriesStats ensemble_at(const CaseSeries& s, double t_sel) {
    double s1 = 0, s2 = 0, ss = 0, sabs = 0;
    int n = 0;
    for (const auto& tr : s.trials) {
        const RunRow* pick = nullptr;
        for (const auto& r : tr.rows)
            if (r.has_truth && r.step.t <= t_sel + 1e-9) pick = &r;
        if (!pick) continue;
        s1 += pick->axis_err_t1;
        s2 += pick->axis_err_t2;
        ss += pick->axis_err_t1 * pick->axis_err_t1 +
              pick->axis_err_t2 * pick->axis_err_t2;
        sabs += pick->axis_err_arcsec;
        ++n;
    }
    if (n == 0) return {};
    const double m1 = s1 / n, m2 = s2 / n;
    const double mean_norm = std::sqrt(m1 * m1 + m2 * m2);
    const double var = std::max(0.0, ss / (2.0 * n) - 0.5 * (m1 * m1 + m2 * m2));
    const double sig_mean = std::sqrt(var / n);
    return {mean_norm / kArcsec, (mean_norm + 3.0 * sig_mean) / kArcsec,
            sabs / n / kArcsec, n};
}

double varying_segment_pyramid_rate(const CaseSeries& s, double t_from) {
    int frames = 0, pyr = 0;
    for (const auto& tr : s.trials)
        for (const auto& r : tr.rows) {
            if (r.step.t <= t_from || r.step.method == StepMethod::skipped) continue;
            ++frames;
            if (r.step.method == StepMethod::pyramid) ++pyr;
        }
    return frames ? double(pyr) / frames : 0.0;
}

double mean_window(const CaseSeries& s, double t_from) {
    double sum = 0;
    int n = 0;
    for (const auto& tr : s.trials)
        for (const auto& r : tr.rows)
            if (r.step.t > t_from && r.step.has_estimate) {
                sum += r.step.window_n;
                ++n;
            }
    return n ? sum / n : 0.0;
}

int run_run_case(const GlobalOpts& g, int case_id, int n_trials, int threads,
                 std::vector<double> periods, bool check) {
    CameraModel camera;
    const auto stars = load_stars(g, camera);
    const auto db = build_pair_database(stars, camera.fov().diagonal(), 0.5 * kDeg);
    const auto kv = build_kvector(db);

    CampaignConfig cfg;
    cfg.case_id = case_id;
    cfg.n_trials = n_trials;
    cfg.seed = g.seed;
    cfg.threads = threads;
    cfg.sample_periods = std::move(periods);
    const auto series = run_case(cfg, stars, db, kv, camera);

    // Per-time-bin error curves (the shape of the scenario figures).
    Table t;
    t.meta["case"] = std::to_string(case_id);
    t.meta["trials"] = std::to_string(n_trials);
    t.meta["seed"] = std::to_string(g.seed);
    t.columns = {"series_period_s", "t_s",        "mc_mean_axis_err_as",
                 "plus3_as",        "mean_abs_as", "pyramid_rate",
                 "mean_window"};
    for (const auto& s : series) {
        // Bin boundaries: every sample instant of the series.
        std::vector<double> times;
        for (const auto& r : s.trials.front().rows) times.push_back(r.step.t);
        for (double tb : times) {
            const auto e = ensemble_at(s, tb);
            if (e.n == 0) continue;
            int frames = 0, pyr = 0;
            double wsum = 0;
            int wn = 0;
            for (const auto& tr : s.trials)
                for (const auto& r : tr.rows) {
                    if (r.step.t > tb + 1e-9 ||
                        r.step.method == StepMethod::skipped)
                        continue;
                    ++frames;
                    if (r.step.method == StepMethod::pyramid) ++pyr;
                    if (r.step.has_estimate && std::abs(r.step.t - tb) < 1e-9) {
                        wsum += r.step.window_n;
                        ++wn;
                    }
                }
            t.rows.push_back({s.sample_period, tb, e.mc_mean_as, e.plus3_as,
                              e.mean_abs_as, frames ? double(pyr) / frames : 0.0,
                              wn ? wsum / wn : 0.0});
        }
    }
    std::ofstream f;
    write_table(open_out(g, f), t, g.format);

    if (!check) return 0;
    bool ok = true;
    auto fail = [&](const std::string& why) {
        std::cerr << "case " << case_id << ": " << why << "\n";
        ok = false;
    };
    if (case_id == 1 || case_id == 2) {
        const auto* five_min = &series.front();
        for (const auto& s : series)
            if (s.sample_period == 300.0) five_min = &s;
        const auto e1h = ensemble_at(*five_min, 3600.0);
        const auto e5h = ensemble_at(*five_min, 18000.0);
        double pyr = 0;
        for (const auto& tr : five_min->trials) pyr += pyramid_rate_excluding_init(tr);
        pyr /= double(five_min->trials.size());
        if (case_id == 1 && e1h.mc_mean_as >= 5.0) fail("axis error at 1 h >= 5 as");
        if (case_id == 1 && e5h.mc_mean_as >= 1.0) fail("axis error at 5 h >= 1 as");
        if (pyr >= (case_id == 1 ? 0.02 : 0.01)) fail("pyramid rate too high");
    } else if (case_id == 3) {
        const auto& s = series.front();
        const auto end = ensemble_at(s, 1e18);
        const double t_switch = 0.5 * 2.0 * (10.0 * kDeg) / (0.15 * kDeg);
        int exactly2 = 0;
        for (const auto& tr : s.trials) {
            int pyr_after = 0;
            for (const auto& r : tr.rows)
                if (r.step.t > t_switch && r.step.method == StepMethod::pyramid)
                    ++pyr_after;
            if (pyr_after == 2) ++exactly2;
        }
        if (end.mc_mean_as >= 10.0) fail("axis error at maneuver end >= 10 as");
        if (end.plus3_as >= 30.0) fail("axis error +3 sigma >= 30 as");
        if (exactly2 < int(0.95 * double(s.trials.size())))
            fail("two-pyramid recovery below 95%");
    } else if (case_id == 4) {
        const CaseSeries *hz1 = nullptr, *hz5 = nullptr;
        for (const auto& s : series) {
            if (s.sample_period == 1.0) hz1 = &s;
            if (s.sample_period == 0.2) hz5 = &s;
        }
        if (!hz1 || !hz5) {
            fail("need both 1 Hz and 5 Hz series for the check");
        } else {
            const double p1 = varying_segment_pyramid_rate(*hz1, 30.0);
            const double p5 = varying_segment_pyramid_rate(*hz5, 30.0);
            const double w1 = mean_window(*hz1, 30.0);
            const double w5 = mean_window(*hz5, 30.0);
            if (p1 < std::max(0.05, 5.0 * p5))
                fail("1 Hz pyramid reliance not a large factor above 5 Hz");
            if (std::abs(w1 - 3.0) > 1.0) fail("1 Hz mean window outside 3 +/- 1");
            if (std::abs(w5 - 6.0) > 1.0) fail("5 Hz mean window outside 6 +/- 1");
        }
    }
    return ok ? 0 : 1;
}

int run_replay(const GlobalOpts& g, const std::string& path, size_t window_n_max,
               double sigma3_tol) {
    std::ifstream in(path);
    if (!in) throw CLI::RuntimeError("cannot open quaternion log: " + path, 2);

    QuaternionWindow window(window_n_max);
    QuateraConfig qcfg;
    qcfg.sigma3_tol = sigma3_tol;

    Table t;
    t.meta["source"] = path;
    t.columns = {"t",    "axis_x", "axis_y", "axis_z",
                 "omega_rad_s", "window_n", "ok"};
    std::string line;
    bool header_checked = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_checked) {
            header_checked = true;
            if (line.find("qx") != std::string::npos) continue;  // header row
        }
        std::istringstream ls(line);
        double ts, x, y, z, w;
        char c;
        if (!(ls >> ts >> c >> x >> c >> y >> c >> z >> c >> w))
            throw CLI::RuntimeError("malformed log line: " + line, 2);
        window.push(ts, Quat{x, y, z, w}.normalized());
        if (window.size() < 2) continue;
        try {
            const auto est = quatera_estimate(window, qcfg);
            t.rows.push_back({ts, est.axis.x(), est.axis.y(), est.axis.z(),
                              est.magnitude, double(est.window_n), 1.0});
        } catch (const EstimationError&) {
            t.rows.push_back({ts, 0.0, 0.0, 0.0, 0.0, double(window.size()), 0.0});
        }
    }
    std::ofstream f;
    write_table(open_out(g, f), t, g.format);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Star tracker toolkit: recursive star identification with "
                 "SVD-based angular velocity estimation"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "Base RNG seed")->capture_default_str();
    app.add_option("--catalog", g.catalog, "Star catalog CSV (id,ra_deg,dec_deg,vmag); "
                                           "defaults to the built-in synthetic sky");
    app.add_option("--out", g.out, "Output path (default: stdout)");
    app.add_option("--format", g.format, "Output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();

    auto* gen = app.add_subcommand("gen-catalog", "Write the synthetic sky as a CSV catalog");
    gen->fallthrough();
    int gen_stars = 5200;
    double gen_mag_max = 6.0;
    gen->add_option("--stars", gen_stars, "Number of stars")->capture_default_str();
    gen->add_option("--mag-max", gen_mag_max, "Faintest magnitude")->capture_default_str();

    auto* bdb = app.add_subcommand("build-db", "Build and save the admissible-pair database");
    bdb->fallthrough();

    auto* bench = app.add_subcommand("bench", "Time recursive vs lost-in-space identification");
    bench->fallthrough();
    std::string bench_mode;
    int bench_runs = 10000, bench_spikes = 10;
    bool bench_check = false;
    bench->add_option("mode", bench_mode, "best|worst")
        ->required()
        ->check(CLI::IsMember({"best", "worst"}));
    bench->add_option("--runs", bench_runs, "Runs per spike count")->capture_default_str();
    bench->add_option("--max-spikes", bench_spikes, "Max injected spikes")
        ->capture_default_str();
    bench->add_flag("--check", bench_check, "Exit nonzero on threshold violation");

    auto* rc = app.add_subcommand("run-case", "Monte Carlo campaign for scenario 1..4");
    rc->fallthrough();
    int rc_case = 1, rc_trials = 1000, rc_threads = 0;
    std::vector<double> rc_periods;
    bool rc_check = false;
    rc->add_option("case", rc_case, "Scenario id")->required()->check(CLI::Range(1, 4));
    rc->add_option("--trials", rc_trials, "Monte Carlo trials")->capture_default_str();
    rc->add_option("--threads", rc_threads, "Worker threads (0 = default)")
        ->capture_default_str();
    rc->add_option("--periods", rc_periods, "Sample periods in seconds "
                                            "(default: per-case set)");
    rc->add_flag("--check", rc_check, "Exit nonzero on threshold violation");

    auto* rp = app.add_subcommand("replay", "Run the rate estimator over a quaternion log "
                                            "(CSV: t,qx,qy,qz,qw)");
    rp->fallthrough();
    std::string rp_path;
    size_t rp_window = 50;
    double rp_tol = 1e-9;
    rp->add_option("log", rp_path, "Quaternion log path")->required();
    rp->add_option("--window", rp_window, "Max window size")->capture_default_str();
    rp->add_option("--sigma3-tol", rp_tol, "Planarity tolerance")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return run_gen_catalog(g, gen_stars, gen_mag_max);
        if (bdb->parsed()) return run_build_db(g);
        if (bench->parsed())
            return run_bench(g, bench_mode, bench_runs, bench_spikes, bench_check);
        if (rc->parsed())
            return run_run_case(g, rc_case, rc_trials, rc_threads, rc_periods, rc_check);
        if (rp->parsed()) return run_replay(g, rp_path, rp_window, rp_tol);
    } catch (const CLI::RuntimeError& e) {
        std::cerr << e.what() << "\n";
        return e.get_exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
