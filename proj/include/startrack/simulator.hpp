#pragma once

#include <optional>
#include <random>

#include "startrack/catalog.hpp"
#include "startrack/frame.hpp"
#include "startrack/quatera.hpp"

namespace startrack {

inline constexpr double kArcsec = M_PI / (180.0 * 3600.0);
inline constexpr double kDeg = M_PI / 180.0;
inline constexpr double kSiderealDay = 86164.1;  // seconds

/// Virtual star tracker, defaults per the simulated camera geometry.
struct CameraModel {
    int rows = 1024;
    int cols = 1024;
    double pixel_pitch = 0.018;          // mm
    double focal_length = 50.47;         // mm
    double magnitude_threshold = 5.0;
    double centroid_sigma = (10.0 / 3.0) * kArcsec;  // 3-sigma error of 10 arcsec
    int spike_count_max = 5;

    Fov fov() const {
        return {cols * pixel_pitch * 0.5 / focal_length,
                rows * pixel_pitch * 0.5 / focal_length};
    }
};

using Rng = std::mt19937_64;

Vec3 random_unit_vector(Rng& rng);
Quat random_quaternion(Rng& rng);

/// Displaces v by independent N(0, sigma) angles along two transverse axes
/// (small rotation, unit norm kept).
Vec3 perturb_direction(const Vec3& v, double sigma, Rng& rng);

/// Direction uniform over the FOV solid angle.
Vec3 random_fov_direction(const Fov& fov, Rng& rng);

/// Catalog stars in the FOV rotated to the camera frame, each displaced by
/// independent N(0, sigma) transverse angles, plus U{0..max} spike
/// directions uniform over the FOV. truth_ids gets the star-list index per
/// observation (spikes marked), parallel to the returned frame.
/// force_spikes >= 0 pins the spike count instead of drawing it.
Frame generate_frame(const std::vector<Star>& stars, const CameraModel& camera,
                     const Mat3& attitude, double t, Rng& rng,
                     std::vector<int32_t>* truth_ids = nullptr, int force_spikes = -1);

enum class ScenarioKind { stellar_compass, geo, bang_bang, time_varying };

struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::stellar_compass;
    double duration = 8.0 * 3600.0;
    double sample_period = 300.0;
    uint64_t rng_seed = 0;

    // stellar_compass / geo
    double spin_rate = 2.0 * M_PI / kSiderealDay;

    // bang_bang
    double theta_f = 10.0 * kDeg;
    double theta_dot_max = 0.15 * kDeg;  // rad/s

    // time_varying integration step
    double integration_step = 0.01;
};

/// Bang-bang rotation profile: (theta, theta_dot) at time t in [0, t_f],
/// t_f = 2 theta_f / theta_dot_max.
std::pair<double, double> bang_bang_theta(double t, double theta_f, double theta_dot_max);

/// One scenario realization: randomized initial conditions drawn from the
/// seed, exact closed-form attitude where available, fine-step quaternion
/// integration for the time-varying case.
class Scenario {
public:
    Scenario(const ScenarioConfig& config, Rng& rng);

    /// (attitude, omega axis, omega magnitude) at time t.
    struct TruthSample {
        Mat3 attitude;
        Quat q;
        Vec3 omega_axis;
        double omega_mag;
    };
    TruthSample truth(double t) const;

    /// Body angular velocity for the time-varying case (rad/s).
    Vec3 time_varying_omega(double t) const;

    double t_f() const { return t_f_; }

private:
    ScenarioConfig config_;
    Quat q0_;
    Vec3 spin_axis_;
    double t_f_;
    std::vector<Quat> integrated_;  // time_varying: q at i * integration_step
};

/// Frame stream with ground truth attached, deterministic per seed.
class ScenarioRun {
public:
    ScenarioRun(const ScenarioConfig& config, const std::vector<Star>& stars,
                const CameraModel& camera);

    struct Item {
        Frame frame;
        std::vector<int32_t> truth_ids;
        Scenario::TruthSample truth;
    };
    std::optional<Item> next();

    const Scenario& scenario() const { return scenario_; }

private:
    const std::vector<Star>& stars_;
    CameraModel camera_;
    ScenarioConfig config_;
    Rng rng_;
    Scenario scenario_;
    double t_ = 0.0;
};

/// Deterministic synthetic sky: uniformly distributed directions with an
/// exponential magnitude distribution, ~1600 stars below magnitude 5.
std::vector<Star> synthetic_sky(uint64_t seed = 20200615, int n_stars = 5200,
                                double mag_min = -1.0, double mag_max = 6.0);

}  // namespace startrack
