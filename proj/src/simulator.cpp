#include "startrack/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace startrack {

Vec3 random_unit_vector(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec3 v;
    do {
        v = Vec3(n(rng), n(rng), n(rng));
    } while (v.norm() < 1e-6);
    return v.normalized();
}

Quat random_quaternion(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec4 q;
    do {
        q = Vec4(n(rng), n(rng), n(rng), n(rng));
    } while (q.norm() < 1e-6);
    q.normalize();
    return Quat(q);
}

namespace {

/// Orthonormal pair spanning the plane perpendicular to unit v.
std::pair<Vec3, Vec3> transverse_basis(const Vec3& v) {
    const Vec3 helper = std::abs(v.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 e1 = v.cross(helper).normalized();
    return {e1, v.cross(e1)};
}

}  // namespace

Vec3 perturb_direction(const Vec3& v, double sigma, Rng& rng) {
    std::normal_distribution<double> n(0.0, sigma);
    const auto [e1, e2] = transverse_basis(v);
    // Independent noise in each focal-plane axis.
    const Vec3 d = n(rng) * e1 + n(rng) * e2;
    const double angle = d.norm();
    if (angle < 1e-15) return v;
    const Vec3 axis = v.cross(d).normalized();
    return delta_c(axis, angle).transpose() * v;  // active rotation of v
}

Vec3 random_fov_direction(const Fov& fov, Rng& rng) {
    // Uniform over the FOV solid angle: rejection from the bounding cap.
    const double cos_cap = std::cos(0.5 * fov.diagonal());
    std::uniform_real_distribution<double> uz(cos_cap, 1.0);
    std::uniform_real_distribution<double> uphi(0.0, 2.0 * M_PI);
    for (;;) {
        const double z = uz(rng);
        const double phi = uphi(rng);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const Vec3 v(r * std::cos(phi), r * std::sin(phi), z);
        if (fov.contains(v)) return v;
    }
}

namespace {

/// Camera frame with +z boresight along `boresight`, roll drawn from rng.
Quat camera_attitude_for_boresight(const Vec3& boresight, Rng& rng) {
    const auto [e1, e2] = transverse_basis(boresight);
    std::uniform_real_distribution<double> roll(0.0, 2.0 * M_PI);
    const double r = roll(rng);
    Mat3 c;  // rows are camera axes in inertial components
    c.row(0) = (e1 * std::cos(r) + e2 * std::sin(r)).transpose();
    c.row(1) = (-e1 * std::sin(r) + e2 * std::cos(r)).transpose();
    c.row(2) = boresight.transpose();
    return Quat::from_dcm(c);
}

}  // namespace

Frame generate_frame(const std::vector<Star>& stars, const CameraModel& camera,
                     const Mat3& attitude, double t, Rng& rng,
                     std::vector<int32_t>* truth_ids, int force_spikes) {
    const Fov fov = camera.fov();
    Frame frame;
    frame.t = t;
    std::vector<int32_t> truth;
    for (size_t i = 0; i < stars.size(); ++i) {
        const Vec3 b = attitude * stars[i].direction;
        if (!fov.contains(b)) continue;
        frame.obs.push_back(perturb_direction(b, camera.centroid_sigma, rng));
        truth.push_back(static_cast<int32_t>(i));
    }
    std::uniform_int_distribution<int> spike_count(0, camera.spike_count_max);
    const int n_spikes = force_spikes >= 0 ? force_spikes : spike_count(rng);
    for (int s = 0; s < n_spikes; ++s) {
        frame.obs.push_back(random_fov_direction(fov, rng));
        truth.push_back(star_id::kSpike);
    }
    // Shuffle so spikes are interleaved with stars.
    std::vector<size_t> order(frame.obs.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Frame shuffled;
    shuffled.t = t;
    std::vector<int32_t> shuffled_truth;
    for (const size_t i : order) {
        shuffled.obs.push_back(frame.obs[i]);
        shuffled_truth.push_back(truth[i]);
    }
    if (truth_ids) *truth_ids = std::move(shuffled_truth);
    return shuffled;
}

std::pair<double, double> bang_bang_theta(double t, double theta_f, double theta_dot_max) {
    const double t_f = 2.0 * theta_f / theta_dot_max;
    if (t < 0.0 || t > t_f) throw InvalidInput("bang_bang_theta: t outside [0, t_f]");
    const double u = 4.0 * theta_f / (t_f * t_f);
    if (t <= 0.5 * t_f) {
        return {0.5 * u * t * t, u * t};
    }
    return {-0.25 * (2.0 * t * t - 4.0 * t * t_f + t_f * t_f) * u, u * (t_f - t)};
}

Scenario::Scenario(const ScenarioConfig& config, Rng& rng) : config_(config) {
    switch (config.kind) {
        case ScenarioKind::stellar_compass: {
            // Zenith-pointing camera at a random spot on the rotating planet.
            spin_axis_ = Vec3::UnitZ();
            const Vec3 zenith = random_unit_vector(rng);
            q0_ = camera_attitude_for_boresight(zenith, rng);
            // AOR in camera components is constant; fold it in once.
            spin_axis_ = q0_.to_dcm() * spin_axis_;
            t_f_ = config.duration;
            break;
        }
        case ScenarioKind::geo: {
            spin_axis_ = random_unit_vector(rng);
            q0_ = random_quaternion(rng);
            t_f_ = config.duration;
            break;
        }
        case ScenarioKind::bang_bang: {
            spin_axis_ = random_unit_vector(rng);
            q0_ = random_quaternion(rng);
            t_f_ = 2.0 * config.theta_f / config.theta_dot_max;
            break;
        }
        case ScenarioKind::time_varying: {
            spin_axis_ = Vec3::UnitX();
            q0_ = random_quaternion(rng);
            t_f_ = config.duration;
            const double h = config.integration_step;
            const auto n_steps = static_cast<size_t>(std::llround(t_f_ / h));
            integrated_.reserve(n_steps + 1);
            integrated_.push_back(q0_);
            Quat q = q0_;
            for (size_t i = 0; i < n_steps; ++i) {
                // Exact pure-spin map per step with the midpoint rate.
                const Vec3 w = time_varying_omega((static_cast<double>(i) + 0.5) * h);
                q = propagate_quaternion(q, w.normalized(), w.norm(), h);
                integrated_.push_back(q);
            }
            break;
        }
    }
}

Vec3 Scenario::time_varying_omega(double t) const {
    const double quarter = 0.25 * t_f_;
    if (t < quarter) return Vec3(3.0, 0.0, 0.0) * kDeg;
    const double tau = t - quarter;
    return Vec3(3.0, 0.003 * tau, -0.0015 * tau) * kDeg;
}

Scenario::TruthSample Scenario::truth(double t) const {
    TruthSample s;
    switch (config_.kind) {
        case ScenarioKind::stellar_compass:
        case ScenarioKind::geo: {
            s.q = propagate_quaternion(q0_, spin_axis_, config_.spin_rate, t);
            s.omega_axis = spin_axis_;
            s.omega_mag = config_.spin_rate;
            break;
        }
        case ScenarioKind::bang_bang: {
            const auto [theta, theta_dot] = bang_bang_theta(t, config_.theta_f,
                                                            config_.theta_dot_max);
            const Quat dq = Quat::from_axis_angle(spin_axis_, theta);
            s.q = (dq * q0_).normalized();
            s.omega_axis = spin_axis_;
            s.omega_mag = theta_dot;
            break;
        }
        case ScenarioKind::time_varying: {
            const auto i = static_cast<size_t>(std::llround(t / config_.integration_step));
            s.q = integrated_.at(std::min(i, integrated_.size() - 1));
            const Vec3 w = time_varying_omega(t);
            s.omega_mag = w.norm();
            s.omega_axis = w.normalized();
            break;
        }
    }
    s.attitude = s.q.to_dcm();
    return s;
}

ScenarioRun::ScenarioRun(const ScenarioConfig& config, const std::vector<Star>& stars,
                         const CameraModel& camera)
    : stars_(stars), camera_(camera), config_(config), rng_(config.rng_seed),
      scenario_(config, rng_) {}

std::optional<ScenarioRun::Item> ScenarioRun::next() {
    const double t_end = std::min(config_.duration, scenario_.t_f());
    if (t_ > t_end + 1e-9) return std::nullopt;
    Item item;
    item.truth = scenario_.truth(t_);
    item.frame = generate_frame(stars_, camera_, item.truth.attitude, t_, rng_,
                                &item.truth_ids);
    t_ += config_.sample_period;
    return item;
}

std::vector<Star> synthetic_sky(uint64_t seed, int n_stars, double mag_min, double mag_max) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    // Inverse-CDF sampling of N(<m) ~ 10^(0.5 m).
    const double a = 0.5 * std::log(10.0);
    const double lo = std::exp(a * mag_min), hi = std::exp(a * mag_max);
    std::vector<Star> stars;
    stars.reserve(static_cast<size_t>(n_stars));
    for (int i = 0; i < n_stars; ++i) {
        Star s;
        s.catalog_id = i + 1;
        s.direction = random_unit_vector(rng);
        s.magnitude = std::log(lo + u(rng) * (hi - lo)) / a;
        stars.push_back(s);
    }
    return stars;
}

}  // namespace startrack
