#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace startrack {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kUnitNormTol = 1e-12;

/// Thrown when an input violates an operation precondition.
struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InsufficientData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateGeometry : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Cross-product matrix [v x] such that cross_matrix(v) * u == v.cross(u).
inline Mat3 cross_matrix(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
        -v.y(), v.x(), 0.0;
    return m;
}

/// Unit quaternion, scalar-last storage {x, y, z, w}.
///
/// Hamilton product convention. An attitude quaternion encodes the
/// inertial-to-camera rotation: rotate(q, r_inertial) == b_camera.
class Quat {
public:
    Quat() : q_(0.0, 0.0, 0.0, 1.0) {}
    Quat(double x, double y, double z, double w) : q_(x, y, z, w) {}
    explicit Quat(const Vec4& xyzw) : q_(xyzw) {}

    static Quat identity() { return Quat(); }

    static Quat from_axis_angle(const Vec3& axis, double angle) {
        const double h = 0.5 * angle;
        const Vec3 v = axis * std::sin(h);
        return Quat(v.x(), v.y(), v.z(), std::cos(h));
    }

    const Vec4& coeffs() const { return q_; }
    Vec3 vec() const { return q_.head<3>(); }
    double w() const { return q_(3); }
    double norm() const { return q_.norm(); }
    double dot(const Quat& o) const { return q_.dot(o.q_); }

    Quat normalized() const { return Quat(Vec4(q_ / q_.norm())); }
    Quat conjugate() const { return Quat(-q_(0), -q_(1), -q_(2), q_(3)); }
    Quat operator-() const { return Quat(Vec4(-q_)); }

    /// Successive-rotation composition: to_dcm(p * q) == to_dcm(p) * to_dcm(q),
    /// so a left factor is a delta rotation expressed in the rotated frame.
    Quat operator*(const Quat& r) const {
        const Vec3 pv = vec(), rv = r.vec();
        const double ps = w(), rs = r.w();
        const Vec3 v = ps * rv + rs * pv - pv.cross(rv);
        return Quat(v.x(), v.y(), v.z(), ps * rs - pv.dot(rv));
    }

    /// Inertial-to-camera direction cosine matrix.
    Mat3 to_dcm() const {
        const Vec3 v = vec();
        const double s = w();
        return (s * s - v.squaredNorm()) * Mat3::Identity()
               + 2.0 * v * v.transpose() - 2.0 * s * cross_matrix(v);
    }

    /// Quaternion of a proper rotation matrix (Shepperd's method). Sign: w >= 0.
    static Quat from_dcm(const Mat3& c);

private:
    Vec4 q_;
};

/// 4x4 left-multiplication matrix of the pure quaternion {axis; 0}:
/// omega_skew(a) * q.coeffs() == (Quat(a,0) * q).coeffs().
inline Eigen::Matrix4d omega_skew(const Vec3& a) {
    Eigen::Matrix4d m;
    m << 0.0, a.z(), -a.y(), a.x(),
        -a.z(), 0.0, a.x(), a.y(),
         a.y(), -a.x(), 0.0, a.z(),
        -a.x(), -a.y(), -a.z(), 0.0;
    return m;
}

/// Rigid rotation by `angle` about unit `axis`:
/// I cos(phi) + (1 - cos(phi)) a a^T - [a x] sin(phi).
/// Maps frame-k camera vectors to their expected frame-(k+1) positions.
Mat3 delta_c(const Vec3& axis, double angle);

/// Closed-form constant-rate quaternion propagation:
/// q(t0 + dt) = [I cos(rate dt / 2) + sin(rate dt / 2) [axis x]_4] q0.
Quat propagate_quaternion(const Quat& q0, const Vec3& axis, double rate, double dt);

struct WahbaSolution {
    Quat q;
    double cost = 0.0;  // attained Wahba loss, >= 0
    int n_stars = 0;
};

/// q-method solution of Wahba's problem: dominant eigenvector of the
/// Davenport 4x4 matrix. obs[i] ~ C(q) * ref[i].
WahbaSolution solve_wahba(const std::vector<Vec3>& obs,
                          const std::vector<Vec3>& ref,
                          const std::vector<double>& weights);

/// Principal angle of the relative rotation c1^T c2, in [0, pi].
double principal_angle(const Mat3& c1, const Mat3& c2);

/// acos with the argument clamped to [-1, 1].
inline double safe_acos(double x) {
    return std::acos(std::clamp(x, -1.0, 1.0));
}

}  // namespace startrack
