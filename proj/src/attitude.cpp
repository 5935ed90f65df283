#include "startrack/attitude.hpp"

#include <Eigen/Eigenvalues>

namespace startrack {

Quat Quat::from_dcm(const Mat3& c) {
    // Shepperd: pick the largest of the four squared components.
    const double tr = c.trace();
    Vec4 sq;
    sq(3) = 1.0 + tr;                      // 4w^2
    for (int i = 0; i < 3; ++i) sq(i) = 1.0 + 2.0 * c(i, i) - tr;
    int k;
    sq.maxCoeff(&k);

    Vec4 q;
    if (k == 3) {
        const double w = 0.5 * std::sqrt(sq(3));
        const double f = 0.25 / w;
        q << f * (c(1, 2) - c(2, 1)), f * (c(2, 0) - c(0, 2)),
             f * (c(0, 1) - c(1, 0)), w;
    } else {
        const int i = k, j = (k + 1) % 3, l = (k + 2) % 3;
        const double vi = 0.5 * std::sqrt(sq(i));
        const double f = 0.25 / vi;
        q(i) = vi;
        q(j) = f * (c(i, j) + c(j, i));
        q(l) = f * (c(i, l) + c(l, i));
        q(3) = f * (c(j, l) - c(l, j));
    }
    if (q(3) < 0.0) q = -q;
    return Quat(Vec4(q / q.norm()));
}

Mat3 delta_c(const Vec3& axis, double angle) {
    if (std::abs(axis.norm() - 1.0) > 1e-9) {
        throw InvalidInput("delta_c: axis is not unit norm");
    }
    if (!std::isfinite(angle)) {
        throw InvalidInput("delta_c: non-finite angle");
    }
    const double c = std::cos(angle), s = std::sin(angle);
    return c * Mat3::Identity() + (1.0 - c) * axis * axis.transpose()
           - s * cross_matrix(axis);
}

Quat propagate_quaternion(const Quat& q0, const Vec3& axis, double rate, double dt) {
    if (rate != 0.0 && std::abs(axis.norm() - 1.0) > 1e-9) {
        throw InvalidInput("propagate_quaternion: axis is not unit norm");
    }
    const double h = 0.5 * rate * dt;
    const Vec3 v = axis * std::sin(h);
    const Quat dq(v.x(), v.y(), v.z(), std::cos(h));
    return (dq * q0).normalized();
}

WahbaSolution solve_wahba(const std::vector<Vec3>& obs,
                          const std::vector<Vec3>& ref,
                          const std::vector<double>& weights) {
    const size_t n = obs.size();
    if (ref.size() != n || weights.size() != n) {
        throw InvalidInput("solve_wahba: mismatched input lengths");
    }
    if (n < 2) {
        throw InsufficientData("solve_wahba: need at least 2 vector pairs");
    }

    double w_sum = 0.0;
    Mat3 b = Mat3::Zero();
    Vec3 z = Vec3::Zero();
    for (size_t i = 0; i < n; ++i) {
        if (weights[i] <= 0.0) throw InvalidInput("solve_wahba: nonpositive weight");
        w_sum += weights[i];
        b += weights[i] * obs[i] * ref[i].transpose();
        z += weights[i] * obs[i].cross(ref[i]);
    }

    // Collinearity makes the attitude unobservable about the common axis.
    {
        bool collinear = true;
        for (size_t i = 1; i < n && collinear; ++i) {
            collinear = obs[0].cross(obs[i]).norm() < 1e-12;
        }
        if (collinear) throw DegenerateGeometry("solve_wahba: all observations collinear");
    }

    Eigen::Matrix4d k = Eigen::Matrix4d::Zero();
    k.topLeftCorner<3, 3>() = b + b.transpose() - b.trace() * Mat3::Identity();
    k.topRightCorner<3, 1>() = z;
    k.bottomLeftCorner<1, 3>() = z.transpose();
    k(3, 3) = b.trace();

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(k);
    const Vec4 qv = eig.eigenvectors().col(3);  // largest eigenvalue
    Quat q(qv);
    if (q.w() < 0.0) q = -q;

    const Mat3 a = q.to_dcm();
    double cost = 0.0;
    for (size_t i = 0; i < n; ++i) {
        cost += weights[i] * (1.0 - obs[i].dot(a * ref[i]));
    }
    return {q, std::max(cost, 0.0), static_cast<int>(n)};
}

double principal_angle(const Mat3& c1, const Mat3& c2) {
    const double tr = (c1.transpose() * c2).trace();
    return safe_acos(0.5 * (tr - 1.0));
}

}  // namespace startrack
