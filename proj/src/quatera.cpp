#include "startrack/quatera.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace startrack {

void QuaternionWindow::push(double t, const Quat& q) {
    if (!entries_.empty() && t <= entries_.back().t) {
        throw InvalidInput("QuaternionWindow::push: non-increasing time");
    }
    Quat stored = q;
    if (!entries_.empty() && stored.dot(entries_.back().q) < 0.0) {
        stored = -stored;
    }
    entries_.push_back({t, stored});
    if (entries_.size() > n_max_) entries_.erase(entries_.begin());
}

PlaneFit fit_plane(const QuaternionWindow& window, double sigma2_margin) {
    const size_t n = window.size();
    if (n < 2) {
        throw EstimationError(EstimationError::Code::too_few_measurements,
                              "fit_plane: need at least 2 quaternions");
    }
    Eigen::Matrix4d z = Eigen::Matrix4d::Zero();
    for (const auto& e : window.entries()) {
        z += e.q.coeffs() * e.q.coeffs().transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(z);
    PlaneFit fit;
    // Eigen returns ascending order; flip to sigma1 >= ... >= sigma4.
    for (int i = 0; i < 4; ++i) {
        fit.sigma(i) = std::max(eig.eigenvalues()(3 - i), 0.0);
        fit.u.col(i) = eig.eigenvectors().col(3 - i);
    }
    if (fit.sigma(1) - fit.sigma(2) <= sigma2_margin) {
        throw EstimationError(EstimationError::Code::ambiguous_plane,
                              "fit_plane: sigma2 <= sigma3, rotation plane unobservable");
    }
    return fit;
}

Vec3 extract_aor(const PlaneFit& fit) {
    const Quat u1{Vec4(fit.u1())};
    const Quat u2{Vec4(fit.u2())};
    const Quat p = u2 * u1.conjugate();  // u1 unit, conjugate == inverse
    if (std::abs(p.w()) > 1e-6) {
        throw EstimationError(EstimationError::Code::inconsistent_plane,
                              "extract_aor: product has nonzero scalar part");
    }
    return p.vec().normalized();
}

AngleSeries project_and_phase(const QuaternionWindow& window, const PlaneFit& fit) {
    AngleSeries series;
    series.times.reserve(window.size());
    series.phis.reserve(window.size());
    double prev = 0.0;
    double offset = 0.0;
    for (size_t i = 0; i < window.size(); ++i) {
        const Vec4& q = window[i].q.coeffs();
        const double a = q.dot(fit.u1());
        const double b = q.dot(fit.u2());
        if (std::hypot(a, b) < 1e-9) {
            throw EstimationError(EstimationError::Code::degenerate_projection,
                                  "project_and_phase: quaternion orthogonal to the plane");
        }
        double phi = 2.0 * std::atan2(b, a);
        if (i > 0) {
            while (phi + offset - prev > M_PI) offset -= 2.0 * M_PI;
            while (phi + offset - prev < -M_PI) offset += 2.0 * M_PI;
        }
        phi += offset;
        prev = phi;
        series.times.push_back(window[i].t);
        series.phis.push_back(phi);
    }
    return series;
}

AvmFit estimate_avm(const AngleSeries& series) {
    const size_t n = series.times.size();
    if (n < 2) {
        throw EstimationError(EstimationError::Code::too_few_measurements,
                              "estimate_avm: need at least 2 points");
    }
    double st = 0.0, stt = 0.0, sp = 0.0, stp = 0.0;
    for (size_t i = 0; i < n; ++i) {
        st += series.times[i];
        stt += series.times[i] * series.times[i];
        sp += series.phis[i];
        stp += series.times[i] * series.phis[i];
    }
    const double nn = static_cast<double>(n);
    const double det = nn * stt - st * st;
    if (det <= 0.0 || det <= 1e-14 * nn * std::max(stt, 1.0)) {
        throw EstimationError(EstimationError::Code::singular_regressor,
                              "estimate_avm: timestamps carry no spread");
    }
    const double omega = (nn * stp - st * sp) / det;
    const double phi0 = (sp - omega * st) / nn;

    double rss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double r = series.phis[i] - phi0 - omega * series.times[i];
        rss += r * r;
    }
    // Residual variance; zero dof at n = 2 leaves the covariance degenerate.
    const double s2 = n > 2 ? rss / static_cast<double>(n - 2) : 0.0;
    Eigen::Matrix2d hth_inv;
    hth_inv << stt, -st, -st, nn;
    hth_inv /= det;
    return {phi0, omega, s2 * hth_inv};
}

bool adapt_window(QuaternionWindow& window, const QuateraConfig& cfg) {
    while (window.size() > 2) {
        const PlaneFit fit = fit_plane(window, 0.0);
        const bool ok = cfg.check_sigma4
                            ? fit.sigma(2) < cfg.sigma3_tol && fit.sigma(3) < cfg.sigma3_tol
                            : fit.sigma(2) < cfg.sigma3_tol;
        if (ok) return false;
        // Two quaternions always span a plane exactly, so reaching the floor
        // means even the newest three samples were incoherent: flag it.
        if (window.size() == 3) {
            window.pop_front();
            return true;
        }
        window.pop_front();
    }
    return false;
}

OmegaEstimate quatera_estimate(QuaternionWindow& window, const QuateraConfig& cfg) {
    if (window.size() < 2) {
        throw EstimationError(EstimationError::Code::too_few_measurements,
                              "quatera_estimate: need at least 2 quaternions");
    }
    const bool floor_hit = adapt_window(window, cfg);
    const PlaneFit fit = fit_plane(window, cfg.sigma2_margin);
    Vec3 axis = extract_aor(fit);
    const AngleSeries series = project_and_phase(window, fit);
    AvmFit avm = estimate_avm(series);

    // (axis, omega) and (-axis, -omega) are the same motion; report omega >= 0.
    if (avm.omega < 0.0) {
        axis = -axis;
        avm.omega = -avm.omega;
        avm.phi0 = -avm.phi0;
    }
    OmegaEstimate est;
    est.axis = axis;
    est.magnitude = avm.omega;
    est.phi0 = avm.phi0;
    est.covariance = avm.covariance;
    est.window_n = static_cast<int>(window.size());
    est.frequency_warning = floor_hit;
    return est;
}

}  // namespace startrack
