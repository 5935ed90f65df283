#pragma once

#include <optional>
#include <vector>

#include "startrack/attitude.hpp"

namespace startrack {

/// Sliding buffer of sign-continuous timestamped quaternion measurements.
class QuaternionWindow {
public:
    struct Entry {
        double t;
        Quat q;
    };

    explicit QuaternionWindow(size_t n_max = 50) : n_max_(n_max) {}

    /// Appends a measurement, negating it first if the dot product with the
    /// previous entry is negative. Evicts the oldest entry beyond n_max.
    void push(double t, const Quat& q);

    /// Drops the oldest entry.
    void pop_front() { entries_.erase(entries_.begin()); }

    void clear() { entries_.clear(); }

    size_t size() const { return entries_.size(); }
    size_t n_max() const { return n_max_; }
    const std::vector<Entry>& entries() const { return entries_; }
    const Entry& operator[](size_t i) const { return entries_[i]; }
    const Entry& back() const { return entries_.back(); }

private:
    size_t n_max_;
    std::vector<Entry> entries_;
};

/// Singular vectors and values of the 4x4 accumulation Z = Q Q^T.
struct PlaneFit {
    Eigen::Matrix4d u;       // columns u1..u4, orthonormal
    Eigen::Vector4d sigma;   // nonincreasing, nonnegative

    Vec4 u1() const { return u.col(0); }
    Vec4 u2() const { return u.col(1); }
};

struct EstimationError : std::runtime_error {
    enum class Code {
        too_few_measurements,
        ambiguous_plane,
        inconsistent_plane,
        degenerate_projection,
        singular_regressor,
    };
    EstimationError(Code c, const std::string& what)
        : std::runtime_error(what), code(c) {}
    Code code;
};

/// Angular velocity as axis direction plus magnitude, with the covariance of
/// the in-plane phase regression.
struct OmegaEstimate {
    Vec3 axis = Vec3::UnitZ();  // AOR, unit norm
    double magnitude = 0.0;     // AVM, rad/s, >= 0
    double phi0 = 0.0;          // phase intercept, rad
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();  // of (phi0, magnitude)
    int window_n = 0;
    bool frequency_warning = false;  // window shrank to the 2-measurement floor
};

/// Unwrapped in-plane phase angles with their timestamps.
struct AngleSeries {
    std::vector<double> times;
    std::vector<double> phis;
};

struct QuateraConfig {
    double sigma3_tol = 1e-9;
    bool check_sigma4 = false;       // also require sigma4 below the tolerance
    double sigma2_margin = 1e-11;    // ambiguous-plane guard on sigma2 - sigma3
};

/// Eigendecomposition of the symmetric PSD 4x4 Z. Requires sigma2 > sigma3.
PlaneFit fit_plane(const QuaternionWindow& window, double sigma2_margin = 1e-11);

/// Optimal AOR from the plane: vector part of u2 (x) u1^-1.
Vec3 extract_aor(const PlaneFit& fit);

/// Projects each measurement onto span(u1, u2), renormalizes, and returns
/// unwrapped phases 2 atan2(q.u2, q.u1).
AngleSeries project_and_phase(const QuaternionWindow& window, const PlaneFit& fit);

/// Ordinary least squares of phi on [1, t]. Returns (phi0, slope, covariance).
struct AvmFit {
    double phi0;
    double omega;
    Eigen::Matrix2d covariance;
};
AvmFit estimate_avm(const AngleSeries& series);

/// Drops oldest entries while sigma3 (and optionally sigma4) of the current
/// fit stays at or above the tolerance, down to the 2-entry floor. Returns
/// true if the floor was reached, i.e. even the newest three entries failed
/// the tolerance (two entries always span a plane exactly).
bool adapt_window(QuaternionWindow& window, const QuateraConfig& cfg);

/// Steps 1-6: adapt, fit the plane, extract the AOR, project, regress.
/// Sign convention: magnitude >= 0, axis flipped to match.
OmegaEstimate quatera_estimate(QuaternionWindow& window, const QuateraConfig& cfg);

}  // namespace startrack
