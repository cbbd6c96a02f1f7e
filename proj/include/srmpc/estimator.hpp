#pragma once

#include "srmpc/model.hpp"
#include "srmpc/types.hpp"

#include <vector>

namespace srmpc {

/// Symmetric, numerically PSD estimate variance. Symmetrized on
/// construction; construction fails if the matrix is far from symmetric or
/// has eigenvalues below -1e-10 * ||sigma||.
struct CovarianceState {
    Mat sigma;

    CovarianceState() = default;
    explicit CovarianceState(Mat s);

    int dim() const { return static_cast<int>(sigma.rows()); }
};

/// Process / measurement noise second moments plus the support radius gamma
/// of the bounded-support distributions. support_consistent() checks
/// ||W||_2 <= gamma^2 and ||V||_2 <= gamma^2; violations are reported, not
/// fatal.
struct NoiseSpec {
    Mat W;
    Mat V;
    double gamma = 0.0;

    /// gamma = 4 * max(sqrt||W||, sqrt||V||): truncation keeps the sample
    /// covariance within ~1% of the nominal one.
    static NoiseSpec bounded(Mat W, Mat V);

    bool support_consistent() const;
    /// Per-channel truncation radii, min(gamma, 4 sqrt||cov||); zero for a
    /// zero covariance.
    double w_radius() const;
    double v_radius() const;
    /// Covariances scaled by s^2, gamma by s.
    NoiseSpec scaled(double s) const;
};

/// One covariance step A (S - S C' (C S C' + V)^+ C S) A' + W with A, C
/// from the bundle; result symmetrized. Shared by the EKF, the variance
/// prediction and the self-reflective objective.
Mat fsigma_step(const Mat& A, const Mat& C, const Mat& sigma, const Mat& W, const Mat& V);

/// Measurement half of the EKF update: filtered mean y + gain * innovation
/// and the corrected covariance, with C linearized at x_lin. The full
/// updates below compose this with the propagation through f.
struct FilteredEstimate {
    Vec y;
    Mat sigma;
};
FilteredEstimate ekf_measurement_update(const Model& model, const Vec& x_lin, const Vec& y,
                                        const CovarianceState& sigma, const Vec& eta,
                                        const NoiseSpec& noise);

/// EKF mean update: f(y + S C'(C S C' + V)^+ (eta - h(y)), u) with C
/// linearized at x_lin.
Vec ekf_mean_update(const Model& model, const Vec& x_lin, const Vec& u, const Vec& y,
                    const CovarianceState& sigma, const Vec& eta, const NoiseSpec& noise);
/// Same with the default linearization point x_lin = y.
Vec ekf_mean_update(const Model& model, const Vec& u, const Vec& y,
                    const CovarianceState& sigma, const Vec& eta, const NoiseSpec& noise);

/// EKF covariance update with A, C linearized at (x_lin, u).
CovarianceState ekf_cov_update(const Model& model, const Vec& x_lin, const Vec& u,
                               const CovarianceState& sigma, const NoiseSpec& noise);

/// Open-loop variance prediction along a planned trajectory: the covariance
/// recursion does not depend on measurements, so it can be run at predicted
/// states. Returns Sigma_0 .. Sigma_N for |x_plan| = |u_plan| + 1 = N + 1.
std::vector<CovarianceState> predict_variance_sequence(const Model& model,
                                                       const std::vector<Vec>& x_plan,
                                                       const std::vector<Vec>& u_plan,
                                                       const CovarianceState& sigma0,
                                                       const NoiseSpec& noise);

}  // namespace srmpc
