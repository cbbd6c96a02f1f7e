#include "srmpc/estimator.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace srmpc {

CovarianceState::CovarianceState(Mat s) {
    if (s.rows() != s.cols()) {
        throw std::invalid_argument("CovarianceState: matrix must be square");
    }
    if (!s.allFinite()) throw NumericError("CovarianceState: non-finite entries");
    const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
        throw std::invalid_argument("CovarianceState: matrix is not symmetric");
    }
    sigma = sym(s);
    const double norm = spectral_norm_sym(sigma);
    if (min_eigenvalue_sym(sigma) < -1e-10 * std::max(1.0, norm)) {
        throw std::invalid_argument("CovarianceState: matrix is not numerically PSD");
    }
}

NoiseSpec NoiseSpec::bounded(Mat W, Mat V) {
    NoiseSpec n;
    n.W = sym(W);
    n.V = sym(V);
    const double sw = std::sqrt(std::max(0.0, spectral_norm_sym(n.W)));
    const double sv = std::sqrt(std::max(0.0, spectral_norm_sym(n.V)));
    n.gamma = 4.0 * std::max(sw, sv);
    return n;
}

bool NoiseSpec::support_consistent() const {
    const double g2 = gamma * gamma;
    return spectral_norm_sym(W) <= g2 + 1e-15 && spectral_norm_sym(V) <= g2 + 1e-15;
}

double NoiseSpec::w_radius() const {
    const double n = spectral_norm_sym(W);
    if (n <= 0.0) return 0.0;
    return std::min(gamma, 4.0 * std::sqrt(n));
}

double NoiseSpec::v_radius() const {
    const double n = spectral_norm_sym(V);
    if (n <= 0.0) return 0.0;
    return std::min(gamma, 4.0 * std::sqrt(n));
}

NoiseSpec NoiseSpec::scaled(double s) const {
    NoiseSpec n;
    n.W = s * s * W;
    n.V = s * s * V;
    n.gamma = s * gamma;
    return n;
}

Mat fsigma_step(const Mat& A, const Mat& C, const Mat& sigma, const Mat& W, const Mat& V) {
    const Mat D = C * sigma * C.transpose() + V;
    const Mat Dinv = pinv_psd(sym(D));
    const Mat corrected = sigma - sigma * C.transpose() * Dinv * C * sigma;
    return sym(A * corrected * A.transpose() + W);
}

FilteredEstimate ekf_measurement_update(const Model& model, const Vec& x_lin, const Vec& y,
                                        const CovarianceState& sigma, const Vec& eta,
                                        const NoiseSpec& noise) {
    model.check_state(x_lin);
    model.check_state(y);
    if (eta.size() != model.n_h) {
        throw std::invalid_argument("ekf: measurement dimension mismatch");
    }
    const Mat C = model.h_x ? model.h_x(x_lin)
                            : model.eval_bundle(x_lin, Vec::Zero(model.n_u)).C;
    const Mat D = C * sigma.sigma * C.transpose() + noise.V;
    const Mat dinv = pinv_psd(sym(D));
    FilteredEstimate out;
    out.y = y + sigma.sigma * C.transpose() * dinv * (eta - model.h(y));
    out.sigma = sym(sigma.sigma -
                    sigma.sigma * C.transpose() * dinv * C * sigma.sigma);
    if (!out.y.allFinite() || !out.sigma.allFinite()) {
        throw NumericError("ekf_measurement_update: non-finite estimate");
    }
    return out;
}

Vec ekf_mean_update(const Model& model, const Vec& x_lin, const Vec& u, const Vec& y,
                    const CovarianceState& sigma, const Vec& eta, const NoiseSpec& noise) {
    model.check_state(x_lin);
    model.check_state(y);
    if (eta.size() != model.n_h) {
        throw std::invalid_argument("ekf_mean_update: measurement dimension mismatch");
    }
    const Mat C = model.h_x ? model.h_x(x_lin) : model.eval_bundle(x_lin, u).C;
    const Mat D = C * sigma.sigma * C.transpose() + noise.V;
    const Mat gain = sigma.sigma * C.transpose() * pinv_psd(sym(D));
    const Vec innovation = eta - model.h(y);
    const Vec out = model.f(y + gain * innovation, u);
    if (!out.allFinite()) throw NumericError("ekf_mean_update: non-finite estimate");
    return out;
}

Vec ekf_mean_update(const Model& model, const Vec& u, const Vec& y,
                    const CovarianceState& sigma, const Vec& eta, const NoiseSpec& noise) {
    return ekf_mean_update(model, y, u, y, sigma, eta, noise);
}

CovarianceState ekf_cov_update(const Model& model, const Vec& x_lin, const Vec& u,
                               const CovarianceState& sigma, const NoiseSpec& noise) {
    model.check_input(x_lin, u);
    const DerivativeBundle b = model.eval_bundle(x_lin, u);
    const Mat out = fsigma_step(b.A, b.C, sigma.sigma, noise.W, noise.V);
    if (!out.allFinite()) throw NumericError("ekf_cov_update: non-finite covariance");
    return CovarianceState(out);
}

std::vector<CovarianceState> predict_variance_sequence(const Model& model,
                                                       const std::vector<Vec>& x_plan,
                                                       const std::vector<Vec>& u_plan,
                                                       const CovarianceState& sigma0,
                                                       const NoiseSpec& noise) {
    if (x_plan.size() != u_plan.size() + 1) {
        throw std::invalid_argument("predict_variance_sequence: |x_plan| must be |u_plan| + 1");
    }
    std::vector<CovarianceState> out;
    out.reserve(x_plan.size());
    out.push_back(sigma0);
    for (size_t k = 0; k < u_plan.size(); ++k) {
        out.push_back(ekf_cov_update(model, x_plan[k], u_plan[k], out.back(), noise));
    }
    return out;
}

}  // namespace srmpc
