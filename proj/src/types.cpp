#include "srmpc/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace srmpc {

double spectral_norm_sym(const Mat& m) {
    if (m.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(sym(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_norm(const Mat& m) {
    if (m.size() == 0) return 0.0;
    return m.jacobiSvd().singularValues()(0);
}

double min_eigenvalue_sym(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(sym(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

Mat pinv_psd(const Mat& m) {
    if (m.size() == 0) return m;
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    const Vec& ev = es.eigenvalues();
    const double thresh = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    Vec inv = Vec::Zero(ev.size());
    for (int i = 0; i < ev.size(); ++i) {
        if (ev(i) > thresh) inv(i) = 1.0 / ev(i);
    }
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace srmpc
