#include "srmpc/validation/oracles.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>

namespace srmpc::validation {

std::vector<Mat> riccati_oracle(const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
                                const Mat& S, const Mat& P_terminal, int horizon) {
    std::vector<Mat> P(static_cast<size_t>(horizon) + 1);
    P[horizon] = P_terminal;
    for (int k = horizon - 1; k >= 0; --k) {
        const Mat gux = S + B.transpose() * P[k + 1] * A;
        const Mat guu = R + B.transpose() * P[k + 1] * B;
        P[k] = Q + A.transpose() * P[k + 1] * A - gux.transpose() * guu.inverse() * gux;
    }
    return P;
}

Mat lqr_gain(const Mat& A, const Mat& B, const Mat& R, const Mat& S, const Mat& P_next) {
    const Mat guu = R + B.transpose() * P_next * B;
    return guu.inverse() * (S + B.transpose() * P_next * A);
}

Mat kalman_oracle_step(const Mat& A, const Mat& C, const Mat& W, const Mat& V,
                       const Mat& sigma) {
    const Mat S = C * sigma * C.transpose() + V;
    const Mat K = sigma * C.transpose() * S.inverse();
    const Mat I = Mat::Identity(sigma.rows(), sigma.cols());
    const Mat post = (I - K * C) * sigma * (I - K * C).transpose() + K * V * K.transpose();
    return A * post * A.transpose() + W;
}

Vec AffineLqr::control(const Mat& A, const Mat& B, const Mat& R, const Mat& S,
                       const Vec& w_k, int k, const Vec& x) const {
    const Mat& Pn = P[static_cast<size_t>(k) + 1];
    const Vec& sn = s[static_cast<size_t>(k) + 1];
    const Mat guu = R + B.transpose() * Pn * B;
    const Mat gux = S + B.transpose() * Pn * A;
    const Vec g = B.transpose() * (Pn * w_k + sn);
    return -guu.inverse() * (gux * x + g);
}

AffineLqr affine_lqr_oracle(const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
                            const Mat& S, const Mat& P_terminal,
                            const std::vector<Vec>& w_seq) {
    const int N = static_cast<int>(w_seq.size());
    AffineLqr out;
    out.P.resize(N + 1);
    out.s.resize(N + 1);
    out.c.resize(N + 1);
    out.P[N] = P_terminal;
    out.s[N] = Vec::Zero(A.rows());
    out.c[N] = 0.0;
    for (int k = N - 1; k >= 0; --k) {
        const Mat& Pn = out.P[k + 1];
        const Vec& sn = out.s[k + 1];
        const Vec& w = w_seq[k];
        const Mat guu = R + B.transpose() * Pn * B;
        const Mat gux = S + B.transpose() * Pn * A;
        const Vec g = B.transpose() * (Pn * w + sn);
        const Mat guu_inv = guu.inverse();
        out.P[k] = Q + A.transpose() * Pn * A - gux.transpose() * guu_inv * gux;
        out.s[k] = A.transpose() * (Pn * w + sn) - gux.transpose() * guu_inv * g;
        out.c[k] = out.c[k + 1] + 0.5 * w.dot(Pn * w) + sn.dot(w) - 0.5 * g.dot(guu_inv * g);
    }
    return out;
}

Vec random_vector(RngStream& rng, int n, double scale) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = scale * rng.normal();
    return v;
}

Mat random_matrix(RngStream& rng, int rows, int cols, double scale) {
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
    return m;
}

Mat random_psd(RngStream& rng, int n, double scale) {
    const Mat g = random_matrix(rng, n, n, 1.0);
    return scale * (g * g.transpose() / n + 1e-3 * Mat::Identity(n, n));
}

LqInstance random_lq_instance(RngStream& rng, int max_nx, bool with_cross_terms) {
    LqInstance inst;
    inst.n_x = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(max_nx));
    inst.n_u = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(inst.n_x));
    inst.n_h = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(inst.n_x));

    // Spectral radius capped close to 1: strongly expansive draws make the
    // Riccati gains huge and the comparisons conditioning-bound.
    inst.A = random_matrix(rng, inst.n_x, inst.n_x, 1.0);
    Eigen::EigenSolver<Mat> es(inst.A);
    const double rho = es.eigenvalues().cwiseAbs().maxCoeff();
    if (rho > 1.02) inst.A *= 1.02 / rho;
    inst.B = random_matrix(rng, inst.n_x, inst.n_u, 1.0);
    inst.C = random_matrix(rng, inst.n_h, inst.n_x, 1.0);

    // Draw [Q S'; S R] jointly PSD, then bump R to keep Guu safely positive.
    const Mat H = random_psd(rng, inst.n_x + inst.n_u, 1.0);
    inst.Q = H.topLeftCorner(inst.n_x, inst.n_x);
    inst.R = H.bottomRightCorner(inst.n_u, inst.n_u) + 0.1 * Mat::Identity(inst.n_u, inst.n_u);
    inst.S = with_cross_terms ? Mat(H.bottomLeftCorner(inst.n_u, inst.n_x))
                              : Mat(Mat::Zero(inst.n_u, inst.n_x));
    inst.P_terminal = random_psd(rng, inst.n_x, 1.0);
    return inst;
}

Model LqInstance::model() const {
    BenchmarkParams p;
    p.A = A;
    p.B = B;
    p.C = C;
    p.Q = Q;
    p.R = R;
    p.S = S;
    p.P = P_terminal;
    return instantiate_benchmark("lq_custom", p);
}

std::vector<Vec> fd_control_gradient(const std::function<double(const std::vector<Vec>&)>& fn,
                                     const std::vector<Vec>& u) {
    double norm2 = 0.0;
    for (const Vec& uk : u) norm2 += uk.squaredNorm();
    const double h = 1e-5 * (1.0 + std::sqrt(norm2));

    std::vector<Vec> grad(u.size());
    std::vector<Vec> probe = u;
    for (size_t k = 0; k < u.size(); ++k) {
        grad[k] = Vec(u[k].size());
        for (int i = 0; i < u[k].size(); ++i) {
            const double v = probe[k](i);
            probe[k](i) = v + h;
            const double hi = fn(probe);
            probe[k](i) = v - h;
            const double lo = fn(probe);
            probe[k](i) = v;
            grad[k](i) = (hi - lo) / (2.0 * h);
        }
    }
    return grad;
}

}  // namespace srmpc::validation
