#pragma once

#include "srmpc/model.hpp"
#include "srmpc/rng.hpp"
#include "srmpc/types.hpp"

#include <vector>

namespace srmpc::validation {

// Textbook reference implementations kept deliberately independent of the
// library code paths they are used to check.

/// Discrete Riccati difference equation (Hessian convention):
/// P_k = Q + A'P A - (S + B'P A)'(R + B'P B)^{-1}(S + B'P A), P_N given.
/// Returns P_0 .. P_N.
std::vector<Mat> riccati_oracle(const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
                                const Mat& S, const Mat& P_terminal, int horizon);

/// LQR feedback gain for the first stage: u_0 = -K x_0 with
/// K = (R + B'P_1 B)^{-1}(S + B'P_1 A).
Mat lqr_gain(const Mat& A, const Mat& B, const Mat& R, const Mat& S, const Mat& P_next);

/// One Kalman covariance step in Joseph form (measurement update followed by
/// propagation), algebraically equal to the compact EKF expression but
/// computed through a different route.
Mat kalman_oracle_step(const Mat& A, const Mat& C, const Mat& W, const Mat& V,
                       const Mat& sigma);

/// Affine-LQR solution for x_{k+1} = A x + B u + w_k with quadratic cost
/// (Hessian convention) and known disturbances: value function
/// J_k(x) = x'P_k x / 2 + s_k'x + c_k.
struct AffineLqr {
    std::vector<Mat> P;
    std::vector<Vec> s;
    std::vector<double> c;

    double value(int k, const Vec& x) const {
        return 0.5 * x.dot(P[k] * x) + s[k].dot(x) + c[k];
    }
    /// Optimal control at stage k given x_k.
    Vec control(const Mat& A, const Mat& B, const Mat& R, const Mat& S, const Vec& w_k,
                int k, const Vec& x) const;
};

AffineLqr affine_lqr_oracle(const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
                            const Mat& S, const Mat& P_terminal,
                            const std::vector<Vec>& w_seq);

/// Random LQ problem instance with a jointly PSD stage cost (so the
/// dynamic-programming recursion is well posed) and spectral radius of A
/// capped at 1.05.
struct LqInstance {
    int n_x = 0, n_u = 0, n_h = 0;
    Mat A, B, C, Q, R, S, P_terminal;
    Model model() const;
};

LqInstance random_lq_instance(RngStream& rng, int max_nx = 4, bool with_cross_terms = true);

Vec random_vector(RngStream& rng, int n, double scale = 1.0);
Mat random_matrix(RngStream& rng, int rows, int cols, double scale = 1.0);
Mat random_psd(RngStream& rng, int n, double scale = 1.0);

/// Central-difference gradient of a scalar function of stacked controls,
/// step 1e-5 * (1 + ||u||).
std::vector<Vec> fd_control_gradient(const std::function<double(const std::vector<Vec>&)>& fn,
                                     const std::vector<Vec>& u);

}  // namespace srmpc::validation
