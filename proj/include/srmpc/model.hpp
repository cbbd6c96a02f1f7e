#pragma once

#include "srmpc/types.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace srmpc {

/// First and second derivatives of dynamics, measurement and stage cost at a
/// single point (x, u).
///
/// Tensor blocks are stored per output component of f: K[i] is the n_x x n_x
/// Hessian of f_i with respect to x, L[i] the n_u x n_x cross block
/// (rows = u index, cols = x index), M[i] the n_u x n_u Hessian in u.
/// contract_*(p) forms sum_i p_i * block_i.
struct DerivativeBundle {
    Mat A;  ///< df/dx, n_x x n_x
    Mat B;  ///< df/du, n_x x n_u
    Mat C;  ///< dh/dx, n_h x n_x
    Vec q;  ///< grad_x l
    Vec r;  ///< grad_u l
    Mat Q;  ///< hess_xx l (symmetric)
    Mat R;  ///< hess_uu l (symmetric)
    Mat S;  ///< hess_ux l, n_u x n_x
    std::vector<Mat> K;  ///< hess_xx f per output component
    std::vector<Mat> L;  ///< hess_ux f per output component
    std::vector<Mat> M;  ///< hess_uu f per output component

    Mat contract_K(const Vec& p) const;  // n_x x n_x, symmetric
    Mat contract_L(const Vec& p) const;  // n_u x n_x
    Mat contract_M(const Vec& p) const;  // n_u x n_u, symmetric
};

/// State / control / disturbance sequences with |u| = |w| = |x| - 1.
///
/// upper/lower accessors follow the index-overflow convention: x_upper(-1)
/// and u_lower(N) / w_lower(N) are empty views.
struct Trajectory {
    std::vector<Vec> x;
    std::vector<Vec> u;
    std::vector<Vec> w;

    int horizon() const { return static_cast<int>(u.size()); }
    void validate() const;

    std::span<const Vec> x_upper(int k) const;  // x_0 .. x_k
    std::span<const Vec> u_lower(int k) const;  // u_k .. u_{N-1}
    std::span<const Vec> w_lower(int k) const;
};

/// Nonlinear discrete-time system
///
///   x_{k+1} = f(x_k, u_k) + w_k,   eta_k = h(x_k) + v_k,
///
/// with stage cost l(x, u) and terminal cost m(x). Models are immutable
/// after construction and every evaluator must be a pure function of its
/// inputs (safe to call concurrently). f, h, l, m are assumed three times
/// continuously differentiable.
///
/// Derivative callbacks are optional: missing first derivatives are filled
/// by central finite differences of the values, missing second derivatives
/// by central differences of the (possibly analytic) first derivatives with
/// step 1e-6 * (1 + ||point||).
struct Model {
    int n_x = 0;
    int n_u = 0;
    int n_h = 0;
    std::string name;

    std::function<Vec(const Vec&, const Vec&)> f;
    std::function<Vec(const Vec&)> h;
    std::function<double(const Vec&, const Vec&)> l;
    std::function<double(const Vec&)> m;

    std::function<Mat(const Vec&, const Vec&)> f_x, f_u;
    std::function<Mat(const Vec&)> h_x;
    std::function<Vec(const Vec&, const Vec&)> l_x, l_u;
    std::function<Mat(const Vec&, const Vec&)> l_xx, l_uu, l_ux;
    std::function<std::vector<Mat>(const Vec&, const Vec&)> f_xx, f_ux, f_uu;
    std::function<Vec(const Vec&)> m_x;
    std::function<Mat(const Vec&)> m_xx;

    /// Evaluates all derivative blocks at (x, u). Throws
    /// std::invalid_argument on dimension mismatch and NumericError on
    /// non-finite results.
    DerivativeBundle eval_bundle(const Vec& x, const Vec& u) const;

    // First derivatives only (cheap path for adjoint sweeps).
    Mat eval_A(const Vec& x, const Vec& u) const;
    Mat eval_B(const Vec& x, const Vec& u) const;
    Vec eval_q(const Vec& x, const Vec& u) const;
    Vec eval_r(const Vec& x, const Vec& u) const;

    Vec grad_m(const Vec& x) const;
    Mat hess_m(const Vec& x) const;

    void check_input(const Vec& x, const Vec& u) const;
    void check_state(const Vec& x) const;
};

/// Per-block max relative errors of the analytic bundle against central
/// finite differences of the raw f, h, l, m values. Errors are scaled by
/// (1 + max |analytic entry|) per block. Report-only.
struct DerivativeCheck {
    double A = 0, B = 0, C = 0, q = 0, r = 0;
    double Q = 0, R = 0, S = 0;
    double K = 0, L = 0, M = 0;
    double m_grad = 0, m_hess = 0;
    double max_error() const;
};

DerivativeCheck check_derivatives(const Model& model, const Vec& x, const Vec& u,
                                  double step);

struct BenchmarkParams {
    double delta = 0.01;
    // lq_custom matrices; C, S, P are optional (C defaults to identity,
    // S to zero, P to Q).
    Mat A, B, C, Q, R, S, P;
};

/// Builds one of the built-in benchmark models:
///   - "motivating_example": 2-state bilinear system with scalar output
///     x2 and tracking stage cost delta * (x'Qx + u'Ru), Q = diag(1, 0).
///   - "predator_prey": explicit-Euler discretization of the 3-state
///     predator/prey/feeding-success system, h(z) = z1,
///     l = delta * ((z1-1)^2 + (z2-1)^2 + u^2),
///     m(z) = (z - z_s)' P_T (z - z_s) at z_s = (1, 1, 0.5).
///   - "lq_custom": f = Ax + Bu, h = Cx, l = (x'Qx + u'Ru)/2 + u'Sx,
///     m = x'Px/2, so eval_bundle returns the parameter matrices exactly.
Model instantiate_benchmark(const std::string& name, const BenchmarkParams& params);

/// Fixed point (1, 1, 0.5) of the predator-prey drift at u = 0.
Vec predator_steady_state();

/// Terminal weight P_T: stationary solution of the discrete Riccati
/// recursion for the model linearized at the steady state, halved so that
/// m(z) = (z - z_s)' P_T (z - z_s) matches the quadratic cost-to-go.
Mat predator_terminal_weight(double delta);

}  // namespace srmpc
