#include "srmpc/riccati.hpp"

#include <Eigen/Eigenvalues>

namespace srmpc {

RiccatiState terminal_riccati(const Model& model, const Vec& x_N) {
    RiccatiState omega;
    omega.p = model.grad_m(x_N);
    omega.P = sym(model.hess_m(x_N));
    if (!omega.p.allFinite() || !omega.P.allFinite()) {
        throw NumericError("terminal_riccati: non-finite Mayer derivatives");
    }
    return omega;
}

GBlocks g_blocks(const DerivativeBundle& b, const RiccatiState& omega_next) {
    GBlocks g;
    g.Gxx = b.Q + b.A.transpose() * omega_next.P * b.A + b.contract_K(omega_next.p);
    g.Gux = b.S + b.B.transpose() * omega_next.P * b.A + b.contract_L(omega_next.p);
    g.Guu = b.R + b.B.transpose() * omega_next.P * b.B + b.contract_M(omega_next.p);
    g.Gxx = sym(g.Gxx);
    g.Guu = sym(g.Guu);
    return g;
}

GBlocks g_blocks(const Model& model, const Vec& x, const Vec& u,
                 const RiccatiState& omega_next) {
    return g_blocks(model.eval_bundle(x, u), omega_next);
}

RiccatiStepResult riccati_step(const DerivativeBundle& b, const RiccatiState& omega_next,
                               int stage) {
    const GBlocks g = g_blocks(b, omega_next);
    Eigen::SelfAdjointEigenSolver<Mat> es(g.Guu);
    if (es.eigenvalues().minCoeff() <= 1e-10) {
        throw RegularityError(stage, "riccati_step: Guu not positive definite at stage " +
                                        std::to_string(stage) + " (min eigenvalue " +
                                        std::to_string(es.eigenvalues().minCoeff()) + ")");
    }
    const Mat guu_inv_gux =
        es.eigenvectors() *
        es.eigenvalues().cwiseInverse().asDiagonal() *
        es.eigenvectors().transpose() * g.Gux;

    RiccatiStepResult out;
    out.phi = sym(g.Gux.transpose() * guu_inv_gux);
    out.omega.P = sym(g.Gxx - out.phi);
    out.omega.p = b.A.transpose() * omega_next.p + b.q;
    out.blocks = g;
    if (!out.omega.p.allFinite() || !out.omega.P.allFinite()) {
        throw NumericError("riccati_step: non-finite Riccati state at stage " +
                           std::to_string(stage));
    }
    return out;
}

RiccatiStepResult riccati_step(const Model& model, const Vec& x, const Vec& u,
                               const RiccatiState& omega_next, int stage) {
    return riccati_step(model.eval_bundle(x, u), omega_next, stage);
}

BackwardSweep backward_sweep(const Model& model, const Trajectory& trajectory) {
    trajectory.validate();
    const int N = trajectory.horizon();
    if (N < 1) throw std::invalid_argument("backward_sweep: horizon must be >= 1");

    BackwardSweep sweep;
    sweep.omega.resize(N + 1);
    sweep.phi.resize(N);
    sweep.omega[N] = terminal_riccati(model, trajectory.x[N]);
    for (int k = N - 1; k >= 0; --k) {
        RiccatiStepResult step =
            riccati_step(model, trajectory.x[k], trajectory.u[k], sweep.omega[k + 1], k);
        sweep.omega[k] = std::move(step.omega);
        sweep.phi[k] = std::move(step.phi);
    }
    return sweep;
}

double stage_expected_loss(const Mat& phi, const Mat& sigma) {
    if (phi.rows() != sigma.rows() || phi.cols() != sigma.cols()) {
        throw std::invalid_argument("stage_expected_loss: shape mismatch");
    }
    return 0.5 * (phi * sigma).trace();
}

double stage_expected_loss(const Mat& phi, const CovarianceState& sigma) {
    return stage_expected_loss(phi, sigma.sigma);
}

}  // namespace srmpc
