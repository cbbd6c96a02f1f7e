#pragma once

#include "srmpc/estimator.hpp"
#include "srmpc/model.hpp"
#include "srmpc/types.hpp"

#include <vector>

namespace srmpc {

/// Gradient p and Hessian P of a cost-to-go function along a trajectory.
struct RiccatiState {
    Vec p;
    Mat P;
};

/// Second-derivative blocks of the stage value function
///   Gxx = Q + A'P'A + K.p',  Gux = S + B'P'A + L.p',  Guu = R + B'P'B + M.p'
/// (primes denote the next-stage Riccati state).
struct GBlocks {
    Mat Gxx;
    Mat Gux;
    Mat Guu;
};

/// Terminal condition: first and second derivative of the Mayer term.
RiccatiState terminal_riccati(const Model& model, const Vec& x_N);

GBlocks g_blocks(const DerivativeBundle& bundle, const RiccatiState& omega_next);
GBlocks g_blocks(const Model& model, const Vec& x, const Vec& u,
                 const RiccatiState& omega_next);

struct RiccatiStepResult {
    RiccatiState omega;  // p = A'p' + q,  P = Gxx - Phi
    Mat phi;             // Gux' Guu^{-1} Gux, symmetrized, PSD for Guu > 0
    GBlocks blocks;      // the evaluated second-derivative blocks
};

/// One backward step. Throws RegularityError naming `stage` when the
/// minimum eigenvalue of Guu is <= 1e-10.
RiccatiStepResult riccati_step(const DerivativeBundle& bundle,
                               const RiccatiState& omega_next, int stage = -1);
RiccatiStepResult riccati_step(const Model& model, const Vec& x, const Vec& u,
                               const RiccatiState& omega_next, int stage = -1);

struct BackwardSweep {
    std::vector<RiccatiState> omega;  // N + 1 entries, omega[N] terminal
    std::vector<Mat> phi;             // N entries
};

/// Full backward recursion along the trajectory's (x_k, u_k).
BackwardSweep backward_sweep(const Model& model, const Trajectory& trajectory);

/// Second-order expected stage loss 0.5 * Tr(Phi Sigma).
double stage_expected_loss(const Mat& phi, const Mat& sigma);
double stage_expected_loss(const Mat& phi, const CovarianceState& sigma);

}  // namespace srmpc
