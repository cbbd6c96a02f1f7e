#pragma once

#include "srmpc/estimator.hpp"
#include "srmpc/model.hpp"
#include "srmpc/riccati.hpp"
#include "srmpc/types.hpp"

#include <optional>
#include <vector>

namespace srmpc {

struct SolverOptions {
    double tol = 1e-6;        // converged when ||g||_2 <= tol * (1 + |objective|)
    int max_iterations = 400;
    int lbfgs_memory = 30;
    std::optional<std::vector<Vec>> warm_start;
};

struct OcpSolution {
    Trajectory trajectory;
    double objective = 0.0;
    std::vector<double> stage_losses;  // expected-loss values; empty for nominal solves
    int iterations = 0;
    bool converged = false;
    double gradient_norm = 0.0;
    std::vector<double> objective_history;  // accepted iterates, non-increasing
};

struct SrConfig {
    double alpha = 1.0;  // >= 0, trade-off between nominal cost and expected loss
    int horizon = 1;
    SolverOptions solver;
};

/// Forward simulation x_{k+1} = f(x_k, u_k) + w_k. Throws DivergenceError
/// with the stage index on non-finite states.
Trajectory rollout(const Model& model, const Vec& x_i, const std::vector<Vec>& u_seq,
                   const std::vector<Vec>& w_seq);

/// Minimizes sum_k l(x_k, u_k) + m(x_N) over the control sequence for a
/// given (possibly zero) disturbance sequence; the horizon is |w_seq|.
/// On iteration exhaustion the best iterate is returned with
/// converged = false.
OcpSolution solve_nominal(const Model& model, const Vec& x_i,
                          const std::vector<Vec>& w_seq, const SolverOptions& opts = {});

struct SrEvaluation {
    double objective = 0.0;
    double nominal = 0.0;              // sum l + m
    double loss = 0.0;                 // alpha * sum of stage losses
    std::vector<double> stage_losses;  // unweighted 0.5 Tr(Phi_k Sigma_k)
    Trajectory trajectory;             // w = 0
    std::vector<RiccatiState> omega;
    std::vector<Mat> phi;
    std::vector<Mat> sigma;
};

/// Reduced self-reflective objective: rolls the states forward with w = 0,
/// runs the backward Riccati sweep for (Omega, Phi), propagates the estimate
/// variance forward, and accumulates
///   sum_k [ l(x_k, u_k) + alpha * 0.5 Tr(Phi_k Sigma_k) ] + m(x_N).
SrEvaluation sr_objective(const Model& model, const Vec& x_i, const CovarianceState& sigma_i,
                          const std::vector<Vec>& u_seq, double alpha,
                          const NoiseSpec& noise);

/// Gradient of the reduced objective with respect to every control entry.
/// Adjoints of the state and variance recursions run backward, the adjoint
/// of the Riccati recursion runs forward; where third derivatives of f, h,
/// l would be required, directional central differences of the
/// second-derivative contractions are used. Cost is O(horizon).
std::vector<Vec> sr_gradient(const Model& model, const Vec& x_i,
                             const CovarianceState& sigma_i, const std::vector<Vec>& u_seq,
                             double alpha, const NoiseSpec& noise);

/// Quasi-Newton (L-BFGS with Armijo backtracking) minimization of
/// sr_objective, initialized from the zero sequence or the warm start.
OcpSolution solve_self_reflective(const Model& model, const Vec& x_i,
                                  const CovarianceState& sigma_i, const SrConfig& cfg,
                                  const NoiseSpec& noise);

}  // namespace srmpc
