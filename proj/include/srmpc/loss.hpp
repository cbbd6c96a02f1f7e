#pragma once

#include "srmpc/estimator.hpp"
#include "srmpc/model.hpp"
#include "srmpc/ocp.hpp"
#include "srmpc/sim.hpp"
#include "srmpc/trace.hpp"
#include "srmpc/types.hpp"

#include <cstdint>
#include <vector>

namespace srmpc {

/// Solver settings for the tail problems embedded in the loss analysis.
/// Tolerances are tight by default: stage losses are differences of
/// numerically solved cost-to-go values.
struct LossConfig {
    double tol = 1e-10;
    int max_iterations = 4000;
};

/// Best possible cost given the true initial state and the whole realized
/// disturbance sequence.
double utopian_cost(const Model& model, const Vec& x0_star, const std::vector<Vec>& w_star,
                    const LossConfig& cfg = {});

/// Loss attributed to the k-th decision of a finite-game trace:
/// the realized stage value G_k(z_k, u_k, w-tail) minus the optimal tail
/// value from z_k under the same realized disturbances. The second solve is
/// warm-started from the first one's solution, which makes the result
/// non-negative by construction up to solver tolerance.
double stage_loss(const Model& model, const ClosedLoopTrace& trace, int k,
                  const LossConfig& cfg = {});

struct LossReport {
    double J_star = 0.0;
    double J_cl = 0.0;
    double delta_total = 0.0;             // J_cl - J_star
    std::vector<double> delta_stages;     // per-decision losses
    double telescoping_gap = 0.0;         // |delta_total - sum(delta_stages)|
    double estimate = 0.0;                // 0.5 sum Tr(Phi_k Sigma_k), when computed
    std::vector<double> estimate_stages;
    double mc_mean = 0.0;
    double mc_stderr = 0.0;
    int mc_trials = 0;
    int mc_failed = 0;
    bool has_estimate = false;
    bool has_mc = false;
};

/// Full decomposition for one complete game trace: utopian cost, realized
/// cost, total loss, per-stage losses, and the gap between the two
/// independently computed sides of the telescoping identity.
LossReport loss_decomposition(const Model& model, const ClosedLoopTrace& trace,
                              const LossConfig& cfg = {});

struct SecondOrderEstimate {
    double total = 0.0;
    std::vector<double> stages;
};

/// Expected-loss estimate 0.5 sum_k Tr(Phi_k Sigma_k) along a planned
/// trajectory: backward sweep for Phi, forward variance prediction for
/// Sigma.
SecondOrderEstimate second_order_estimate(const Model& model, const Trajectory& plan,
                                          const CovarianceState& sigma0,
                                          const NoiseSpec& noise);

struct MonteCarloResult {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::vector<double> samples;
    int failed = 0;  // diverged / failed traces, excluded from the mean
};

/// Samples `trials` independent game traces (counter-derived substreams of
/// `seed`; deterministic regardless of execution order) and averages the
/// realized loss of optimality.
MonteCarloResult monte_carlo_loss(const Model& model, const NoiseSpec& noise,
                                  const GameConfig& game, int trials, std::uint64_t seed,
                                  const LossConfig& cfg = {});

struct GammaLevel {
    double scale = 1.0;
    double gamma = 0.0;
    double mc_mean = 0.0;
    double mc_stderr = 0.0;
    double estimate = 0.0;
    double gap = 0.0;
    bool above_noise_floor = false;
};

struct GammaStudy {
    std::vector<GammaLevel> levels;
    double slope = 0.0;      // log-log fit of gap vs gamma over usable levels
    int usable_levels = 0;   // levels with gap above 2x its standard error
    bool noise_floor = false;  // fewer than 2 usable levels
};

/// Scales W, V (and the initial estimate variance) by s^2 and gamma by s for
/// each level, compares the Monte-Carlo loss with the second-order estimate,
/// and fits the log-log slope of the gap against gamma. Requires at least
/// three strictly decreasing levels.
GammaStudy gamma_scaling_study(const Model& model, const NoiseSpec& base_noise,
                               const GameConfig& game, const std::vector<double>& levels,
                               int trials, std::uint64_t seed, const LossConfig& cfg = {});

/// Spectral-norm gap between the finite-difference Hessian of the stage loss
/// with respect to the estimate (at the true state) and the loss weight
/// Phi_k from the backward sweep of the tail plan.
double hessian_gap_check(const Model& model, const ClosedLoopTrace& trace, int k,
                         double fd_step, const LossConfig& cfg = {});

}  // namespace srmpc
