#pragma once

#include "srmpc/estimator.hpp"
#include "srmpc/model.hpp"
#include "srmpc/ocp.hpp"
#include "srmpc/rng.hpp"
#include "srmpc/trace.hpp"
#include "srmpc/types.hpp"

#include <string>

namespace srmpc {

enum class ControllerKind { Nominal, SelfReflective };

struct ControllerSpec {
    ControllerKind kind = ControllerKind::Nominal;
    double alpha = 0.0;  // used by the self-reflective controller
    std::string id() const;
};

/// Receding-horizon closed-loop configuration (fixed horizon at every step).
struct SimConfig {
    int steps = 100;
    int horizon = 10;
    Vec x0_star;          ///< true initial state
    Vec y0;               ///< initial estimate
    Mat sigma0;           ///< initial estimate variance
    ControllerSpec controller;
    std::uint64_t seed = 1;
    double divergence_bound = 1e3;  ///< stop once ||z||_2 exceeds this
    /// Realized noise forced to zero while the filter and the controller
    /// keep using the configured noise model (they are unaware the plant is
    /// noise-free).
    bool zero_realized_noise = false;
    SolverOptions solver;
};

/// Finite-game configuration: the loop runs exactly `horizon` steps and the
/// controller at step k optimizes the remaining tail (shrinking horizon),
/// which is the setting the loss analysis quantifies.
struct GameConfig {
    int horizon = 10;
    Vec x0_star;
    Vec y0;               ///< used when sample_y0 is false
    bool sample_y0 = true;  ///< draw y0 around x0_star with covariance sigma0
    Mat sigma0;
    ControllerSpec controller;
    SolverOptions solver;
};

/// Zero-mean Gaussian draw with the given covariance, rejection-truncated to
/// ||x||_2 <= radius. With radius >= 4 sqrt||cov|| the truncation bias of the
/// sample covariance stays below 1%. A zero covariance yields the zero
/// vector; persistent rejection (acceptance below ~1%) raises ConfigError.
Vec sample_bounded_noise(const Mat& cov, double radius, RngStream& stream);

/// Certainty-equivalent MPC + EKF cascade. Each step: measure, EKF mean and
/// covariance update linearized at the previous estimate with the previously
/// applied control (u_{-1} = 0 at startup), solve the fixed-horizon nominal
/// problem from the updated estimate, apply the first control. Warm-started
/// by shift-and-duplicate. Stops early with the divergence flag once the
/// true state norm exceeds the bound; a solver failure truncates the trace
/// with a failure record.
ClosedLoopTrace run_cascade_nominal(const Model& model, const NoiseSpec& noise,
                                    const SimConfig& cfg);

/// Same loop with the self-reflective solve in place of the nominal one; the
/// EKF variance is threaded into each solve as the initial Sigma.
ClosedLoopTrace run_self_reflective(const Model& model, const NoiseSpec& noise,
                                    const SimConfig& cfg);

/// Finite game in predictor form: the decision at step k uses the estimate
/// built from measurements up to k-1; the measurement taken at step k enters
/// the next estimate. Used by the loss analysis.
ClosedLoopTrace run_game_trace(const Model& model, const NoiseSpec& noise,
                               const GameConfig& cfg, std::uint64_t seed);

}  // namespace srmpc
