#pragma once

#include "srmpc/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace srmpc {

/// Realized closed-loop data. For K executed steps the state sequence has
/// K + 1 entries and every per-step sequence has K. A trace is fully
/// reproducible from (model, noise, seed, controller id, initial data).
struct ClosedLoopTrace {
    std::vector<Vec> z;           ///< true states, K + 1
    std::vector<Vec> y;           ///< estimate used at each decision
    std::vector<Vec> u;           ///< applied controls
    std::vector<Vec> w;           ///< realized process noise
    std::vector<Vec> v;           ///< realized measurement noise
    std::vector<Vec> eta;         ///< measurements, eta_k = h(z_k) + v_k
    std::vector<Mat> sigma;       ///< filter covariance at each decision
    std::vector<double> stage_cost;  ///< l(z_k, u_k)

    std::uint64_t seed = 0;
    std::string controller;
    int planned_steps = 0;
    bool diverged = false;
    int divergence_step = -1;
    bool solver_failed = false;
    int failure_step = -1;
    std::string failure_reason;

    /// True when the run ended by the state bound or because the
    /// controller's own prediction left the finite range.
    bool closed_loop_failed() const {
        return diverged || (solver_failed && failure_reason == "prediction_divergence");
    }

    int steps() const { return static_cast<int>(u.size()); }
    bool complete() const { return !diverged && !solver_failed && steps() == planned_steps; }
    void validate() const;

    /// Realized cost sum l(z_k, u_k) + m(z_K); requires a complete trace.
    double realized_cost(double terminal) const;
};

}  // namespace srmpc
