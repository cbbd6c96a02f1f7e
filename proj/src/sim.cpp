#include "srmpc/sim.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace srmpc {

void ClosedLoopTrace::validate() const {
    const size_t k = u.size();
    if (z.size() != k + 1 || y.size() != k || w.size() != k || v.size() != k ||
        eta.size() != k || sigma.size() != k || stage_cost.size() != k) {
        throw std::invalid_argument("trace: inconsistent sequence lengths");
    }
}

double ClosedLoopTrace::realized_cost(double terminal) const {
    double total = 0.0;
    for (double c : stage_cost) total += c;
    return total + terminal;
}

std::string ControllerSpec::id() const {
    if (kind == ControllerKind::Nominal) return "nominal";
    return "self_reflective_alpha_" + std::to_string(alpha);
}

Vec sample_bounded_noise(const Mat& cov, double radius, RngStream& stream) {
    if (cov.rows() != cov.cols()) {
        throw std::invalid_argument("sample_bounded_noise: covariance must be square");
    }
    const int n = static_cast<int>(cov.rows());
    if (cov.size() == 0 || cov.cwiseAbs().maxCoeff() == 0.0) return Vec::Zero(n);
    if (radius <= 0.0) {
        throw std::invalid_argument("sample_bounded_noise: radius must be > 0 for nonzero cov");
    }

    Eigen::SelfAdjointEigenSolver<Mat> es(sym(cov));
    if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff())) {
        throw std::invalid_argument("sample_bounded_noise: covariance not PSD");
    }
    const Mat factor =
        es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

    for (int attempt = 0; attempt < 1000; ++attempt) {
        Vec zn(n);
        for (int i = 0; i < n; ++i) zn(i) = stream.normal();
        Vec x = factor * zn;
        if (x.norm() <= radius) return x;
    }
    throw ConfigError("sample_bounded_noise: acceptance rate below 1% (radius too small "
                      "relative to the covariance)");
}

namespace {

std::vector<Vec> shift_and_duplicate(const std::vector<Vec>& u) {
    std::vector<Vec> out(u.begin() + 1, u.end());
    out.push_back(u.back());
    return out;
}

// The receding-horizon loop shared by both cascades. Per step: measure the
// current true state, run the EKF measurement update, solve from the
// filtered estimate (and its covariance), apply the first control; the
// mean/covariance maps then advance the stored pair once per step with the
// applied control.
ClosedLoopTrace run_closed_loop(const Model& model, const NoiseSpec& noise,
                                const SimConfig& cfg) {
    if (cfg.steps < 1) throw std::invalid_argument("sim: steps must be >= 1");
    if (cfg.horizon < 1) throw std::invalid_argument("sim: horizon must be >= 1");
    if (cfg.divergence_bound <= 0.0) {
        throw std::invalid_argument("sim: divergence bound must be > 0");
    }
    model.check_state(cfg.x0_star);
    model.check_state(cfg.y0);

    RngStream wstream(RngStream::derive(cfg.seed, 0, 0x77ULL));
    RngStream vstream(RngStream::derive(cfg.seed, 0, 0x76ULL));
    const double wr = noise.w_radius();
    const double vr = noise.v_radius();

    ClosedLoopTrace trace;
    trace.seed = cfg.seed;
    trace.controller = cfg.controller.id();
    trace.planned_steps = cfg.steps;

    Vec z = cfg.x0_star;
    Vec yhat = cfg.y0;  // one-step-ahead estimate of the current state
    CovarianceState sig(cfg.sigma0);
    std::optional<std::vector<Vec>> warm;

    for (int k = 0; k < cfg.steps; ++k) {
        const Vec vk = cfg.zero_realized_noise ? Vec(Vec::Zero(model.n_h))
                                               : sample_bounded_noise(noise.V, vr, vstream);
        const Vec etak = model.h(z) + vk;

        const FilteredEstimate filt =
            ekf_measurement_update(model, yhat, yhat, sig, etak, noise);

        Vec uk;
        try {
            SolverOptions opts = cfg.solver;
            opts.warm_start = warm;
            if (cfg.controller.kind == ControllerKind::Nominal) {
                OcpSolution sol = solve_nominal(
                    model, filt.y, std::vector<Vec>(cfg.horizon, Vec::Zero(model.n_x)), opts);
                uk = sol.trajectory.u.front();
                warm = shift_and_duplicate(sol.trajectory.u);
            } else {
                SrConfig sr;
                sr.alpha = cfg.controller.alpha;
                sr.horizon = cfg.horizon;
                sr.solver = opts;
                OcpSolution sol =
                    solve_self_reflective(model, filt.y, CovarianceState(filt.sigma), sr, noise);
                uk = sol.trajectory.u.front();
                warm = shift_and_duplicate(sol.trajectory.u);
            }
        } catch (const DivergenceError&) {
            trace.solver_failed = true;
            trace.failure_step = k;
            trace.failure_reason = "prediction_divergence";
            trace.z.push_back(z);
            return trace;
        } catch (const std::exception& e) {
            trace.solver_failed = true;
            trace.failure_step = k;
            trace.failure_reason = e.what();
            trace.z.push_back(z);
            return trace;
        }

        const Vec wk = cfg.zero_realized_noise ? Vec(Vec::Zero(model.n_x))
                                               : sample_bounded_noise(noise.W, wr, wstream);
        trace.z.push_back(z);
        trace.y.push_back(filt.y);
        trace.sigma.push_back(filt.sigma);
        trace.u.push_back(uk);
        trace.w.push_back(wk);
        trace.v.push_back(vk);
        trace.eta.push_back(etak);
        trace.stage_cost.push_back(model.l(z, uk));

        // advance the stored pair once per step with the applied control
        const Mat A = model.eval_A(yhat, uk);
        yhat = model.f(filt.y, uk);
        sig = CovarianceState(sym(A * filt.sigma * A.transpose() + noise.W));
        if (!yhat.allFinite()) {
            trace.solver_failed = true;
            trace.failure_step = k;
            trace.failure_reason = "estimate_divergence";
            trace.z.push_back(z);
            return trace;
        }

        z = model.f(z, uk) + wk;
        if (!z.allFinite() || z.norm() > cfg.divergence_bound) {
            trace.diverged = true;
            trace.divergence_step = k + 1;
            trace.z.push_back(z);
            return trace;
        }
    }
    trace.z.push_back(z);
    return trace;
}

}  // namespace

ClosedLoopTrace run_cascade_nominal(const Model& model, const NoiseSpec& noise,
                                    const SimConfig& cfg) {
    if (cfg.controller.kind != ControllerKind::Nominal) {
        throw std::invalid_argument("run_cascade_nominal: controller must be nominal");
    }
    return run_closed_loop(model, noise, cfg);
}

ClosedLoopTrace run_self_reflective(const Model& model, const NoiseSpec& noise,
                                    const SimConfig& cfg) {
    if (cfg.controller.kind != ControllerKind::SelfReflective) {
        throw std::invalid_argument("run_self_reflective: controller must be self_reflective");
    }
    return run_closed_loop(model, noise, cfg);
}

ClosedLoopTrace run_game_trace(const Model& model, const NoiseSpec& noise,
                               const GameConfig& cfg, std::uint64_t seed) {
    if (cfg.horizon < 1) throw std::invalid_argument("game: horizon must be >= 1");
    model.check_state(cfg.x0_star);

    RngStream wstream(RngStream::derive(seed, 1, 0x77ULL));
    RngStream vstream(RngStream::derive(seed, 1, 0x76ULL));
    RngStream ystream(RngStream::derive(seed, 1, 0x79ULL));
    const double wr = noise.w_radius();
    const double vr = noise.v_radius();
    const int N = cfg.horizon;

    ClosedLoopTrace trace;
    trace.seed = seed;
    trace.controller = cfg.controller.id();
    trace.planned_steps = N;

    Vec y;
    if (cfg.sample_y0) {
        const double yr = 4.0 * std::sqrt(std::max(0.0, spectral_norm_sym(cfg.sigma0)));
        y = cfg.x0_star + sample_bounded_noise(cfg.sigma0, yr, ystream);
    } else {
        model.check_state(cfg.y0);
        y = cfg.y0;
    }
    CovarianceState sig(cfg.sigma0);
    Vec z = cfg.x0_star;

    std::optional<std::vector<Vec>> warm;
    for (int k = 0; k < N; ++k) {
        const int tail = N - k;
        Vec uk;
        try {
            SolverOptions opts = cfg.solver;
            opts.warm_start = warm;
            if (cfg.controller.kind == ControllerKind::Nominal) {
                OcpSolution sol =
                    solve_nominal(model, y, std::vector<Vec>(tail, Vec::Zero(model.n_x)), opts);
                uk = sol.trajectory.u.front();
                warm = std::vector<Vec>(sol.trajectory.u.begin() + 1, sol.trajectory.u.end());
            } else {
                SrConfig sr;
                sr.alpha = cfg.controller.alpha;
                sr.horizon = tail;
                sr.solver = opts;
                OcpSolution sol = solve_self_reflective(model, y, sig, sr, noise);
                uk = sol.trajectory.u.front();
                warm = std::vector<Vec>(sol.trajectory.u.begin() + 1, sol.trajectory.u.end());
            }
            if (warm && warm->empty()) warm.reset();
        } catch (const DivergenceError&) {
            trace.solver_failed = true;
            trace.failure_step = k;
            trace.failure_reason = "prediction_divergence";
            trace.z.push_back(z);
            return trace;
        } catch (const std::exception& e) {
            trace.solver_failed = true;
            trace.failure_step = k;
            trace.failure_reason = e.what();
            trace.z.push_back(z);
            return trace;
        }

        const Vec wk = sample_bounded_noise(noise.W, wr, wstream);
        const Vec vk = sample_bounded_noise(noise.V, vr, vstream);
        const Vec etak = model.h(z) + vk;

        trace.z.push_back(z);
        trace.y.push_back(y);
        trace.sigma.push_back(sig.sigma);
        trace.u.push_back(uk);
        trace.w.push_back(wk);
        trace.v.push_back(vk);
        trace.eta.push_back(etak);
        trace.stage_cost.push_back(model.l(z, uk));

        const Vec z_next = model.f(z, uk) + wk;
        if (!z_next.allFinite()) {
            trace.diverged = true;
            trace.divergence_step = k + 1;
            trace.z.push_back(z_next);
            return trace;
        }
        const Vec y_next = ekf_mean_update(model, y, uk, y, sig, etak, noise);
        sig = ekf_cov_update(model, y, uk, sig, noise);
        y = y_next;
        z = z_next;
    }
    trace.z.push_back(z);
    return trace;
}

}  // namespace srmpc
