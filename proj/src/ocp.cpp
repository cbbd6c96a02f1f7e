#include "srmpc/ocp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>

namespace srmpc {

namespace {

std::vector<Vec> zero_seq(int dim, int count) {
    return std::vector<Vec>(static_cast<size_t>(count), Vec::Zero(dim));
}

Vec stack(const std::vector<Vec>& seq, int n_u) {
    Vec z(static_cast<int>(seq.size()) * n_u);
    for (size_t k = 0; k < seq.size(); ++k) z.segment(static_cast<int>(k) * n_u, n_u) = seq[k];
    return z;
}

std::vector<Vec> unstack(const Vec& z, int n_u) {
    std::vector<Vec> seq(static_cast<size_t>(z.size() / n_u));
    for (size_t k = 0; k < seq.size(); ++k) seq[k] = z.segment(static_cast<int>(k) * n_u, n_u);
    return seq;
}

double nominal_cost(const Model& model, const Trajectory& traj) {
    double total = 0.0;
    for (int k = 0; k < traj.horizon(); ++k) total += model.l(traj.x[k], traj.u[k]);
    total += model.m(traj.x.back());
    if (!std::isfinite(total)) throw NumericError("nominal cost is non-finite");
    return total;
}

// ---------------------------------------------------------------------------
// L-BFGS with Armijo backtracking (contraction 0.5, slope 1e-4)
// ---------------------------------------------------------------------------

struct MinimizeResult {
    Vec z;
    double objective = 0.0;
    Vec gradient;
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;
};

// objective_fn(z) -> optional objective; gradient_fn(z) -> gradient.
// Infeasible points (rollout divergence, sweep regularity failure) show up
// as nullopt and are rejected by the line search; a failure at the initial
// point is rethrown.
MinimizeResult lbfgs_minimize(const std::function<std::optional<double>(const Vec&)>& objective_fn,
                              const std::function<Vec(const Vec&)>& gradient_fn,
                              Vec z0, const SolverOptions& opts,
                              std::exception_ptr* last_error) {
    MinimizeResult res;
    res.z = std::move(z0);

    auto fail_if_initial = [&](const std::optional<double>& f) {
        if (!f) {
            if (last_error && *last_error) std::rethrow_exception(*last_error);
            throw NumericError("solver: objective not evaluable at the initial point");
        }
    };

    std::optional<double> f0 = objective_fn(res.z);
    fail_if_initial(f0);
    res.objective = *f0;
    res.gradient = gradient_fn(res.z);
    res.history.push_back(res.objective);

    const int mem = std::max(1, opts.lbfgs_memory);
    std::vector<Vec> s_hist, y_hist;
    std::vector<double> rho_hist;

    auto two_loop = [&](const Vec& g) -> Vec {
        Vec q = g;
        const int m = static_cast<int>(s_hist.size());
        std::vector<double> alpha(m);
        for (int i = m - 1; i >= 0; --i) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alpha[i] * y_hist[i];
        }
        if (m > 0) {
            const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
            q *= gamma;
        }
        for (int i = 0; i < m; ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(q);
            q += (alpha[i] - beta) * s_hist[i];
        }
        return -q;
    };

    auto converged = [&](double f, const Vec& g) {
        return g.norm() <= opts.tol * (1.0 + std::abs(f));
    };

    if (converged(res.objective, res.gradient)) {
        res.converged = true;
        return res;
    }

    int stalled = 0;  // accepted steps without measurable objective progress
    for (int it = 0; it < opts.max_iterations; ++it) {
        Vec d = two_loop(res.gradient);
        double slope = res.gradient.dot(d);
        if (!(slope < -1e-14 * d.norm() * res.gradient.norm()) || !d.allFinite()) {
            d = -res.gradient;
            slope = -res.gradient.squaredNorm();
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        double t = 1.0;
        bool accepted = false;
        Vec z_new;
        double f_new = 0.0;
        std::optional<Vec> g_ready;
        while (t >= 1e-16) {
            z_new = res.z + t * d;
            std::optional<double> ft = objective_fn(z_new);
            if (ft && *ft <= res.objective + 1e-4 * t * slope) {
                f_new = *ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            // Quadratic endgame: once objective differences fall below the
            // floating-point floor, a full quasi-Newton step can still
            // contract the gradient. Accept it under a roundoff tie-break.
            z_new = res.z + d;
            std::optional<double> ft = objective_fn(z_new);
            if (ft && *ft <= res.objective + 1e-14 * (1.0 + std::abs(res.objective))) {
                Vec g_try = gradient_fn(z_new);
                if (g_try.norm() <= 0.7 * res.gradient.norm()) {
                    f_new = *ft;
                    g_ready = std::move(g_try);
                    accepted = true;
                }
            }
        }
        if (!accepted) break;  // line search stalled; return best iterate

        Vec g_new = g_ready ? std::move(*g_ready) : gradient_fn(z_new);
        const Vec s = z_new - res.z;
        const Vec y = g_new - res.gradient;
        const double sy = s.dot(y);
        if (sy > 1e-10 * s.norm() * y.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > mem) {
                s_hist.erase(s_hist.begin());
                y_hist.erase(y_hist.begin());
                rho_hist.erase(rho_hist.begin());
            }
        }

        const double progress = res.objective - f_new;
        stalled = progress <= 1e-15 * (1.0 + std::abs(res.objective)) ? stalled + 1 : 0;

        res.z = std::move(z_new);
        res.objective = f_new;
        res.gradient = std::move(g_new);
        res.iterations = it + 1;
        res.history.push_back(res.objective);

        if (converged(res.objective, res.gradient)) {
            res.converged = true;
            break;
        }
        if (stalled >= 25) break;  // at the floating-point floor
    }
    return res;
}

// ---------------------------------------------------------------------------
// Nominal objective and adjoint gradient
// ---------------------------------------------------------------------------

double nominal_objective(const Model& model, const Vec& x_i, const std::vector<Vec>& u,
                         const std::vector<Vec>& w, Trajectory* traj_out = nullptr) {
    Trajectory traj = rollout(model, x_i, u, w);
    const double cost = nominal_cost(model, traj);
    if (traj_out) *traj_out = std::move(traj);
    return cost;
}

std::vector<Vec> nominal_gradient(const Model& model, const Trajectory& traj) {
    const int N = traj.horizon();
    std::vector<Vec> g(static_cast<size_t>(N));
    Vec lambda = model.grad_m(traj.x[N]);
    for (int k = N - 1; k >= 0; --k) {
        const Mat A = model.eval_A(traj.x[k], traj.u[k]);
        const Mat B = model.eval_B(traj.x[k], traj.u[k]);
        g[k] = model.eval_r(traj.x[k], traj.u[k]) + B.transpose() * lambda;
        lambda = model.eval_q(traj.x[k], traj.u[k]) + A.transpose() * lambda;
    }
    return g;
}

// ---------------------------------------------------------------------------
// Self-reflective evaluation cache
// ---------------------------------------------------------------------------

struct SrCache {
    Trajectory traj;
    std::vector<DerivativeBundle> bundles;  // N
    std::vector<GBlocks> blocks;            // N
    std::vector<Mat> guu_inv_gux;           // N
    std::vector<Mat> phi;                   // N
    std::vector<Mat> sigma;                 // N + 1
    std::vector<RiccatiState> omega;        // N + 1
    std::vector<double> stage_losses;       // N
    double nominal = 0.0;
    double loss = 0.0;
    double objective = 0.0;
};

SrCache sr_eval_cache(const Model& model, const Vec& x_i, const Mat& sigma_i,
                      const std::vector<Vec>& u, double alpha, const NoiseSpec& noise) {
    if (alpha < 0.0) throw std::invalid_argument("sr_objective: alpha must be >= 0");
    const int N = static_cast<int>(u.size());
    if (N < 1) throw std::invalid_argument("sr_objective: horizon must be >= 1");

    SrCache c;
    c.traj = rollout(model, x_i, u, zero_seq(model.n_x, N));
    c.nominal = nominal_cost(model, c.traj);

    c.bundles.resize(N);
    for (int k = 0; k < N; ++k) c.bundles[k] = model.eval_bundle(c.traj.x[k], c.traj.u[k]);

    c.omega.resize(N + 1);
    c.blocks.resize(N);
    c.guu_inv_gux.resize(N);
    c.phi.resize(N);
    c.omega[N] = terminal_riccati(model, c.traj.x[N]);
    for (int k = N - 1; k >= 0; --k) {
        c.blocks[k] = g_blocks(c.bundles[k], c.omega[k + 1]);
        Eigen::SelfAdjointEigenSolver<Mat> es(c.blocks[k].Guu);
        if (es.eigenvalues().minCoeff() <= 1e-10) {
            throw RegularityError(k, "sr_objective: Guu not positive definite at stage " +
                                         std::to_string(k));
        }
        c.guu_inv_gux[k] = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
                           es.eigenvectors().transpose() * c.blocks[k].Gux;
        c.phi[k] = sym(c.blocks[k].Gux.transpose() * c.guu_inv_gux[k]);
        c.omega[k].P = sym(c.blocks[k].Gxx - c.phi[k]);
        c.omega[k].p = c.bundles[k].A.transpose() * c.omega[k + 1].p + c.bundles[k].q;
    }

    c.sigma.resize(N + 1);
    c.sigma[0] = sym(sigma_i);
    for (int k = 0; k < N; ++k) {
        c.sigma[k + 1] =
            fsigma_step(c.bundles[k].A, c.bundles[k].C, c.sigma[k], noise.W, noise.V);
    }

    c.stage_losses.resize(N);
    double loss_sum = 0.0;
    for (int k = 0; k < N; ++k) {
        c.stage_losses[k] = stage_expected_loss(c.phi[k], c.sigma[k]);
        loss_sum += c.stage_losses[k];
    }
    c.loss = alpha * loss_sum;
    c.objective = c.nominal + c.loss;
    if (!std::isfinite(c.objective)) throw NumericError("sr_objective: non-finite objective");
    return c;
}

// Central finite difference of a scalar callable over one vector argument.
template <typename F>
Vec central_grad(const F& fn, const Vec& at, double h) {
    Vec g(at.size());
    Vec p = at;
    for (int i = 0; i < at.size(); ++i) {
        const double v = p(i);
        p(i) = v + h;
        const double hi = fn(p);
        p(i) = v - h;
        const double lo = fn(p);
        p(i) = v;
        g(i) = (hi - lo) / (2.0 * h);
    }
    return g;
}

std::vector<Vec> sr_gradient_from_cache(const Model& model, const SrCache& c, double alpha,
                                        const NoiseSpec& noise) {
    const int N = c.traj.horizon();
    const int nx = model.n_x;
    const int nu = model.n_u;

    // Adjoint of the variance recursion (backward). lam[k] = dJ/dSigma_k.
    std::vector<Mat> lam(static_cast<size_t>(N) + 1, Mat::Zero(nx, nx));
    for (int k = N - 1; k >= 0; --k) {
        const Mat D = c.bundles[k].C * c.sigma[k] * c.bundles[k].C.transpose() + noise.V;
        const Mat T = c.bundles[k].C.transpose() * pinv_psd(sym(D)) * c.bundles[k].C;
        const Mat Mk = c.bundles[k].A * (Mat::Identity(nx, nx) - c.sigma[k] * T);
        lam[k] = sym(0.5 * alpha * c.phi[k] + Mk.transpose() * lam[k + 1] * Mk);
    }

    // Adjoint of the Riccati recursion (forward). pi/PiP[j] = dJ/dOmega_j.
    std::vector<Vec> pi(static_cast<size_t>(N) + 1, Vec::Zero(nx));
    std::vector<Mat> PiP(static_cast<size_t>(N) + 1, Mat::Zero(nx, nx));
    for (int j = 0; j < N; ++j) {
        const Mat Y = sym(0.5 * alpha * c.sigma[j] - PiP[j]);
        const Mat gux_adj = 2.0 * c.guu_inv_gux[j] * Y;
        const Mat guu_adj = -c.guu_inv_gux[j] * Y * c.guu_inv_gux[j].transpose();
        Vec pnext = c.bundles[j].A * pi[j];
        for (int i = 0; i < nx; ++i) {
            pnext(i) += (PiP[j] * c.bundles[j].K[i]).trace();
            pnext(i) += (gux_adj.transpose() * c.bundles[j].L[i]).trace();
            pnext(i) += (guu_adj.transpose() * c.bundles[j].M[i]).trace();
        }
        const Mat cross = c.bundles[j].B * gux_adj * c.bundles[j].A.transpose();
        PiP[j + 1] = sym(c.bundles[j].A * PiP[j] * c.bundles[j].A.transpose() + sym(cross) +
                         c.bundles[j].B * guu_adj * c.bundles[j].B.transpose());
        pi[j + 1] = std::move(pnext);
    }

    const double zero_tol = 0.0;
    auto nonzero = [&](const Mat& m) { return m.cwiseAbs().maxCoeff() > zero_tol; };
    auto nonzero_v = [&](const Vec& v) {
        return v.size() > 0 && v.cwiseAbs().maxCoeff() > zero_tol;
    };

    // Terminal adjoint of the state; the Omega_N = M(x_N) coupling needs
    // third derivatives of m, taken as central differences of grad/hess m.
    Vec lambda = model.grad_m(c.traj.x[N]);
    if (nonzero_v(pi[N]) || nonzero(PiP[N])) {
        const double h = 1e-6 * (1.0 + c.traj.x[N].lpNorm<Eigen::Infinity>());
        auto chi = [&](const Vec& xx) {
            double s = pi[N].dot(model.grad_m(xx));
            s += (PiP[N] * model.hess_m(xx)).trace();
            return s;
        };
        lambda += central_grad(chi, c.traj.x[N], h);
    }

    std::vector<Vec> grad(static_cast<size_t>(N));
    for (int j = N - 1; j >= 0; --j) {
        const bool need_sig = nonzero(lam[j + 1]);
        const bool need_omega = nonzero_v(pi[j]) || nonzero(PiP[j]);
        const bool need_loss = alpha > 0.0;

        Vec gx = Vec::Zero(nx);
        Vec gu = Vec::Zero(nu);
        if (need_sig || need_omega || need_loss) {
            // Explicit (x_j, u_j) dependence of the Sigma step, the Riccati
            // step and the stage loss; third-derivative content enters here
            // through finite differences of the evaluated blocks.
            const Mat Y = sym(0.5 * alpha * c.sigma[j] - PiP[j]);
            auto psi = [&](const Vec& xx, const Vec& uu) {
                const DerivativeBundle b = model.eval_bundle(xx, uu);
                double s = 0.0;
                if (need_sig) {
                    s += (lam[j + 1] * fsigma_step(b.A, b.C, c.sigma[j], noise.W, noise.V))
                             .trace();
                }
                if (need_omega || need_loss) {
                    const GBlocks g = g_blocks(b, c.omega[j + 1]);
                    const Mat phi = g.Gux.transpose() * g.Guu.ldlt().solve(g.Gux);
                    s += pi[j].dot(b.A.transpose() * c.omega[j + 1].p + b.q);
                    s += (PiP[j] * g.Gxx).trace();
                    s += (Y * phi).trace();
                }
                return s;
            };
            const double h = 1e-6 * (1.0 + std::max(c.traj.x[j].lpNorm<Eigen::Infinity>(),
                                                    c.traj.u[j].lpNorm<Eigen::Infinity>()));
            gx = central_grad([&](const Vec& xx) { return psi(xx, c.traj.u[j]); }, c.traj.x[j], h);
            gu = central_grad([&](const Vec& uu) { return psi(c.traj.x[j], uu); }, c.traj.u[j], h);
        }

        grad[j] = c.bundles[j].r + c.bundles[j].B.transpose() * lambda + gu;
        lambda = c.bundles[j].q + c.bundles[j].A.transpose() * lambda + gx;
    }
    return grad;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

Trajectory rollout(const Model& model, const Vec& x_i, const std::vector<Vec>& u_seq,
                   const std::vector<Vec>& w_seq) {
    if (u_seq.size() != w_seq.size()) {
        throw std::invalid_argument("rollout: |w_seq| must equal |u_seq|");
    }
    model.check_state(x_i);

    Trajectory traj;
    traj.x.reserve(u_seq.size() + 1);
    traj.x.push_back(x_i);
    traj.u = u_seq;
    traj.w = w_seq;
    for (size_t k = 0; k < u_seq.size(); ++k) {
        Vec next = model.f(traj.x.back(), u_seq[k]) + w_seq[k];
        if (!next.allFinite()) {
            throw DivergenceError(static_cast<int>(k),
                                  "rollout: non-finite state at stage " + std::to_string(k + 1));
        }
        traj.x.push_back(std::move(next));
    }
    return traj;
}

OcpSolution solve_nominal(const Model& model, const Vec& x_i, const std::vector<Vec>& w_seq,
                          const SolverOptions& opts) {
    const int N = static_cast<int>(w_seq.size());
    OcpSolution sol;
    if (N == 0) {
        sol.trajectory.x = {x_i};
        sol.objective = model.m(x_i);
        sol.converged = true;
        return sol;
    }

    std::vector<Vec> u0 = opts.warm_start ? *opts.warm_start : zero_seq(model.n_u, N);
    if (static_cast<int>(u0.size()) != N) {
        throw std::invalid_argument("solve_nominal: warm start length mismatch");
    }

    std::exception_ptr last_error;
    auto objective_fn = [&](const Vec& z) -> std::optional<double> {
        try {
            return nominal_objective(model, x_i, unstack(z, model.n_u), w_seq);
        } catch (const DivergenceError&) {
            last_error = std::current_exception();
            return std::nullopt;
        } catch (const NumericError&) {
            last_error = std::current_exception();
            return std::nullopt;
        }
    };
    auto gradient_fn = [&](const Vec& z) {
        Trajectory traj = rollout(model, x_i, unstack(z, model.n_u), w_seq);
        return stack(nominal_gradient(model, traj), model.n_u);
    };

    MinimizeResult r =
        lbfgs_minimize(objective_fn, gradient_fn, stack(u0, model.n_u), opts, &last_error);

    sol.trajectory = rollout(model, x_i, unstack(r.z, model.n_u), w_seq);
    sol.objective = r.objective;
    sol.iterations = r.iterations;
    sol.converged = r.converged;
    sol.gradient_norm = r.gradient.norm();
    sol.objective_history = std::move(r.history);
    return sol;
}

SrEvaluation sr_objective(const Model& model, const Vec& x_i, const CovarianceState& sigma_i,
                          const std::vector<Vec>& u_seq, double alpha,
                          const NoiseSpec& noise) {
    SrCache c = sr_eval_cache(model, x_i, sigma_i.sigma, u_seq, alpha, noise);
    SrEvaluation e;
    e.objective = c.objective;
    e.nominal = c.nominal;
    e.loss = c.loss;
    e.stage_losses = std::move(c.stage_losses);
    e.trajectory = std::move(c.traj);
    e.omega = std::move(c.omega);
    e.phi = std::move(c.phi);
    e.sigma = std::move(c.sigma);
    return e;
}

std::vector<Vec> sr_gradient(const Model& model, const Vec& x_i,
                             const CovarianceState& sigma_i, const std::vector<Vec>& u_seq,
                             double alpha, const NoiseSpec& noise) {
    SrCache c = sr_eval_cache(model, x_i, sigma_i.sigma, u_seq, alpha, noise);
    return sr_gradient_from_cache(model, c, alpha, noise);
}

OcpSolution solve_self_reflective(const Model& model, const Vec& x_i,
                                  const CovarianceState& sigma_i, const SrConfig& cfg,
                                  const NoiseSpec& noise) {
    if (cfg.alpha < 0.0) throw std::invalid_argument("solve_self_reflective: alpha must be >= 0");
    if (cfg.horizon < 1) throw std::invalid_argument("solve_self_reflective: horizon must be >= 1");
    const int N = cfg.horizon;

    if (cfg.alpha == 0.0) {
        // Loss term disabled: identical problem to the nominal solve.
        SolverOptions opts = cfg.solver;
        OcpSolution sol = solve_nominal(model, x_i, zero_seq(model.n_x, N), opts);
        SrEvaluation e = sr_objective(model, x_i, sigma_i, sol.trajectory.u, 0.0, noise);
        sol.stage_losses = std::move(e.stage_losses);
        return sol;
    }

    std::vector<Vec> u0 =
        cfg.solver.warm_start ? *cfg.solver.warm_start : zero_seq(model.n_u, N);
    if (static_cast<int>(u0.size()) != N) {
        throw std::invalid_argument("solve_self_reflective: warm start length mismatch");
    }

    std::exception_ptr last_error;
    auto objective_fn = [&](const Vec& z) -> std::optional<double> {
        try {
            return sr_eval_cache(model, x_i, sigma_i.sigma, unstack(z, model.n_u), cfg.alpha,
                                 noise)
                .objective;
        } catch (const DivergenceError&) {
            last_error = std::current_exception();
            return std::nullopt;
        } catch (const RegularityError&) {
            last_error = std::current_exception();
            return std::nullopt;
        } catch (const NumericError&) {
            last_error = std::current_exception();
            return std::nullopt;
        }
    };
    auto gradient_fn = [&](const Vec& z) {
        SrCache c = sr_eval_cache(model, x_i, sigma_i.sigma, unstack(z, model.n_u), cfg.alpha,
                                  noise);
        return stack(sr_gradient_from_cache(model, c, cfg.alpha, noise), model.n_u);
    };

    MinimizeResult r = lbfgs_minimize(objective_fn, gradient_fn, stack(u0, model.n_u),
                                      cfg.solver, &last_error);

    SrCache c = sr_eval_cache(model, x_i, sigma_i.sigma, unstack(r.z, model.n_u), cfg.alpha,
                              noise);
    OcpSolution sol;
    sol.trajectory = std::move(c.traj);
    sol.objective = c.objective;
    sol.stage_losses = std::move(c.stage_losses);
    sol.iterations = r.iterations;
    sol.converged = r.converged;
    sol.gradient_norm = r.gradient.norm();
    sol.objective_history = std::move(r.history);
    return sol;
}

}  // namespace srmpc
