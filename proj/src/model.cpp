#include "srmpc/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace srmpc {

namespace {

double point_scale(const Vec& x, const Vec& u) {
    double s = 0.0;
    if (x.size() > 0) s = std::max(s, x.lpNorm<Eigen::Infinity>());
    if (u.size() > 0) s = std::max(s, u.lpNorm<Eigen::Infinity>());
    return 1.0 + s;
}

constexpr double kFdRel = 1e-6;

}  // namespace

// ---------------------------------------------------------------------------
// DerivativeBundle
// ---------------------------------------------------------------------------

Mat DerivativeBundle::contract_K(const Vec& p) const {
    const int n = static_cast<int>(A.rows());
    Mat out = Mat::Zero(n, n);
    for (int i = 0; i < static_cast<int>(K.size()); ++i) out += p(i) * K[i];
    return out;
}

Mat DerivativeBundle::contract_L(const Vec& p) const {
    const int nu = static_cast<int>(B.cols());
    const int nx = static_cast<int>(A.rows());
    Mat out = Mat::Zero(nu, nx);
    for (int i = 0; i < static_cast<int>(L.size()); ++i) out += p(i) * L[i];
    return out;
}

Mat DerivativeBundle::contract_M(const Vec& p) const {
    const int nu = static_cast<int>(B.cols());
    Mat out = Mat::Zero(nu, nu);
    for (int i = 0; i < static_cast<int>(M.size()); ++i) out += p(i) * M[i];
    return out;
}

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

void Trajectory::validate() const {
    if (x.empty()) throw std::invalid_argument("trajectory: empty state sequence");
    if (u.size() != x.size() - 1 || w.size() != x.size() - 1) {
        throw std::invalid_argument("trajectory: |u| and |w| must equal |x| - 1");
    }
}

std::span<const Vec> Trajectory::x_upper(int k) const {
    if (k < 0) return {};
    return std::span<const Vec>(x.data(), static_cast<size_t>(k) + 1);
}

std::span<const Vec> Trajectory::u_lower(int k) const {
    if (k >= static_cast<int>(u.size())) return {};
    return std::span<const Vec>(u.data() + k, u.size() - static_cast<size_t>(k));
}

std::span<const Vec> Trajectory::w_lower(int k) const {
    if (k >= static_cast<int>(w.size())) return {};
    return std::span<const Vec>(w.data() + k, w.size() - static_cast<size_t>(k));
}

// ---------------------------------------------------------------------------
// Model evaluation with finite-difference fallbacks
// ---------------------------------------------------------------------------

void Model::check_input(const Vec& x, const Vec& u) const {
    if (x.size() != n_x || u.size() != n_u) {
        throw std::invalid_argument("model '" + name + "': input dimensions (" +
                                    std::to_string(x.size()) + ", " +
                                    std::to_string(u.size()) + ") do not match (n_x=" +
                                    std::to_string(n_x) + ", n_u=" + std::to_string(n_u) + ")");
    }
}

void Model::check_state(const Vec& x) const {
    if (x.size() != n_x) {
        throw std::invalid_argument("model '" + name + "': state dimension mismatch");
    }
}

namespace {

// Mixed central second difference d^2 s / d a_i d b_j of a scalar map; the
// two slots may alias the same argument.
template <typename F>
double mixed_second_diff(const F& fn, const Vec& a, const Vec& b, int i, int j, double h,
                         bool same_slot) {
    if (same_slot) {
        Vec p = a;
        p(i) += h;
        p(j) += h;
        const double pp = fn(p, b);
        p = a;
        p(i) += h;
        p(j) -= h;
        const double pm = fn(p, b);
        p = a;
        p(i) -= h;
        p(j) += h;
        const double mp = fn(p, b);
        p = a;
        p(i) -= h;
        p(j) -= h;
        const double mm = fn(p, b);
        return (pp - pm - mp + mm) / (4.0 * h * h);
    }
    Vec pa = a, pb = b;
    pa(i) += h;
    pb(j) += h;
    const double pp = fn(pa, pb);
    pb(j) -= 2.0 * h;
    const double pm = fn(pa, pb);
    pa(i) -= 2.0 * h;
    const double mm = fn(pa, pb);
    pb(j) += 2.0 * h;
    const double mp = fn(pa, pb);
    return (pp - pm - mp + mm) / (4.0 * h * h);
}

// Central difference of a vector-valued map in one argument.
template <typename F>
Mat fd_jacobian(const F& fn, const Vec& at, int out_dim, double h) {
    Mat jac(out_dim, at.size());
    Vec p = at;
    for (int j = 0; j < at.size(); ++j) {
        const double v = at(j);
        p(j) = v + h;
        const Vec hi = fn(p);
        p(j) = v - h;
        const Vec lo = fn(p);
        p(j) = v;
        jac.col(j) = (hi - lo) / (2.0 * h);
    }
    return jac;
}

template <typename F>
Vec fd_gradient(const F& fn, const Vec& at, double h) {
    Vec g(at.size());
    Vec p = at;
    for (int j = 0; j < at.size(); ++j) {
        const double v = at(j);
        p(j) = v + h;
        const double hi = fn(p);
        p(j) = v - h;
        const double lo = fn(p);
        p(j) = v;
        g(j) = (hi - lo) / (2.0 * h);
    }
    return g;
}

// d(rows of jac) / d(at_j) for a matrix-valued map, central difference.
template <typename F>
std::vector<Mat> fd_tensor(const F& jac_fn, const Vec& at, int out_rows, int out_cols,
                           double h) {
    // result[i](a, b) = d jac(i, a) / d at(b)
    std::vector<Mat> t(out_rows, Mat::Zero(out_cols, at.size()));
    Vec p = at;
    for (int b = 0; b < at.size(); ++b) {
        const double v = at(b);
        p(b) = v + h;
        const Mat hi = jac_fn(p);
        p(b) = v - h;
        const Mat lo = jac_fn(p);
        p(b) = v;
        const Mat d = (hi - lo) / (2.0 * h);
        for (int i = 0; i < out_rows; ++i) {
            for (int a = 0; a < out_cols; ++a) t[i](a, b) = d(i, a);
        }
    }
    return t;
}

void require_shape(const Mat& m, int rows, int cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw std::invalid_argument(std::string("model: evaluator '") + what +
                                    "' returned a wrongly shaped matrix");
    }
}

}  // namespace

DerivativeBundle Model::eval_bundle(const Vec& x, const Vec& u) const {
    check_input(x, u);
    const double h = kFdRel * point_scale(x, u);
    // Second derivatives taken directly from values use a wider step: the
    // double division by h is roundoff-limited otherwise.
    const double h2 = 1e-4 * point_scale(x, u);

    DerivativeBundle b;

    b.A = f_x ? f_x(x, u)
              : fd_jacobian([&](const Vec& p) { return f(p, u); }, x, n_x, h);
    b.B = f_u ? f_u(x, u)
              : fd_jacobian([&](const Vec& p) { return f(x, p); }, u, n_x, h);
    b.C = h_x ? h_x(x)
              : fd_jacobian([&](const Vec& p) { return this->h(p); }, x, n_h, h);
    b.q = l_x ? l_x(x, u)
              : fd_gradient([&](const Vec& p) { return l(p, u); }, x, h);
    b.r = l_u ? l_u(x, u)
              : fd_gradient([&](const Vec& p) { return l(x, p); }, u, h);

    require_shape(b.A, n_x, n_x, "f_x");
    require_shape(b.B, n_x, n_u, "f_u");
    require_shape(b.C, n_h, n_x, "h_x");

    auto lfun = [&](const Vec& xx, const Vec& uu) { return l(xx, uu); };
    auto lfun_swapped = [&](const Vec& uu, const Vec& xx) { return l(xx, uu); };

    if (l_xx) {
        b.Q = l_xx(x, u);
    } else if (l_x) {
        b.Q = sym(fd_jacobian([&](const Vec& p) { return l_x(p, u); }, x, n_x, h));
    } else {
        b.Q.resize(n_x, n_x);
        for (int i = 0; i < n_x; ++i)
            for (int j = i; j < n_x; ++j)
                b.Q(i, j) = b.Q(j, i) = mixed_second_diff(lfun, x, u, i, j, h2, true);
    }
    if (l_uu) {
        b.R = l_uu(x, u);
    } else if (l_u) {
        b.R = sym(fd_jacobian([&](const Vec& p) { return l_u(x, p); }, u, n_u, h));
    } else {
        b.R.resize(n_u, n_u);
        for (int i = 0; i < n_u; ++i)
            for (int j = i; j < n_u; ++j)
                b.R(i, j) = b.R(j, i) = mixed_second_diff(lfun_swapped, u, x, i, j, h2, true);
    }
    if (l_ux) {
        b.S = l_ux(x, u);
    } else if (l_u) {
        // S(a, b) = d^2 l / du_a dx_b
        b.S = fd_jacobian([&](const Vec& p) { return l_u(p, u); }, x, n_u, h);
    } else {
        b.S.resize(n_u, n_x);
        for (int a = 0; a < n_u; ++a)
            for (int c = 0; c < n_x; ++c)
                b.S(a, c) = mixed_second_diff(lfun, x, u, c, a, h2, false);
    }
    require_shape(b.Q, n_x, n_x, "l_xx");
    require_shape(b.R, n_u, n_u, "l_uu");
    require_shape(b.S, n_u, n_x, "l_ux");

    if (f_xx) {
        b.K = f_xx(x, u);
    } else if (f_x) {
        // K[i](a, b) = d A(i, a) / d x_b, then symmetrized per slice.
        auto t = fd_tensor([&](const Vec& p) { return f_x(p, u); }, x, n_x, n_x, h);
        for (auto& s : t) s = sym(s);
        b.K = std::move(t);
    } else {
        b.K.assign(static_cast<size_t>(n_x), Mat(n_x, n_x));
        for (int i = 0; i < n_x; ++i) {
            auto fi = [&](const Vec& xx, const Vec& uu) { return f(xx, uu)(i); };
            for (int a = 0; a < n_x; ++a)
                for (int c = a; c < n_x; ++c)
                    b.K[i](a, c) = b.K[i](c, a) = mixed_second_diff(fi, x, u, a, c, h2, true);
        }
    }
    if (f_ux) {
        b.L = f_ux(x, u);
    } else if (f_u) {
        // L[i](a, b) = d B(i, a) / d x_b
        b.L = fd_tensor([&](const Vec& p) { return f_u(p, u); }, x, n_x, n_u, h);
    } else {
        b.L.assign(static_cast<size_t>(n_x), Mat(n_u, n_x));
        for (int i = 0; i < n_x; ++i) {
            auto fi = [&](const Vec& xx, const Vec& uu) { return f(xx, uu)(i); };
            for (int a = 0; a < n_u; ++a)
                for (int c = 0; c < n_x; ++c)
                    b.L[i](a, c) = mixed_second_diff(fi, x, u, c, a, h2, false);
        }
    }
    if (f_uu) {
        b.M = f_uu(x, u);
    } else if (f_u) {
        auto t = fd_tensor([&](const Vec& p) { return f_u(x, p); }, u, n_x, n_u, h);
        for (auto& s : t) s = sym(s);
        b.M = std::move(t);
    } else {
        b.M.assign(static_cast<size_t>(n_x), Mat(n_u, n_u));
        for (int i = 0; i < n_x; ++i) {
            auto fi = [&](const Vec& uu, const Vec& xx) { return f(xx, uu)(i); };
            for (int a = 0; a < n_u; ++a)
                for (int c = a; c < n_u; ++c)
                    b.M[i](a, c) = b.M[i](c, a) = mixed_second_diff(fi, u, x, a, c, h2, true);
        }
    }
    if (static_cast<int>(b.K.size()) != n_x || static_cast<int>(b.L.size()) != n_x ||
        static_cast<int>(b.M.size()) != n_x) {
        throw std::invalid_argument("model: second-derivative tensors need n_x slices");
    }

    bool finite = b.A.allFinite() && b.B.allFinite() && b.C.allFinite() &&
                  b.q.allFinite() && b.r.allFinite() && b.Q.allFinite() &&
                  b.R.allFinite() && b.S.allFinite();
    for (const auto& s : b.K) finite = finite && s.allFinite();
    for (const auto& s : b.L) finite = finite && s.allFinite();
    for (const auto& s : b.M) finite = finite && s.allFinite();
    if (!finite) throw NumericError("model '" + name + "': non-finite derivative");
    return b;
}

Mat Model::eval_A(const Vec& x, const Vec& u) const {
    check_input(x, u);
    if (f_x) return f_x(x, u);
    const double h = kFdRel * point_scale(x, u);
    return fd_jacobian([&](const Vec& p) { return f(p, u); }, x, n_x, h);
}

Mat Model::eval_B(const Vec& x, const Vec& u) const {
    check_input(x, u);
    if (f_u) return f_u(x, u);
    const double h = kFdRel * point_scale(x, u);
    return fd_jacobian([&](const Vec& p) { return f(x, p); }, u, n_x, h);
}

Vec Model::eval_q(const Vec& x, const Vec& u) const {
    check_input(x, u);
    if (l_x) return l_x(x, u);
    const double h = kFdRel * point_scale(x, u);
    return fd_gradient([&](const Vec& p) { return l(p, u); }, x, h);
}

Vec Model::eval_r(const Vec& x, const Vec& u) const {
    check_input(x, u);
    if (l_u) return l_u(x, u);
    const double h = kFdRel * point_scale(x, u);
    return fd_gradient([&](const Vec& p) { return l(x, p); }, u, h);
}

Vec Model::grad_m(const Vec& x) const {
    check_state(x);
    const double h = kFdRel * (1.0 + x.lpNorm<Eigen::Infinity>());
    Vec g = m_x ? m_x(x) : fd_gradient([&](const Vec& p) { return m(p); }, x, h);
    if (!g.allFinite()) throw NumericError("model '" + name + "': non-finite grad m");
    return g;
}

Mat Model::hess_m(const Vec& x) const {
    check_state(x);
    const double h = kFdRel * (1.0 + x.lpNorm<Eigen::Infinity>());
    Mat hh;
    if (m_xx) {
        hh = m_xx(x);
    } else if (m_x) {
        hh = sym(fd_jacobian([&](const Vec& p) { return m_x(p); }, x, n_x, h));
    } else {
        const double h2 = 1e-4 * (1.0 + x.lpNorm<Eigen::Infinity>());
        auto mfun = [&](const Vec& xx, const Vec&) { return m(xx); };
        hh.resize(n_x, n_x);
        for (int i = 0; i < n_x; ++i)
            for (int j = i; j < n_x; ++j)
                hh(i, j) = hh(j, i) = mixed_second_diff(mfun, x, x, i, j, h2, true);
    }
    if (!hh.allFinite()) throw NumericError("model '" + name + "': non-finite hess m");
    return hh;
}

// ---------------------------------------------------------------------------
// check_derivatives
// ---------------------------------------------------------------------------

namespace {

double block_err(const Mat& analytic, const Mat& fd) {
    const double scale = 1.0 + analytic.cwiseAbs().maxCoeff();
    return (analytic - fd).cwiseAbs().maxCoeff() / scale;
}

double block_err(const Vec& analytic, const Vec& fd) {
    double scale = 1.0;
    if (analytic.size() > 0) scale += analytic.cwiseAbs().maxCoeff();
    double diff = 0.0;
    if (analytic.size() > 0) diff = (analytic - fd).cwiseAbs().maxCoeff();
    return diff / scale;
}

}  // namespace

double DerivativeCheck::max_error() const {
    return std::max({A, B, C, q, r, Q, R, S, K, L, M, m_grad, m_hess});
}

DerivativeCheck check_derivatives(const Model& model, const Vec& x, const Vec& u,
                                  double step) {
    if (step <= 0.0) throw std::invalid_argument("check_derivatives: step must be > 0");
    model.check_input(x, u);
    const double h = step;
    DerivativeBundle b = model.eval_bundle(x, u);
    DerivativeCheck rep;

    Mat A_fd = fd_jacobian([&](const Vec& p) { return model.f(p, u); }, x, model.n_x, h);
    Mat B_fd = fd_jacobian([&](const Vec& p) { return model.f(x, p); }, u, model.n_x, h);
    Mat C_fd = fd_jacobian([&](const Vec& p) { return model.h(p); }, x, model.n_h, h);
    Vec q_fd = fd_gradient([&](const Vec& p) { return model.l(p, u); }, x, h);
    Vec r_fd = fd_gradient([&](const Vec& p) { return model.l(x, p); }, u, h);
    rep.A = block_err(b.A, A_fd);
    rep.B = block_err(b.B, B_fd);
    rep.C = block_err(b.C, C_fd);
    rep.q = block_err(b.q, q_fd);
    rep.r = block_err(b.r, r_fd);

    auto lfun = [&](const Vec& a, const Vec& c) { return model.l(a, c); };
    auto lfun_ux = [&](const Vec& xs, const Vec& us) { return model.l(xs, us); };

    Mat Q_fd(model.n_x, model.n_x), R_fd(model.n_u, model.n_u), S_fd(model.n_u, model.n_x);
    for (int i = 0; i < model.n_x; ++i)
        for (int j = 0; j < model.n_x; ++j)
            Q_fd(i, j) = mixed_second_diff(lfun, x, u, i, j, h, true);
    for (int i = 0; i < model.n_u; ++i)
        for (int j = 0; j < model.n_u; ++j)
            R_fd(i, j) = mixed_second_diff([&](const Vec& us, const Vec& xs) { return model.l(xs, us); },
                                     u, x, i, j, h, true);
    for (int a = 0; a < model.n_u; ++a)
        for (int bcol = 0; bcol < model.n_x; ++bcol)
            S_fd(a, bcol) = mixed_second_diff([&](const Vec& xs, const Vec& us) { return lfun_ux(xs, us); },
                                        x, u, bcol, a, h, false);
    // note mixed_second_diff(x-slot index, u-slot index); S(a,b) = d2 l / du_a dx_b
    rep.Q = block_err(b.Q, Q_fd);
    rep.R = block_err(b.R, R_fd);
    rep.S = block_err(b.S, S_fd);

    double kerr = 0, lerr = 0, merr = 0;
    for (int i = 0; i < model.n_x; ++i) {
        auto fi = [&](const Vec& xs, const Vec& us) { return model.f(xs, us)(i); };
        Mat Ki(model.n_x, model.n_x), Li(model.n_u, model.n_x), Mi(model.n_u, model.n_u);
        for (int a = 0; a < model.n_x; ++a)
            for (int c = 0; c < model.n_x; ++c)
                Ki(a, c) = mixed_second_diff(fi, x, u, a, c, h, true);
        for (int a = 0; a < model.n_u; ++a)
            for (int c = 0; c < model.n_x; ++c)
                Li(a, c) = mixed_second_diff(fi, x, u, c, a, h, false);
        for (int a = 0; a < model.n_u; ++a)
            for (int c = 0; c < model.n_u; ++c)
                Mi(a, c) = mixed_second_diff([&](const Vec& us, const Vec& xs) { return model.f(xs, us)(i); },
                                       u, x, a, c, h, true);
        kerr = std::max(kerr, block_err(b.K[i], Ki));
        lerr = std::max(lerr, block_err(b.L[i], Li));
        merr = std::max(merr, block_err(b.M[i], Mi));
    }
    rep.K = kerr;
    rep.L = lerr;
    rep.M = merr;

    Vec mg_fd = fd_gradient([&](const Vec& p) { return model.m(p); }, x, h);
    rep.m_grad = block_err(model.grad_m(x), mg_fd);
    Mat mh_fd(model.n_x, model.n_x);
    auto mfun = [&](const Vec& xs, const Vec&) { return model.m(xs); };
    for (int i = 0; i < model.n_x; ++i)
        for (int j = 0; j < model.n_x; ++j)
            mh_fd(i, j) = mixed_second_diff(mfun, x, u, i, j, h, true);
    rep.m_hess = block_err(model.hess_m(x), mh_fd);
    return rep;
}

// ---------------------------------------------------------------------------
// Benchmarks
// ---------------------------------------------------------------------------

Vec predator_steady_state() {
    Vec z(3);
    z << 1.0, 1.0, 0.5;
    return z;
}

namespace {

Vec predator_drift(const Vec& z, const Vec& u) {
    Vec d(3);
    d(0) = z(0) - z(0) * z(1);
    d(1) = -z(1) + z(0) * z(1) + u(0) * z(2) * z(1);
    d(2) = -z(2) + 0.5;
    return d;
}

Mat predator_A(const Vec& z, const Vec& u, double delta) {
    Mat a = Mat::Identity(3, 3);
    a(0, 0) += delta * (1.0 - z(1));
    a(0, 1) += delta * (-z(0));
    a(1, 0) += delta * z(1);
    a(1, 1) += delta * (-1.0 + z(0) + u(0) * z(2));
    a(1, 2) += delta * (u(0) * z(1));
    a(2, 2) += delta * (-1.0);
    return a;
}

Mat predator_B(const Vec& z, double delta) {
    Mat b = Mat::Zero(3, 1);
    b(1, 0) = delta * z(2) * z(1);
    return b;
}

Model make_motivating(double delta) {
    Model mo;
    mo.name = "motivating_example";
    mo.n_x = 2;
    mo.n_u = 2;
    mo.n_h = 1;
    const double d = delta;

    mo.f = [d](const Vec& x, const Vec& u) {
        Mat F = Mat::Identity(2, 2);
        F(0, 0) += d;
        F(1, 0) += d * u(1);
        F(1, 1) -= d;
        return Vec(F * x + d * u);
    };
    mo.h = [](const Vec& x) {
        Vec y(1);
        y(0) = x(1);
        return y;
    };
    mo.l = [d](const Vec& x, const Vec& u) {
        return d * (x(0) * x(0) + u.squaredNorm());
    };
    mo.m = [](const Vec&) { return 0.0; };

    mo.f_x = [d](const Vec&, const Vec& u) {
        Mat F = Mat::Identity(2, 2);
        F(0, 0) += d;
        F(1, 0) += d * u(1);
        F(1, 1) -= d;
        return F;
    };
    mo.f_u = [d](const Vec& x, const Vec&) {
        Mat B = d * Mat::Identity(2, 2);
        B(1, 1) += d * x(0);
        return B;
    };
    mo.h_x = [](const Vec&) {
        Mat C(1, 2);
        C << 0.0, 1.0;
        return C;
    };
    mo.l_x = [d](const Vec& x, const Vec&) {
        Vec g(2);
        g << 2.0 * d * x(0), 0.0;
        return g;
    };
    mo.l_u = [d](const Vec&, const Vec& u) { return Vec(2.0 * d * u); };
    mo.l_xx = [d](const Vec&, const Vec&) {
        Mat q = Mat::Zero(2, 2);
        q(0, 0) = 2.0 * d;
        return q;
    };
    mo.l_uu = [d](const Vec&, const Vec&) { return Mat(2.0 * d * Mat::Identity(2, 2)); };
    mo.l_ux = [](const Vec&, const Vec&) { return Mat(Mat::Zero(2, 2)); };
    mo.f_xx = [](const Vec&, const Vec&) {
        return std::vector<Mat>(2, Mat::Zero(2, 2));
    };
    mo.f_ux = [d](const Vec&, const Vec&) {
        std::vector<Mat> L(2, Mat::Zero(2, 2));
        L[1](1, 0) = d;  // d^2 f_2 / du_2 dx_1
        return L;
    };
    mo.f_uu = [](const Vec&, const Vec&) {
        return std::vector<Mat>(2, Mat::Zero(2, 2));
    };
    mo.m_x = [](const Vec&) { return Vec(Vec::Zero(2)); };
    mo.m_xx = [](const Vec&) { return Mat(Mat::Zero(2, 2)); };
    return mo;
}

Model make_predator(double delta) {
    Model mo;
    mo.name = "predator_prey";
    mo.n_x = 3;
    mo.n_u = 1;
    mo.n_h = 1;
    const double d = delta;
    const Vec zs = predator_steady_state();
    const Mat PT = predator_terminal_weight(delta);

    mo.f = [d](const Vec& z, const Vec& u) { return Vec(z + d * predator_drift(z, u)); };
    mo.h = [](const Vec& z) {
        Vec y(1);
        y(0) = z(0);
        return y;
    };
    mo.l = [d](const Vec& z, const Vec& u) {
        const double e1 = z(0) - 1.0;
        const double e2 = z(1) - 1.0;
        return d * (e1 * e1 + e2 * e2 + u(0) * u(0));
    };
    mo.m = [PT, zs](const Vec& z) {
        const Vec e = z - zs;
        return static_cast<double>(e.transpose() * PT * e);
    };

    mo.f_x = [d](const Vec& z, const Vec& u) { return predator_A(z, u, d); };
    mo.f_u = [d](const Vec& z, const Vec&) { return predator_B(z, d); };
    mo.h_x = [](const Vec&) {
        Mat C(1, 3);
        C << 1.0, 0.0, 0.0;
        return C;
    };
    mo.l_x = [d](const Vec& z, const Vec&) {
        Vec g(3);
        g << 2.0 * d * (z(0) - 1.0), 2.0 * d * (z(1) - 1.0), 0.0;
        return g;
    };
    mo.l_u = [d](const Vec&, const Vec& u) { return Vec(2.0 * d * u); };
    mo.l_xx = [d](const Vec&, const Vec&) {
        Mat q = Mat::Zero(3, 3);
        q(0, 0) = 2.0 * d;
        q(1, 1) = 2.0 * d;
        return q;
    };
    mo.l_uu = [d](const Vec&, const Vec&) {
        Mat r(1, 1);
        r(0, 0) = 2.0 * d;
        return r;
    };
    mo.l_ux = [](const Vec&, const Vec&) { return Mat(Mat::Zero(1, 3)); };
    mo.f_xx = [d](const Vec&, const Vec& u) {
        std::vector<Mat> K(3, Mat::Zero(3, 3));
        K[0](0, 1) = -d;
        K[0](1, 0) = -d;
        K[1](0, 1) = d;
        K[1](1, 0) = d;
        K[1](1, 2) = d * u(0);
        K[1](2, 1) = d * u(0);
        return K;
    };
    mo.f_ux = [d](const Vec& z, const Vec&) {
        std::vector<Mat> L(3, Mat::Zero(1, 3));
        L[1](0, 1) = d * z(2);
        L[1](0, 2) = d * z(1);
        return L;
    };
    mo.f_uu = [](const Vec&, const Vec&) {
        return std::vector<Mat>(3, Mat::Zero(1, 1));
    };
    mo.m_x = [PT, zs](const Vec& z) { return Vec(2.0 * PT * (z - zs)); };
    mo.m_xx = [PT](const Vec&) { return Mat(2.0 * PT); };
    return mo;
}

Model make_lq_custom(const BenchmarkParams& p) {
    if (p.A.size() == 0 || p.B.size() == 0 || p.Q.size() == 0 || p.R.size() == 0) {
        throw std::invalid_argument("lq_custom: A, B, Q, R are required");
    }
    const int nx = static_cast<int>(p.A.rows());
    const int nu = static_cast<int>(p.B.cols());
    if (p.A.cols() != nx || p.B.rows() != nx || p.Q.rows() != nx || p.Q.cols() != nx ||
        p.R.rows() != nu || p.R.cols() != nu) {
        throw std::invalid_argument("lq_custom: inconsistent matrix shapes");
    }
    const Mat A = p.A;
    const Mat B = p.B;
    const Mat C = p.C.size() == 0 ? Mat(Mat::Identity(nx, nx)) : p.C;
    const Mat Q = p.Q;
    const Mat R = p.R;
    const Mat S = p.S.size() == 0 ? Mat(Mat::Zero(nu, nx)) : p.S;
    const Mat P = p.P.size() == 0 ? p.Q : p.P;
    if (C.cols() != nx || S.rows() != nu || S.cols() != nx || P.rows() != nx) {
        throw std::invalid_argument("lq_custom: inconsistent C/S/P shapes");
    }
    const int nh = static_cast<int>(C.rows());

    Model mo;
    mo.name = "lq_custom";
    mo.n_x = nx;
    mo.n_u = nu;
    mo.n_h = nh;
    mo.f = [A, B](const Vec& x, const Vec& u) { return Vec(A * x + B * u); };
    mo.h = [C](const Vec& x) { return Vec(C * x); };
    mo.l = [Q, R, S](const Vec& x, const Vec& u) {
        return 0.5 * static_cast<double>(x.transpose() * Q * x) +
               0.5 * static_cast<double>(u.transpose() * R * u) +
               static_cast<double>(u.transpose() * S * x);
    };
    mo.m = [P](const Vec& x) { return 0.5 * static_cast<double>(x.transpose() * P * x); };
    mo.f_x = [A](const Vec&, const Vec&) { return A; };
    mo.f_u = [B](const Vec&, const Vec&) { return B; };
    mo.h_x = [C](const Vec&) { return C; };
    mo.l_x = [Q, S](const Vec& x, const Vec& u) { return Vec(Q * x + S.transpose() * u); };
    mo.l_u = [R, S](const Vec& x, const Vec& u) { return Vec(R * u + S * x); };
    mo.l_xx = [Q](const Vec&, const Vec&) { return Q; };
    mo.l_uu = [R](const Vec&, const Vec&) { return R; };
    mo.l_ux = [S](const Vec&, const Vec&) { return S; };
    mo.f_xx = [nx](const Vec&, const Vec&) { return std::vector<Mat>(nx, Mat::Zero(nx, nx)); };
    mo.f_ux = [nx, nu](const Vec&, const Vec&) { return std::vector<Mat>(nx, Mat::Zero(nu, nx)); };
    mo.f_uu = [nx, nu](const Vec&, const Vec&) { return std::vector<Mat>(nx, Mat::Zero(nu, nu)); };
    mo.m_x = [P](const Vec& x) { return Vec(P * x); };
    mo.m_xx = [P](const Vec&) { return P; };
    return mo;
}

}  // namespace

Mat predator_terminal_weight(double delta) {
    if (delta <= 0.0) throw std::invalid_argument("predator_prey: delta must be > 0");
    const Vec zs = predator_steady_state();
    const Vec u0 = Vec::Zero(1);
    const Mat A = predator_A(zs, u0, delta);
    const Mat B = predator_B(zs, delta);
    Mat Q = Mat::Zero(3, 3);
    Q(0, 0) = 2.0 * delta;
    Q(1, 1) = 2.0 * delta;
    Mat R(1, 1);
    R(0, 0) = 2.0 * delta;

    // Fixed-point iteration of the Riccati difference equation.
    Mat P = Q;
    const int max_iter = 2000000;
    for (int it = 0; it < max_iter; ++it) {
        const Mat BtPA = B.transpose() * P * A;
        const Mat Guu = R + B.transpose() * P * B;
        const Mat Pn = sym(Q + A.transpose() * P * A -
                           BtPA.transpose() * Guu.ldlt().solve(BtPA));
        const double diff = (Pn - P).cwiseAbs().maxCoeff();
        P = Pn;
        if (diff < 1e-10) break;
        if (it == max_iter - 1) {
            throw NumericError("predator_prey: terminal Riccati iteration did not settle");
        }
    }
    return 0.5 * P;
}

Model instantiate_benchmark(const std::string& name, const BenchmarkParams& params) {
    if (name == "lq_custom") return make_lq_custom(params);
    if (params.delta <= 0.0) {
        throw std::invalid_argument("instantiate_benchmark: delta must be > 0");
    }
    if (name == "motivating_example") return make_motivating(params.delta);
    if (name == "predator_prey") return make_predator(params.delta);
    throw std::invalid_argument("instantiate_benchmark: unknown benchmark '" + name + "'");
}

}  // namespace srmpc
