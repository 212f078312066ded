#pragma once

#include <cmath>
#include <vector>

#include "imexglm/problems.hpp"
#include "imexglm/stepper.hpp"
#include "imexglm/tableau.hpp"

namespace imexglm {

/// Scaled derivative data for building starting vectors. Additive problems
/// fill d0 and dE/dI (dE[k-1] = h^k (f^E)^(k-1) along the solution at t0);
/// component problems fill dx/dz (dx[k] = h^k x^(k)(t0)).
struct DerivativeTable {
    enum class Source { ExactProvided, Bootstrapped } source = Source::ExactProvided;
    Vec d0;
    std::vector<Vec> dE, dI;
    std::vector<Vec> dx, dz;
};

struct StartOptions {
    bool allow_bootstrap = true;
    double t0 = 0.0;
};

// ---------------------------------------------------------------------------
// Bootstrapped derivatives: central finite differences of the component
// right-hand sides along a micro RK4 trajectory (h_micro = h/64).
// ---------------------------------------------------------------------------

namespace detail {

/// values[j] = phi evaluated at t0 + j*hm for j in [-J, J] (index j + J).
inline Vec fd_derivative(const std::vector<Vec>& values, int J, int order, double hm) {
    const auto& at = [&](int j) -> const Vec& { return values[j + J]; };
    switch (order) {
        case 0:
            return at(0);
        case 1:
            return Vec((at(1) - at(-1)) / (2.0 * hm));
        case 2:
            return Vec((at(1) - 2.0 * at(0) + at(-1)) / (hm * hm));
        case 3:
            return Vec((at(2) - 2.0 * at(1) + 2.0 * at(-1) - at(-2)) / (2.0 * hm * hm * hm));
        default:
            throw UsageError("bootstrap supports derivative orders up to 3 (p <= 4)");
    }
}

}  // namespace detail

inline DerivativeTable bootstrap_derivatives(const PartitionedProblem& prob, const Vec& y0, double h, int p) {
    if (p > 4) throw UsageError("bootstrap_derivatives: p > 4 is not supported");
    DerivativeTable table;
    table.source = DerivativeTable::Source::Bootstrapped;
    table.d0 = y0;
    if (p == 0) return table;
    if (prob.mode != PartitionMode::Additive)
        throw UsageError("bootstrap_derivatives: additive problems only");

    const double hm = h / 64.0;
    const int J = p >= 3 ? 2 : 1;
    auto rhs = [&](const Vec& y) { return Vec(prob.fE(y) + prob.fI(y)); };

    std::vector<Vec> traj(2 * J + 1);
    traj[J] = y0;
    for (int j = 1; j <= J; ++j) {
        traj[J + j] = detail::rk4_step(rhs, traj[J + j - 1], hm);
        traj[J - j] = detail::rk4_step(rhs, traj[J - j + 1], -hm);
    }
    std::vector<Vec> fE_vals(2 * J + 1), fI_vals(2 * J + 1);
    for (int j = -J; j <= J; ++j) {
        fE_vals[j + J] = prob.fE(traj[j + J]);
        fI_vals[j + J] = prob.fI(traj[j + J]);
    }
    for (int k = 1; k <= p; ++k) {
        const double hk = std::pow(h, k);
        table.dE.push_back(hk * detail::fd_derivative(fE_vals, J, k - 1, hm));
        table.dI.push_back(hk * detail::fd_derivative(fI_vals, J, k - 1, hm));
    }
    return table;
}

// ---------------------------------------------------------------------------
// Derivative tables from the best available source: exact callbacks, the
// chain rule through analytic Jacobians (enough for p <= 2), or bootstrap.
// ---------------------------------------------------------------------------

inline DerivativeTable additive_derivative_table(const PartitionedProblem& prob, const Vec& y0, double h,
                                                 int p, const StartOptions& opt) {
    DerivativeTable table;
    table.d0 = y0;
    if (p == 0) return table;
    if (prob.fE_derivs && prob.fI_derivs) {
        for (int k = 1; k <= p; ++k) {
            const double hk = std::pow(h, k);
            table.dE.push_back(hk * prob.fE_derivs(k - 1, opt.t0));
            table.dI.push_back(hk * prob.fI_derivs(k - 1, opt.t0));
        }
        return table;
    }
    if (p <= 2 && prob.fE_jac && prob.fI_jac) {
        table.dE.push_back(h * prob.fE(y0));
        table.dI.push_back(h * prob.fI(y0));
        if (p == 2) {
            const Vec yp = prob.fE(y0) + prob.fI(y0);
            table.dE.push_back(h * h * (prob.fE_jac(y0) * yp));
            table.dI.push_back(h * h * (prob.fI_jac(y0) * yp));
        }
        return table;
    }
    if (!opt.allow_bootstrap)
        throw UsageError("starting: derivative callbacks missing and bootstrap disabled");
    return bootstrap_derivatives(prob, y0, h, p);
}

namespace detail {

/// z' along the solution: g/eps for SPPs, -g_z^{-1} g_x f in the DAE limit.
inline Vec z_rate(const PartitionedProblem& prob, const Vec& x, const Vec& z) {
    if (prob.epsilon > 0) return Vec(prob.g(x, z) / prob.epsilon);
    const Mat gz = prob.g_z(x, z);
    Eigen::PartialPivLU<Mat> lu(gz);
    return Vec(-lu.solve(prob.g_x(x, z) * prob.f(x, z)));
}

}  // namespace detail

inline DerivativeTable component_derivative_table(const PartitionedProblem& prob, const Vec& x0,
                                                  const Vec& z0, double h, int p, const StartOptions& opt) {
    DerivativeTable table;
    table.dx.push_back(x0);
    table.dz.push_back(z0);
    if (p == 0) return table;
    if (prob.x_derivs && prob.z_derivs) {
        for (int k = 1; k <= p; ++k) {
            const double hk = std::pow(h, k);
            table.dx.push_back(hk * prob.x_derivs(k, opt.t0));
            table.dz.push_back(hk * prob.z_derivs(k, opt.t0));
        }
        return table;
    }
    if (p > 2) throw UsageError("starting: component derivatives beyond p = 2 need exact callbacks");
    const Vec xp = prob.f(x0, z0);
    const Vec zp = detail::z_rate(prob, x0, z0);
    table.dx.push_back(h * xp);
    table.dz.push_back(h * zp);
    if (p == 2) {
        const Vec xpp = prob.f_x(x0, z0) * xp + prob.f_z(x0, z0) * zp;
        Vec zpp;
        if (prob.epsilon > 0) {
            zpp = (prob.g_x(x0, z0) * xp + prob.g_z(x0, z0) * zp) / prob.epsilon;
        } else {
            // directional finite difference of z' = -g_z^{-1} g_x f along the flow
            const double scale = std::max({1.0, x0.lpNorm<Eigen::Infinity>(), z0.lpNorm<Eigen::Infinity>()});
            const double tau = 1e-5 * scale /
                               std::max(1.0, std::max(xp.lpNorm<Eigen::Infinity>(), zp.lpNorm<Eigen::Infinity>()));
            const Vec plus = detail::z_rate(prob, Vec(x0 + tau * xp), Vec(z0 + tau * zp));
            const Vec minus = detail::z_rate(prob, Vec(x0 - tau * xp), Vec(z0 - tau * zp));
            zpp = (plus - minus) / (2.0 * tau);
        }
        table.dx.push_back(h * h * xpp);
        table.dz.push_back(h * h * zpp);
    }
    return table;
}

// ---------------------------------------------------------------------------
// Starting vectors.
// ---------------------------------------------------------------------------

inline ExternalState start_additive(const ImexGlmPair& pair, const PartitionedProblem& prob, const Vec& y0,
                                    double h, const StartOptions& opt = {}) {
    if (prob.mode != PartitionMode::Additive) throw UsageError("start_additive needs an additive problem");
    const int r = pair.expl.r;
    const int p = pair.expl.p;
    const int m = prob.m;
    const auto table = additive_derivative_table(prob, y0, h, p, opt);

    ExternalState st;
    st.mode = PartitionMode::Additive;
    st.t = opt.t0;
    st.h = h;
    st.y = Vec::Zero(r * m);
    for (int i = 0; i < r; ++i) {
        Vec block = pair.expl.W(i, 0) * y0;
        for (int k = 1; k <= p; ++k)
            block += pair.expl.W(i, k) * table.dE[k - 1] + pair.impl.W(i, k) * table.dI[k - 1];
        st.y.segment(i * m, m) = block;
    }
    return st;
}

inline ExternalState start_component(const ImexGlmPair& pair, const PartitionedProblem& prob, const Vec& x0,
                                     const Vec& z0, double h, const StartOptions& opt = {}) {
    if (prob.mode == PartitionMode::Additive)
        throw UsageError("start_component needs a component or DAE problem");
    if (prob.mode == PartitionMode::Dae) {
        const double res = prob.g(x0, z0).lpNorm<Eigen::Infinity>();
        if (res > 1e-10)
            throw UsageError("start_component: inconsistent DAE initial data, ||g(x0,z0)|| = " +
                             std::to_string(res));
    }
    const int r = pair.expl.r;
    const int p = pair.expl.p;
    const int m = prob.m;
    const auto table = component_derivative_table(prob, x0, z0, h, p, opt);

    ExternalState st;
    st.mode = prob.mode;
    st.t = opt.t0;
    st.h = h;
    st.x = Vec::Zero(r * m);
    st.z = Vec::Zero(r * m);
    for (int i = 0; i < r; ++i) {
        Vec bx = Vec::Zero(m), bz = Vec::Zero(m);
        for (int k = 0; k <= p; ++k) {
            bx += pair.expl.W(i, k) * table.dx[k];
            bz += pair.impl.W(i, k) * table.dz[k];
        }
        st.x.segment(i * m, m) = bx;
        st.z.segment(i * m, m) = bz;
    }
    return st;
}

/// Start from the problem's own initial data.
inline ExternalState make_start(const ImexGlmPair& pair, const PartitionedProblem& prob, double h,
                                const StartOptions& opt = {}) {
    if (prob.mode == PartitionMode::Additive) return start_additive(pair, prob, prob.y0, h, opt);
    return start_component(pair, prob, prob.x0, prob.z0, h, opt);
}

// ---------------------------------------------------------------------------
// Exact external-stage content W eta_p(h, ., t): the reference that global
// errors are measured against. Needs exact-solution derivative callbacks.
// ---------------------------------------------------------------------------

inline Vec external_target_additive(const ImexGlmPair& pair, const PartitionedProblem& prob, double h,
                                    double t) {
    if (!prob.exact_y || !prob.fE_derivs || !prob.fI_derivs)
        throw UsageError("external target needs an exact solution with derivative callbacks");
    const int r = pair.expl.r;
    const int m = prob.m;
    const Vec yt = prob.exact_y(t);
    Vec target = Vec::Zero(r * m);
    for (int i = 0; i < r; ++i) {
        Vec block = pair.expl.W(i, 0) * yt;
        for (int k = 1; k <= pair.expl.p; ++k) {
            const double hk = std::pow(h, k);
            block += hk * (pair.expl.W(i, k) * prob.fE_derivs(k - 1, t) +
                           pair.impl.W(i, k) * prob.fI_derivs(k - 1, t));
        }
        target.segment(i * m, m) = block;
    }
    return target;
}

struct ComponentTarget {
    Vec x, z;
};

inline ComponentTarget external_target_component(const ImexGlmPair& pair, const PartitionedProblem& prob,
                                                 double h, double t) {
    if (!prob.exact_x || !prob.exact_z || !prob.x_derivs || !prob.z_derivs)
        throw UsageError("external target needs an exact solution with derivative callbacks");
    const int r = pair.expl.r;
    const int m = prob.m;
    ComponentTarget tgt;
    tgt.x = Vec::Zero(r * m);
    tgt.z = Vec::Zero(r * m);
    for (int i = 0; i < r; ++i) {
        Vec bx = Vec::Zero(m), bz = Vec::Zero(m);
        for (int k = 0; k <= pair.expl.p; ++k) {
            const double hk = std::pow(h, k);
            bx += hk * pair.expl.W(i, k) * prob.x_derivs(k, t);
            bz += hk * pair.impl.W(i, k) * prob.z_derivs(k, t);
        }
        tgt.x.segment(i * m, m) = bx;
        tgt.z.segment(i * m, m) = bz;
    }
    return tgt;
}

}  // namespace imexglm
