#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "imexglm/common.hpp"
#include "imexglm/problems.hpp"
#include "imexglm/tableau.hpp"

namespace imexglm {

// ---------------------------------------------------------------------------
// State passed between steps: the external stage vector(s) plus time bookkeeping.
// ---------------------------------------------------------------------------

struct ExternalState {
    PartitionMode mode = PartitionMode::Additive;
    Vec y;     // additive: r*m
    Vec x, z;  // component / dae: r*m each
    double t = 0;
    double h = 0;
    long n = 0;

    bool all_finite() const {
        auto ok = [](const Vec& v) { return v.size() == 0 || v.allFinite(); };
        return ok(y) && ok(x) && ok(z);
    }
};

struct StageValues {
    Vec Y;     // additive: s*m
    Vec X, Z;  // component: s*m each
    int newton_iterations = 0;  // max over the stage solves of one step
    double residual_norm = 0;   // max final residual over stage solves
};

struct NewtonConfig {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    int max_iters = 25;
    enum class JacobianRefresh { EveryIteration, Frozen } refresh = JacobianRefresh::EveryIteration;

    void validate() const {
        if (abs_tol <= 0 || rel_tol <= 0) throw UsageError("NewtonConfig: tolerances must be positive");
        if (max_iters < 1) throw UsageError("NewtonConfig: max_iters must be >= 1");
    }
};

// ---------------------------------------------------------------------------
// Internals: compiled (Eigen) view of a pair plus small kron helpers.
// ---------------------------------------------------------------------------

namespace detail {

struct CompiledTableau {
    int s = 0, r = 0, p = 0;
    Mat A, U, B, V, W;
    Vec c;
    bool lower_triangular = false;
};

struct CompiledPair {
    SharingMode mode = SharingMode::Additive;
    CompiledTableau ex, im;
    std::optional<Mat> im_A_inv;       // A^I^{-1} when invertible
    std::optional<Mat> B_im_A_inv;     // B^I A^I^{-1}
    std::optional<Mat> M_infinity;     // V^I - B^I A^I^{-1} U^I
};

inline bool is_lower_triangular(const Mat& A) {
    for (int i = 0; i < A.rows(); ++i)
        for (int j = i + 1; j < A.cols(); ++j)
            if (A(i, j) != 0.0) return false;
    return true;
}

inline CompiledTableau compile(const GlmTableau& t) {
    CompiledTableau c;
    c.s = t.s;
    c.r = t.r;
    c.p = t.p;
    c.A = to_eigen(t.A);
    c.U = to_eigen(t.U);
    c.B = to_eigen(t.B);
    c.V = to_eigen(t.V);
    c.W = to_eigen(t.W);
    c.c = to_eigen(t.c);
    c.lower_triangular = is_lower_triangular(c.A);
    return c;
}

inline CompiledPair compile(const ImexGlmPair& pair) {
    CompiledPair c;
    c.mode = pair.mode;
    c.ex = compile(pair.expl);
    c.im = compile(pair.impl);
    Eigen::FullPivLU<Mat> lu(c.im.A);
    if (lu.isInvertible()) {
        c.im_A_inv = lu.inverse();
        c.B_im_A_inv = c.im.B * *c.im_A_inv;
        c.M_infinity = c.im.V - *c.B_im_A_inv * c.im.U;
    }
    return c;
}

/// out_i = sum_j M(i,j) * v_j over m-sized blocks.
inline Vec kron_apply(const Mat& M, const Vec& v, int m) {
    Vec out = Vec::Zero(M.rows() * m);
    for (int i = 0; i < M.rows(); ++i)
        for (int j = 0; j < M.cols(); ++j) {
            const double a = M(i, j);
            if (a != 0.0) out.segment(i * m, m) += a * v.segment(j * m, m);
        }
    return out;
}

struct NewtonStats {
    int iterations = 0;
    double residual = 0;
};

/// Damped-free Newton with at least one update; counts updates performed.
/// Declares divergence after three consecutive residual increases.
template <typename ResidualFn, typename JacobianFn>
NewtonStats newton_solve(Vec& u, ResidualFn&& residual, JacobianFn&& jacobian, const NewtonConfig& cfg,
                         const std::string& context) {
    Eigen::PartialPivLU<Mat> lu;
    bool factored = false;
    double prev = std::numeric_limits<double>::infinity();
    int growth = 0;
    double res = 0;
    for (int it = 1; it <= cfg.max_iters; ++it) {
        if (!factored || cfg.refresh == NewtonConfig::JacobianRefresh::EveryIteration) {
            const Mat J = jacobian(u);
            lu.compute(J);
            const Vec diag = lu.matrixLU().diagonal().cwiseAbs();
            if (diag.minCoeff() <= 1e-250 * std::max(1.0, diag.maxCoeff()))
                throw NumericalError("singular stage Jacobian in " + context);
            factored = true;
        }
        u -= lu.solve(residual(u));
        res = residual(u).template lpNorm<Eigen::Infinity>();
        const double tol = cfg.abs_tol + cfg.rel_tol * u.lpNorm<Eigen::Infinity>();
        if (res <= tol) return {it, res};
        growth = res > prev ? growth + 1 : 0;
        if (growth >= 3)
            throw NewtonError("Newton divergence in " + context + " (residual " + std::to_string(res) + ")",
                              res, it);
        prev = res;
    }
    throw NewtonError("Newton did not converge in " + context + " within " + std::to_string(cfg.max_iters) +
                          " iterations (residual " + std::to_string(res) + ")",
                      res, cfg.max_iters);
}

// Additive stage solve. Lower-triangular A^I sweeps stage by stage; a dense
// A^I couples all s*m unknowns in one Newton system whose Jacobian keeps
// only the f^I derivative blocks.
inline StageValues solve_stages_additive(const CompiledPair& cp, const PartitionedProblem& prob,
                                         const ExternalState& state, const NewtonConfig& cfg, Vec& fE_out,
                                         Vec& fI_out) {
    const int s = cp.ex.s;
    const int m = prob.m;
    const double h = state.h;
    const Vec eta = kron_apply(cp.ex.U, state.y, m);  // initial guesses (U x I) y

    StageValues out;
    out.Y = Vec::Zero(s * m);
    fE_out = Vec::Zero(s * m);
    fI_out = Vec::Zero(s * m);

    if (cp.im.lower_triangular) {
        for (int i = 0; i < s; ++i) {
            Vec known = eta.segment(i * m, m);
            for (int j = 0; j < i; ++j) {
                if (cp.ex.A(i, j) != 0.0) known += h * cp.ex.A(i, j) * fE_out.segment(j * m, m);
                if (cp.im.A(i, j) != 0.0) known += h * cp.im.A(i, j) * fI_out.segment(j * m, m);
            }
            const double aii = cp.im.A(i, i);
            Vec Yi;
            if (aii == 0.0) {
                Yi = known;
            } else {
                Yi = eta.segment(i * m, m);
                auto R = [&](const Vec& u) { return Vec(u - h * aii * prob.fI(u) - known); };
                auto J = [&](const Vec& u) { return Mat(Mat::Identity(m, m) - h * aii * prob.fI_jac(u)); };
                const auto stats =
                    newton_solve(Yi, R, J, cfg, "additive stage " + std::to_string(i + 1));
                out.newton_iterations = std::max(out.newton_iterations, stats.iterations);
                out.residual_norm = std::max(out.residual_norm, stats.residual);
            }
            out.Y.segment(i * m, m) = Yi;
            fE_out.segment(i * m, m) = prob.fE(Yi);
            fI_out.segment(i * m, m) = prob.fI(Yi);
        }
        return out;
    }

    // dense A^I: one coupled system
    Vec Y = eta;
    auto stage_f = [&](const Vec& Yall, const VecFn& fn) {
        Vec v(s * m);
        for (int i = 0; i < s; ++i) v.segment(i * m, m) = fn(Yall.segment(i * m, m));
        return v;
    };
    auto R = [&](const Vec& Yall) {
        return Vec(Yall - h * kron_apply(cp.ex.A, stage_f(Yall, prob.fE), m) -
                   h * kron_apply(cp.im.A, stage_f(Yall, prob.fI), m) - eta);
    };
    auto J = [&](const Vec& Yall) {
        Mat Jm = Mat::Identity(s * m, s * m);
        for (int j = 0; j < s; ++j) {
            const Mat Jj = prob.fI_jac(Yall.segment(j * m, m));
            for (int i = 0; i < s; ++i)
                if (cp.im.A(i, j) != 0.0) Jm.block(i * m, j * m, m, m) -= h * cp.im.A(i, j) * Jj;
        }
        return Jm;
    };
    const auto stats = newton_solve(Y, R, J, cfg, "coupled additive stages");
    out.newton_iterations = stats.iterations;
    out.residual_norm = stats.residual;
    out.Y = Y;
    fE_out = stage_f(Y, prob.fE);
    fI_out = stage_f(Y, prob.fI);
    return out;
}

// Component stage solve in the (eps/h)-scaled form
//   (eps/h) (Z - (U^I x I) z) = (A^I x I) g(X, Z),
// which stays well conditioned as eps -> 0.
inline StageValues solve_stages_component(const CompiledPair& cp, const PartitionedProblem& prob,
                                          const ExternalState& state, const NewtonConfig& cfg, Vec& f_out,
                                          Vec& g_out) {
    const int s = cp.ex.s;
    const int m = prob.m;
    const double h = state.h;
    const double eps_h = prob.epsilon / h;
    const Vec eta = kron_apply(cp.ex.U, state.x, m);
    const Vec zeta = kron_apply(cp.im.U, state.z, m);

    StageValues out;
    out.X = Vec::Zero(s * m);
    out.Z = Vec::Zero(s * m);
    f_out = Vec::Zero(s * m);
    g_out = Vec::Zero(s * m);

    if (cp.im.lower_triangular) {
        for (int i = 0; i < s; ++i) {
            Vec Xi = eta.segment(i * m, m);
            for (int j = 0; j < i; ++j)
                if (cp.ex.A(i, j) != 0.0) Xi += h * cp.ex.A(i, j) * f_out.segment(j * m, m);

            Vec gknown = Vec::Zero(m);
            for (int j = 0; j < i; ++j)
                if (cp.im.A(i, j) != 0.0) gknown += cp.im.A(i, j) * g_out.segment(j * m, m);
            const double aii = cp.im.A(i, i);
            Vec Zi = zeta.segment(i * m, m);
            if (aii == 0.0) {
                // stage equation degenerates to (eps/h)(Z - zeta) = known g sum
                Zi = zeta.segment(i * m, m) + (eps_h > 0 ? Vec((1.0 / eps_h) * gknown) : Vec(Vec::Zero(m)));
            } else {
                auto R = [&](const Vec& u) {
                    return Vec(eps_h * (u - zeta.segment(i * m, m)) - gknown - aii * prob.g(Xi, u));
                };
                auto J = [&](const Vec& u) {
                    return Mat(eps_h * Mat::Identity(m, m) - aii * prob.g_z(Xi, u));
                };
                const auto stats =
                    newton_solve(Zi, R, J, cfg, "component stage " + std::to_string(i + 1));
                out.newton_iterations = std::max(out.newton_iterations, stats.iterations);
                out.residual_norm = std::max(out.residual_norm, stats.residual);
            }
            out.X.segment(i * m, m) = Xi;
            out.Z.segment(i * m, m) = Zi;
            f_out.segment(i * m, m) = prob.f(Xi, Zi);
            g_out.segment(i * m, m) = prob.g(Xi, Zi);
        }
        return out;
    }

    // dense A^I: coupled solve over all Z stages, X recovered by forward
    // substitution (A^E is strictly lower triangular).
    auto recover_X = [&](const Vec& Z, Vec& f_stage) {
        Vec X(s * m);
        for (int i = 0; i < s; ++i) {
            Vec Xi = eta.segment(i * m, m);
            for (int j = 0; j < i; ++j)
                if (cp.ex.A(i, j) != 0.0) Xi += h * cp.ex.A(i, j) * f_stage.segment(j * m, m);
            X.segment(i * m, m) = Xi;
            f_stage.segment(i * m, m) = prob.f(Xi, Z.segment(i * m, m));
        }
        return X;
    };
    Vec Z = zeta;
    Vec f_stage = Vec::Zero(s * m);
    auto R = [&](const Vec& Zall) {
        Vec f_tmp = Vec::Zero(s * m);
        const Vec X = recover_X(Zall, f_tmp);
        Vec g_stage(s * m);
        for (int i = 0; i < s; ++i)
            g_stage.segment(i * m, m) = prob.g(X.segment(i * m, m), Zall.segment(i * m, m));
        return Vec(eps_h * (Zall - zeta) - kron_apply(cp.im.A, g_stage, m));
    };
    auto J = [&](const Vec& Zall) {
        Vec f_tmp = Vec::Zero(s * m);
        const Vec X = recover_X(Zall, f_tmp);
        Mat Jm = eps_h * Mat::Identity(s * m, s * m);
        for (int j = 0; j < s; ++j) {
            const Mat Gz = prob.g_z(X.segment(j * m, m), Zall.segment(j * m, m));
            for (int i = 0; i < s; ++i)
                if (cp.im.A(i, j) != 0.0) Jm.block(i * m, j * m, m, m) -= cp.im.A(i, j) * Gz;
        }
        return Jm;
    };
    const auto stats = newton_solve(Z, R, J, cfg, "coupled component stages");
    out.newton_iterations = stats.iterations;
    out.residual_norm = stats.residual;
    out.Z = Z;
    out.X = recover_X(Z, f_stage);
    f_out = f_stage;
    for (int i = 0; i < s; ++i)
        g_out.segment(i * m, m) = prob.g(out.X.segment(i * m, m), Z.segment(i * m, m));
    return out;
}

inline ExternalState step_additive(const CompiledPair& cp, const PartitionedProblem& prob,
                                   const ExternalState& state, const NewtonConfig& cfg,
                                   StageValues* stages_out = nullptr) {
    Vec fE, fI;
    StageValues stages = solve_stages_additive(cp, prob, state, cfg, fE, fI);
    ExternalState next = state;
    next.y = state.h * kron_apply(cp.ex.B, fE, prob.m) + state.h * kron_apply(cp.im.B, fI, prob.m) +
             kron_apply(cp.ex.V, state.y, prob.m);
    next.t = state.t + state.h;
    next.n = state.n + 1;
    if (stages_out) *stages_out = stages;
    return next;
}

inline ExternalState step_component(const CompiledPair& cp, const PartitionedProblem& prob,
                                    const ExternalState& state, const NewtonConfig& cfg,
                                    StageValues* stages_out = nullptr) {
    Vec f, g;
    StageValues stages = solve_stages_component(cp, prob, state, cfg, f, g);
    const int m = prob.m;
    ExternalState next = state;
    next.x = state.h * kron_apply(cp.ex.B, f, m) + kron_apply(cp.ex.V, state.x, m);
    if (cp.B_im_A_inv) {
        // z update via h (B^I x I) g / eps = (B^I A^I^{-1} x I)(Z - (U^I x I) z),
        // exact in the stage equations and stable uniformly in eps.
        next.z = kron_apply(*cp.B_im_A_inv, Vec(stages.Z - kron_apply(cp.im.U, state.z, m)), m) +
                 kron_apply(cp.im.V, state.z, m);
    } else {
        if (prob.epsilon <= 0) throw NumericalError("component step: singular A^I with eps = 0");
        next.z = (state.h / prob.epsilon) * kron_apply(cp.im.B, g, m) + kron_apply(cp.im.V, state.z, m);
    }
    next.t = state.t + state.h;
    next.n = state.n + 1;
    if (stages_out) *stages_out = stages;
    return next;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Public stepping API.
// ---------------------------------------------------------------------------

inline StageValues solve_stages_newton(const ImexGlmPair& pair, const PartitionedProblem& prob,
                                       const ExternalState& state, const NewtonConfig& cfg = {}) {
    cfg.validate();
    const auto cp = detail::compile(pair);
    Vec a, b;
    if (state.mode == PartitionMode::Additive) return detail::solve_stages_additive(cp, prob, state, cfg, a, b);
    if (state.mode == PartitionMode::Component)
        return detail::solve_stages_component(cp, prob, state, cfg, a, b);
    throw UsageError("solve_stages_newton: DAE states are handled by dae_step");
}

inline ExternalState imex_step_additive(const ImexGlmPair& pair, const PartitionedProblem& prob,
                                        const ExternalState& state, const NewtonConfig& cfg = {},
                                        StageValues* stages_out = nullptr) {
    cfg.validate();
    if (pair.mode != SharingMode::Additive)
        throw UsageError("imex_step_additive needs an additive-mode pair (shared U, V)");
    if (prob.mode != PartitionMode::Additive) throw UsageError("imex_step_additive needs an additive problem");
    return detail::step_additive(detail::compile(pair), prob, state, cfg, stages_out);
}

inline ExternalState imex_step_component(const ImexGlmPair& pair, const PartitionedProblem& prob,
                                         const ExternalState& state, const NewtonConfig& cfg = {},
                                         StageValues* stages_out = nullptr) {
    cfg.validate();
    if (prob.mode != PartitionMode::Component || prob.epsilon <= 0)
        throw UsageError("imex_step_component needs a component problem with eps > 0");
    return detail::step_component(detail::compile(pair), prob, state, cfg, stages_out);
}

}  // namespace imexglm
