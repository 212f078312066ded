#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <string>

#include "imexglm/problems.hpp"
#include "imexglm/stepper.hpp"

namespace imexglm {

// ---------------------------------------------------------------------------
// Index-1 DAE support: the eps -> 0 limit of the component IMEX scheme.
//   X per the explicit stage equation, Z from g(X, Z) = 0,
//   x update through B^E, z update through B^I A^I^{-1} and M^I(inf).
// ---------------------------------------------------------------------------

/// Solves g(x, z) = 0 for z by Newton from z_guess.
/// Post: ||g(x, z)|| <= 1e-12 (1 + ||z||).
inline Vec solve_algebraic(const PartitionedProblem& prob, const Vec& x, const Vec& z_guess,
                           int max_iters = 50) {
    Vec z = z_guess;
    double res = prob.g(x, z).lpNorm<Eigen::Infinity>();
    for (int it = 0; it < max_iters; ++it) {
        if (res <= 1e-12 * (1.0 + z.lpNorm<Eigen::Infinity>())) return z;
        const Mat gz = prob.g_z(x, z);
        Eigen::PartialPivLU<Mat> lu(gz);
        const Vec diag = lu.matrixLU().diagonal().cwiseAbs();
        if (diag.minCoeff() <= 1e-250 * std::max(1.0, diag.maxCoeff()))
            throw NumericalError("solve_algebraic: g_z singular at iterate");
        z -= lu.solve(prob.g(x, z));
        res = prob.g(x, z).lpNorm<Eigen::Infinity>();
    }
    if (res <= 1e-12 * (1.0 + z.lpNorm<Eigen::Infinity>())) return z;
    throw NewtonError("solve_algebraic: Newton failed (residual " + std::to_string(res) + ")", res,
                      max_iters);
}

/// Reduced right-hand side f(x, G(x)) of the index-1 problem.
inline Vec reduced_rhs(const PartitionedProblem& prob, const Vec& x, const Vec& z_guess) {
    return prob.f(x, solve_algebraic(prob, x, z_guess));
}

inline Vec reduced_rhs(const PartitionedProblem& prob, const Vec& x) {
    return reduced_rhs(prob, x, prob.z0);
}

namespace detail {

inline void check_gz_conditioning(const PartitionedProblem& prob, const Vec& x, const Vec& z, int stage) {
    Eigen::JacobiSVD<Mat> svd(prob.g_z(x, z));
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    if (smin < 1e-8)
        throw NumericalError("dae_step: g_z nearly singular at stage " + std::to_string(stage + 1) +
                             " (sigma_min = " + std::to_string(smin) + ")");
}

}  // namespace detail

/// One step of the DAE-limit scheme. `z_stage_guess` seeds the first stage's
/// algebraic solve (the previous step's last stage value, per the sweep
/// order); later stages start from the stage before them.
inline ExternalState dae_step(const ImexGlmPair& pair, const PartitionedProblem& prob,
                              const ExternalState& state, const NewtonConfig& cfg = {},
                              Vec* z_stage_guess = nullptr, StageValues* stages_out = nullptr) {
    cfg.validate();
    if (prob.mode != PartitionMode::Dae) throw UsageError("dae_step needs a DAE problem (eps = 0)");
    const auto cp = detail::compile(pair);
    if (!cp.im_A_inv)
        throw NumericalError("dae_step: A^I must be invertible (class-of-interest item 3)");
    if (!cp.im.lower_triangular || !cp.ex.lower_triangular)
        throw UsageError("dae_step: stage sweep needs lower-triangular A^I");

    const int s = cp.ex.s;
    const int m = prob.m;
    const double h = state.h;
    const Vec eta = detail::kron_apply(cp.ex.U, state.x, m);

    StageValues stages;
    stages.X = Vec::Zero(s * m);
    stages.Z = Vec::Zero(s * m);
    Vec f_vals = Vec::Zero(s * m);
    Vec guess = (z_stage_guess && z_stage_guess->size() == m) ? *z_stage_guess : Vec(state.z.head(m));

    for (int i = 0; i < s; ++i) {
        Vec Xi = eta.segment(i * m, m);
        for (int j = 0; j < i; ++j)
            if (cp.ex.A(i, j) != 0.0) Xi += h * cp.ex.A(i, j) * f_vals.segment(j * m, m);
        Vec Zi;
        try {
            Zi = solve_algebraic(prob, Xi, guess, cfg.max_iters * 2);
        } catch (const NumericalError& e) {
            throw NumericalError("dae_step stage " + std::to_string(i + 1) + ": " + e.what());
        }
        detail::check_gz_conditioning(prob, Xi, Zi, i);
        stages.X.segment(i * m, m) = Xi;
        stages.Z.segment(i * m, m) = Zi;
        f_vals.segment(i * m, m) = prob.f(Xi, Zi);
        guess = Zi;
    }

    ExternalState next = state;
    next.x = h * detail::kron_apply(cp.ex.B, f_vals, m) + detail::kron_apply(cp.ex.V, state.x, m);
    next.z = detail::kron_apply(*cp.B_im_A_inv, stages.Z, m) + detail::kron_apply(*cp.M_infinity, state.z, m);
    next.t = state.t + state.h;
    next.n = state.n + 1;
    if (z_stage_guess) *z_stage_guess = stages.Z.tail(m);
    if (stages_out) *stages_out = stages;
    return next;
}

// ---------------------------------------------------------------------------
// Fixed-step driver over all three problem modes.
// ---------------------------------------------------------------------------

struct Trajectory {
    std::vector<ExternalState> states;  // states[0] is the start vector
    long total_steps = 0;
    long total_newton = 0;  // summed max-per-step iteration counts
    int max_newton = 0;
    double max_residual = 0;
};

struct IntegrateOptions {
    NewtonConfig newton;
    int record_stride = 1;  // record every k-th state (last state always kept)
};

inline Trajectory integrate(const ImexGlmPair& pair, const PartitionedProblem& prob,
                            const ExternalState& state0, double t_final, const IntegrateOptions& opt = {}) {
    opt.newton.validate();
    if (state0.h <= 0) throw UsageError("integrate: step size must be positive");
    const double span = t_final - state0.t;
    const double steps_real = span / state0.h;
    const long n_steps = std::lround(steps_real);
    if (n_steps < 1 || std::abs(steps_real - static_cast<double>(n_steps)) > 1e-9 * std::max(1.0, steps_real))
        throw UsageError("integrate: (t_final - t0)/h must be a positive integer");

    const auto cp = detail::compile(pair);
    Trajectory traj;
    traj.states.push_back(state0);
    ExternalState st = state0;
    Vec z_guess;
    if (prob.mode == PartitionMode::Dae) z_guess = state0.z.head(prob.m);

    for (long n = 0; n < n_steps; ++n) {
        StageValues stages;
        try {
            switch (prob.mode) {
                case PartitionMode::Additive:
                    st = detail::step_additive(cp, prob, st, opt.newton, &stages);
                    break;
                case PartitionMode::Component:
                    st = detail::step_component(cp, prob, st, opt.newton, &stages);
                    break;
                case PartitionMode::Dae:
                    st = dae_step(pair, prob, st, opt.newton, &z_guess, &stages);
                    break;
            }
        } catch (const NumericalError& e) {
            throw NumericalError("integrate: step " + std::to_string(n + 1) + " at t = " +
                                 std::to_string(st.t) + " failed: " + e.what());
        }
        st.t = state0.t + static_cast<double>(n + 1) * state0.h;  // exact to one rounding
        if (!st.all_finite())
            throw NumericalError("integrate: non-finite state after step " + std::to_string(n + 1) +
                                 " at t = " + std::to_string(st.t));
        traj.total_steps++;
        traj.total_newton += stages.newton_iterations;
        traj.max_newton = std::max(traj.max_newton, stages.newton_iterations);
        traj.max_residual = std::max(traj.max_residual, stages.residual_norm);
        if ((n + 1) % opt.record_stride == 0 || n + 1 == n_steps) traj.states.push_back(st);
    }
    return traj;
}

}  // namespace imexglm
