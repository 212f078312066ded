#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "imexglm/common.hpp"

namespace imexglm {

enum class PartitionMode { Additive, Component, Dae };

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecFn = std::function<Vec(const Vec&)>;
using Vec2Fn = std::function<Vec(const Vec&, const Vec&)>;
using Mat2Fn = std::function<Mat(const Vec&, const Vec&)>;

/// Linear/nonlinear decomposition of the stiff right-hand side:
/// f^I(y) = J y + r(y) with J carrying all the stiffness.
struct StiffSplit {
    Mat J;
    VecFn remainder;
    double lipschitz_E = 0;  // documentation only
    double lipschitz_I = 0;
};

/// Checks J is (numerically) diagonalizable with eigenvalue real parts <= 0.
inline void validate_stiff_split(const Mat& J) {
    Eigen::EigenSolver<Mat> es(J);
    for (int i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()(i).real() > 1e-10 * (1.0 + std::abs(es.eigenvalues()(i).imag())))
            throw UsageError("stiff split: J has an eigenvalue with positive real part");
    const Eigen::MatrixXcd V = es.eigenvectors();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(V);
    const double cond = svd.singularValues()(0) / svd.singularValues()(svd.singularValues().size() - 1);
    if (!std::isfinite(cond) || cond > 1e12)
        throw UsageError("stiff split: J is not (numerically) diagonalizable");
}

/// A partitioned initial value problem. Additive problems populate the
/// fE/fI family, component and DAE problems the f/g family. Derivative
/// callbacks follow the solution: fE_derivs(j, t) is the j-th time derivative
/// of f^E(y(t)); x_derivs(k, t) is x^(k)(t).
struct PartitionedProblem {
    std::string name;
    PartitionMode mode = PartitionMode::Additive;
    int m = 0;           // dimension (per partition in Component/Dae modes)
    double epsilon = 0;  // > 0 for Component SPPs, 0 in Dae mode
    double default_t_final = 1.0;

    // additive
    VecFn fE, fI;
    std::function<Mat(const Vec&)> fE_jac, fI_jac;
    Vec y0;
    std::function<Vec(double)> exact_y;
    std::function<Vec(int, double)> fE_derivs, fI_derivs;

    // component / dae
    Vec2Fn f, g;
    Mat2Fn f_x, f_z, g_x, g_z;
    Vec x0, z0;
    std::function<Vec(double)> exact_x, exact_z;
    std::function<Vec(int, double)> x_derivs, z_derivs;

    std::optional<StiffSplit> stiff_split;

    bool has_exact() const {
        return mode == PartitionMode::Additive ? static_cast<bool>(exact_y)
                                               : static_cast<bool>(exact_x) && static_cast<bool>(exact_z);
    }
};

// ---------------------------------------------------------------------------
// Logarithmic norm (Euclidean): mu2(J) = lambda_max((J + J^T)/2).
// ---------------------------------------------------------------------------

inline double log_norm(const Mat& J) {
    const Mat sym = 0.5 * (J + J.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

// ---------------------------------------------------------------------------
// SPP well-posedness: mu2(g_z) <= -1 along a trajectory.
// ---------------------------------------------------------------------------

struct TrajectorySample {
    double t;
    Vec x;
    Vec z;
};

struct WellposedReport {
    double max_mu = -std::numeric_limits<double>::infinity();
    double threshold = -1.0 + 1e-8;
    bool pass = false;
    std::vector<std::pair<double, double>> samples;  // (t, mu)
};

inline WellposedReport check_spp_wellposed(const PartitionedProblem& prob,
                                           const std::vector<TrajectorySample>& points) {
    if (prob.mode == PartitionMode::Additive)
        throw UsageError("check_spp_wellposed needs a component or DAE problem");
    if (points.empty()) throw UsageError("check_spp_wellposed: no sample points");
    WellposedReport rep;
    for (const auto& pt : points) {
        const double mu = log_norm(prob.g_z(pt.x, pt.z));
        rep.samples.emplace_back(pt.t, mu);
        rep.max_mu = std::max(rep.max_mu, mu);
    }
    rep.pass = rep.max_mu <= rep.threshold;
    return rep;
}

/// Convenience overload sampling the exact solution.
inline WellposedReport check_spp_wellposed(const PartitionedProblem& prob, int n_samples = 50) {
    if (!prob.exact_x || !prob.exact_z)
        throw UsageError("check_spp_wellposed(problem, n): problem has no exact solution; supply samples");
    std::vector<TrajectorySample> pts;
    for (int i = 0; i <= n_samples; ++i) {
        const double t = prob.default_t_final * i / n_samples;
        pts.push_back({t, prob.exact_x(t), prob.exact_z(t)});
    }
    return check_spp_wellposed(prob, pts);
}

// ---------------------------------------------------------------------------
// Builtin catalog.
// ---------------------------------------------------------------------------

namespace detail {

template <typename Rhs>
Vec rk4_step(const Rhs& rhs, const Vec& y, double h) {
    const Vec k1 = rhs(y);
    const Vec k2 = rhs(y + 0.5 * h * k1);
    const Vec k3 = rhs(y + 0.5 * h * k2);
    const Vec k4 = rhs(y + h * k3);
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <typename Rhs>
Vec rk4_integrate(const Rhs& rhs, Vec y, double t_len, int n_steps) {
    const double h = t_len / n_steps;
    for (int i = 0; i < n_steps; ++i) y = rk4_step(rhs, y, h);
    return y;
}

inline double param(const std::map<std::string, double>& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

}  // namespace detail

inline PartitionedProblem make_split_dahlquist(double lambda_e, double lambda_i) {
    PartitionedProblem prob;
    prob.name = "split-dahlquist";
    prob.mode = PartitionMode::Additive;
    prob.m = 1;
    prob.y0 = Vec::Constant(1, 1.0);
    const double mu = lambda_e + lambda_i;
    prob.fE = [lambda_e](const Vec& y) { return Vec(lambda_e * y); };
    prob.fI = [lambda_i](const Vec& y) { return Vec(lambda_i * y); };
    prob.fE_jac = [lambda_e](const Vec&) { return Mat::Constant(1, 1, lambda_e); };
    prob.fI_jac = [lambda_i](const Vec&) { return Mat::Constant(1, 1, lambda_i); };
    prob.exact_y = [mu](double t) { return Vec(Vec::Constant(1, std::exp(mu * t))); };
    prob.fE_derivs = [lambda_e, mu](int j, double t) {
        return Vec(Vec::Constant(1, lambda_e * std::pow(mu, j) * std::exp(mu * t)));
    };
    prob.fI_derivs = [lambda_i, mu](int j, double t) {
        return Vec(Vec::Constant(1, lambda_i * std::pow(mu, j) * std::exp(mu * t)));
    };
    StiffSplit split;
    split.J = Mat::Constant(1, 1, lambda_i);
    split.remainder = [](const Vec& y) { return Vec(Vec::Zero(y.size())); };
    split.lipschitz_E = std::abs(lambda_e);
    split.lipschitz_I = 0.0;
    prob.stiff_split = split;
    return prob;
}

/// Assumption-compliant stiff nonlinear problem: f^I = J y + r(y) with
/// J = [[-K, K], [0, 0]] and moderate-Lipschitz r, f^E. Initial data is
/// settled onto the slow manifold by a short micro-RK4 warmup so coarse-h
/// convergence rungs see a smooth solution.
inline PartitionedProblem make_nonlinear_additive(double K) {
    if (K <= 0) throw UsageError("nonlinear-additive: K must be positive");
    PartitionedProblem prob;
    prob.name = "nonlinear-additive";
    prob.mode = PartitionMode::Additive;
    prob.m = 2;
    prob.fE = [](const Vec& y) {
        Vec v(2);
        v << 0.0, -std::sin(y(1));
        return v;
    };
    prob.fI = [K](const Vec& y) {
        Vec v(2);
        v << -K * (y(0) - y(1)), std::atan(y(0));
        return v;
    };
    prob.fE_jac = [](const Vec& y) {
        Mat j = Mat::Zero(2, 2);
        j(1, 1) = -std::cos(y(1));
        return j;
    };
    prob.fI_jac = [K](const Vec& y) {
        Mat j(2, 2);
        j << -K, K, 1.0 / (1.0 + y(0) * y(0)), 0.0;
        return j;
    };
    StiffSplit split;
    split.J = Mat::Zero(2, 2);
    split.J(0, 0) = -K;
    split.J(0, 1) = K;
    split.remainder = [](const Vec& y) {
        Vec v(2);
        v << 0.0, std::atan(y(0));
        return v;
    };
    split.lipschitz_E = 1.0;
    split.lipschitz_I = 1.0;
    prob.stiff_split = split;

    auto rhs = [&prob](const Vec& y) { return Vec(prob.fE(y) + prob.fI(y)); };
    Vec y_init(2);
    y_init << 1.0, 1.0;
    prob.y0 = detail::rk4_integrate(rhs, y_init, 20.0 / K, 40);
    return prob;
}

inline PartitionedProblem make_kaps(double eps) {
    if (eps < 0) throw UsageError("kaps: eps must be >= 0");
    PartitionedProblem prob;
    prob.name = "kaps";
    prob.mode = eps == 0.0 ? PartitionMode::Dae : PartitionMode::Component;
    prob.m = 1;
    prob.epsilon = eps;
    prob.x0 = Vec::Constant(1, 1.0);
    prob.z0 = Vec::Constant(1, 1.0);
    prob.f = [](const Vec& x, const Vec& z) { return Vec(Vec::Constant(1, z(0) - x(0) - x(0) * x(0))); };
    prob.g = [eps](const Vec& x, const Vec& z) {
        return Vec(Vec::Constant(1, x(0) * x(0) - z(0) - 2.0 * eps * z(0)));
    };
    prob.f_x = [](const Vec& x, const Vec&) { return Mat::Constant(1, 1, -1.0 - 2.0 * x(0)); };
    prob.f_z = [](const Vec&, const Vec&) { return Mat::Constant(1, 1, 1.0); };
    prob.g_x = [](const Vec& x, const Vec&) { return Mat::Constant(1, 1, 2.0 * x(0)); };
    prob.g_z = [eps](const Vec&, const Vec&) { return Mat::Constant(1, 1, -(1.0 + 2.0 * eps)); };
    prob.exact_x = [](double t) { return Vec(Vec::Constant(1, std::exp(-t))); };
    prob.exact_z = [](double t) { return Vec(Vec::Constant(1, std::exp(-2.0 * t))); };
    prob.x_derivs = [](int k, double t) {
        return Vec(Vec::Constant(1, std::pow(-1.0, k) * std::exp(-t)));
    };
    prob.z_derivs = [](int k, double t) {
        return Vec(Vec::Constant(1, std::pow(-2.0, k) * std::exp(-2.0 * t)));
    };
    return prob;
}

/// Van der Pol in Lienard singular perturbation form: x' = z,
/// eps z' = (1 - x^2) z - x. Shipped post-transient: the 2-term smooth
/// manifold value followed by an O(eps ln(1/eps)) micro-RK4 warmup. With
/// x0 near 2 the window [0, 0.5] keeps x above sqrt(2), where mu(g_z) <= -1.
inline PartitionedProblem make_vdp_spp(double eps) {
    if (eps <= 0) throw UsageError("vdp-spp: eps must be positive");
    PartitionedProblem prob;
    prob.name = "vdp-spp";
    prob.mode = PartitionMode::Component;
    prob.m = 1;
    prob.epsilon = eps;
    prob.default_t_final = 0.5;
    prob.f = [](const Vec&, const Vec& z) { return z; };
    prob.g = [](const Vec& x, const Vec& z) {
        return Vec(Vec::Constant(1, (1.0 - x(0) * x(0)) * z(0) - x(0)));
    };
    prob.f_x = [](const Vec&, const Vec&) { return Mat::Zero(1, 1); };
    prob.f_z = [](const Vec&, const Vec&) { return Mat::Constant(1, 1, 1.0); };
    prob.g_x = [](const Vec& x, const Vec& z) { return Mat::Constant(1, 1, -2.0 * x(0) * z(0) - 1.0); };
    prob.g_z = [](const Vec& x, const Vec&) { return Mat::Constant(1, 1, 1.0 - x(0) * x(0)); };

    const double x_init = 2.0;
    const double z_smooth = x_init / (1.0 - x_init * x_init);
    const double gz0 = 1.0 - x_init * x_init;
    const double dG = (1.0 + x_init * x_init) / ((1.0 - x_init * x_init) * (1.0 - x_init * x_init));
    const double z1 = dG * z_smooth / gz0;  // next order in eps
    Vec u(2);
    u << x_init, z_smooth + eps * z1;

    auto rhs = [&prob, eps](const Vec& y) {
        Vec x = y.head(1), z = y.tail(1);
        Vec out(2);
        out << prob.f(x, z)(0), prob.g(x, z)(0) / eps;
        return out;
    };
    const double warmup = 10.0 * eps * std::log(1.0 / eps);
    u = detail::rk4_integrate(rhs, u, warmup, 400);
    prob.x0 = u.head(1);
    prob.z0 = u.tail(1);
    return prob;
}

/// Linear SPP with an eps-uniform manufactured solution x = z = e^{-t}:
/// x' = -z, eps z' = (1 - eps) x - z. mu(g_z) = -1 exactly.
inline PartitionedProblem make_linear_spp(double eps) {
    if (eps < 0) throw UsageError("linear-spp: eps must be >= 0");
    PartitionedProblem prob;
    prob.name = "linear-spp";
    prob.mode = eps == 0.0 ? PartitionMode::Dae : PartitionMode::Component;
    prob.m = 1;
    prob.epsilon = eps;
    prob.x0 = Vec::Constant(1, 1.0);
    prob.z0 = Vec::Constant(1, 1.0);
    prob.f = [](const Vec&, const Vec& z) { return Vec(-z); };
    prob.g = [eps](const Vec& x, const Vec& z) { return Vec((1.0 - eps) * x - z); };
    prob.f_x = [](const Vec&, const Vec&) { return Mat::Zero(1, 1); };
    prob.f_z = [](const Vec&, const Vec&) { return Mat::Constant(1, 1, -1.0); };
    prob.g_x = [eps](const Vec&, const Vec&) { return Mat::Constant(1, 1, 1.0 - eps); };
    prob.g_z = [](const Vec&, const Vec&) { return Mat::Constant(1, 1, -1.0); };
    auto decay = [](int k, double t) { return Vec(Vec::Constant(1, std::pow(-1.0, k) * std::exp(-t))); };
    prob.exact_x = [decay](double t) { return decay(0, t); };
    prob.exact_z = [decay](double t) { return decay(0, t); };
    prob.x_derivs = decay;
    prob.z_derivs = decay;
    return prob;
}

inline PartitionedProblem make_linear_dae() {
    PartitionedProblem prob;
    prob.name = "linear-dae";
    prob.mode = PartitionMode::Dae;
    prob.m = 1;
    prob.x0 = Vec::Constant(1, 1.0);
    prob.z0 = Vec::Constant(1, -1.0);
    prob.f = [](const Vec&, const Vec& z) { return z; };
    prob.g = [](const Vec& x, const Vec& z) { return Vec(z + x); };
    prob.f_x = [](const Vec&, const Vec&) { return Mat::Zero(1, 1); };
    prob.f_z = [](const Vec&, const Vec&) { return Mat::Constant(1, 1, 1.0); };
    prob.g_x = [](const Vec&, const Vec&) { return Mat::Constant(1, 1, 1.0); };
    prob.g_z = [](const Vec&, const Vec&) { return Mat::Constant(1, 1, 1.0); };
    prob.exact_x = [](double t) { return Vec(Vec::Constant(1, std::exp(-t))); };
    prob.exact_z = [](double t) { return Vec(Vec::Constant(1, -std::exp(-t))); };
    prob.x_derivs = [](int k, double t) {
        return Vec(Vec::Constant(1, std::pow(-1.0, k) * std::exp(-t)));
    };
    prob.z_derivs = [](int k, double t) {
        return Vec(Vec::Constant(1, -std::pow(-1.0, k) * std::exp(-t)));
    };
    return prob;
}

inline PartitionedProblem builtin(const std::string& name, const std::map<std::string, double>& params = {}) {
    using detail::param;
    if (name == "split-dahlquist")
        return make_split_dahlquist(param(params, "lambda_e", -1.0), param(params, "lambda_i", -10.0));
    if (name == "nonlinear-additive") return make_nonlinear_additive(param(params, "K", 1e4));
    if (name == "kaps") return make_kaps(param(params, "eps", 1e-5));
    if (name == "vdp-spp") return make_vdp_spp(param(params, "eps", 1e-6));
    if (name == "linear-spp") return make_linear_spp(param(params, "eps", 1e-4));
    if (name == "linear-dae") return make_linear_dae();
    throw UsageError("unknown builtin problem '" + name + "'");
}

/// Stacks a component SPP into its additively partitioned form
/// y = [x; z], f^E = [f; 0], f^I = [0; g/eps].
inline PartitionedProblem stack_component_as_additive(const PartitionedProblem& src) {
    if (src.mode != PartitionMode::Component || src.epsilon <= 0)
        throw UsageError("stack_component_as_additive needs a component problem with eps > 0");
    PartitionedProblem prob;
    prob.name = src.name + "-stacked";
    prob.mode = PartitionMode::Additive;
    prob.m = 2 * src.m;
    const int m = src.m;
    const double eps = src.epsilon;
    prob.default_t_final = src.default_t_final;
    auto split2 = [m](const Vec& y) { return std::make_pair(Vec(y.head(m)), Vec(y.tail(m))); };
    prob.fE = [split2, srcf = src.f, m](const Vec& y) {
        auto [x, z] = split2(y);
        Vec out = Vec::Zero(2 * m);
        out.head(m) = srcf(x, z);
        return out;
    };
    prob.fI = [split2, srcg = src.g, m, eps](const Vec& y) {
        auto [x, z] = split2(y);
        Vec out = Vec::Zero(2 * m);
        out.tail(m) = srcg(x, z) / eps;
        return out;
    };
    prob.fE_jac = [split2, fx = src.f_x, fz = src.f_z, m](const Vec& y) {
        auto [x, z] = split2(y);
        Mat j = Mat::Zero(2 * m, 2 * m);
        j.topLeftCorner(m, m) = fx(x, z);
        j.topRightCorner(m, m) = fz(x, z);
        return j;
    };
    prob.fI_jac = [split2, gx = src.g_x, gz = src.g_z, m, eps](const Vec& y) {
        auto [x, z] = split2(y);
        Mat j = Mat::Zero(2 * m, 2 * m);
        j.bottomLeftCorner(m, m) = gx(x, z) / eps;
        j.bottomRightCorner(m, m) = gz(x, z) / eps;
        return j;
    };
    Vec y0(2 * m);
    y0 << src.x0, src.z0;
    prob.y0 = y0;
    if (src.exact_x && src.exact_z) {
        prob.exact_y = [ex = src.exact_x, ez = src.exact_z, m](double t) {
            Vec y(2 * m);
            y << ex(t), ez(t);
            return y;
        };
    }
    if (src.x_derivs && src.z_derivs) {
        prob.fE_derivs = [xd = src.x_derivs, m](int j, double t) {
            Vec v = Vec::Zero(2 * m);
            v.head(m) = xd(j + 1, t);
            return v;
        };
        prob.fI_derivs = [zd = src.z_derivs, m](int j, double t) {
            Vec v = Vec::Zero(2 * m);
            v.tail(m) = zd(j + 1, t);
            return v;
        };
    }
    return prob;
}

}  // namespace imexglm
