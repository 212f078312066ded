#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace imexglm;
using testutil::load_method;

namespace {

PartitionedProblem zero_additive(int m) {
    PartitionedProblem prob;
    prob.mode = PartitionMode::Additive;
    prob.m = m;
    prob.y0 = Vec::LinSpaced(m, 1.0, 2.0);
    prob.fE = [m](const Vec&) { return Vec(Vec::Zero(m)); };
    prob.fI = [m](const Vec&) { return Vec(Vec::Zero(m)); };
    prob.fE_jac = [m](const Vec&) { return Mat(Mat::Zero(m, m)); };
    prob.fI_jac = [m](const Vec&) { return Mat(Mat::Zero(m, m)); };
    return prob;
}

PartitionedProblem strip_exact(PartitionedProblem prob, bool strip_jacobians) {
    prob.fE_derivs = nullptr;
    prob.fI_derivs = nullptr;
    prob.x_derivs = nullptr;
    prob.z_derivs = nullptr;
    prob.exact_y = nullptr;
    if (strip_jacobians) {
        prob.fE_jac = nullptr;
        prob.fI_jac = nullptr;
    }
    return prob;
}

}  // namespace

TEST(StartAdditive, Order1Formula) {
    const auto pair = load_method("imex-glm-p1");
    const auto prob = builtin("split-dahlquist", {{"lambda_e", -1.0}, {"lambda_i", -10.0}});
    const double h = 0.1;
    const auto st = start_additive(pair, prob, prob.y0, h);
    // y0 = 1: block i = W_E(i,0) y0 + W_E(i,1) h fE + W_I(i,1) h fI
    const double fE = -1.0, fI = -10.0;
    for (int i = 0; i < 2; ++i) {
        const double expect =
            pair.expl.W(i, 0) * 1.0 + pair.expl.W(i, 1) * h * fE + pair.impl.W(i, 1) * h * fI;
        EXPECT_NEAR(st.y(i), expect, 1e-15);
    }
}

TEST(StartAdditive, ZeroRhsGivesW0Block) {
    const auto pair = load_method("imex-glm-p2");
    const auto prob = zero_additive(2);
    const auto st = start_additive(pair, prob, prob.y0, 0.25);
    for (int i = 0; i < pair.expl.r; ++i)
        for (int j = 0; j < 2; ++j) EXPECT_EQ(st.y(i * 2 + j), pair.expl.W(i, 0) * prob.y0(j));
}

TEST(StartAdditive, SplitDahlquistP2ExactAtT0) {
    // with exact derivative callbacks the start equals the exact W-content
    const auto pair = load_method("imex-glm-p2");
    const auto prob = builtin("split-dahlquist", {{"lambda_e", -1.0}, {"lambda_i", -10.0}});
    const double h = 0.125;
    const auto st = start_additive(pair, prob, prob.y0, h);
    const Vec target = external_target_additive(pair, prob, h, 0.0);
    EXPECT_EQ((st.y - target).lpNorm<Eigen::Infinity>(), 0.0);
    // second derivative content: h^2 lambda_X (lambda_E + lambda_I) y0
    const double mu = -11.0;
    EXPECT_NEAR(st.y(1),
                pair.expl.W(1, 0) + pair.expl.W(1, 1) * h * (-1.0) + pair.impl.W(1, 1) * h * (-10.0) +
                    pair.expl.W(1, 2) * h * h * (-1.0) * mu + pair.impl.W(1, 2) * h * h * (-10.0) * mu,
                1e-15);
}

TEST(Bootstrap, MatchesExactDerivativesOnLinearProblem) {
    const auto exact_prob = builtin("split-dahlquist", {{"lambda_e", -0.5}, {"lambda_i", -0.5}});
    const auto prob = strip_exact(exact_prob, true);
    const double h = 0.1;
    const auto table = bootstrap_derivatives(prob, prob.y0, h, 2);
    EXPECT_EQ(table.source, DerivativeTable::Source::Bootstrapped);
    // exact: dE[0] = h lambda_E = -0.05, dE[1] = h^2 lambda_E (lambda_E + lambda_I) = 0.005
    EXPECT_NEAR(table.dE[0](0), -0.05, 1e-8);
    EXPECT_NEAR(table.dI[0](0), -0.05, 1e-8);
    EXPECT_NEAR(table.dE[1](0), 0.005, 1e-8);
    EXPECT_NEAR(table.dI[1](0), 0.005, 1e-8);
}

TEST(Bootstrap, DegenerateCases) {
    const auto prob = zero_additive(1);
    const auto t0 = bootstrap_derivatives(prob, prob.y0, 0.1, 0);
    EXPECT_TRUE(t0.dE.empty());
    EXPECT_EQ(t0.d0(0), prob.y0(0));

    const auto t2 = bootstrap_derivatives(prob, prob.y0, 0.1, 2);
    for (const auto& d : t2.dE) EXPECT_EQ(d.lpNorm<Eigen::Infinity>(), 0.0);
    for (const auto& d : t2.dI) EXPECT_EQ(d.lpNorm<Eigen::Infinity>(), 0.0);

    EXPECT_THROW(bootstrap_derivatives(prob, prob.y0, 0.1, 5), UsageError);
}

TEST(Bootstrap, DisabledFallbackThrows) {
    const auto prob = strip_exact(builtin("split-dahlquist"), true);
    const auto pair = load_method("imex-glm-p2");
    StartOptions opt;
    opt.allow_bootstrap = false;
    EXPECT_THROW(start_additive(pair, prob, prob.y0, 0.1, opt), UsageError);
}

TEST(StartComponent, KapsZDerivativeFromStiffRate) {
    // z' = g(x0,z0)/eps enters the p = 1 start directly
    const auto pair = load_method("imex-glm-p1");
    auto prob = strip_exact(builtin("kaps", {{"eps", 1e-2}}), false);
    const double h = 0.05;
    const auto st = start_component(pair, prob, prob.x0, prob.z0, h);
    const double zp = prob.g(prob.x0, prob.z0)(0) / prob.epsilon;
    for (int i = 0; i < 2; ++i)
        EXPECT_NEAR(st.z(i), pair.impl.W(i, 0) * prob.z0(0) + pair.impl.W(i, 1) * h * zp, 1e-14);
}

TEST(StartComponent, ConstantXHasPureW0Content) {
    PartitionedProblem prob;
    prob.mode = PartitionMode::Component;
    prob.m = 1;
    prob.epsilon = 1e-2;
    prob.x0 = Vec::Constant(1, 3.0);
    prob.z0 = Vec::Constant(1, 0.0);
    prob.f = [](const Vec&, const Vec&) { return Vec(Vec::Zero(1)); };
    prob.g = [](const Vec&, const Vec& z) { return Vec(-z); };
    prob.f_x = [](const Vec&, const Vec&) { return Mat::Zero(1, 1); };
    prob.f_z = [](const Vec&, const Vec&) { return Mat::Zero(1, 1); };
    prob.g_x = [](const Vec&, const Vec&) { return Mat::Zero(1, 1); };
    prob.g_z = [](const Vec&, const Vec&) { return Mat::Constant(1, 1, -1.0); };
    const auto pair = load_method("imex-glm-p2");
    const auto st = start_component(pair, prob, prob.x0, prob.z0, 0.1);
    for (int i = 0; i < 2; ++i) EXPECT_EQ(st.x(i), pair.expl.W(i, 0) * 3.0);
}

TEST(StartComponent, DaeConstraintDerivativeIdentity) {
    // z' from the differentiated constraint matches the finite difference of
    // the exact algebraic variable on the linear DAE.
    auto prob = builtin("linear-dae");
    const auto with_callbacks = prob;
    prob = strip_exact(prob, false);
    const auto pair = load_method("imex-glm-p2");
    StartOptions opt;
    const auto table = component_derivative_table(prob, prob.x0, prob.z0, 0.1, 2, opt);
    const double tau = 1e-6;
    const double zp_fd = (with_callbacks.exact_z(tau)(0) - with_callbacks.exact_z(-tau)(0)) / (2 * tau);
    EXPECT_NEAR(table.dz[1](0) / 0.1, zp_fd, 1e-8);
    const double zpp_fd =
        (with_callbacks.exact_z(tau)(0) - 2 * with_callbacks.exact_z(0.0)(0) + with_callbacks.exact_z(-tau)(0)) /
        (tau * tau);
    EXPECT_NEAR(table.dz[2](0) / 0.01, zpp_fd, 1e-3);
}

TEST(StartComponent, InconsistentDaeDataRejected) {
    const auto prob = builtin("linear-dae");
    const auto pair = load_method("imex-glm-p2");
    EXPECT_THROW(start_component(pair, prob, prob.x0, Vec(Vec::Constant(1, 0.5)), 0.1), UsageError);
}

TEST(StartInvariants, BootstrapErrorDecaysAtOrderPPlusOne) {
    // || bootstrap start - exact start || over an h ladder, slope >= p + 0.8
    const auto pair = load_method("imex-glm-p2");
    const auto exact_prob = builtin("split-dahlquist", {{"lambda_e", -1.0}, {"lambda_i", -10.0}});
    const auto boot_prob = strip_exact(exact_prob, true);
    std::vector<double> errs, hs;
    for (int k = 3; k <= 8; ++k) {
        const double h = std::pow(0.5, k);
        const auto exact_start = start_additive(pair, exact_prob, exact_prob.y0, h);
        const auto boot_start = start_additive(pair, boot_prob, boot_prob.y0, h);
        errs.push_back((exact_start.y - boot_start.y).lpNorm<Eigen::Infinity>());
        hs.push_back(h);
    }
    EXPECT_GE(observed_order(errs, hs), pair.expl.p + 0.8);
}
