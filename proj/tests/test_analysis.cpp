#include <gtest/gtest.h>

#include <cstring>

#include "test_util.hpp"

using namespace imexglm;
using testutil::load_method;

TEST(ObservedOrder, ExactPowerLaw) {
    std::vector<double> hs, errs;
    for (int k = 2; k < 8; ++k) {
        hs.push_back(std::pow(0.5, k));
        errs.push_back(3.7 * std::pow(hs.back(), 2.0));
    }
    EXPECT_NEAR(observed_order(errs, hs), 2.0, 1e-12);
}

TEST(ObservedOrder, FlatErrorsFitSlopeZero) {
    std::vector<double> hs = {0.1, 0.05, 0.025, 0.0125};
    std::vector<double> errs(4, 1e-3);
    EXPECT_NEAR(observed_order(errs, hs), 0.0, 1e-12);
}

TEST(ObservedOrder, FloorContamination) {
    // h^2 + 1e-14 over h in [2^-8, 2^-4]: slope still in [1.8, 2.0]
    std::vector<double> hs, errs;
    for (int k = 4; k <= 8; ++k) {
        hs.push_back(std::pow(0.5, k));
        errs.push_back(hs.back() * hs.back() + 1e-14);
    }
    const double slope = observed_order(errs, hs);
    EXPECT_GE(slope, 1.8);
    EXPECT_LE(slope, 2.0);

    // extend the ladder deep into the floor: the fit flags proximity and
    // the flattened tail drags the slope down
    std::vector<double> hs2, errs2;
    for (int k = 14; k <= 30; ++k) {
        hs2.push_back(std::pow(0.5, k));
        errs2.push_back(hs2.back() * hs2.back() + 1e-14);
    }
    const auto fit = fit_order(errs2, hs2, 1e-14);
    EXPECT_TRUE(fit.floor_proximity);
    EXPECT_LT(fit.slope, 1.8);
}

TEST(ObservedOrder, InputValidation) {
    EXPECT_THROW(observed_order({1.0, 0.5}, {0.1, 0.05}), UsageError);
    EXPECT_THROW(observed_order({1.0, 0.0, 0.5}, {0.1, 0.05, 0.025}), UsageError);
    EXPECT_THROW(observed_order({1.0, -1.0, 0.5}, {0.1, 0.05, 0.025}), UsageError);
}

TEST(ConvergenceStudy, P1OnSplitDahlquist) {
    const auto pair = load_method("imex-glm-p1");
    const auto prob = builtin("split-dahlquist", {{"lambda_e", -1.0}, {"lambda_i", -10.0}});
    StudyOptions opt;
    opt.tolerance = 0.2;
    const auto rep = run_convergence_study(pair, prob, 1.0 / 64, 6, 1.0, opt);
    EXPECT_NEAR(rep.fitted_order_x, 1.0, 0.2);
    EXPECT_TRUE(rep.pass);
    EXPECT_EQ(rep.reference_kind, ConvergenceReport::ReferenceKind::Exact);
    for (std::size_t k = 1; k < rep.ladder.size(); ++k) EXPECT_LT(rep.ladder[k].h, rep.ladder[k - 1].h);
}

TEST(ConvergenceStudy, P2OnKapsBothGroups) {
    const auto pair = load_method("imex-glm-p2");
    const auto prob = builtin("kaps", {{"eps", 1e-5}});
    const auto rep = run_convergence_study(pair, prob, 0.0625, 6, 1.0);
    EXPECT_NEAR(rep.fitted_order_x, 2.0, 0.3);
    EXPECT_NEAR(rep.fitted_order_z, 2.0, 0.3);
    EXPECT_TRUE(rep.pass);
}

TEST(ConvergenceStudy, ZeroRhsFlagsDegenerateFit) {
    const auto pair = load_method("imex-glm-p2");
    PartitionedProblem prob;
    prob.mode = PartitionMode::Additive;
    prob.m = 1;
    prob.y0 = Vec::Constant(1, 1.0);
    prob.fE = [](const Vec&) { return Vec(Vec::Zero(1)); };
    prob.fI = [](const Vec&) { return Vec(Vec::Zero(1)); };
    prob.fE_jac = [](const Vec&) { return Mat::Zero(1, 1); };
    prob.fI_jac = [](const Vec&) { return Mat::Zero(1, 1); };
    prob.exact_y = [](double) { return Vec(Vec::Constant(1, 1.0)); };
    prob.fE_derivs = [](int, double) { return Vec(Vec::Zero(1)); };
    prob.fI_derivs = [](int, double) { return Vec(Vec::Zero(1)); };
    const auto rep = run_convergence_study(pair, prob, 0.1, 4, 1.0);
    EXPECT_TRUE(rep.degenerate);
    EXPECT_FALSE(rep.pass);
}

TEST(ConvergenceStudy, DeterministicBitIdenticalReports) {
    const auto pair = load_method("imex-glm-p2");
    const auto prob = builtin("kaps", {{"eps", 1e-4}});
    const auto a = run_convergence_study(pair, prob, 0.0625, 5, 1.0);
    const auto b = run_convergence_study(pair, prob, 0.0625, 5, 1.0);
    ASSERT_EQ(a.ladder.size(), b.ladder.size());
    for (std::size_t k = 0; k < a.ladder.size(); ++k) {
        EXPECT_EQ(std::memcmp(&a.ladder[k].error_x, &b.ladder[k].error_x, sizeof(double)), 0);
        EXPECT_EQ(std::memcmp(&a.ladder[k].error_z, &b.ladder[k].error_z, sizeof(double)), 0);
    }
    EXPECT_EQ(a.fitted_order_x, b.fitted_order_x);
}

TEST(ConvergenceStudy, SelfRefinedAgreesWithExactReference) {
    const auto pair = load_method("imex-glm-p2");
    const auto prob = builtin("kaps", {{"eps", 1e-4}});
    const auto exact = run_convergence_study(pair, prob, 0.0625, 6, 1.0);
    StudyOptions opt;
    opt.force_self_refined = true;
    const auto self_ref = run_convergence_study(pair, prob, 0.0625, 6, 1.0, opt);
    EXPECT_EQ(self_ref.reference_kind, ConvergenceReport::ReferenceKind::SelfRefined);
    EXPECT_NEAR(exact.fitted_order_x, self_ref.fitted_order_x, 0.1);
    EXPECT_NEAR(exact.fitted_order_z, self_ref.fitted_order_z, 0.1);
}

TEST(ConvergenceStudy, RungValidation) {
    const auto pair = load_method("imex-glm-p2");
    const auto prob = builtin("kaps", {{"eps", 1e-4}});
    EXPECT_THROW(run_convergence_study(pair, prob, 0.0625, 3, 1.0), UsageError);
}

TEST(StiffnessSweep, ErrorsUniformOnceStiff) {
    const auto pair = load_method("imex-glm-p2");
    auto family = [](double lam) {
        return builtin("split-dahlquist", {{"lambda_e", -1.0}, {"lambda_i", lam}});
    };
    const auto rep = stiffness_sweep(pair, family, {0.0, -1e2, -1e4, -1e6, -1e8}, 0.01, 2.0);
    EXPECT_TRUE(rep.pass);
    EXPECT_LE(rep.ratio, 2.0);
    // the lambda = 0 rung is the nonstiff baseline, excluded from the ratio
    EXPECT_EQ(rep.rungs.front().lambda, 0.0);
    EXPECT_LT(rep.rungs.front().h_lambda, 10.0);
    EXPECT_GT(rep.rungs.front().error, rep.floor);
}

TEST(StiffnessSweep, ExplicitOnlyPairingDetectedAsUnstable) {
    const auto pair = load_method("imex-glm-p2");
    auto family = [](double lam) {
        auto prob = builtin("split-dahlquist", {{"lambda_e", -1.0}, {"lambda_i", lam}});
        // push the stiff term through the explicit slot
        const auto fE = prob.fE, fI = prob.fI;
        prob.fE = [fE, fI](const Vec& y) { return Vec(fE(y) + fI(y)); };
        prob.fI = [](const Vec& y) { return Vec(Vec::Zero(y.size())); };
        prob.fI_jac = [](const Vec& y) { return Mat(Mat::Zero(y.size(), y.size())); };
        return prob;
    };
    const auto rep = stiffness_sweep(pair, family, {-1e6}, 0.01, 2.0);
    EXPECT_TRUE(rep.rungs[0].unstable);
    EXPECT_FALSE(rep.pass);
}

TEST(EpsilonSweep, GuardRejectsLargeEps) {
    const auto pair = load_method("imex-glm-p2");
    auto family = [](double eps) { return builtin("kaps", {{"eps", eps}}); };
    try {
        epsilon_sweep(pair, family, {1.0}, 0.0625, 6, 1.0, 1.0);
        FAIL() << "expected UsageError";
    } catch (const UsageError& e) {
        EXPECT_NE(std::string(e.what()).find("eps"), std::string::npos);
    }
}

TEST(EpsilonSweep, IncludesDaeLimitColumn) {
    const auto pair = load_method("imex-glm-p2");
    auto family = [](double eps) { return builtin("kaps", {{"eps", eps}}); };
    const auto rep = epsilon_sweep(pair, family, {1e-4, 0.0}, 0.0625, 4, 1.0, 1.0);
    ASSERT_EQ(rep.columns.size(), 2u);
    EXPECT_EQ(rep.columns[1].eps, 0.0);
    EXPECT_GT(rep.columns[1].report.fitted_order_z, 1.5);
}

TEST(Recurrence, ScalarRegimes) {
    RecurrenceSpec spec;
    spec.nu = 2;

    spec.M = Mat::Constant(1, 1, 0.5);
    spec.noise = RecurrenceSpec::Noise::Smooth;
    EXPECT_NEAR(simulate_error_recurrence(spec).exponent, 2.0, 0.2);

    spec.M = Mat::Constant(1, 1, -1.0);
    EXPECT_NEAR(simulate_error_recurrence(spec).exponent, 2.0, 0.2);

    spec.M = Mat::Constant(1, 1, 1.0);
    spec.noise = RecurrenceSpec::Noise::Constant;
    EXPECT_NEAR(simulate_error_recurrence(spec).exponent, 1.0, 0.2);
}

TEST(Recurrence, MixedSpectrumBlocks) {
    RecurrenceSpec spec;
    spec.nu = 2;
    Mat M = Mat::Zero(3, 3);
    M(0, 0) = 0.5;
    M(0, 1) = 1.0;
    M(1, 1) = 0.5;  // Jordan block at 0.5

    M(2, 2) = 1.0;
    spec.M = M;
    spec.noise = RecurrenceSpec::Noise::Constant;
    EXPECT_NEAR(simulate_error_recurrence(spec).exponent, 1.0, 0.2);

    M(2, 2) = -1.0;
    spec.M = M;
    spec.noise = RecurrenceSpec::Noise::Smooth;
    EXPECT_NEAR(simulate_error_recurrence(spec).exponent, 2.0, 0.2);

    M(2, 2) = 0.3;
    spec.M = M;
    for (auto noise : {RecurrenceSpec::Noise::Constant, RecurrenceSpec::Noise::Smooth,
                       RecurrenceSpec::Noise::Rough}) {
        spec.noise = noise;
        EXPECT_NEAR(simulate_error_recurrence(spec).exponent, 2.0, 0.2);
    }
}

TEST(Recurrence, RejectsExpandingIteration) {
    RecurrenceSpec spec;
    spec.nu = 2;
    spec.M = Mat::Constant(1, 1, 1.5);
    EXPECT_THROW(simulate_error_recurrence(spec), NumericalError);
}

TEST(ConvergenceStudy, VdpSelfRefinedReference) {
    // no closed form: the h_min/64 self-solve provides the reference
    const auto pair = load_method("imex-glm-p2");
    const auto prob = builtin("vdp-spp", {{"eps", 1e-6}});
    StudyOptions opt;
    opt.tolerance = 0.3;
    const auto rep = run_convergence_study(pair, prob, 0.0625, 5, 0.5, opt);
    EXPECT_EQ(rep.reference_kind, ConvergenceReport::ReferenceKind::SelfRefined);
    EXPECT_NEAR(rep.fitted_order_x, 2.0, 0.3);
    EXPECT_NEAR(rep.fitted_order_z, 2.0, 0.3);
}

TEST(ConvergenceStudy, RungParallelismPreservesResults) {
    const auto pair = load_method("imex-glm-p2");
    const auto prob = builtin("kaps", {{"eps", 1e-4}});
    const auto serial = run_convergence_study(pair, prob, 0.0625, 5, 1.0);
    setenv("GLM_THREADS", "3", 1);
    const auto parallel = run_convergence_study(pair, prob, 0.0625, 5, 1.0);
    unsetenv("GLM_THREADS");
    for (std::size_t k = 0; k < serial.ladder.size(); ++k) {
        EXPECT_EQ(serial.ladder[k].error_x, parallel.ladder[k].error_x);
        EXPECT_EQ(serial.ladder[k].error_z, parallel.ladder[k].error_z);
    }
}

TEST(ConvergenceStudy, P2OnSplitDahlquist) {
    const auto pair = load_method("imex-glm-p2");
    const auto prob = builtin("split-dahlquist", {{"lambda_e", -1.0}, {"lambda_i", -10.0}});
    StudyOptions opt;
    opt.tolerance = 0.2;
    const auto rep = run_convergence_study(pair, prob, 0.0625, 6, 1.0, opt);
    EXPECT_NEAR(rep.fitted_order_x, 2.0, 0.2);
    EXPECT_TRUE(rep.pass);
}
