#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace archetypal;
using namespace testutil;

namespace {

/// Gaussian data whose columns are all the same vector: every feasible model
/// reconstructs it exactly, so both gradients vanish.
Instance flat_instance() {
    std::mt19937_64 rng(31);
    const Vector x0 = random_normal(5, 1, rng).col(0);
    Matrix x(5, 8);
    for (Index j = 0; j < 8; ++j) x.col(j) = x0;
    return {Problem(DataMatrix::continuous(x), LikelihoodKind::gaussian),
            ArchetypalModel(random_stochastic(8, 2, rng), random_stochastic(2, 8, rng), LikelihoodKind::gaussian)};
}

}  // namespace

TEST(PchaUpdate, ZeroGradientIsNoOpAndShrinksStep) {
    const auto in = flat_instance();
    StepSizeState st;
    st.mu_C = st.mu_S = 1.0;
    const auto uc = pcha_update_C(in.problem, in.model, st);
    EXPECT_FALSE(uc.accepted);
    EXPECT_EQ(uc.halvings, 20);
    EXPECT_EQ(uc.model.C(), in.model.C());
    EXPECT_NEAR(uc.state.mu_C, std::ldexp(1.0, -20), 1e-20);
    EXPECT_NEAR(uc.loss, loss(in.problem, in.model), 1e-24);
    const auto us = pcha_update_S(in.problem, in.model, st);
    EXPECT_FALSE(us.accepted);
    EXPECT_EQ(us.model.S(), in.model.S());
    EXPECT_NEAR(us.state.mu_S, std::ldexp(1.0, -20), 1e-20);
}

TEST(PchaUpdate, AcceptedStepsDecreaseLossAndStayFeasible) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto in = random_instance(LikelihoodKind::bernoulli, 10, 20, 3, 400 + seed);
        const double before = loss(in.problem, in.model);
        StepSizeState st;
        st.mu_C = st.mu_S = 1e-2;
        const auto uc = pcha_update_C(in.problem, in.model, st);
        ASSERT_TRUE(uc.accepted) << "seed " << seed;
        EXPECT_LT(uc.loss, before);
        EXPECT_NEAR(uc.loss, loss(in.problem, uc.model), 1e-10 * before);
        EXPECT_TRUE(validate_model(uc.model).empty());
        EXPECT_EQ(uc.state.mu_C, StepSizeState::clamp(st.mu_C * std::pow(0.5, uc.halvings) * 2.0));

        const auto us = pcha_update_S(in.problem, uc.model, uc.state);
        ASSERT_TRUE(us.accepted) << "seed " << seed;
        EXPECT_LT(us.loss, uc.loss);
        EXPECT_TRUE(validate_model(us.model).empty());
    }
}

TEST(PchaUpdate, StepSizesStayClamped) {
    const auto in = random_instance(LikelihoodKind::gaussian, 6, 10, 2, 41);
    StepSizeState st;
    st.mu_C = st.mu_S = StepSizeState::kMax;
    auto u = pcha_update_S(in.problem, in.model, st);
    EXPECT_LE(u.state.mu_S, StepSizeState::kMax);
    EXPECT_GE(u.state.mu_S, StepSizeState::kMin);
}

TEST(FitPcha, ZeroIterationsReturnsInitialization) {
    const auto in = random_instance(LikelihoodKind::bernoulli, 8, 12, 2, 42);
    SolverConfig cfg;
    cfg.max_outer_iterations = 0;
    const auto r = fit_pcha(in.problem, in.model, cfg);
    EXPECT_EQ(r.model.C(), in.model.C());
    EXPECT_EQ(r.model.S(), in.model.S());
    EXPECT_EQ(r.trace.size(), 1u);
}

TEST(FitPcha, MonotoneFeasibleTraceBothLikelihoods) {
    for (LikelihoodKind kind : {LikelihoodKind::gaussian, LikelihoodKind::bernoulli}) {
        const auto in = random_instance(kind, 12, 30, 3, 43);
        SolverConfig cfg;
        cfg.seed = 5;
        const auto r = fit_pcha(in.problem, 3, cfg);
        EXPECT_TRUE(r.trace.monotone()) << to_string(kind);
        EXPECT_TRUE(validate_model(r.model).empty());
        EXPECT_EQ(r.trace.size(), static_cast<std::size_t>(2 * r.iterations + 1));
        EXPECT_NEAR(r.final_loss(), loss(in.problem, r.model), 1e-12 * r.final_loss());
    }
}

TEST(FitPcha, SingleArchetypeAgreesWithSmoAs) {
    for (LikelihoodKind kind : {LikelihoodKind::gaussian, LikelihoodKind::bernoulli}) {
        const auto in = random_instance(kind, 8, 15, 1, 44);
        SolverConfig cfg;
        cfg.rel_loss_tolerance = 1e-12;
        cfg.max_outer_iterations = 5000;
        const auto a = fit_pcha(in.problem, 1, cfg);
        const auto b = fit_smo_as(in.problem, 1, cfg);
        EXPECT_NEAR(a.final_loss(), b.final_loss(), 1e-6 * b.final_loss()) << to_string(kind);
    }
}

TEST(FitPcha, ReachesStationaryPointOnToy) {
    const auto in = random_instance(LikelihoodKind::bernoulli, 5, 10, 2, 45);
    SolverConfig cfg;
    cfg.rel_loss_tolerance = 1e-15;
    cfg.max_outer_iterations = 20000;
    const auto r = fit_pcha(in.problem, 2, cfg);
    const auto g = bpcha_gradients(in.problem.data(), smooth(in.problem.data(), 1e-3), r.model);
    EXPECT_LE(projected_gradient_norm(r.model.C(), g.C), 1e-5);
    EXPECT_LE(projected_gradient_norm(r.model.S(), g.S), 1e-5);
}

TEST(FitPcha, RejectsBadK) {
    const auto in = random_instance(LikelihoodKind::gaussian, 4, 6, 2, 46);
    EXPECT_THROW(fit_pcha(in.problem, 0, SolverConfig{}), std::exception);
    EXPECT_THROW(fit_pcha(in.problem, 7, SolverConfig{}), std::exception);
}
