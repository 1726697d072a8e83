#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace archetypal;
using namespace testutil;

namespace {

const LikelihoodKind kKinds[] = {LikelihoodKind::gaussian, LikelihoodKind::bernoulli};
const SolverKind kSolvers[] = {SolverKind::smo_as, SolverKind::pcha};

}  // namespace

TEST(Fit, MonotoneAndFeasibleForEverySolverAndLikelihood) {
    for (auto kind : kKinds)
        for (auto solver : kSolvers)
            for (std::uint64_t seed = 0; seed < 3; ++seed) {
                const auto in = random_instance(kind, 15, 40, 3, 500 + seed);
                SolverConfig cfg;
                cfg.seed = seed;
                const auto r = fit(in.problem, 3, cfg, solver);
                EXPECT_TRUE(r.trace.monotone()) << to_string(kind) << " " << to_string(solver) << " seed " << seed;
                EXPECT_TRUE(validate_model(r.model).empty());
                EXPECT_EQ(r.trace.size(), static_cast<std::size_t>(2 * r.iterations + 1));
                EXPECT_NEAR(r.final_loss(), loss(in.problem, r.model), 1e-12 * std::max(1.0, r.final_loss()));
            }
}

TEST(Fit, DeterministicForFixedSeed) {
    for (auto solver : kSolvers) {
        const auto in = random_instance(LikelihoodKind::bernoulli, 12, 30, 3, 510);
        SolverConfig cfg;
        cfg.seed = 9;
        const auto a = fit(in.problem, 3, cfg, solver);
        const auto b = fit(in.problem, 3, cfg, solver);
        EXPECT_EQ(a.model.C(), b.model.C());
        EXPECT_EQ(a.model.S(), b.model.S());
        EXPECT_EQ(a.final_loss(), b.final_loss());
    }
}

TEST(Fit, ZeroIterationsReturnsInitialization) {
    const auto in = random_instance(LikelihoodKind::gaussian, 8, 12, 2, 511);
    SolverConfig cfg;
    cfg.max_outer_iterations = 0;
    const auto r = fit_smo_as(in.problem, in.model, cfg);
    EXPECT_EQ(r.model.C(), in.model.C());
    EXPECT_EQ(r.model.S(), in.model.S());
    EXPECT_EQ(r.trace.size(), 1u);
    EXPECT_EQ(r.iterations, 0);
}

TEST(Fit, BernoulliRequiresBinaryData) {
    std::mt19937_64 rng(512);
    const DataMatrix x = DataMatrix::continuous(random_normal(4, 6, rng));
    EXPECT_THROW(fit_smo_as(Problem(x, LikelihoodKind::bernoulli), 2, SolverConfig{}), ModeError);
}

TEST(Fit, RestartsAreSortedAndSeeded) {
    const auto in = random_instance(LikelihoodKind::bernoulli, 10, 25, 3, 513);
    SolverConfig cfg;
    cfg.restarts = 4;
    cfg.seed = 20;
    cfg.threads = 2;
    const auto fits = fit_restarts(in.problem, 3, cfg);
    ASSERT_EQ(fits.size(), 4u);
    std::vector<int> ids;
    for (std::size_t i = 0; i < fits.size(); ++i) {
        if (i > 0) EXPECT_LE(fits[i - 1].final_loss(), fits[i].final_loss());
        EXPECT_EQ(fits[i].seed, 20u + static_cast<std::uint64_t>(fits[i].restart_id));
        ids.push_back(fits[i].restart_id);
        // Each restart equals a standalone fit with its own seed.
        SolverConfig single = cfg;
        single.seed = fits[i].seed;
        EXPECT_EQ(fit_smo_as(in.problem, 3, single).final_loss(), fits[i].final_loss());
    }
    std::sort(ids.begin(), ids.end());
    EXPECT_EQ(ids, (std::vector<int>{0, 1, 2, 3}));
}

TEST(Fit, ThreadCountDoesNotChangeResults) {
    const auto in = random_instance(LikelihoodKind::gaussian, 10, 25, 3, 514);
    SolverConfig cfg;
    cfg.restarts = 3;
    const auto serial = fit_restarts(in.problem, 3, cfg);
    cfg.threads = 3;
    const auto parallel = fit_restarts(in.problem, 3, cfg);
    for (std::size_t i = 0; i < serial.size(); ++i) {
        EXPECT_EQ(serial[i].restart_id, parallel[i].restart_id);
        EXPECT_EQ(serial[i].model.S(), parallel[i].model.S());
    }
}

TEST(Fit, SmoAsAndPchaAgreeOnBernoulli) {
    GeneratorOptions opt;
    const auto pp = generate(LikelihoodKind::bernoulli, 3, 30, 80, 515, opt);
    const Problem p(pp.X, LikelihoodKind::bernoulli);
    SolverConfig cfg;
    cfg.seed = 1;
    const double a = fit_smo_as(p, 3, cfg).final_loss();
    const double b = fit_pcha(p, 3, cfg).final_loss();
    EXPECT_LE(std::abs(a - b), 0.05 * std::min(a, b));
}

TEST(Fit, GaussianPlantedRecovery) {
    const auto pp = generate(LikelihoodKind::gaussian, 3, 20, 60, 516);
    const Problem p(pp.X, LikelihoodKind::gaussian);
    SolverConfig cfg;
    cfg.restarts = 3;
    const auto fits = fit_restarts(p, 3, cfg);
    EXPECT_LE(fits.front().final_loss(), 1e-6 * pp.X.values().squaredNorm());
}
