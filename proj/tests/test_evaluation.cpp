#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace archetypal;
using namespace testutil;

namespace {

Matrix one_hot(const std::vector<Index>& labels, Index k) {
    Matrix s = Matrix::Zero(k, static_cast<Index>(labels.size()));
    for (std::size_t j = 0; j < labels.size(); ++j) s(labels[j], static_cast<Index>(j)) = 1.0;
    return s;
}

std::vector<Index> balanced_labels(Index n, Index k, std::mt19937_64& rng) {
    std::vector<Index> l(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j) l[static_cast<std::size_t>(j)] = j % k;
    std::shuffle(l.begin(), l.end(), rng);
    return l;
}

}  // namespace

TEST(Nmi, IdentityOnHardAssignmentsIsExactlyOne) {
    std::mt19937_64 rng(600);
    for (Index k : {2, 3, 5}) {
        const Matrix s = one_hot(balanced_labels(50, k, rng), k);
        EXPECT_EQ(nmi(s, s), 1.0);
    }
}

TEST(Nmi, RowPermutationInvariant) {
    std::mt19937_64 rng(601);
    for (int trial = 0; trial < 100; ++trial) {
        const Index k = 2 + trial % 6;
        const Matrix a = random_stochastic(k, 60, rng);
        const Matrix b = random_stochastic(k, 60, rng);
        Eigen::PermutationMatrix<Eigen::Dynamic> perm(k);
        perm.setIdentity();
        std::shuffle(perm.indices().data(), perm.indices().data() + k, rng);
        EXPECT_EQ(nmi(a, b), nmi(perm * a, b));
        EXPECT_EQ(nmi(a, b), nmi(a, perm * b));
    }
    const Matrix h = one_hot({0, 0, 1, 1, 2, 2}, 3);
    const Matrix relabeled = one_hot({2, 2, 0, 0, 1, 1}, 3);
    EXPECT_EQ(nmi(h, relabeled), 1.0);
}

TEST(Nmi, IndependentBalancedAssignmentsNearZero) {
    std::mt19937_64 rng(602);
    const Matrix a = one_hot(balanced_labels(10000, 4, rng), 4);
    const Matrix b = one_hot(balanced_labels(10000, 4, rng), 4);
    EXPECT_LE(nmi(a, b), 0.01);
}

TEST(Nmi, SymmetricAndInUnitInterval) {
    std::mt19937_64 rng(603);
    for (int trial = 0; trial < 50; ++trial) {
        const Index ka = 1 + trial % 5, kb = 1 + (trial / 5) % 4;
        const Matrix a = random_stochastic(ka, 30, rng);
        const Matrix b = random_stochastic(kb, 30, rng);
        for (auto norm : {NmiNormalization::max, NmiNormalization::mean}) {
            const double v = nmi(a, b, norm);
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
            EXPECT_NEAR(v, nmi(b, a, norm), 1e-14);
        }
    }
}

TEST(Nmi, SoftSelfNmiBelowOne) {
    Matrix s(2, 2);
    s << 0.5, 0.5, 0.5, 0.5;
    // Uniform columns carry no information; entropy is log 2 and MI is zero.
    EXPECT_NEAR(nmi(s, s), 0.0, 1e-15);
}

TEST(Nmi, DegenerateSingleComponentIsOne) {
    const Matrix s = Matrix::Ones(1, 7);
    EXPECT_EQ(nmi(s, s), 1.0);
}

TEST(Nmi, Errors) {
    EXPECT_THROW(nmi(Matrix::Ones(2, 3), Matrix::Ones(2, 4)), DimensionError);
    Matrix neg = Matrix::Ones(2, 3);
    neg(0, 0) = -0.1;
    EXPECT_THROW(nmi(neg, Matrix::Ones(2, 3)), DomainError);
}

TEST(NmiReport, SingleRunReportsOne) {
    std::mt19937_64 rng(604);
    const auto rep = nmi_report(std::vector<Matrix>{random_stochastic(3, 10, rng)});
    EXPECT_EQ(rep.mean_offdiag, 1.0);
    EXPECT_EQ(rep.pairwise.rows(), 1);
}

TEST(NmiReport, MeanOfUpperTriangle) {
    std::mt19937_64 rng(605);
    std::vector<Matrix> s;
    for (int i = 0; i < 4; ++i) s.push_back(random_stochastic(3, 40, rng));
    const auto rep = nmi_report(s);
    double sum = 0.0;
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b) sum += nmi(s[a], s[b]);
    EXPECT_NEAR(rep.mean_offdiag, sum / 6.0, 1e-15);
    EXPECT_TRUE(rep.pairwise.isApprox(rep.pairwise.transpose()));
    EXPECT_TRUE((rep.pairwise.diagonal().array() == 1.0).all());
}

TEST(SweepK, RowsPerKWithStreaming) {
    const auto in = random_instance(LikelihoodKind::bernoulli, 8, 20, 2, 606);
    SolverConfig cfg;
    cfg.restarts = 2;
    std::vector<Index> seen;
    const auto rows = sweep_k(in.problem, {1, 2, 3}, SolverKind::smo_as, cfg,
                              [&](const SweepRow& r) { seen.push_back(r.K); });
    EXPECT_EQ(seen, (std::vector<Index>{1, 2, 3}));
    ASSERT_EQ(rows.size(), 3u);
    // K = 1 has a single feasible S, so every restart agrees exactly.
    EXPECT_EQ(rows[0].mean_nmi, 1.0);
    for (const auto& r : rows) {
        EXPECT_FALSE(r.error.has_value());
        EXPECT_EQ(r.fits.size(), 2u);
        EXPECT_EQ(r.best_loss, r.fits.front().final_loss());
    }
}

TEST(SweepK, RejectsBadRange) {
    const auto in = random_instance(LikelihoodKind::gaussian, 4, 6, 2, 607);
    EXPECT_THROW(sweep_k(in.problem, {}, SolverKind::smo_as, SolverConfig{}), ConfigError);
    EXPECT_THROW(sweep_k(in.problem, {0, 1}, SolverKind::smo_as, SolverConfig{}), ConfigError);
    EXPECT_THROW(sweep_k(in.problem, {7}, SolverKind::smo_as, SolverConfig{}), ConfigError);
}

TEST(SweepK, FailingKIsRecordedAndSweepContinues) {
    // Restarts = 0 passes the range check but fails inside each fit.
    const auto in = random_instance(LikelihoodKind::gaussian, 4, 6, 2, 608);
    SolverConfig cfg;
    cfg.restarts = 0;
    std::vector<Index> seen;
    const auto rows = sweep_k(in.problem, {1, 2}, SolverKind::smo_as, cfg,
                              [&](const SweepRow& r) { seen.push_back(r.K); });
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(seen.size(), 2u);
    for (const auto& r : rows) {
        EXPECT_TRUE(r.error.has_value());
        EXPECT_TRUE(std::isnan(r.best_loss));
        EXPECT_TRUE(r.fits.empty());
    }
}
