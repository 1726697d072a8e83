#pragma once

// Planted archetypal problems with known ground truth.

#include "archetypal/core.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace archetypal {

struct GeneratorOptions {
    double noise = 0.0;                // gaussian: std. dev. of additive noise
    double archetype_sharpness = 7.0;  // bernoulli: logit scale of archetype profiles
    double dirichlet_alpha = 0.001;    // concentration of S_true columns (small -> near vertices)
};

struct PlantedProblem {
    DataMatrix X;
    Matrix C_true;      // N x K, one-hot on the planted pure observations
    Matrix S_true;      // K x N
    Matrix archetypes;  // M x K profiles the data was drawn from
    std::vector<Index> pure_columns;
    LikelihoodKind kind;
    std::uint64_t seed;
};

/// Draws K archetype profiles, mixes them with near-vertex S columns and
/// plants one pure observation per archetype, so the true archetypes are
/// exactly X*C_true in the noise-free gaussian case.
///   gaussian : X = A S + noise * N(0, 1)
///   bernoulli: X_ij ~ Bernoulli((A S)_ij), A_ik = sigmoid(sharpness * z)
inline PlantedProblem generate(LikelihoodKind kind, Index k, Index m, Index n, std::uint64_t seed,
                               const GeneratorOptions& opt = {}) {
    if (k < 1 || k > m || k > n) throw DimensionError("generate: need 1 <= K <= min(M, N)");
    if (opt.noise < 0) throw ConfigError("generate: noise must be >= 0");
    if (!(opt.archetype_sharpness > 0)) throw ConfigError("generate: archetype_sharpness must be > 0");
    if (!(opt.dirichlet_alpha > 0)) throw ConfigError("generate: dirichlet_alpha must be > 0");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::gamma_distribution<double> gamma(opt.dirichlet_alpha, 1.0);

    Matrix a(m, k);
    for (Index c = 0; c < k; ++c)
        for (Index i = 0; i < m; ++i) {
            const double z = normal(rng);
            a(i, c) = kind == LikelihoodKind::gaussian ? z : 1.0 / (1.0 + std::exp(-opt.archetype_sharpness * z));
        }

    Matrix s(k, n);
    for (Index j = 0; j < n; ++j) {
        double sum = 0.0;
        for (Index c = 0; c < k; ++c) {
            s(c, j) = gamma(rng);
            sum += s(c, j);
        }
        if (!(sum > 0.0)) {
            // All gammas underflowed; fall back to a random vertex.
            s.col(j).setZero();
            s(std::uniform_int_distribution<Index>(0, k - 1)(rng), j) = 1.0;
        } else {
            s.col(j) /= sum;
        }
    }

    // Plant the pure observations at distinct random positions.
    std::vector<Index> cols(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j) cols[static_cast<std::size_t>(j)] = j;
    std::vector<Index> pure;
    for (Index c = 0; c < k; ++c) {
        std::uniform_int_distribution<Index> pick(c, n - 1);
        std::swap(cols[static_cast<std::size_t>(c)], cols[static_cast<std::size_t>(pick(rng))]);
        pure.push_back(cols[static_cast<std::size_t>(c)]);
    }
    Matrix c_true = Matrix::Zero(n, k);
    for (Index c = 0; c < k; ++c) {
        s.col(pure[static_cast<std::size_t>(c)]).setZero();
        s(c, pure[static_cast<std::size_t>(c)]) = 1.0;
        c_true(pure[static_cast<std::size_t>(c)], c) = 1.0;
    }

    const Matrix mean = a * s;
    Matrix x(m, n);
    if (kind == LikelihoodKind::gaussian) {
        x = mean;
        if (opt.noise > 0)
            for (Index j = 0; j < n; ++j)
                for (Index i = 0; i < m; ++i) x(i, j) += opt.noise * normal(rng);
        return {DataMatrix::continuous(std::move(x)), std::move(c_true), std::move(s), std::move(a),
                std::move(pure), kind, seed};
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < m; ++i) x(i, j) = unif(rng) < mean(i, j) ? 1.0 : 0.0;
    return {DataMatrix::binary(std::move(x)), std::move(c_true), std::move(s), std::move(a), std::move(pure),
            kind, seed};
}

}  // namespace archetypal
