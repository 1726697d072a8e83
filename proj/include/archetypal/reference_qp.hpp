#pragma once

// Reference solver for simplex-constrained QPs, independent of the SMO path:
// accelerated projected gradient with Euclidean simplex projection, finished
// by an exact solve of the KKT system on the detected support. Used to
// benchmark and verify the column solvers.

#include "archetypal/core.hpp"
#include "archetypal/smo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace archetypal {

/// Euclidean projection onto {x >= 0, sum x = 1} (sort-based).
inline Vector project_to_simplex(const Vector& v) {
    const Index n = v.size();
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0;
    double theta = 0.0;
    for (Index i = 0; i < n; ++i) {
        cumsum += u[static_cast<std::size_t>(i)];
        const double t = (cumsum - 1.0) / static_cast<double>(i + 1);
        if (u[static_cast<std::size_t>(i)] - t > 0.0) theta = t;
    }
    return (v.array() - theta).cwiseMax(0.0);
}

struct ReferenceSolution {
    Vector x;
    double objective;
    double stationarity;  // ||x - P(x - g / L)||_inf
    long iterations;
};

inline ReferenceSolution reference_simplex_qp(const QuadraticModel& q, double tol = 1e-12, long max_iter = 2000000) {
    const Index n = q.size();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(q.H, Eigen::EigenvaluesOnly);
    const double lip = std::max(eig.eigenvalues().maxCoeff(), 1e-300);

    auto stationarity = [&](const Vector& x) {
        return (x - project_to_simplex(x - q.gradient(x) / lip)).cwiseAbs().maxCoeff();
    };

    Vector x = Vector::Constant(n, 1.0 / static_cast<double>(n));
    Vector y = x;
    double t = 1.0;
    double fx = q.objective(x);
    long it = 0;
    bool restarted = false;
    for (; it < max_iter; ++it) {
        Vector xn = project_to_simplex(y - q.gradient(y) / lip);
        const double fn = q.objective(xn);
        if (fn > fx && !restarted) {
            // Adaptive restart of the momentum.
            t = 1.0;
            y = x;
            restarted = true;
            continue;
        }
        restarted = false;
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = xn + ((t - 1.0) / tn) * (xn - x);
        x = std::move(xn);
        fx = fn;
        t = tn;
        if (it % 16 == 0 && stationarity(x) <= tol) break;
    }

    // Polish: exact equality-constrained minimizer on the support, if feasible.
    std::vector<Index> support;
    for (Index i = 0; i < n; ++i)
        if (x(i) > 1e-9) support.push_back(i);
    const auto m = static_cast<Index>(support.size());
    if (m > 0) {
        Matrix kkt = Matrix::Zero(m + 1, m + 1);
        Vector rhs(m + 1);
        for (Index a = 0; a < m; ++a) {
            for (Index b = 0; b < m; ++b) kkt(a, b) = q.H(support[a], support[b]);
            kkt(a, m) = 1.0;
            kkt(m, a) = 1.0;
            rhs(a) = q.d(support[a]);
        }
        rhs(m) = 1.0;
        const Vector sol = kkt.fullPivLu().solve(rhs);
        if (sol.head(m).allFinite() && (sol.head(m).array() >= 0.0).all()) {
            Vector xp = Vector::Zero(n);
            for (Index a = 0; a < m; ++a) xp(support[a]) = sol(a);
            xp /= xp.sum();
            if (q.objective(xp) <= fx) {
                x = xp;
                fx = q.objective(x);
            }
        }
    }
    return {x, fx, stationarity(x), it};
}

/// Random column subproblem shaped like an archetypal S-update: H = 2 A'A and
/// d = 2 A'x for K archetypes in `m` features and a target x drawn near the
/// archetypes' hull.
inline QuadraticModel random_column_qp(Index k, std::mt19937_64& rng, Index m = 0) {
    if (m <= 0) m = std::max<Index>(4 * k, 20);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);
    Matrix a(m, k);
    for (Index c = 0; c < k; ++c)
        for (Index i = 0; i < m; ++i) a(i, c) = normal(rng);
    Vector w(k);
    for (Index c = 0; c < k; ++c) w(c) = expo(rng);
    w /= w.sum();
    Vector x = a * w;
    for (Index i = 0; i < m; ++i) x(i) += normal(rng);
    return {2.0 * a.transpose() * x, 2.0 * a.transpose() * a, 0};
}

struct SmoBenchRow {
    Index K = 0;
    int trials = 0;
    double within_k2 = 0.0;       // fraction reaching the gap within K^2 pair updates
    double within_2k2 = 0.0;      // ... within 2 K^2
    double median_updates = 0.0;  // pair updates to reach the gap (capped runs count as the cap)
    double median_sweeps = 0.0;   // the same in full sweeps of K(K-1)/2 pairs
    long max_updates = 0;
    double seconds = 0.0;
};

/// Pair updates SMO needs, from the uniform start, to bring the objective
/// within gap_tol * (1 + |optimum|) of the reference optimum. Returns -1 if
/// that does not happen within `cap` updates.
inline long smo_updates_to_gap(const QuadraticModel& q, double gap_tol = 1e-6, long cap = 0) {
    const Index k = q.size();
    const ReferenceSolution ref = reference_simplex_qp(q);
    const double threshold = ref.objective + gap_tol * (1.0 + std::abs(ref.objective));
    const Vector start = Vector::Constant(k, 1.0 / static_cast<double>(k));
    if (q.objective(start) <= threshold) return 0;
    if (cap <= 0) cap = 100 * k * k;
    SolverConfig cfg;
    cfg.smo_tolerance = 1e-300;
    cfg.smo_sweep_cap = static_cast<int>((cap + k * k - 1) / (k * k));
    long hit = -1;
    smo_solve_column(q, start, cfg, [&](long updates, const Vector& s) {
        if (hit < 0 && q.objective(s) <= threshold) hit = updates;
    });
    return hit;
}

inline SmoBenchRow smo_oracle_benchmark(Index k, int trials, std::uint64_t seed, double gap_tol = 1e-6) {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(seed + 7919ULL * static_cast<std::uint64_t>(k));
    const long cap = 100 * k * k;
    std::vector<double> updates;
    SmoBenchRow row;
    row.K = k;
    row.trials = trials;
    int in_k2 = 0, in_2k2 = 0;
    for (int t = 0; t < trials; ++t) {
        const QuadraticModel q = random_column_qp(k, rng);
        long u = smo_updates_to_gap(q, gap_tol, cap);
        if (u < 0) u = cap;
        in_k2 += u <= k * k;
        in_2k2 += u <= 2 * k * k;
        row.max_updates = std::max(row.max_updates, u);
        updates.push_back(static_cast<double>(u));
    }
    std::sort(updates.begin(), updates.end());
    const auto n = updates.size();
    const double med = n == 0 ? 0.0 : (n % 2 ? updates[n / 2] : 0.5 * (updates[n / 2 - 1] + updates[n / 2]));
    row.within_k2 = trials ? static_cast<double>(in_k2) / trials : 0.0;
    row.within_2k2 = trials ? static_cast<double>(in_2k2) / trials : 0.0;
    row.median_updates = med;
    row.median_sweeps = k > 1 ? med / (0.5 * static_cast<double>(k * (k - 1))) : 0.0;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return row;
}

}  // namespace archetypal
