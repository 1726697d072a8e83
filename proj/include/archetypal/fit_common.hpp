#pragma once

// Pieces shared by both fitting frameworks: the result type, random
// initialization, and a small parallel-for.

#include "archetypal/core.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <numeric>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace archetypal {

enum class SolverKind { smo_as, pcha };

inline std::string_view to_string(SolverKind s) { return s == SolverKind::pcha ? "pcha" : "smo-as"; }

inline SolverKind parse_solver(std::string_view s) {
    if (s == "smo-as") return SolverKind::smo_as;
    if (s == "pcha") return SolverKind::pcha;
    throw ConfigError("unknown solver '" + std::string(s) + "'");
}

struct FitResult {
    ArchetypalModel model;
    FitTrace trace;
    int restart_id = 0;
    std::uint64_t seed = 0;
    bool converged = false;
    int iterations = 0;
    std::vector<std::string> warnings;

    double final_loss() const { return trace.final_loss(); }
};

/// Random feasible starting point. C columns are sparse convex combinations
/// over min(5, N) distinct observations; S columns are uniform on the simplex.
inline ArchetypalModel initialize(Index n, Index k, LikelihoodKind kind, std::uint64_t seed) {
    if (k < 1 || k > n) throw DimensionError("initialize: need 1 <= K <= N");
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> expo(1.0);

    Matrix C = Matrix::Zero(n, k);
    const Index support = std::min<Index>(5, n);
    std::vector<Index> idx(static_cast<std::size_t>(n));
    for (Index c = 0; c < k; ++c) {
        std::iota(idx.begin(), idx.end(), Index{0});
        // Partial Fisher-Yates: the first `support` entries are a uniform sample.
        for (Index a = 0; a < support; ++a) {
            std::uniform_int_distribution<Index> pick(a, n - 1);
            std::swap(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(pick(rng))]);
        }
        double sum = 0.0;
        for (Index a = 0; a < support; ++a) {
            const double w = expo(rng) + 1e-12;
            C(idx[static_cast<std::size_t>(a)], c) = w;
            sum += w;
        }
        C.col(c) /= sum;
    }

    Matrix S(k, n);
    for (Index j = 0; j < n; ++j) {
        double sum = 0.0;
        for (Index a = 0; a < k; ++a) {
            S(a, j) = expo(rng) + 1e-12;
            sum += S(a, j);
        }
        S.col(j) /= sum;
    }
    return {std::move(C), std::move(S), kind};
}

namespace detail {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(i) for i in [0, n). Each index is visited exactly once; results
/// must not depend on scheduling.
template <class Fn>
void parallel_for(Index n, int threads, Fn&& fn) {
    const int t = std::min<Index>(resolve_threads(threads), std::max<Index>(n, 1));
    if (t <= 1) {
        for (Index i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(t));
    pool.reserve(static_cast<std::size_t>(t));
    for (int w = 0; w < t; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (Index i = w; i < n; i += t) fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline bool relative_change_below(double previous, double current, double tol) {
    if (current == 0.0) return true;
    const double denom = std::max(std::abs(previous), 1e-300);
    return (previous - current) / denom < tol;
}

}  // namespace detail

}  // namespace archetypal
