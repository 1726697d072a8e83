#pragma once

// Nonnegativity active-set solver for one column of C. The simplex equality
// is imposed as a quadratic penalty and a small ridge keeps the system full
// rank:
//
//   min  -d'c + 1/2 c'Hc + lambda/2 (1 - 1'c)^2 + eps/2 ||c - z||^2,  c >= 0
//
// which, for z = 0, is  -(d + lambda 1)'c + 1/2 c'(H + lambda 11' + eps I)c.
// lambda = lambda_scale * mean(H_AA.^2) over the active set A and
// eps = eps_scale * lambda, both refreshed whenever A changes.
//
// On A the stationarity system is solved without forming lambda 11' (lambda
// is typically ~1e9 times the square of H's scale): with M = H_AA + eps I,
// u = M^-1 d_A, v = M^-1 1,
//   c_A = u + mu v,   mu = lambda (1 - 1'u) / (1 + lambda 1'v),
// where mu = lambda (1 - 1'c) is the penalty's multiplier.

#include "archetypal/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace archetypal {

/// Dense curvature adapter for the active-set solver.
class DenseCurvature {
public:
    explicit DenseCurvature(const Matrix& h) : h_(&h) {}

    Index size() const noexcept { return h_->rows(); }
    Vector apply(const Vector& c) const { return *h_ * c; }
    Matrix block(const std::vector<Index>& idx) const {
        const auto n = static_cast<Index>(idx.size());
        Matrix out(n, n);
        for (Index a = 0; a < n; ++a)
            for (Index b = 0; b < n; ++b) out(a, b) = (*h_)(idx[a], idx[b]);
        return out;
    }
    double mean_square() const { return h_->squaredNorm() / static_cast<double>(h_->size()); }

private:
    const Matrix* h_;
};

struct ActiveSetOptions {
    double lambda_scale = 1e9;
    double eps_scale = 1e-15;
    int max_changes = 0;                 // 0 -> 3N
    std::optional<Vector> ridge_center;  // empty -> ridge at the origin
    double lambda_override = 0.0;        // > 0 pins lambda instead of recomputing it

    static ActiveSetOptions from(const SolverConfig& cfg) {
        ActiveSetOptions o;
        o.lambda_scale = cfg.active_set_lambda_scale;
        o.eps_scale = cfg.active_set_eps_scale;
        o.max_changes = cfg.active_set_max_changes;
        return o;
    }
};

struct ActiveSetResult {
    Vector c;
    std::vector<Index> active;  // ascending
    double lambda = 0.0;
    double epsilon = 0.0;
    double multiplier = 0.0;  // lambda * (1 - sum c)
    int changes = 0;
    bool large_active_set = false;  // |A| > N/2 at some point
};

struct ActiveSetNonConvergence : Error {
    ActiveSetNonConvergence(const std::string& what, ActiveSetResult best_iterate)
        : Error(what), best(std::move(best_iterate)) {}
    ActiveSetResult best;
};

/// lambda_k from the active block of H, with the documented fallbacks.
inline double penalty_lambda(const Matrix& h_active, double lambda_scale, double full_mean_square) {
    double ms = h_active.size() > 0 ? h_active.squaredNorm() / static_cast<double>(h_active.size()) : 0.0;
    if (ms > 0.0) return lambda_scale * ms;
    if (full_mean_square > 0.0) return lambda_scale * full_mean_square;
    return 1.0;
}

struct PenalizedSystem {
    Vector d;  // d + lambda 1
    Matrix H;  // H + lambda 11' + eps I
    double lambda;
    double epsilon;
};

/// The augmented system for active set `active` (all indices when empty).
inline PenalizedSystem penalized_quadratic(const QuadraticModel& q, double lambda_scale, double eps_scale,
                                           std::vector<Index> active = {}) {
    const Index n = q.size();
    if (active.empty())
        for (Index j = 0; j < n; ++j) active.push_back(j);
    const DenseCurvature curv(q.H);
    const double lambda = penalty_lambda(curv.block(active), lambda_scale, curv.mean_square());
    const double eps = lambda * eps_scale;
    PenalizedSystem out{q.d.array() + lambda, q.H, lambda, eps};
    out.H.array() += lambda;
    out.H.diagonal().array() += eps;
    return out;
}

namespace detail {

struct SubproblemSolution {
    Vector z;  // on the active set, in active-set order
    double multiplier;
    double lambda;
    double epsilon;
};

template <class Curvature>
SubproblemSolution solve_on_active(const Curvature& h, const Vector& d_eff_full, const Vector* center,
                                   const std::vector<Index>& active, const ActiveSetOptions& opt,
                                   double& full_mean_square) {
    const auto m = static_cast<Index>(active.size());
    const Matrix h_aa = h.block(active);
    double lambda = opt.lambda_override;
    if (!(lambda > 0.0)) {
        double ms = h_aa.squaredNorm() / static_cast<double>(h_aa.size());
        if (!(ms > 0.0) && full_mean_square < 0.0) full_mean_square = h.mean_square();
        lambda = penalty_lambda(h_aa, opt.lambda_scale, std::max(full_mean_square, 0.0));
    }
    const double eps = lambda * opt.eps_scale;

    Matrix sys = h_aa;
    sys.diagonal().array() += eps;
    Vector rhs(m);
    for (Index a = 0; a < m; ++a) {
        rhs(a) = d_eff_full(active[a]);
        if (center) rhs(a) += eps * (*center)(active[a]);
    }
    Matrix both(m, 2);
    both.col(0) = rhs;
    both.col(1).setOnes();

    Matrix uv;
    Eigen::LLT<Matrix> llt(sys);
    if (llt.info() == Eigen::Success) {
        uv = llt.solve(both);
    } else {
        uv = sys.ldlt().solve(both);
    }
    const double a_sum = uv.col(0).sum();
    const double b_sum = uv.col(1).sum();
    const double mu = lambda * (1.0 - a_sum) / (1.0 + lambda * b_sum);
    return {uv.col(0) + mu * uv.col(1), mu, lambda, eps};
}

}  // namespace detail

/// Penalized NNLS in normal-equation form (Lawson-Hanson / FNNLS exchange
/// rules). A is seeded from the support of c_init, or from the largest entry
/// of d when c_init is zero. Throws ActiveSetNonConvergence after
/// max_changes (default 3N) set changes.
template <class Curvature>
ActiveSetResult active_set_solve(const Curvature& h, const Vector& d, const Vector& c_init,
                                 const ActiveSetOptions& opt = {}) {
    const Index n = h.size();
    if (d.size() != n || c_init.size() != n) throw DimensionError("active_set_solve: size mismatch");
    const Vector* center = opt.ridge_center ? &*opt.ridge_center : nullptr;
    if (center && center->size() != n) throw DimensionError("active_set_solve: ridge center size mismatch");
    const int max_changes = opt.max_changes > 0 ? opt.max_changes : static_cast<int>(3 * n);

    std::vector<bool> in_set(static_cast<std::size_t>(n), false);
    std::vector<Index> active;
    Vector c = Vector::Zero(n);
    for (Index j = 0; j < n; ++j) {
        if (c_init(j) > 0.0) {
            in_set[static_cast<std::size_t>(j)] = true;
            active.push_back(j);
            c(j) = c_init(j);
        }
    }

    ActiveSetResult res;
    double full_ms = -1.0;  // lazily computed
    double mu = 0.0;

    auto snapshot = [&]() {
        res.c = c;
        res.active = active;
        res.multiplier = mu;
    };
    auto bump = [&]() {
        ++res.changes;
        if (static_cast<Index>(active.size()) * 2 > n) res.large_active_set = true;
        if (res.changes > max_changes) {
            snapshot();
            throw ActiveSetNonConvergence(
                "active set did not converge within " + std::to_string(max_changes) + " changes", res);
        }
    };

    // Drives c to the solution on the current set, dropping indices that
    // would go nonpositive (interpolating from the feasible c).
    auto settle = [&]() {
        while (!active.empty()) {
            const auto sol = detail::solve_on_active(h, d, center, active, opt, full_ms);
            res.lambda = sol.lambda;
            res.epsilon = sol.epsilon;
            bool feasible = true;
            for (Index a = 0; a < sol.z.size(); ++a)
                if (!(sol.z(a) > 0.0)) feasible = false;
            if (feasible) {
                for (Index a = 0; a < sol.z.size(); ++a) c(active[a]) = sol.z(a);
                mu = sol.multiplier;
                return;
            }
            double step = 1.0;
            Index blocking = -1;
            for (Index a = 0; a < sol.z.size(); ++a) {
                const double cj = c(active[a]);
                if (sol.z(a) > 0.0) continue;
                const double s = cj / (cj - sol.z(a));
                if (blocking < 0 || s < step) {
                    step = s;
                    blocking = a;
                }
            }
            for (Index a = 0; a < sol.z.size(); ++a) c(active[a]) += step * (sol.z(a) - c(active[a]));
            c(active[blocking]) = 0.0;
            const double tiny = 1e-14 * std::max(1.0, c.maxCoeff());
            std::vector<Index> kept;
            for (Index j : active) {
                if (c(j) > tiny) {
                    kept.push_back(j);
                } else {
                    c(j) = 0.0;
                    in_set[static_cast<std::size_t>(j)] = false;
                }
            }
            active = std::move(kept);
            bump();
        }
        mu = 0.0;
    };

    settle();

    std::vector<bool> rejected(static_cast<std::size_t>(n), false);
    for (;;) {
        // Negative gradient of the penalized objective at c.
        Vector w;
        if (active.empty()) {
            w = d;
            if (center) w += res.epsilon * *center;
            w.array() += std::max(res.lambda, 1.0);
        } else {
            w = d - h.apply(c) - res.epsilon * c;
            if (center) w += res.epsilon * *center;
            w.array() += mu;
        }
        const double scale = std::max({d.cwiseAbs().maxCoeff(), std::abs(mu), 1e-300});
        const double tol = 1e-10 * scale;

        Index enter = -1;
        double best = tol;
        for (Index j = 0; j < n; ++j) {
            const auto js = static_cast<std::size_t>(j);
            if (in_set[js] || rejected[js]) continue;
            if (w(j) > best) {
                best = w(j);
                enter = j;
            }
        }
        if (enter < 0) break;

        const std::vector<Index> before = active;
        const Vector c_before = c;
        active.insert(std::upper_bound(active.begin(), active.end(), enter), enter);
        in_set[static_cast<std::size_t>(enter)] = true;
        bump();
        settle();
        if (c(enter) > 0.0) {
            std::fill(rejected.begin(), rejected.end(), false);
        } else {
            // Entering index came straight back out: restore and skip it.
            for (Index j : active) in_set[static_cast<std::size_t>(j)] = false;
            active = before;
            for (Index j : active) in_set[static_cast<std::size_t>(j)] = true;
            c = c_before;
            rejected[static_cast<std::size_t>(enter)] = true;
            settle();
        }
    }

    snapshot();
    return res;
}

/// Convenience overload on a dense quadratic model.
inline ActiveSetResult active_set_solve(const QuadraticModel& q, const Vector& c_init,
                                        const ActiveSetOptions& opt = {}) {
    return active_set_solve(DenseCurvature(q.H), q.d, c_init, opt);
}

/// Penalized objective (up to a constant) at c for given lambda and eps,
/// evaluated without forming lambda 11'.
inline double penalized_objective(const QuadraticModel& q, const Vector& c, double lambda, double eps) {
    const double defect = 1.0 - c.sum();
    return -q.d.dot(c) + 0.5 * c.dot(q.H * c) + 0.5 * eps * c.squaredNorm() + 0.5 * lambda * defect * defect;
}

}  // namespace archetypal
