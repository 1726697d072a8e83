#pragma once

// Sequential minimal optimization for one simplex-constrained column of S:
//
//   min  -d's + 1/2 s'Hs   s.t.  s >= 0, sum(s) = 1
//
// Each step picks a pair (a, b), holds t = s_a + s_b fixed and moves weight
// between the two. Along that line the objective is a scalar quadratic in the
// split alpha = s_a / t, minimized in closed form and clipped to [0, 1].

#include "archetypal/core.hpp"

#include <algorithm>
#include <cmath>

namespace archetypal {

struct SmoResult {
    Vector s;
    double objective = 0.0;
    long pair_updates = 0;  // pairs visited, including no-op visits
    int sweeps = 0;
    bool converged = false;
};

namespace detail {

struct NoObserver {
    void operator()(long, const Vector&) const noexcept {}
};

/// Optimal split for pair (a, b). `grad` is H s - d at the current s.
/// Returns the change applied to s_a (s_b moves by the negative).
inline double smo_pair_step(const Matrix& H, const Vector& grad, Vector& s, Index a, Index b) {
    const double t = s(a) + s(b);
    if (!(t > 0.0)) return 0.0;

    const double slope = grad(a) - grad(b);  // df/d(s_a) along the pair line
    const double curvature = H(a, a) - H(a, b) - H(b, a) + H(b, b);
    const double alpha0 = s(a) / t;

    double alpha;
    if (curvature <= 1e-14 * t) {
        if (slope > 0.0) alpha = 0.0;
        else if (slope < 0.0) alpha = 1.0;
        else return 0.0;
    } else {
        alpha = std::clamp(alpha0 - slope / (t * curvature), 0.0, 1.0);
    }

    // The larger share is formed first; t minus it is then exact, so the
    // pair's total is preserved bit for bit.
    double new_a, new_b;
    if (alpha >= 0.5) {
        new_a = t * alpha;
        new_b = t - new_a;
    } else {
        new_b = t * (1.0 - alpha);
        new_a = t - new_b;
    }
    const double delta = new_a - s(a);
    if (delta == 0.0) return 0.0;
    // Reject steps that round to an increase.
    if (delta * slope + 0.5 * delta * delta * std::max(curvature, 0.0) >= 0.0) return 0.0;

    s(a) = new_a;
    s(b) = new_b;
    return delta;
}

}  // namespace detail

/// One closed-form pair update. s must lie on the simplex.
inline Vector smo_pair_update(const QuadraticModel& q, const Vector& s, Index a, Index b) {
    if (s.size() != q.size()) throw DimensionError("smo_pair_update: size mismatch");
    if (a == b || a < 0 || b < 0 || a >= s.size() || b >= s.size())
        throw DimensionError("smo_pair_update: need two distinct valid indices");
    Vector out = s;
    const Vector grad = q.gradient(s);
    detail::smo_pair_step(q.H, grad, out, a, b);
    return out;
}

/// Sweeps all pairs (a < b, lexicographic) until a sweep improves the
/// objective by less than smo_tolerance (relative) or smo_sweep_cap * K^2
/// pair updates have been spent. `observer(updates, s)` runs after every pair.
template <class Observer = detail::NoObserver>
SmoResult smo_solve_column(const QuadraticModel& q, const Vector& s_init, const SolverConfig& config,
                           Observer&& observer = {}) {
    const Index k = q.size();
    if (s_init.size() != k) throw DimensionError("smo_solve_column: size mismatch");

    SmoResult result;
    result.s = s_init;
    if (k == 1) {
        result.s(0) = 1.0;
        result.objective = q.objective(result.s);
        result.converged = true;
        return result;
    }

    const long budget = static_cast<long>(config.smo_sweep_cap) * k * k;
    Vector grad = q.gradient(result.s);
    double f = q.objective(result.s);

    while (result.pair_updates < budget) {
        const double f_before = f;
        for (Index a = 0; a < k && result.pair_updates < budget; ++a) {
            for (Index b = a + 1; b < k && result.pair_updates < budget; ++b) {
                const double delta = detail::smo_pair_step(q.H, grad, result.s, a, b);
                if (delta != 0.0) grad.noalias() += delta * (q.H.col(a) - q.H.col(b));
                ++result.pair_updates;
                observer(result.pair_updates, result.s);
            }
        }
        ++result.sweeps;
        // Refresh to stop drift in the incrementally updated gradient.
        grad = q.gradient(result.s);
        f = q.objective(result.s);
        const double decrease = f_before - f;
        if (decrease <= config.smo_tolerance * std::abs(f_before)) {
            result.converged = true;
            break;
        }
    }
    result.objective = f;
    return result;
}

}  // namespace archetypal
