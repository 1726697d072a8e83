#pragma once

// Alternating SMO / active-set fitting ("SMO-AS").
//
// Each outer iteration runs two half-steps:
//   S: every column of S is re-solved by SMO on its second-order model;
//   C: columns of C are re-solved one at a time by the penalized active-set
//      method, each seeing the latest values of the others, then renormalized.
// The true loss is recorded after each half-step. With damping enabled a
// half-step that raises the loss is pulled back along the segment from the
// old iterate (both ends are column-stochastic, so every point between is).

#include "archetypal/active_set.hpp"
#include "archetypal/core.hpp"
#include "archetypal/fit_common.hpp"
#include "archetypal/likelihood.hpp"
#include "archetypal/pcha.hpp"
#include "archetypal/smo.hpp"

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace archetypal {

namespace detail {

struct DampedStep {
    Matrix value;
    double loss;
    bool damped;
};

/// Picks the best of old + beta (new - old), beta = shrink^t, t = 1..trials.
/// Falls back to `old` if nothing beats it.
template <class LossFn>
DampedStep damp_half_step(const Matrix& old, Matrix proposed, double old_loss, double proposed_loss,
                          const SolverConfig& cfg, LossFn&& loss_of) {
    if (!cfg.step_damping || proposed_loss <= old_loss) return {std::move(proposed), proposed_loss, false};
    const Matrix dir = proposed - old;
    Matrix best = old;
    double best_loss = old_loss;
    double beta = 1.0;
    for (int t = 0; t < cfg.damping_trials; ++t) {
        beta *= cfg.damping_shrink;
        Matrix cand = old + beta * dir;
        double l;
        try {
            l = loss_of(cand);
        } catch (const DomainError&) {
            continue;
        }
        if (l < best_loss) {
            best_loss = l;
            best = std::move(cand);
        }
    }
    return {std::move(best), best_loss, true};
}

inline Matrix smo_half_step(const Problem& p, const Matrix& C, const Matrix& S, const SolverConfig& cfg) {
    const Matrix archetypes = p.base() * C;
    const Matrix r = archetypes * S;
    Matrix out(S.rows(), S.cols());
    if (p.kind() == LikelihoodKind::gaussian) {
        // H = 2 A'A is shared by every column; the matched linear term is 2 A'x_j.
        const Matrix H = 2.0 * archetypes.transpose() * archetypes;
        const Matrix lin = 2.0 * archetypes.transpose() * p.X();
        parallel_for(S.cols(), cfg.threads, [&](Index j) {
            const QuadraticModel q{lin.col(j), H, j};
            out.col(j) = smo_solve_column(q, S.col(j), cfg).s;
        });
    } else {
        parallel_for(S.cols(), cfg.threads, [&](Index j) {
            const QuadraticModel q = s_quadratic_at(p.X(), archetypes, r, S.col(j), j, p.kind());
            out.col(j) = smo_solve_column(q, S.col(j), cfg).s;
        });
    }
    return out;
}

struct CHalfStep {
    Matrix C;
    std::vector<std::string> warnings;
};

inline CHalfStep active_set_half_step(const Problem& p, const Matrix& C_in, const Matrix& S,
                                      const SolverConfig& cfg) {
    CHalfStep out{C_in, {}};
    Matrix& C = out.C;
    Matrix r = p.base() * C * S;
    ActiveSetOptions opt = ActiveSetOptions::from(cfg);

    for (Index k = 0; k < C.cols(); ++k) {
        const CExpansion e = c_expansion_at(p.X(), p.base(), r, C, S, k, p.kind());
        const Vector c_old = C.col(k);
        if (cfg.ridge_anchor == RidgeAnchor::current) opt.ridge_center = c_old;
        else opt.ridge_center.reset();

        ActiveSetResult res;
        try {
            res = active_set_solve(e.curvature, e.d, c_old, opt);
        } catch (const ActiveSetNonConvergence& nc) {
            out.warnings.push_back("archetype " + std::to_string(k) + ": " + nc.what());
            res = nc.best;
        }
        if (res.large_active_set)
            out.warnings.push_back("archetype " + std::to_string(k) + ": active set exceeded N/2");

        const double sum = res.c.sum();
        if (!(sum > 0.0)) continue;
        const Vector c_new = res.c / sum;
        r.noalias() += (p.base() * (c_new - c_old)) * S.row(k);
        C.col(k) = c_new;
    }
    return out;
}

}  // namespace detail

/// SMO-AS fit from an explicit starting model.
inline FitResult fit_smo_as(const Problem& p, ArchetypalModel start, const SolverConfig& config) {
    config.validate();
    if (p.kind() == LikelihoodKind::bernoulli && p.data().mode() != DataMode::binary)
        throw ModeError("bernoulli fits require binary data");
    if (start.N() != p.N()) throw DimensionError("fit_smo_as: model and data disagree on N");

    detail::Stopwatch clock;
    FitResult out{std::move(start), {}, 0, config.seed, false, 0, {}};
    Matrix C = out.model.C();
    Matrix S = out.model.S();
    double current = loss(p, out.model);
    out.trace.record(0, HalfStep::init, current, clock.seconds());

    const auto loss_with = [&](const Matrix& c, const Matrix& s) {
        return loss(p.X(), reconstruct(p.base(), c, s), p.kind());
    };

    for (int it = 1; it <= config.max_outer_iterations; ++it) {
        const double before = current;

        {
            Matrix proposed = detail::smo_half_step(p, C, S, config);
            const double l = loss_with(C, proposed);
            auto step = detail::damp_half_step(S, std::move(proposed), current, l, config,
                                               [&](const Matrix& s) { return loss_with(C, s); });
            step.damped ? ++out.trace.damped_steps : ++out.trace.accepted_steps;
            S = std::move(step.value);
            current = step.loss;
            out.trace.record(it, HalfStep::S, current, clock.seconds());
        }

        {
            detail::CHalfStep half = detail::active_set_half_step(p, C, S, config);
            for (auto& w : half.warnings) out.warnings.push_back("iteration " + std::to_string(it) + ", " + w);
            const double l = loss_with(half.C, S);
            auto step = detail::damp_half_step(C, std::move(half.C), current, l, config,
                                               [&](const Matrix& c) { return loss_with(c, S); });
            step.damped ? ++out.trace.damped_steps : ++out.trace.accepted_steps;
            C = std::move(step.value);
            current = step.loss;
            out.trace.record(it, HalfStep::C, current, clock.seconds());
        }

        out.iterations = it;
        if (detail::relative_change_below(before, current, config.rel_loss_tolerance)) {
            out.converged = true;
            break;
        }
    }
    out.model = ArchetypalModel(std::move(C), std::move(S), p.kind());
    return out;
}

inline FitResult fit_smo_as(const Problem& p, Index k, const SolverConfig& config) {
    return fit_smo_as(p, initialize(p.N(), k, p.kind(), config.seed), config);
}

inline FitResult fit(const Problem& p, Index k, const SolverConfig& config, SolverKind solver) {
    return solver == SolverKind::pcha ? fit_pcha(p, k, config) : fit_smo_as(p, k, config);
}

/// `restarts` independent fits with seeds seed, seed+1, ...; sorted by final
/// loss (ties keep restart order).
inline std::vector<FitResult> fit_restarts(const Problem& p, Index k, const SolverConfig& config,
                                           SolverKind solver = SolverKind::smo_as) {
    config.validate();
    std::vector<std::optional<FitResult>> slots(static_cast<std::size_t>(config.restarts));
    SolverConfig inner = config;
    inner.threads = 1;
    detail::parallel_for(config.restarts, config.threads, [&](Index r) {
        SolverConfig c = inner;
        c.seed = config.seed + static_cast<std::uint64_t>(r);
        FitResult res = fit(p, k, c, solver);
        res.restart_id = static_cast<int>(r);
        res.seed = c.seed;
        slots[static_cast<std::size_t>(r)] = std::move(res);
    });
    std::vector<FitResult> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    std::stable_sort(out.begin(), out.end(),
                     [](const FitResult& a, const FitResult& b) { return a.final_loss() < b.final_loss(); });
    return out;
}

}  // namespace archetypal
