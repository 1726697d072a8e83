#pragma once

// Projected-gradient principal convex hull analysis for either likelihood.
// Each factor takes a step along its simplex-centered gradient from the
// column-normalized iterate, is clamped at zero and renormalized. Step sizes
// adapt multiplicatively: grow on an accepted (strictly decreasing) step,
// shrink and retry otherwise.

#include "archetypal/core.hpp"
#include "archetypal/fit_common.hpp"
#include "archetypal/likelihood.hpp"

#include <algorithm>
#include <cmath>

namespace archetypal {

struct StepSizeState {
    double mu_C = 1.0;
    double mu_S = 1.0;
    double grow = 2.0;
    double shrink = 0.5;
    int max_halvings = 20;

    static constexpr double kMin = 1e-12;
    static constexpr double kMax = 1e12;

    static double clamp(double mu) { return std::clamp(mu, kMin, kMax); }
};

struct PchaUpdate {
    ArchetypalModel model;
    StepSizeState state;
    double loss;
    bool accepted;
    int halvings;  // failed trials before acceptance (or max_halvings)
};

namespace detail {

/// Column-normalizes m, resetting all-zero columns to uniform.
inline Matrix renormalize_or_uniform(Matrix m) {
    for (Index j = 0; j < m.cols(); ++j) {
        const double s = m.col(j).sum();
        if (s > 0.0) m.col(j) /= s;
        else m.col(j).setConstant(1.0 / static_cast<double>(m.rows()));
    }
    return m;
}

/// One line-searched step on `factor` along gradient `grad`.
template <class LossFn>
Matrix pcha_step(const Matrix& factor, const Matrix& grad, double& mu, const StepSizeState& st,
                 double current_loss, LossFn&& loss_of, double& new_loss, bool& accepted, int& halvings) {
    const Matrix tilde = renormalize_or_uniform(factor.cwiseMax(0.0));
    // Remove the component along the simplex normal, per column.
    Matrix centered = grad;
    for (Index j = 0; j < grad.cols(); ++j) centered.col(j).array() -= grad.col(j).dot(tilde.col(j));

    accepted = false;
    halvings = 0;
    new_loss = current_loss;
    for (int trial = 0; trial < st.max_halvings; ++trial) {
        Matrix cand = renormalize_or_uniform((tilde - mu * centered).cwiseMax(0.0));
        const double l = loss_of(cand);
        if (l < current_loss) {
            accepted = true;
            new_loss = l;
            mu = StepSizeState::clamp(mu * st.grow);
            return cand;
        }
        mu = StepSizeState::clamp(mu * st.shrink);
        ++halvings;
    }
    return factor;
}

}  // namespace detail

inline PchaUpdate pcha_update_C(const Problem& p, const ArchetypalModel& model, StepSizeState state) {
    const double current = loss(p, model);
    const FactorGradients g = factor_gradients(p.X(), p.base(), model, p.kind());
    double new_loss;
    bool accepted;
    int halvings;
    Matrix next = detail::pcha_step(
        model.C(), g.C, state.mu_C, state, current,
        [&](const Matrix& c) { return loss(p.X(), reconstruct(p.base(), c, model.S()), p.kind()); },
        new_loss, accepted, halvings);
    return {model.with_C(std::move(next)), state, new_loss, accepted, halvings};
}

inline PchaUpdate pcha_update_S(const Problem& p, const ArchetypalModel& model, StepSizeState state) {
    const double current = loss(p, model);
    const FactorGradients g = factor_gradients(p.X(), p.base(), model, p.kind());
    const Matrix archetypes = p.base() * model.C();
    double new_loss;
    bool accepted;
    int halvings;
    Matrix next = detail::pcha_step(
        model.S(), g.S, state.mu_S, state, current,
        [&](const Matrix& s) { return loss(p.X(), archetypes * s, p.kind()); }, new_loss, accepted,
        halvings);
    return {model.with_S(std::move(next)), state, new_loss, accepted, halvings};
}

/// Alternates C and S steps from a given start until the relative loss change
/// over one iteration drops below rel_loss_tolerance.
inline FitResult fit_pcha(const Problem& p, ArchetypalModel start, const SolverConfig& config) {
    config.validate();
    if (p.kind() == LikelihoodKind::bernoulli && p.data().mode() != DataMode::binary)
        throw ModeError("bernoulli fits require binary data");
    if (start.N() != p.N()) throw DimensionError("fit_pcha: model and data disagree on N");

    detail::Stopwatch clock;
    FitResult out{std::move(start), {}, 0, config.seed, false, 0, {}};
    double current = loss(p, out.model);
    out.trace.record(0, HalfStep::init, current, clock.seconds());

    StepSizeState state;
    {
        // Unit-scale first steps; the line search adapts from there.
        const FactorGradients g = factor_gradients(p.X(), p.base(), out.model, p.kind());
        state.mu_C = StepSizeState::clamp(1.0 / std::max(g.C.cwiseAbs().maxCoeff(), 1e-12));
        state.mu_S = StepSizeState::clamp(1.0 / std::max(g.S.cwiseAbs().maxCoeff(), 1e-12));
    }

    for (int it = 1; it <= config.max_outer_iterations; ++it) {
        const double before = current;

        PchaUpdate uc = pcha_update_C(p, out.model, state);
        state = uc.state;
        out.model = std::move(uc.model);
        current = uc.loss;
        if (uc.accepted) ++out.trace.accepted_steps;
        out.trace.record(it, HalfStep::C, current, clock.seconds());

        PchaUpdate us = pcha_update_S(p, out.model, state);
        state = us.state;
        out.model = std::move(us.model);
        current = us.loss;
        if (us.accepted) ++out.trace.accepted_steps;
        out.trace.record(it, HalfStep::S, current, clock.seconds());

        out.iterations = it;
        if (detail::relative_change_below(before, current, config.rel_loss_tolerance)) {
            out.converged = true;
            break;
        }
    }
    return out;
}

inline FitResult fit_pcha(const Problem& p, Index k, const SolverConfig& config) {
    return fit_pcha(p, initialize(p.N(), k, p.kind(), config.seed), config);
}

}  // namespace archetypal
