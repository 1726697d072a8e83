#pragma once

// Stability (NMI across restarts) and model-order sweeps.

#include "archetypal/core.hpp"
#include "archetypal/fit.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace archetypal {

enum class NmiNormalization { max, mean };

namespace detail {

/// Sums terms in sorted order, so the result does not depend on how the
/// components are labelled.
inline double sorted_sum(std::vector<double> terms) {
    std::sort(terms.begin(), terms.end());
    double total = 0.0;
    for (double t : terms) total += t;
    return total;
}

inline double entropy(const Vector& p) {
    std::vector<double> terms;
    for (Index i = 0; i < p.size(); ++i)
        if (p(i) > 0.0) terms.push_back(-p(i) * std::log(p(i)));
    return sorted_sum(std::move(terms));
}

}  // namespace detail

/// Normalized mutual information between two soft assignment matrices.
/// Columns are read as distributions over components; the joint is
/// Q = S_a S_b' / N. I(Q) is divided by max(H_a, H_b) (or their mean), with
/// 0/0 read as 1.
inline double nmi(const Matrix& s_a, const Matrix& s_b, NmiNormalization norm = NmiNormalization::max) {
    if (s_a.cols() != s_b.cols()) throw DimensionError("nmi: S matrices must have the same number of columns");
    if (s_a.cols() == 0) throw DimensionError("nmi: empty assignment matrices");
    if ((s_a.array() < 0).any() || (s_b.array() < 0).any()) throw DomainError("nmi: negative assignment weight");

    const double n = static_cast<double>(s_a.cols());
    // Plain loops keep every entry's summation order independent of the row
    // labelling; vectorized reductions do not.
    Matrix q(s_a.rows(), s_b.rows());
    for (Index b = 0; b < s_b.rows(); ++b)
        for (Index a = 0; a < s_a.rows(); ++a) {
            double v = 0.0;
            for (Index j = 0; j < s_a.cols(); ++j) v += s_a(a, j) * s_b(b, j);
            q(a, b) = v / n;
        }
    const auto marginal = [n](const Matrix& s) {
        Vector p(s.rows());
        for (Index r = 0; r < s.rows(); ++r) {
            double v = 0.0;
            for (Index j = 0; j < s.cols(); ++j) v += s(r, j);
            p(r) = v / n;
        }
        return p;
    };
    const Vector pa = marginal(s_a);
    const Vector pb = marginal(s_b);

    std::vector<double> terms;
    for (Index b = 0; b < q.cols(); ++b)
        for (Index a = 0; a < q.rows(); ++a) {
            const double v = q(a, b);
            if (v > 0.0) terms.push_back(v * std::log(v / (pa(a) * pb(b))));
        }
    const double mi = detail::sorted_sum(std::move(terms));
    const double ha = detail::entropy(pa);
    const double hb = detail::entropy(pb);
    const double denom = norm == NmiNormalization::max ? std::max(ha, hb) : 0.5 * (ha + hb);
    if (denom <= 0.0) return 1.0;
    return std::clamp(mi / denom, 0.0, 1.0);
}

struct NmiReport {
    Matrix pairwise;  // R x R
    double mean_offdiag = 1.0;
};

/// Pairwise NMI over a set of S matrices. A single run reports 1.
inline NmiReport nmi_report(const std::vector<Matrix>& s_list, NmiNormalization norm = NmiNormalization::max) {
    const auto r = static_cast<Index>(s_list.size());
    NmiReport rep{Matrix::Identity(r, r), 1.0};
    double sum = 0.0;
    long count = 0;
    for (Index a = 0; a < r; ++a)
        for (Index b = a + 1; b < r; ++b) {
            const double v = nmi(s_list[a], s_list[b], norm);
            rep.pairwise(a, b) = rep.pairwise(b, a) = v;
            sum += v;
            ++count;
        }
    if (count > 0) rep.mean_offdiag = sum / static_cast<double>(count);
    return rep;
}

inline NmiReport nmi_report(const std::vector<FitResult>& fits, NmiNormalization norm = NmiNormalization::max) {
    std::vector<Matrix> s;
    s.reserve(fits.size());
    for (const auto& f : fits) s.push_back(f.model.S());
    return nmi_report(s, norm);
}

struct SweepRow {
    Index K = 0;
    double best_loss = 0.0;
    double mean_nmi = 0.0;
    double seconds = 0.0;
    std::optional<std::string> error;
    std::vector<FitResult> fits;  // sorted by loss; empty on error
};

/// Fits every K with `config.restarts` restarts. A failing K is recorded and
/// the sweep continues. `on_row` sees each row as soon as it is complete.
template <class OnRow>
std::vector<SweepRow> sweep_k(const Problem& p, const std::vector<Index>& k_values, SolverKind solver,
                              const SolverConfig& config, OnRow&& on_row,
                              NmiNormalization norm = NmiNormalization::max) {
    if (k_values.empty()) throw ConfigError("sweep_k: empty K range");
    for (Index k : k_values)
        if (k < 1 || k > p.N()) throw ConfigError("sweep_k: K = " + std::to_string(k) + " outside [1, N]");

    std::vector<SweepRow> rows;
    for (Index k : k_values) {
        detail::Stopwatch clock;
        SweepRow row;
        row.K = k;
        try {
            row.fits = fit_restarts(p, k, config, solver);
            row.best_loss = row.fits.front().final_loss();
            row.mean_nmi = nmi_report(row.fits, norm).mean_offdiag;
        } catch (const std::exception& e) {
            row.error = e.what();
            row.best_loss = std::nan("");
            row.mean_nmi = std::nan("");
        }
        row.seconds = clock.seconds();
        on_row(row);
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::vector<SweepRow> sweep_k(const Problem& p, const std::vector<Index>& k_values, SolverKind solver,
                                     const SolverConfig& config) {
    return sweep_k(p, k_values, solver, config, [](const SweepRow&) {});
}

}  // namespace archetypal
