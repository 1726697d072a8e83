#pragma once

// Losses, reconstruction and second-order expansions of the loss around the
// current (C, S) iterate.
//
// Everything here is written in terms of the elementwise loss l(x, r) and its
// first two derivatives in r:
//
//   gaussian   l = (x - r)^2             l' = -2 (x - r)        l'' = 2
//   bernoulli  l = -x ln r - (1-x) ln(1-r)
//                                        l' = -x/r + (1-x)/(1-r)
//                                        l'' = x/r^2 + (1-x)/(1-r)^2
//
// With R = B C S (B = X for gaussian, B = P for bernoulli) and A = B C:
//   dL/ds_j   = A' l'(:, j)                  d2L/ds_j^2 = A' diag(l''(:, j)) A
//   dL/dc_k   = B' (l' s_k)                  d2L/dc_k^2 = B' diag(l'' s_k.^2) B
// where s_k is row k of S. The quadratic models handed to the solvers are
// built so their gradient at the current column matches dL exactly.

#include "archetypal/core.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace archetypal {

inline SmoothedMatrix smooth(const DataMatrix& x, double epsilon) {
    return SmoothedMatrix::from_binary(x, epsilon);
}

/// Data plus the matrix the archetypes are built from (X or its smoothed P).
class Problem {
public:
    Problem(DataMatrix x, LikelihoodKind kind, double smoothing_epsilon = 1e-3)
        : x_(std::move(x)), kind_(kind), epsilon_(smoothing_epsilon) {
        if (kind_ == LikelihoodKind::bernoulli) {
            base_ = SmoothedMatrix::from_binary(x_, epsilon_).values();
        } else {
            base_ = x_.values();
        }
    }

    const DataMatrix& data() const noexcept { return x_; }
    const Matrix& X() const noexcept { return x_.values(); }
    const Matrix& base() const noexcept { return base_; }
    LikelihoodKind kind() const noexcept { return kind_; }
    double epsilon() const noexcept { return epsilon_; }
    Index M() const noexcept { return x_.rows(); }
    Index N() const noexcept { return x_.cols(); }

private:
    DataMatrix x_;
    LikelihoodKind kind_;
    double epsilon_;
    Matrix base_;
};

// ---------------------------------------------------------------------------
// Reconstruction and loss

inline Matrix reconstruct(const Matrix& base, const Matrix& C, const Matrix& S) {
    if (base.cols() != C.rows() || C.cols() != S.rows())
        throw DimensionError("reconstruct: base is " + std::to_string(base.rows()) + "x" +
                             std::to_string(base.cols()) + ", C has " + std::to_string(C.rows()) +
                             " rows, S has " + std::to_string(S.rows()) + " rows");
    return (base * C) * S;
}

inline Matrix reconstruct(const Matrix& base, const ArchetypalModel& model) {
    return reconstruct(base, model.C(), model.S());
}

inline Matrix reconstruct(const Problem& problem, const ArchetypalModel& model) {
    return reconstruct(problem.base(), model);
}

namespace detail {

inline void check_open_unit(double r, Index i, Index j) {
    if (!(r > 0.0 && r < 1.0))
        throw DomainError("bernoulli reconstruction " + std::to_string(r) + " outside (0, 1) at (" +
                          std::to_string(i) + ", " + std::to_string(j) + ")");
}

}  // namespace detail

inline double loss(const Matrix& x, const Matrix& r, LikelihoodKind kind) {
    if (x.rows() != r.rows() || x.cols() != r.cols())
        throw DimensionError("loss: data and reconstruction shapes differ");
    if (kind == LikelihoodKind::gaussian) return (x - r).squaredNorm();

    double total = 0.0;
    for (Index j = 0; j < x.cols(); ++j) {
        for (Index i = 0; i < x.rows(); ++i) {
            const double rij = r(i, j);
            detail::check_open_unit(rij, i, j);
            const double xij = x(i, j);
            total -= xij * std::log(rij) + (1.0 - xij) * std::log1p(-rij);
        }
    }
    if (!std::isfinite(total)) throw DomainError("bernoulli loss is not finite");
    return total;
}

inline double loss(const DataMatrix& x, const Matrix& r, LikelihoodKind kind) {
    if (kind == LikelihoodKind::bernoulli && x.mode() != DataMode::binary)
        throw ModeError("bernoulli loss requires binary data");
    return loss(x.values(), r, kind);
}

inline double loss(const Problem& problem, const ArchetypalModel& model) {
    return loss(problem.X(), reconstruct(problem, model), problem.kind());
}

/// Elementwise dl/dr.
inline Matrix loss_gradient_wrt_r(const Matrix& x, const Matrix& r, LikelihoodKind kind) {
    if (kind == LikelihoodKind::gaussian) return -2.0 * (x - r);
    Matrix g(x.rows(), x.cols());
    for (Index j = 0; j < x.cols(); ++j)
        for (Index i = 0; i < x.rows(); ++i) {
            const double rij = r(i, j);
            detail::check_open_unit(rij, i, j);
            g(i, j) = -x(i, j) / rij + (1.0 - x(i, j)) / (1.0 - rij);
        }
    return g;
}

/// Elementwise d2l/dr2.
inline Matrix loss_curvature_wrt_r(const Matrix& x, const Matrix& r, LikelihoodKind kind) {
    if (kind == LikelihoodKind::gaussian) return Matrix::Constant(x.rows(), x.cols(), 2.0);
    Matrix w(x.rows(), x.cols());
    for (Index j = 0; j < x.cols(); ++j)
        for (Index i = 0; i < x.rows(); ++i) {
            const double rij = r(i, j);
            detail::check_open_unit(rij, i, j);
            const double q = 1.0 - rij;
            w(i, j) = x(i, j) / (rij * rij) + (1.0 - x(i, j)) / (q * q);
        }
    return w;
}

// ---------------------------------------------------------------------------
// S-side expansion

/// Quadratic model for column j of S given archetypes A = base*C and the
/// current reconstruction R.
inline QuadraticModel s_quadratic_at(const Matrix& x, const Matrix& archetypes, const Matrix& r,
                                     const Vector& s_j, Index j, LikelihoodKind kind) {
    Vector grad;
    Matrix hess;
    if (kind == LikelihoodKind::gaussian) {
        grad = -2.0 * archetypes.transpose() * (x.col(j) - r.col(j));
        hess = 2.0 * archetypes.transpose() * archetypes;
    } else {
        Vector g(x.rows());
        Vector w(x.rows());
        for (Index i = 0; i < x.rows(); ++i) {
            const double rij = r(i, j);
            detail::check_open_unit(rij, i, j);
            const double xij = x(i, j);
            const double q = 1.0 - rij;
            g(i) = -xij / rij + (1.0 - xij) / q;
            w(i) = xij / (rij * rij) + (1.0 - xij) / (q * q);
        }
        grad = archetypes.transpose() * g;
        hess = archetypes.transpose() * w.asDiagonal() * archetypes;
    }
    return QuadraticModel::matching(s_j, grad, std::move(hess), j);
}

inline QuadraticModel s_quadratic(const Matrix& x, const Matrix& base, const ArchetypalModel& model,
                                  Index j, LikelihoodKind kind) {
    if (j < 0 || j >= model.N()) throw DimensionError("s_quadratic: column index out of range");
    const Matrix archetypes = base * model.C();
    const Matrix r = archetypes * model.S();
    return s_quadratic_at(x, archetypes, r, model.S().col(j), j, kind);
}

inline QuadraticModel s_quadratic(const Problem& p, const ArchetypalModel& model, Index j) {
    return s_quadratic(p.X(), p.base(), model, j, p.kind());
}

// ---------------------------------------------------------------------------
// C-side expansion

/// Curvature of the loss along one column of C, held implicitly as
/// H = B' diag(v) B. Never forms the N x N matrix unless asked.
class GramCurvature {
public:
    GramCurvature(const Matrix& base, Vector row_weights) : base_(&base), v_(std::move(row_weights)) {}

    Index size() const noexcept { return base_->cols(); }
    const Vector& row_weights() const noexcept { return v_; }

    Vector apply(const Vector& c) const { return base_->transpose() * (v_.asDiagonal() * (*base_ * c)); }

    Matrix block(const std::vector<Index>& idx) const {
        Matrix cols(base_->rows(), static_cast<Index>(idx.size()));
        for (std::size_t a = 0; a < idx.size(); ++a) cols.col(static_cast<Index>(a)) = base_->col(idx[a]);
        Matrix h = cols.transpose() * v_.asDiagonal() * cols;
        return 0.5 * (h + h.transpose());
    }

    double diagonal(Index j) const { return base_->col(j).cwiseAbs2().dot(v_); }

    /// mean of H.^2 over all N^2 entries, via ||B' D B||_F = ||D^1/2 B B' D^1/2||_F.
    double mean_square() const {
        const Vector root = v_.cwiseMax(0.0).cwiseSqrt();
        const Matrix g = root.asDiagonal() * *base_;
        const Matrix small = g * g.transpose();
        const double n = static_cast<double>(size());
        return small.squaredNorm() / (n * n);
    }

    Matrix dense() const {
        Matrix h = base_->transpose() * v_.asDiagonal() * *base_;
        return 0.5 * (h + h.transpose());
    }

private:
    const Matrix* base_;
    Vector v_;
};

struct CExpansion {
    GramCurvature curvature;
    Vector d;  // linear term: gradient of the model at c_k equals dL/dc_k
};

/// Expansion along column k of C. `r` must equal base*C*S for the current C, S.
inline CExpansion c_expansion_at(const Matrix& x, const Matrix& base, const Matrix& r, const Matrix& C,
                                 const Matrix& S, Index k, LikelihoodKind kind) {
    const Vector s_row = S.row(k).transpose();
    Vector weighted_grad;  // l' * s_k   (M)
    Vector v;              // l'' * s_k.^2 (M)
    if (kind == LikelihoodKind::gaussian) {
        weighted_grad = -2.0 * (x - r) * s_row;
        v = Vector::Constant(x.rows(), 2.0 * s_row.squaredNorm());
    } else {
        weighted_grad = loss_gradient_wrt_r(x, r, kind) * s_row;
        v = loss_curvature_wrt_r(x, r, kind) * s_row.cwiseAbs2();
    }
    const Vector grad = base.transpose() * weighted_grad;
    GramCurvature curvature(base, std::move(v));
    const Vector c_k = C.col(k);
    Vector d = curvature.apply(c_k) - grad;
    return {std::move(curvature), std::move(d)};
}

/// Dense quadratic model for column k of C (N x N curvature).
inline QuadraticModel c_quadratic(const Matrix& x, const Matrix& base, const ArchetypalModel& model,
                                  Index k, LikelihoodKind kind) {
    if (k < 0 || k >= model.K()) throw DimensionError("c_quadratic: archetype index out of range");
    const Matrix r = reconstruct(base, model);
    const CExpansion e = c_expansion_at(x, base, r, model.C(), model.S(), k, kind);
    const Matrix h = e.curvature.dense();
    // Re-derive d against the symmetrized H so gradient matching is exact.
    const Vector c_k = model.C().col(k);
    const Vector grad = e.curvature.apply(c_k) - e.d;
    return QuadraticModel::matching(c_k, grad, h, k);
}

inline QuadraticModel c_quadratic(const Problem& p, const ArchetypalModel& model, Index k) {
    return c_quadratic(p.X(), p.base(), model, k, p.kind());
}

// ---------------------------------------------------------------------------
// Full gradients (PCHA)

struct FactorGradients {
    Matrix C;  // N x K, dL/dC
    Matrix S;  // K x N, dL/dS
};

/// Loss gradients with respect to C and S, either likelihood.
inline FactorGradients factor_gradients(const Matrix& x, const Matrix& base, const ArchetypalModel& model,
                                        LikelihoodKind kind) {
    const Matrix archetypes = base * model.C();
    const Matrix r = archetypes * model.S();
    const Matrix g = loss_gradient_wrt_r(x, r, kind);
    return {base.transpose() * (g * model.S().transpose()), archetypes.transpose() * g};
}

/// Bernoulli-loss gradients for B-PCHA. Sign convention: these are gradients
/// of the loss, so subtracting them descends.
inline FactorGradients bpcha_gradients(const DataMatrix& x, const SmoothedMatrix& p,
                                       const ArchetypalModel& model) {
    if (x.mode() != DataMode::binary) throw ModeError("bpcha_gradients requires binary data");
    return factor_gradients(x.values(), p.values(), model, LikelihoodKind::bernoulli);
}

}  // namespace archetypal
