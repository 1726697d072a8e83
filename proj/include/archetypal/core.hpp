#pragma once

// Domain types shared by every solver: data matrices, the (C, S) model,
// per-column quadratic models, solver configuration and fit traces.

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace archetypal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Feasibility tolerance on column sums of C and S.
inline constexpr double kColumnSumTolerance = 1e-9;

/// Shortest "%g"-style rendering that reads back to the same double.
inline std::string format_number(double v) {
    char buf[32];
    for (int prec = 6; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
    using Error::Error;
};

/// Data whose values contradict the requested mode (e.g. 0.5 in binary data).
struct ModeError : Error {
    using Error::Error;
};

/// A value outside the domain of a likelihood, e.g. a Bernoulli
/// reconstruction that left (0, 1).
struct DomainError : Error {
    using Error::Error;
};

struct DegenerateColumnError : Error {
    DegenerateColumnError(Index col, const std::string& what)
        : Error(what), column(col) {}
    Index column;
};

struct ConfigError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Tags

enum class DataMode { continuous, binary };
enum class LikelihoodKind { gaussian, bernoulli };

inline std::string_view to_string(DataMode m) {
    return m == DataMode::binary ? "binary" : "continuous";
}

inline std::string_view to_string(LikelihoodKind k) {
    return k == LikelihoodKind::bernoulli ? "bernoulli" : "gaussian";
}

inline LikelihoodKind parse_likelihood(std::string_view s) {
    if (s == "gaussian") return LikelihoodKind::gaussian;
    if (s == "bernoulli") return LikelihoodKind::bernoulli;
    throw ConfigError("unknown likelihood '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// DataMatrix

/// Features-by-observations data (M x N).
class DataMatrix {
public:
    DataMatrix(Matrix values, DataMode mode) : values_(std::move(values)), mode_(mode) {
        if (values_.rows() < 1 || values_.cols() < 1)
            throw DimensionError("data matrix must be at least 1x1");
        for (Index j = 0; j < values_.cols(); ++j) {
            for (Index i = 0; i < values_.rows(); ++i) {
                const double v = values_(i, j);
                if (!std::isfinite(v))
                    throw DomainError("non-finite data entry at row " + std::to_string(i + 1) +
                                      ", column " + std::to_string(j + 1));
                if (mode_ == DataMode::binary && v != 0.0 && v != 1.0)
                    throw ModeError("non-binary value " + format_number(v) + " at row " +
                                    std::to_string(i + 1) + ", column " + std::to_string(j + 1));
            }
        }
    }

    static DataMatrix continuous(Matrix values) { return {std::move(values), DataMode::continuous}; }
    static DataMatrix binary(Matrix values) { return {std::move(values), DataMode::binary}; }

    const Matrix& values() const noexcept { return values_; }
    DataMode mode() const noexcept { return mode_; }
    Index rows() const noexcept { return values_.rows(); }
    Index cols() const noexcept { return values_.cols(); }

private:
    Matrix values_;
    DataMode mode_;
};

// ---------------------------------------------------------------------------
// SmoothedMatrix

/// Binary data pulled into [eps, 1 - eps]: p = x + eps - 2 x eps.
class SmoothedMatrix {
public:
    static SmoothedMatrix from_binary(const DataMatrix& x, double epsilon) {
        if (x.mode() != DataMode::binary)
            throw ModeError("smoothing requires binary data");
        if (!(epsilon >= 0.0 && epsilon < 0.5))
            throw ConfigError("smoothing epsilon must lie in [0, 0.5)");
        Matrix p = x.values().array() + epsilon - 2.0 * epsilon * x.values().array();
        return SmoothedMatrix(std::move(p), epsilon);
    }

    const Matrix& values() const noexcept { return values_; }
    double epsilon() const noexcept { return epsilon_; }
    Index rows() const noexcept { return values_.rows(); }
    Index cols() const noexcept { return values_.cols(); }

private:
    SmoothedMatrix(Matrix values, double epsilon) : values_(std::move(values)), epsilon_(epsilon) {}

    Matrix values_;
    double epsilon_;
};

// ---------------------------------------------------------------------------
// ArchetypalModel

/// The factor pair C (N x K) and S (K x N). Construction checks shapes only;
/// feasibility is reported by validate_model().
class ArchetypalModel {
public:
    ArchetypalModel(Matrix C, Matrix S, LikelihoodKind likelihood)
        : C_(std::move(C)), S_(std::move(S)), likelihood_(likelihood) {
        const Index n = C_.rows();
        const Index k = C_.cols();
        if (k < 1) throw DimensionError("model needs at least one archetype");
        if (S_.rows() != k || S_.cols() != n)
            throw DimensionError("S must be K x N to match C (N x K)");
        if (k > n)
            throw DimensionError("K = " + std::to_string(k) + " exceeds N = " + std::to_string(n));
    }

    const Matrix& C() const noexcept { return C_; }
    const Matrix& S() const noexcept { return S_; }
    Index K() const noexcept { return C_.cols(); }
    Index N() const noexcept { return C_.rows(); }
    LikelihoodKind likelihood() const noexcept { return likelihood_; }

    ArchetypalModel with_C(Matrix C) const { return {std::move(C), S_, likelihood_}; }
    ArchetypalModel with_S(Matrix S) const { return {C_, std::move(S), likelihood_}; }

private:
    Matrix C_;
    Matrix S_;
    LikelihoodKind likelihood_;
};

// ---------------------------------------------------------------------------
// QuadraticModel

/// f(x) = const - d'x + 1/2 x'Hx for one column of S (length K) or C (length N).
struct QuadraticModel {
    Vector d;
    Matrix H;
    Index column_index = 0;

    Index size() const noexcept { return d.size(); }

    double objective(const Vector& x) const { return -d.dot(x) + 0.5 * x.dot(H * x); }
    Vector gradient(const Vector& x) const { return H * x - d; }

    /// Builds a model whose gradient at `at` equals `grad`; H is symmetrized.
    static QuadraticModel matching(const Vector& at, const Vector& grad, Matrix hessian, Index column) {
        Matrix h = 0.5 * (hessian + hessian.transpose());
        Vector d = h * at - grad;
        return {std::move(d), std::move(h), column};
    }
};

// ---------------------------------------------------------------------------
// SolverConfig

enum class RidgeAnchor {
    origin,   // eps * ||c||^2
    current,  // eps * ||c - c_prev||^2
};

struct SolverConfig {
    int max_outer_iterations = 500;
    double rel_loss_tolerance = 1e-8;

    // S-update (pairwise SMO)
    double smo_tolerance = 1e-10;
    int smo_sweep_cap = 10;  // pair-update budget in units of K^2

    // C-update (penalized active set)
    double active_set_lambda_scale = 1e9;
    double active_set_eps_scale = 1e-15;
    int active_set_max_changes = 0;  // 0 -> 3N
    RidgeAnchor ridge_anchor = RidgeAnchor::current;

    double smoothing_epsilon = 1e-3;
    int restarts = 10;
    std::uint64_t seed = 0;

    bool step_damping = true;
    double damping_shrink = 0.5;
    int damping_trials = 20;

    int threads = 1;  // 0 -> hardware concurrency

    void validate() const {
        if (max_outer_iterations < 0) throw ConfigError("max_outer_iterations must be >= 0");
        if (!(rel_loss_tolerance > 0)) throw ConfigError("rel_loss_tolerance must be > 0");
        if (!(smo_tolerance > 0)) throw ConfigError("smo_tolerance must be > 0");
        if (smo_sweep_cap < 1) throw ConfigError("smo_sweep_cap must be >= 1");
        if (!(active_set_lambda_scale > 0)) throw ConfigError("active_set_lambda_scale must be > 0");
        if (!(active_set_eps_scale > 0)) throw ConfigError("active_set_eps_scale must be > 0");
        if (active_set_max_changes < 0) throw ConfigError("active_set_max_changes must be >= 0");
        if (!(smoothing_epsilon > 0 && smoothing_epsilon < 0.5))
            throw ConfigError("smoothing_epsilon must lie in (0, 0.5)");
        if (restarts < 1) throw ConfigError("restarts must be >= 1");
        if (!(damping_shrink > 0 && damping_shrink < 1)) throw ConfigError("damping_shrink must lie in (0, 1)");
        if (damping_trials < 1) throw ConfigError("damping_trials must be >= 1");
        if (threads < 0) throw ConfigError("threads must be >= 0");
    }
};

// ---------------------------------------------------------------------------
// FitTrace

enum class HalfStep { init, S, C };

inline std::string_view to_string(HalfStep h) {
    switch (h) {
        case HalfStep::S: return "S";
        case HalfStep::C: return "C";
        default: return "init";
    }
}

struct FitTrace {
    std::vector<int> iterations;
    std::vector<HalfStep> half_steps;
    std::vector<double> losses;      // true loss after each half-step
    std::vector<double> wall_times;  // seconds since fit start
    int accepted_steps = 0;
    int damped_steps = 0;

    void record(int iteration, HalfStep step, double loss, double seconds) {
        iterations.push_back(iteration);
        half_steps.push_back(step);
        losses.push_back(loss);
        wall_times.push_back(seconds);
    }

    std::size_t size() const noexcept { return losses.size(); }
    double final_loss() const { return losses.back(); }

    bool monotone() const {
        for (std::size_t i = 1; i < losses.size(); ++i)
            if (losses[i] > losses[i - 1]) return false;
        return true;
    }
};

// ---------------------------------------------------------------------------
// validate_model

struct Violation {
    enum class Kind { negative_entry, column_sum, non_finite };

    Kind kind;
    char factor;  // 'C' or 'S'
    Index row;    // -1 for column-level violations
    Index column;
    double magnitude;

    std::string describe() const {
        std::ostringstream os;
        os << factor << " column " << column;
        switch (kind) {
            case Kind::negative_entry: os << " row " << row << ": negative entry " << magnitude; break;
            case Kind::column_sum: os << ": column sum off by " << magnitude; break;
            case Kind::non_finite: os << " row " << row << ": non-finite entry"; break;
        }
        return os.str();
    }
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool empty() const noexcept { return violations.empty(); }
    explicit operator bool() const noexcept { return empty(); }
};

namespace detail {

inline void check_column_stochastic(const Matrix& m, char factor, double tol, ValidationReport& out) {
    for (Index j = 0; j < m.cols(); ++j) {
        double sum = 0.0;
        bool finite = true;
        for (Index i = 0; i < m.rows(); ++i) {
            const double v = m(i, j);
            if (!std::isfinite(v)) {
                out.violations.push_back({Violation::Kind::non_finite, factor, i, j, v});
                finite = false;
                continue;
            }
            if (v < 0.0) out.violations.push_back({Violation::Kind::negative_entry, factor, i, j, v});
            sum += v;
        }
        // Signed: positive magnitude is a deficit (sum < 1).
        if (finite && std::abs(sum - 1.0) > tol)
            out.violations.push_back({Violation::Kind::column_sum, factor, -1, j, 1.0 - sum});
    }
}

}  // namespace detail

/// Reports every violated feasibility constraint of the model. Empty iff
/// C and S are both column-stochastic.
inline ValidationReport validate_model(const ArchetypalModel& model, double tol = kColumnSumTolerance) {
    ValidationReport report;
    detail::check_column_stochastic(model.C(), 'C', tol, report);
    detail::check_column_stochastic(model.S(), 'S', tol, report);
    return report;
}

/// Divides every column by its sum. Zeros stay zero.
inline Matrix project_columns_to_simplex(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (Index j = 0; j < m.cols(); ++j) {
        double sum = 0.0;
        for (Index i = 0; i < m.rows(); ++i) {
            if (m(i, j) < 0.0 || !std::isfinite(m(i, j)))
                throw DomainError("column " + std::to_string(j) + " has a negative or non-finite entry");
            sum += m(i, j);
        }
        if (!(sum > 0.0))
            throw DegenerateColumnError(j, "column " + std::to_string(j) + " is all zero");
        out.col(j) = m.col(j) / sum;
    }
    return out;
}

}  // namespace archetypal
