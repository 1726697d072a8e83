#pragma once

// Matrix file formats, run manifests and the CSV / key-value outputs of the
// CLI.
//
// dense-delimited : one row per feature; ',' ';' tab or whitespace between
//                   values; an optional non-numeric header line; '#' starts a
//                   comment line.
// sparse-coordinate: "M N NNZ" then NNZ lines "i j v" with 1-based indices;
//                   absent entries are 0; '%' or '#' start comment lines.
//
// Numbers are written with 17 significant digits so files round-trip exactly.

#include "archetypal/core.hpp"
#include "archetypal/evaluation.hpp"
#include "archetypal/fit_common.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace archetypal::io {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kTraceHeader = "iteration,half_step,loss,seconds";
inline constexpr const char* kSweepHeader = "K,best_loss,mean_nmi,seconds";

struct IoError : Error {
    using Error::Error;
};

struct ParseError : Error {
    ParseError(std::string source, long line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line(line) {}
    long line;
};

enum class MatrixFormat { dense, sparse };

inline std::string_view to_string(MatrixFormat f) { return f == MatrixFormat::dense ? "dense" : "sparse"; }

inline MatrixFormat parse_format(std::string_view s) {
    if (s == "dense" || s == "dense-delimited" || s == "csv") return MatrixFormat::dense;
    if (s == "sparse" || s == "sparse-coordinate" || s == "coo" || s == "mtx") return MatrixFormat::sparse;
    throw ConfigError("unknown matrix format '" + std::string(s) + "' (expected dense or sparse)");
}

/// Format from the file extension: .mtx/.coo are sparse, anything else dense.
inline MatrixFormat format_for_path(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    return ext == ".mtx" || ext == ".coo" ? MatrixFormat::sparse : MatrixFormat::dense;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline bool parse_double(std::string_view tok, double& out) {
    tok = trim(tok);
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    if (tok.empty()) return false;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

inline bool parse_index(std::string_view tok, long long& out) {
    tok = trim(tok);
    if (tok.empty()) return false;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

inline std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    if (delim == ' ') {
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
            if (i >= line.size()) break;
            std::size_t j = i;
            while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
            out.push_back(line.substr(i, j - i));
            i = j;
        }
        return out;
    }
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(delim, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline char detect_delimiter(std::string_view line) {
    for (char c : {',', ';', '\t'})
        if (line.find(c) != std::string_view::npos) return c;
    return ' ';
}

inline std::string number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return in;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

}  // namespace detail

inline Matrix read_dense(std::istream& in, const std::string& source = "<stream>") {
    std::vector<std::vector<double>> rows;
    char delim = 0;
    bool seen_first = false;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        if (!delim) delim = detail::detect_delimiter(t);
        const auto fields = detail::split(t, delim);
        std::vector<double> row(fields.size());
        bool numeric = true;
        std::size_t bad = 0;
        for (std::size_t c = 0; c < fields.size(); ++c)
            if (!detail::parse_double(fields[c], row[c])) {
                numeric = false;
                bad = c;
                break;
            }
        if (!numeric) {
            if (!seen_first) {
                seen_first = true;  // header
                continue;
            }
            throw ParseError(source, lineno,
                             "field " + std::to_string(bad + 1) + " is not a number: '" + std::string(fields[bad]) + "'");
        }
        seen_first = true;
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError(source, lineno,
                             "expected " + std::to_string(rows.front().size()) + " fields, found " +
                                 std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(source, lineno, "no numeric rows");
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

inline Matrix read_sparse(std::istream& in, const std::string& source = "<stream>") {
    std::string line;
    long lineno = 0;
    long long m = -1, n = -1, nnz = -1, seen = 0;
    Matrix out;
    std::set<std::pair<long long, long long>> used;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = detail::trim(line);
        if (t.empty() || t.front() == '%' || t.front() == '#') continue;
        const auto f = detail::split(t, ' ');
        if (m < 0) {
            if (f.size() != 3 || !detail::parse_index(f[0], m) || !detail::parse_index(f[1], n) ||
                !detail::parse_index(f[2], nnz))
                throw ParseError(source, lineno, "expected header 'M N NNZ'");
            if (m < 1 || n < 1 || nnz < 0) throw ParseError(source, lineno, "invalid dimensions in header");
            if (nnz > m * n) throw ParseError(source, lineno, "NNZ exceeds M*N");
            out = Matrix::Zero(m, n);
            continue;
        }
        long long i = 0, j = 0;
        double v = 0.0;
        if (f.size() != 3 || !detail::parse_index(f[0], i) || !detail::parse_index(f[1], j) ||
            !detail::parse_double(f[2], v))
            throw ParseError(source, lineno, "expected entry 'i j v'");
        if (i < 1 || i > m || j < 1 || j > n)
            throw ParseError(source, lineno,
                             "index (" + std::to_string(i) + ", " + std::to_string(j) + ") outside " +
                                 std::to_string(m) + "x" + std::to_string(n));
        if (!used.emplace(i, j).second)
            throw ParseError(source, lineno, "duplicate entry (" + std::to_string(i) + ", " + std::to_string(j) + ")");
        if (++seen > nnz) throw ParseError(source, lineno, "more entries than the declared NNZ " + std::to_string(nnz));
        out(i - 1, j - 1) = v;
    }
    if (m < 0) throw ParseError(source, lineno, "missing header 'M N NNZ'");
    if (seen != nnz)
        throw ParseError(source, lineno,
                         "declared " + std::to_string(nnz) + " entries, found " + std::to_string(seen));
    return out;
}

inline Matrix read_matrix(const std::filesystem::path& path, std::optional<MatrixFormat> format = std::nullopt) {
    auto in = detail::open_in(path);
    const MatrixFormat f = format.value_or(format_for_path(path));
    return f == MatrixFormat::dense ? read_dense(in, path.string()) : read_sparse(in, path.string());
}

/// Loads data for a fit. A bernoulli intent requires every entry in {0, 1};
/// the first offending entry is reported by row and column (1-based).
inline DataMatrix load_matrix(const std::filesystem::path& path, std::optional<MatrixFormat> format = std::nullopt,
                              LikelihoodKind intent = LikelihoodKind::gaussian) {
    Matrix m = read_matrix(path, format);
    try {
        return intent == LikelihoodKind::bernoulli ? DataMatrix::binary(std::move(m))
                                                   : DataMatrix::continuous(std::move(m));
    } catch (const Error& e) {
        throw ModeError(path.string() + ": " + e.what());
    }
}

inline void write_dense(std::ostream& out, const Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << detail::number(m(i, j));
        }
        out << '\n';
    }
}

inline void write_sparse(std::ostream& out, const Matrix& m) {
    long long nnz = 0;
    for (Index j = 0; j < m.cols(); ++j)
        for (Index i = 0; i < m.rows(); ++i) nnz += m(i, j) != 0.0;
    out << m.rows() << ' ' << m.cols() << ' ' << nnz << '\n';
    for (Index j = 0; j < m.cols(); ++j)
        for (Index i = 0; i < m.rows(); ++i)
            if (m(i, j) != 0.0) out << i + 1 << ' ' << j + 1 << ' ' << detail::number(m(i, j)) << '\n';
}

inline void write_matrix(const std::filesystem::path& path, const Matrix& m,
                         std::optional<MatrixFormat> format = std::nullopt) {
    auto out = detail::open_out(path);
    format.value_or(format_for_path(path)) == MatrixFormat::dense ? write_dense(out, m) : write_sparse(out, m);
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Digests and manifests

inline std::string sha256_hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw IoError("SHA-256 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string s;
    s.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        s.push_back(hex[md[i] >> 4]);
        s.push_back(hex[md[i] & 0xf]);
    }
    return s;
}

inline std::string file_digest(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point t = std::chrono::system_clock::now()) {
    const std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Ordered key-value text, one "key: value" per line.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline void write_key_values(std::ostream& out, const KeyValues& kv) {
    for (const auto& [k, v] : kv) out << k << ": " << v << '\n';
}

inline std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    std::map<std::string, std::string> out;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto colon = t.find(':');
        if (colon == std::string_view::npos) throw ParseError(path.string(), lineno, "expected 'key: value'");
        out[std::string(detail::trim(t.substr(0, colon)))] = std::string(detail::trim(t.substr(colon + 1)));
    }
    return out;
}

inline KeyValues config_snapshot(const SolverConfig& c) {
    return {
        {"config.max_outer_iterations", std::to_string(c.max_outer_iterations)},
        {"config.rel_loss_tolerance", format_number(c.rel_loss_tolerance)},
        {"config.smo_tolerance", format_number(c.smo_tolerance)},
        {"config.smo_sweep_cap", std::to_string(c.smo_sweep_cap)},
        {"config.active_set_lambda_scale", format_number(c.active_set_lambda_scale)},
        {"config.active_set_eps_scale", format_number(c.active_set_eps_scale)},
        {"config.active_set_max_changes", std::to_string(c.active_set_max_changes)},
        {"config.ridge_anchor", c.ridge_anchor == RidgeAnchor::current ? "current" : "origin"},
        {"config.smoothing_epsilon", format_number(c.smoothing_epsilon)},
        {"config.restarts", std::to_string(c.restarts)},
        {"config.seed", std::to_string(c.seed)},
        {"config.step_damping", c.step_damping ? "true" : "false"},
        {"config.damping_shrink", format_number(c.damping_shrink)},
        {"config.damping_trials", std::to_string(c.damping_trials)},
        {"config.threads", std::to_string(c.threads)},
    };
}

struct RunManifest {
    std::string command;
    SolverConfig config;
    std::string input_path;
    std::string input_digest;
    std::vector<std::uint64_t> seeds;
    std::string version = kVersion;
    std::string started;
    std::string finished;
    double wall_seconds = 0.0;
    KeyValues extra;

    KeyValues entries() const {
        KeyValues kv{{"command", command}, {"version", version}};
        if (!input_path.empty()) {
            kv.emplace_back("input", input_path);
            kv.emplace_back("input_sha256", input_digest);
        }
        std::string s;
        for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? "," : "") + std::to_string(seeds[i]);
        kv.emplace_back("seeds", s);
        for (const auto& e : extra) kv.push_back(e);
        for (const auto& e : config_snapshot(config)) kv.push_back(e);
        kv.emplace_back("started", started);
        kv.emplace_back("finished", finished);
        kv.emplace_back("wall_seconds", format_number(wall_seconds));
        return kv;
    }

    void write(const std::filesystem::path& path) const {
        auto out = detail::open_out(path);
        write_key_values(out, entries());
    }
};

// ---------------------------------------------------------------------------
// Traces, summaries and sweep tables

inline void write_trace(std::ostream& out, const FitTrace& t) {
    out << kTraceHeader << '\n';
    for (std::size_t i = 0; i < t.size(); ++i)
        out << t.iterations[i] << ',' << to_string(t.half_steps[i]) << ',' << detail::number(t.losses[i]) << ','
            << format_number(t.wall_times[i]) << '\n';
}

inline void write_trace(const std::filesystem::path& path, const FitTrace& t) {
    auto out = detail::open_out(path);
    write_trace(out, t);
}

inline KeyValues summary_entries(const FitResult& r, LikelihoodKind kind, SolverKind solver) {
    return {
        {"likelihood", std::string(to_string(kind))},
        {"solver", std::string(to_string(solver))},
        {"K", std::to_string(r.model.K())},
        {"final_loss", detail::number(r.final_loss())},
        {"iterations", std::to_string(r.iterations)},
        {"converged", r.converged ? "true" : "false"},
        {"monotone", r.trace.monotone() ? "true" : "false"},
        {"seed", std::to_string(r.seed)},
        {"restart_id", std::to_string(r.restart_id)},
        {"accepted_steps", std::to_string(r.trace.accepted_steps)},
        {"damped_steps", std::to_string(r.trace.damped_steps)},
        {"warnings", std::to_string(r.warnings.size())},
    };
}

/// Writes C.csv, S.csv, trace.csv and summary.txt for one fit into `dir`.
inline void write_fit(const std::filesystem::path& dir, const FitResult& r, LikelihoodKind kind, SolverKind solver) {
    std::filesystem::create_directories(dir);
    write_matrix(dir / "C.csv", r.model.C(), MatrixFormat::dense);
    write_matrix(dir / "S.csv", r.model.S(), MatrixFormat::dense);
    write_trace(dir / "trace.csv", r.trace);
    auto out = detail::open_out(dir / "summary.txt");
    write_key_values(out, summary_entries(r, kind, solver));
    for (const auto& w : r.warnings) out << "warning: " << w << '\n';
}

/// Reads C.csv and S.csv back from a fit directory.
inline ArchetypalModel read_model(const std::filesystem::path& dir, LikelihoodKind kind) {
    return ArchetypalModel(read_matrix(dir / "C.csv", MatrixFormat::dense),
                           read_matrix(dir / "S.csv", MatrixFormat::dense), kind);
}

inline void write_sweep_row(std::ostream& out, const SweepRow& row) {
    out << row.K << ',' << detail::number(row.best_loss) << ',' << detail::number(row.mean_nmi) << ','
        << format_number(row.seconds) << '\n';
}

}  // namespace archetypal::io
