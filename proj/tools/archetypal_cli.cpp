// archetypal: command-line front end for fitting, sweeping, generating
// planted data, comparing assignments and benchmarking the SMO solver.

#include "archetypal/archetypal.hpp"
#include "archetypal/io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace archetypal;

namespace {

const CLI::Validator kAtLeastOne(
    [](std::string& v) {
        long long x = 0;
        if (!io::detail::parse_index(v, x) || x < 1) return std::string("must be an integer >= 1, got " + v);
        return std::string();
    },
    "INT>=1");

struct FitOptions {
    std::string input;
    std::string format = "auto";
    std::string likelihood = "gaussian";
    std::string solver = "smo-as";
    std::string out;
    std::uint64_t seed = 0;
    int restarts = 1;
    int threads = 1;
    int max_iter = SolverConfig{}.max_outer_iterations;
    double tol = SolverConfig{}.rel_loss_tolerance;
    bool force = false;
};

void add_fit_options(CLI::App* cmd, FitOptions& o) {
    cmd->add_option("--input", o.input, "Data matrix (features x observations)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--format", o.format, "Input format: auto, dense or sparse")
        ->check(CLI::IsMember({"auto", "dense", "sparse"}));
    cmd->add_option("--likelihood", o.likelihood, "gaussian or bernoulli")
        ->check(CLI::IsMember({"gaussian", "bernoulli"}));
    cmd->add_option("--solver", o.solver, "smo-as or pcha")->check(CLI::IsMember({"smo-as", "pcha"}));
    cmd->add_option("--seed", o.seed, "Seed of the first restart");
    cmd->add_option("--restarts", o.restarts, "Independent restarts")->check(kAtLeastOne);
    cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--max-iter", o.max_iter, "Outer iteration cap")->check(CLI::NonNegativeNumber);
    cmd->add_option("--tol", o.tol, "Relative loss change for convergence")->check(CLI::PositiveNumber);
    cmd->add_option("--out", o.out, "Output directory")->required();
    cmd->add_flag("--force", o.force, "Overwrite an existing output directory");
}

SolverConfig config_from(const FitOptions& o) {
    SolverConfig c;
    c.seed = o.seed;
    c.restarts = o.restarts;
    c.threads = o.threads;
    c.max_outer_iterations = o.max_iter;
    c.rel_loss_tolerance = o.tol;
    c.validate();
    return c;
}

std::optional<io::MatrixFormat> format_from(const std::string& s) {
    if (s == "auto") return std::nullopt;
    return io::parse_format(s);
}

void prepare_output_dir(const fs::path& dir, bool force) {
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir)) throw io::IoError("output path '" + dir.string() + "' exists and is not a directory");
        if (!fs::is_empty(dir)) {
            if (!force) throw io::IoError("output directory '" + dir.string() + "' is not empty (use --force)");
            fs::remove_all(dir);
        }
    }
    fs::create_directories(dir);
}

void refuse_existing_file(const fs::path& p, bool force) {
    if (fs::exists(p) && !force) throw io::IoError("'" + p.string() + "' exists (use --force)");
}

std::string command_line(int argc, char** argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
    return s;
}

io::RunManifest start_manifest(const std::string& cmd, const SolverConfig& cfg, const std::string& input) {
    io::RunManifest m;
    m.command = cmd;
    m.config = cfg;
    if (!input.empty()) {
        m.input_path = input;
        m.input_digest = io::file_digest(input);
    }
    for (int r = 0; r < cfg.restarts; ++r) m.seeds.push_back(cfg.seed + static_cast<std::uint64_t>(r));
    m.started = io::utc_timestamp();
    return m;
}

void write_restart_table(const fs::path& path, const std::vector<FitResult>& fits) {
    std::ofstream out(path);
    if (!out) throw io::IoError("cannot open '" + path.string() + "' for writing");
    out << "restart_id,seed,final_loss,iterations,converged\n";
    for (const auto& f : fits)
        out << f.restart_id << ',' << f.seed << ',' << io::detail::number(f.final_loss()) << ',' << f.iterations << ','
            << (f.converged ? "true" : "false") << '\n';
}

int run_fit(const FitOptions& o, Index k, const std::string& cmd) {
    const SolverConfig cfg = config_from(o);
    const auto kind = parse_likelihood(o.likelihood);
    const auto solver = parse_solver(o.solver);
    const fs::path dir = o.out;
    const DataMatrix data = io::load_matrix(o.input, format_from(o.format), kind);
    if (k > data.cols()) throw ConfigError("--k " + std::to_string(k) + " exceeds N = " + std::to_string(data.cols()));
    const Problem p(data, kind, cfg.smoothing_epsilon);

    prepare_output_dir(dir, o.force);
    io::RunManifest manifest = start_manifest(cmd, cfg, o.input);
    detail::Stopwatch clock;

    const std::vector<FitResult> fits = fit_restarts(p, k, cfg, solver);
    const FitResult& best = fits.front();
    io::write_fit(dir, best, kind, solver);
    if (fits.size() > 1) {
        write_restart_table(dir / "restarts.csv", fits);
        std::ofstream summary(dir / "summary.txt", std::ios::app);
        summary << "restarts: " << fits.size() << '\n'
                << "mean_nmi: " << io::detail::number(nmi_report(fits).mean_offdiag) << '\n';
    }

    manifest.extra = {{"subcommand", "fit"},
                      {"likelihood", std::string(to_string(kind))},
                      {"solver", std::string(to_string(solver))},
                      {"K", std::to_string(k)}};
    manifest.finished = io::utc_timestamp();
    manifest.wall_seconds = clock.seconds();
    manifest.write(dir / "manifest.txt");

    std::cout << "final_loss " << io::detail::number(best.final_loss()) << " iterations " << best.iterations
              << " converged " << (best.converged ? "true" : "false") << '\n';
    return 0;
}

int run_sweep(const FitOptions& o, Index k_min, Index k_max, const std::string& cmd) {
    if (k_min > k_max) throw ConfigError("--k-min must not exceed --k-max");
    const SolverConfig cfg = config_from(o);
    const auto kind = parse_likelihood(o.likelihood);
    const auto solver = parse_solver(o.solver);
    const fs::path dir = o.out;
    const DataMatrix data = io::load_matrix(o.input, format_from(o.format), kind);
    if (k_max > data.cols())
        throw ConfigError("--k-max " + std::to_string(k_max) + " exceeds N = " + std::to_string(data.cols()));
    const Problem p(data, kind, cfg.smoothing_epsilon);

    prepare_output_dir(dir, o.force);
    io::RunManifest manifest = start_manifest(cmd, cfg, o.input);
    manifest.extra = {{"subcommand", "sweep"},
                      {"likelihood", std::string(to_string(kind))},
                      {"solver", std::string(to_string(solver))},
                      {"k_min", std::to_string(k_min)},
                      {"k_max", std::to_string(k_max)}};
    manifest.write(dir / "manifest.txt");  // rewritten with timings at the end
    detail::Stopwatch clock;

    std::ofstream table(dir / "sweep.csv");
    if (!table) throw io::IoError("cannot open sweep table for writing");
    table << io::kSweepHeader << '\n' << std::flush;

    std::vector<Index> ks;
    for (Index k = k_min; k <= k_max; ++k) ks.push_back(k);
    int failures = 0;
    sweep_k(p, ks, solver, cfg, [&](const SweepRow& row) {
        io::write_sweep_row(table, row);
        table.flush();
        if (row.error) {
            ++failures;
            std::cerr << "K = " << row.K << " failed: " << *row.error << '\n';
            return;
        }
        const fs::path sub = dir / ("K_" + std::to_string(row.K));
        io::write_fit(sub, row.fits.front(), kind, solver);
        if (row.fits.size() > 1) write_restart_table(sub / "restarts.csv", row.fits);
        std::cout << "K " << row.K << " best_loss " << io::detail::number(row.best_loss) << " mean_nmi "
                  << io::detail::number(row.mean_nmi) << '\n'
                  << std::flush;
    });

    manifest.finished = io::utc_timestamp();
    manifest.wall_seconds = clock.seconds();
    manifest.write(dir / "manifest.txt");
    if (failures) throw Error(std::to_string(failures) + " of " + std::to_string(ks.size()) + " K values failed");
    return 0;
}

struct GenOptions {
    std::string likelihood = "gaussian";
    Index k = 0, m = 0, n = 0;
    std::uint64_t seed = 0;
    std::string out;
    std::string format = "auto";
    double noise = 0.0;
    double sharpness = GeneratorOptions{}.archetype_sharpness;
    double alpha = GeneratorOptions{}.dirichlet_alpha;
    bool force = false;
};

int run_gen(const GenOptions& o) {
    const auto kind = parse_likelihood(o.likelihood);
    GeneratorOptions g;
    g.noise = o.noise;
    g.archetype_sharpness = o.sharpness;
    g.dirichlet_alpha = o.alpha;
    const PlantedProblem pp = generate(kind, o.k, o.m, o.n, o.seed, g);

    const fs::path out = o.out;
    const fs::path stem = out.parent_path() / out.stem();
    const fs::path c_path = stem.string() + "_C_true.csv";
    const fs::path s_path = stem.string() + "_S_true.csv";
    for (const auto& p : {out, c_path, s_path}) refuse_existing_file(p, o.force);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());

    io::write_matrix(out, pp.X.values(), format_from(o.format));
    io::write_matrix(c_path, pp.C_true, io::MatrixFormat::dense);
    io::write_matrix(s_path, pp.S_true, io::MatrixFormat::dense);
    std::cout << "wrote " << out.string() << ", " << c_path.string() << ", " << s_path.string() << '\n';
    return 0;
}

std::string render_scalar(double v) {
    std::string s = format_number(v);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

int run_nmi(const std::string& a, const std::string& b, const std::string& norm) {
    const Matrix sa = io::read_matrix(a, io::MatrixFormat::dense);
    const Matrix sb = io::read_matrix(b, io::MatrixFormat::dense);
    const auto n = norm == "mean" ? NmiNormalization::mean : NmiNormalization::max;
    std::cout << render_scalar(nmi(sa, sb, n)) << '\n';
    return 0;
}

std::vector<Index> parse_k_list(const std::string& s) {
    std::vector<Index> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        long long v = 0;
        if (!io::detail::parse_index(tok, v) || v < 1) throw ConfigError("invalid K in --k-list: '" + tok + "'");
        out.push_back(static_cast<Index>(v));
    }
    if (out.empty()) throw ConfigError("--k-list is empty");
    return out;
}

int run_bench(const std::string& k_list, int trials, std::uint64_t seed) {
    std::cout << "K,trials,within_K2,within_2K2,median_pair_updates,median_sweeps,max_pair_updates,seconds\n";
    for (Index k : parse_k_list(k_list)) {
        const SmoBenchRow r = smo_oracle_benchmark(k, trials, seed);
        std::cout << r.K << ',' << r.trials << ',' << format_number(r.within_k2) << ',' << format_number(r.within_2k2)
                  << ',' << format_number(r.median_updates) << ',' << format_number(r.median_sweeps) << ','
                  << r.max_updates << ',' << format_number(r.seconds) << '\n'
                  << std::flush;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Archetypal analysis for continuous and binary data"};
    app.set_version_flag("--version", io::kVersion);
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    const std::string cmd = command_line(argc, argv);

    FitOptions fit_opt;
    Index fit_k = 0;
    auto* fit_cmd = app.add_subcommand("fit", "Fit an archetypal model");
    add_fit_options(fit_cmd, fit_opt);
    fit_cmd->add_option("--k", fit_k, "Number of archetypes")->required()->check(kAtLeastOne);

    FitOptions sweep_opt;
    sweep_opt.restarts = SolverConfig{}.restarts;
    Index k_min = 0, k_max = 0;
    auto* sweep_cmd = app.add_subcommand("sweep", "Fit a range of K with restarts");
    add_fit_options(sweep_cmd, sweep_opt);
    sweep_cmd->add_option("--k-min", k_min, "Smallest K")->required()->check(kAtLeastOne);
    sweep_cmd->add_option("--k-max", k_max, "Largest K")->required()->check(kAtLeastOne);

    GenOptions gen_opt;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a planted problem");
    gen_cmd->add_option("--likelihood", gen_opt.likelihood, "gaussian or bernoulli")
        ->check(CLI::IsMember({"gaussian", "bernoulli"}));
    gen_cmd->add_option("--k", gen_opt.k, "Archetypes")->required()->check(kAtLeastOne);
    gen_cmd->add_option("--m", gen_opt.m, "Features")->required()->check(kAtLeastOne);
    gen_cmd->add_option("--n", gen_opt.n, "Observations")->required()->check(kAtLeastOne);
    gen_cmd->add_option("--seed", gen_opt.seed, "Generator seed");
    gen_cmd->add_option("--out", gen_opt.out, "Data file; ground truth goes next to it")->required();
    gen_cmd->add_option("--format", gen_opt.format, "auto, dense or sparse")
        ->check(CLI::IsMember({"auto", "dense", "sparse"}));
    gen_cmd->add_option("--noise", gen_opt.noise, "Gaussian noise std. dev.")->check(CLI::NonNegativeNumber);
    gen_cmd->add_option("--sharpness", gen_opt.sharpness, "Bernoulli archetype sharpness")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--alpha", gen_opt.alpha, "Dirichlet concentration of S_true")->check(CLI::PositiveNumber);
    gen_cmd->add_flag("--force", gen_opt.force, "Overwrite existing files");

    std::string s_a, s_b, norm = "max";
    auto* nmi_cmd = app.add_subcommand("nmi", "NMI between two S matrices");
    nmi_cmd->add_option("--s-a", s_a, "First S (K x N, dense)")->required()->check(CLI::ExistingFile);
    nmi_cmd->add_option("--s-b", s_b, "Second S (K x N, dense)")->required()->check(CLI::ExistingFile);
    nmi_cmd->add_option("--normalization", norm, "max or mean")->check(CLI::IsMember({"max", "mean"}));

    std::string k_list = "2,5,10,25";
    int trials = 100;
    std::uint64_t bench_seed = 0;
    auto* bench_cmd = app.add_subcommand("bench-smo", "SMO pair updates needed to match a QP oracle");
    bench_cmd->add_option("--k-list", k_list, "Comma-separated K values");
    bench_cmd->add_option("--trials", trials, "Instances per K")->check(kAtLeastOne);
    bench_cmd->add_option("--seed", bench_seed, "Instance seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return e.get_exit_code() ? e.get_exit_code() : 2;
    }

    try {
        if (*fit_cmd) return run_fit(fit_opt, fit_k, cmd);
        if (*sweep_cmd) return run_sweep(sweep_opt, k_min, k_max, cmd);
        if (*gen_cmd) return run_gen(gen_opt);
        if (*nmi_cmd) return run_nmi(s_a, s_b, norm);
        if (*bench_cmd) return run_bench(k_list, trials, bench_seed);
    } catch (const std::exception& e) {
        std::string msg = e.what();
        for (char& c : msg)
            if (c == '\n') c = ' ';
        std::cerr << "error: " << msg << '\n';
        return 1;
    }
    return 1;
}
