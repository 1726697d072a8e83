#include "archetypal/io.hpp"

#include "cli_util.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace archetypal;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

Matrix parse_dense(const std::string& text) {
    std::istringstream in(text);
    return io::read_dense(in);
}

Matrix parse_sparse(const std::string& text) {
    std::istringstream in(text);
    return io::read_sparse(in);
}

template <class F>
long parse_error_line(F&& f) {
    try {
        f();
    } catch (const io::ParseError& e) {
        return e.line;
    }
    return -1;
}

}  // namespace

TEST(ReadDense, SimpleExample) {
    Matrix want(2, 2);
    want << 0, 1, 1, 0;
    EXPECT_EQ(parse_dense("0,1\n1,0"), want);
}

TEST(ReadDense, HeaderCommentsAndDelimiters) {
    Matrix want(2, 3);
    want << 1, 2, 3, 4.5, -5, 6e-3;
    EXPECT_EQ(parse_dense("a,b,c\n1,2,3\n4.5,-5,6e-3\n"), want);
    EXPECT_EQ(parse_dense("# comment\n1;2;3\n\n4.5;-5;6e-3\n"), want);
    EXPECT_EQ(parse_dense("1\t2\t3\n4.5\t-5\t6e-3\n"), want);
    EXPECT_EQ(parse_dense("1 2  3\n 4.5 -5 6e-3\n"), want);
    EXPECT_EQ(parse_dense("1,2,3\r\n4.5,-5,6e-3\r\n"), want);
}

TEST(ReadDense, ErrorsCarryLineNumbers) {
    EXPECT_EQ(parse_error_line([] { parse_dense("1,2\n3,4\n5\n"); }), 3);
    EXPECT_EQ(parse_error_line([] { parse_dense("1,2\n3,x\n"); }), 2);
    EXPECT_EQ(parse_error_line([] { parse_dense("# c\n1,2\n3,4,5\n"); }), 3);
    EXPECT_THROW(parse_dense(""), io::ParseError);
}

TEST(ReadSparse, SimpleExample) {
    Matrix want = Matrix::Zero(2, 2);
    want(0, 1) = 1.0;
    EXPECT_EQ(parse_sparse("2 2 1\n1 2 1\n"), want);
    EXPECT_EQ(parse_sparse("%%MatrixMarket matrix coordinate real general\n% c\n2 2 1\n1 2 1\n"), want);
}

TEST(ReadSparse, Errors) {
    EXPECT_EQ(parse_error_line([] { parse_sparse("2 2 1\n3 1 1\n"); }), 2);
    EXPECT_EQ(parse_error_line([] { parse_sparse("2 2 2\n1 1 1\n1 1 0\n"); }), 3);
    EXPECT_EQ(parse_error_line([] { parse_sparse("2 2 1\n0 1 1\n"); }), 2);
    EXPECT_THROW(parse_sparse("2 2 2\n1 1 1\n"), io::ParseError);
    EXPECT_THROW(parse_sparse("2 2 1\n1 1 1\n2 2 1\n"), io::ParseError);
}

TEST(LoadMatrix, BernoulliIntentRejectsNonBinary) {
    TempDir dir;
    spit(dir / "x.csv", "0,1\n1,0.5\n");
    EXPECT_NO_THROW(io::load_matrix(dir / "x.csv", std::nullopt, LikelihoodKind::gaussian));
    try {
        io::load_matrix(dir / "x.csv", std::nullopt, LikelihoodKind::bernoulli);
        FAIL() << "expected ModeError";
    } catch (const ModeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
        EXPECT_NE(msg.find("column 2"), std::string::npos) << msg;
        EXPECT_NE(msg.find("0.5"), std::string::npos) << msg;
    }
}

TEST(LoadMatrix, FormatFromExtension) {
    EXPECT_EQ(io::format_for_path("a.mtx"), io::MatrixFormat::sparse);
    EXPECT_EQ(io::format_for_path("a.coo"), io::MatrixFormat::sparse);
    EXPECT_EQ(io::format_for_path("a.csv"), io::MatrixFormat::dense);
    EXPECT_EQ(io::parse_format("sparse"), io::MatrixFormat::sparse);
    EXPECT_THROW(io::parse_format("xml"), std::exception);
    EXPECT_THROW(io::read_matrix("/nonexistent/x.csv"), io::IoError);
}

TEST(WriteMatrix, RoundTripsBothFormats) {
    std::mt19937_64 rng(800);
    Matrix m = random_normal(7, 5, rng) * 1e3;
    m(2, 3) = 0.0;
    m(0, 0) = 1e-300;
    TempDir dir;
    for (auto f : {io::MatrixFormat::dense, io::MatrixFormat::sparse}) {
        const fs::path p = dir / (f == io::MatrixFormat::dense ? "m.csv" : "m.mtx");
        io::write_matrix(p, m, f);
        const Matrix back = io::read_matrix(p);
        EXPECT_LE(rel_err(back, m), 1e-12);
        EXPECT_EQ(back, m);  // %.17g is exact
    }
}

TEST(Digest, KnownValueAndSensitivity) {
    EXPECT_EQ(io::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    TempDir dir;
    spit(dir / "a.csv", "0,1\n1,0\n");
    spit(dir / "b.csv", "0,1\n1,0\n");
    spit(dir / "c.csv", "0,1\n1,1\n");
    EXPECT_EQ(io::file_digest(dir / "a.csv"), io::file_digest(dir / "b.csv"));
    EXPECT_NE(io::file_digest(dir / "a.csv"), io::file_digest(dir / "c.csv"));
}

TEST(KeyValues, RoundTrip) {
    TempDir dir;
    {
        std::ofstream out(dir / "kv.txt");
        io::write_key_values(out, {{"a", "1"}, {"b.c", "x: y"}});
    }
    const auto kv = io::read_key_values(dir / "kv.txt");
    EXPECT_EQ(kv.at("a"), "1");
    EXPECT_EQ(kv.at("b.c"), "x: y");
}

TEST(WriteFit, TraceSchemaAndModelRoundTrip) {
    const auto in = random_instance(LikelihoodKind::bernoulli, 8, 20, 3, 801);
    SolverConfig cfg;
    cfg.max_outer_iterations = 7;
    const auto r = fit_smo_as(in.problem, 3, cfg);
    TempDir dir;
    io::write_fit(dir.path, r, LikelihoodKind::bernoulli, SolverKind::smo_as);

    std::istringstream trace(slurp(dir / "trace.csv"));
    std::string line;
    std::getline(trace, line);
    EXPECT_EQ(line, io::kTraceHeader);
    long rows = 0;
    while (std::getline(trace, line)) ++rows;
    EXPECT_EQ(rows, 2 * r.iterations + 1);

    const auto model = io::read_model(dir.path, LikelihoodKind::bernoulli);
    const double reloaded = loss(in.problem, model);
    EXPECT_LE(std::abs(reloaded - r.final_loss()), 1e-12 * r.final_loss());
    const auto summary = io::read_key_values(dir / "summary.txt");
    EXPECT_EQ(std::stod(summary.at("final_loss")), r.final_loss());
}

TEST(Cli, GenFitNmiRoundTrip) {
    TempDir dir;
    auto g = run_cli("gen --likelihood bernoulli --k 3 --m 20 --n 50 --seed 4 --out " + (dir / "x.csv").string());
    ASSERT_EQ(g.status, 0) << g.output;
    ASSERT_TRUE(fs::exists(dir / "x_S_true.csv"));
    ASSERT_TRUE(fs::exists(dir / "x_C_true.csv"));

    auto f = run_cli("fit --input " + (dir / "x.csv").string() + " --likelihood bernoulli --k 3 --restarts 2 --out " +
                     (dir / "fit").string());
    ASSERT_EQ(f.status, 0) << f.output;
    for (const char* name : {"C.csv", "S.csv", "trace.csv", "summary.txt", "manifest.txt", "restarts.csv"})
        EXPECT_TRUE(fs::exists(dir / "fit" / name)) << name;

    const auto summary = io::read_key_values(dir / "fit" / "summary.txt");
    const Problem p(io::load_matrix(dir / "x.csv", std::nullopt, LikelihoodKind::bernoulli), LikelihoodKind::bernoulli);
    const double reloaded = loss(p, io::read_model(dir / "fit", LikelihoodKind::bernoulli));
    const double recorded = std::stod(summary.at("final_loss"));
    EXPECT_LE(std::abs(reloaded - recorded), 1e-12 * recorded);

    const auto manifest = io::read_key_values(dir / "fit" / "manifest.txt");
    EXPECT_EQ(manifest.at("input_sha256"), io::file_digest(dir / "x.csv"));

    auto n = run_cli("nmi --s-a " + (dir / "fit" / "S.csv").string() + " --s-b " + (dir / "x_S_true.csv").string());
    ASSERT_EQ(n.status, 0) << n.output;
    const double v = std::stod(n.output);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
}

TEST(Cli, BadArgumentsExitNonzero) {
    TempDir dir;
    ASSERT_EQ(run_cli("gen --likelihood gaussian --k 2 --m 5 --n 8 --seed 1 --out " + (dir / "x.csv").string()).status, 0);
    auto bad_k = run_cli("fit --input " + (dir / "x.csv").string() + " --k 0 --out " + (dir / "fit").string());
    EXPECT_NE(bad_k.status, 0);
    EXPECT_FALSE(fs::exists(dir / "fit" / "C.csv"));

    auto binary = run_cli("fit --input " + (dir / "x.csv").string() + " --likelihood bernoulli --k 2 --out " +
                          (dir / "fit2").string());
    EXPECT_NE(binary.status, 0);
    EXPECT_NE(binary.output.find("non-binary"), std::string::npos) << binary.output;

    auto again = run_cli("gen --likelihood gaussian --k 2 --m 5 --n 8 --seed 1 --out " + (dir / "x.csv").string());
    EXPECT_NE(again.status, 0) << "existing output must not be overwritten without --force";

    EXPECT_NE(run_cli("no-such-command").status, 0);
    EXPECT_NE(run_cli("fit --input /nonexistent.csv --k 2 --out " + (dir / "f3").string()).status, 0);
}

TEST(Cli, SweepWritesOneRowPerK) {
    TempDir dir;
    ASSERT_EQ(run_cli("gen --likelihood bernoulli --k 2 --m 10 --n 30 --seed 2 --out " + (dir / "x.csv").string()).status, 0);
    auto s = run_cli("sweep --input " + (dir / "x.csv").string() +
                     " --likelihood bernoulli --k-min 1 --k-max 3 --restarts 2 --out " + (dir / "sw").string());
    ASSERT_EQ(s.status, 0) << s.output;
    std::istringstream csv(slurp(dir / "sw" / "sweep.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, io::kSweepHeader);
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    EXPECT_EQ(rows, 3);
    EXPECT_TRUE(fs::exists(dir / "sw" / "K_2" / "C.csv"));
}
