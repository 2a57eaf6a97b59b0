#include <sys/wait.h>

#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "sppca/csv.hpp"
#include "sppca/errors.hpp"
#include "sppca/runner.hpp"
#include "sppca/tensor.hpp"
#include "test_support.hpp"

using namespace sppca;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("sppca_io_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string first_line(const std::string& path) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    return line;
}

std::size_t line_count(const std::string& path) {
    std::ifstream in(path);
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    return n;
}

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(bool(in));
    nlohmann::json j;
    in >> j;
    return j;
}

DenseMatrix json_matrix(const nlohmann::json& j) {
    DenseMatrix m(j.size(), j.empty() ? 0 : j[0].size());
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t c = 0; c < m.cols; ++c) m(i, c) = j[i][c].get<double>();
    return m;
}

int run_cli(const std::string& args) {
    const std::string cmd =
        std::string(SPPCA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (status < 0 || !WIFEXITED(status)) return -1;
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("read_csv: numeric first row is data, non-numeric first row is a header") {
    TempDir dir("read_basic");

    write_text(dir.file("bare.csv"), "1,2\n3.5,-4e-2\n");
    const CsvTable bare = read_csv(dir.file("bare.csv"));
    CHECK_FALSE(bare.had_header);
    CHECK(bare.header.empty());
    REQUIRE(bare.values.rows == 2);
    REQUIRE(bare.values.cols == 2);
    CHECK(bare.values(0, 0) == 1.0);
    CHECK(bare.values(0, 1) == 2.0);
    CHECK(bare.values(1, 0) == 3.5);
    CHECK(bare.values(1, 1) == -4e-2);

    write_text(dir.file("named.csv"), "alpha,beta\n1.5,-2\n");
    const CsvTable named = read_csv(dir.file("named.csv"));
    CHECK(named.had_header);
    REQUIRE(named.header.size() == 2);
    CHECK(named.header[0] == "alpha");
    CHECK(named.header[1] == "beta");
    REQUIRE(named.values.rows == 1);
    CHECK(named.values(0, 0) == 1.5);
    CHECK(named.values(0, 1) == -2.0);
}

TEST_CASE("read_csv: one non-numeric field makes the whole first row a header") {
    TempDir dir("read_mixed");
    write_text(dir.file("mixed.csv"), "1,x\n3,4\n");
    const CsvTable t = read_csv(dir.file("mixed.csv"));
    CHECK(t.had_header);
    REQUIRE(t.header.size() == 2);
    CHECK(t.header[0] == "1");
    CHECK(t.header[1] == "x");
    REQUIRE(t.values.rows == 1);
    CHECK(t.values(0, 0) == 3.0);
    CHECK(t.values(0, 1) == 4.0);
}

TEST_CASE("read_csv: carriage returns, padding, and trailing blanks are tolerated") {
    TempDir dir("read_crlf");
    write_text(dir.file("crlf.csv"), "a,b\r\n 1 ,\t2\r\n3,4\r\n\r\n\n");
    const CsvTable t = read_csv(dir.file("crlf.csv"));
    CHECK(t.had_header);
    CHECK(t.header[0] == "a");
    REQUIRE(t.values.rows == 2);
    CHECK(t.values(0, 0) == 1.0);
    CHECK(t.values(0, 1) == 2.0);
    CHECK(t.values(1, 0) == 3.0);
    CHECK(t.values(1, 1) == 4.0);
}

TEST_CASE("read_csv: malformed input reports 1-based line and field") {
    TempDir dir("read_bad");

    write_text(dir.file("badfield.csv"), "1,2\n3,zzz\n");
    try {
        read_csv(dir.file("badfield.csv"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.row == 2);
        CHECK(e.col == 2);
    }

    // inf parses as a double but is rejected as non-finite. The header makes
    // the offending line the third physical line.
    write_text(dir.file("inf.csv"), "a,b\n1,2\n3,inf\n");
    try {
        read_csv(dir.file("inf.csv"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.row == 3);
        CHECK(e.col == 2);
    }

    write_text(dir.file("ragged.csv"), "1,2\n3\n");
    try {
        read_csv(dir.file("ragged.csv"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.row == 2);
        CHECK(e.col == 1);
    }
}

TEST_CASE("read_csv: empty, blank, and header-only files are rejected") {
    TempDir dir("read_empty");

    write_text(dir.file("empty.csv"), "");
    try {
        read_csv(dir.file("empty.csv"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.row == 1);
        CHECK(e.col == 1);
    }

    write_text(dir.file("blank.csv"), "\n\n");
    CHECK_THROWS_AS(read_csv(dir.file("blank.csv")), ParseError);

    write_text(dir.file("headonly.csv"), "a,b\n");
    CHECK_THROWS_AS(read_csv(dir.file("headonly.csv")), ParseError);

    CHECK_THROWS_AS(read_csv(dir.file("absent.csv")), Error);
}

TEST_CASE("write_csv: doubles survive a round trip bitwise") {
    TempDir dir("write_rt");
    DenseMatrix m(2, 4);
    m(0, 0) = 0.1;
    m(0, 1) = 1.0 / 3.0;
    m(0, 2) = 3.141592653589793;
    m(0, 3) = -0.0;
    m(1, 0) = 1e-300;
    m(1, 1) = 1e300;
    m(1, 2) = 123456789.123456789;
    m(1, 3) = -2.2250738585072014e-308;

    const std::vector<std::string> header = {"a", "b", "c", "d"};
    write_csv(dir.file("rt.csv"), header, m);
    const CsvTable back = read_csv(dir.file("rt.csv"));
    CHECK(back.had_header);
    CHECK(back.header == header);
    REQUIRE(back.values.rows == m.rows);
    REQUIRE(back.values.cols == m.cols);
    for (std::size_t i = 0; i < m.data.size(); ++i)
        CHECK(back.values.data[i] == m.data[i]);
    CHECK(std::signbit(back.values(0, 3)));

    // An empty header omits the row entirely, so the file reads back bare.
    write_csv(dir.file("bare.csv"), {}, m);
    const CsvTable bare = read_csv(dir.file("bare.csv"));
    CHECK_FALSE(bare.had_header);
    CHECK(bare.values.data == m.data);
}

TEST_CASE("write_csv: header length must match the column count") {
    TempDir dir("write_bad");
    DenseMatrix m(1, 2);
    m(0, 0) = 1.0;
    m(0, 1) = 2.0;
    CHECK_THROWS_AS(write_csv(dir.file("x.csv"), {"only"}, m), DimensionMismatch);
}

TEST_CASE("ingest_csv: standardization uses population moments") {
    TempDir dir("ingest_std");
    write_text(dir.file("t.csv"), "x,y\n1,10\n3,30\n");
    IngestOptions opts;
    opts.standardize = true;
    const DenseMatrix m = ingest_csv(dir.file("t.csv"), opts);
    REQUIRE(m.rows == 2);
    REQUIRE(m.cols == 2);
    // Population sd of {1,3} is exactly 1 and of {10,30} exactly 10.
    CHECK(m(0, 0) == -1.0);
    CHECK(m(1, 0) == 1.0);
    CHECK(m(0, 1) == -1.0);
    CHECK(m(1, 1) == 1.0);
}

TEST_CASE("ingest_csv: constant columns cannot be standardized") {
    TempDir dir("ingest_const");
    write_text(dir.file("t.csv"), "x,y\n1,7\n3,7\n");
    IngestOptions opts;
    opts.standardize = true;
    CHECK_THROWS_AS(ingest_csv(dir.file("t.csv"), opts), ConstantColumn);
}

TEST_CASE("ingest_csv: drops by header name or 0-based index, then transposes") {
    TempDir dir("ingest_drop");
    write_text(dir.file("t.csv"), "a,b,c\n1,2,3\n4,5,6\n");

    IngestOptions by_name;
    by_name.drop_columns = {"b"};
    const DenseMatrix named = ingest_csv(dir.file("t.csv"), by_name);
    REQUIRE(named.cols == 2);
    CHECK(named(0, 0) == 1.0);
    CHECK(named(0, 1) == 3.0);
    CHECK(named(1, 0) == 4.0);
    CHECK(named(1, 1) == 6.0);

    // "1" is not a header name here, so it falls through to index 1.
    IngestOptions by_index;
    by_index.drop_columns = {"1"};
    const DenseMatrix indexed = ingest_csv(dir.file("t.csv"), by_index);
    CHECK(indexed.data == named.data);

    // A header name that looks like an index wins over the index reading.
    write_text(dir.file("named0.csv"), "a,0\n5,6\n");
    IngestOptions name_first;
    name_first.drop_columns = {"0"};
    const DenseMatrix kept = ingest_csv(dir.file("named0.csv"), name_first);
    REQUIRE(kept.cols == 1);
    CHECK(kept(0, 0) == 5.0);

    // Headerless files can only drop by index.
    write_text(dir.file("bare.csv"), "1,2,3\n4,5,6\n");
    IngestOptions bare_drop;
    bare_drop.drop_columns = {"2"};
    const DenseMatrix bare = ingest_csv(dir.file("bare.csv"), bare_drop);
    REQUIRE(bare.cols == 2);
    CHECK(bare(0, 1) == 2.0);

    IngestOptions flip;
    flip.transpose = true;
    const DenseMatrix t = ingest_csv(dir.file("t.csv"), flip);
    REQUIRE(t.rows == 3);
    REQUIRE(t.cols == 2);
    CHECK(t(0, 0) == 1.0);
    CHECK(t(0, 1) == 4.0);
    CHECK(t(2, 0) == 3.0);
    CHECK(t(2, 1) == 6.0);
}

TEST_CASE("ingest_csv: bad drop specs are rejected") {
    TempDir dir("ingest_badspec");
    write_text(dir.file("t.csv"), "a,b\n1,2\n");

    IngestOptions unknown;
    unknown.drop_columns = {"zzz"};
    CHECK_THROWS_AS(ingest_csv(dir.file("t.csv"), unknown), Error);

    IngestOptions out_of_range;
    out_of_range.drop_columns = {"7"};
    CHECK_THROWS_AS(ingest_csv(dir.file("t.csv"), out_of_range), Error);

    IngestOptions all;
    all.drop_columns = {"a", "b"};
    CHECK_THROWS_AS(ingest_csv(dir.file("t.csv"), all), Error);
}

TEST_CASE("ingest_csv: breast cancer table drops the label column cleanly") {
    const std::string path = std::string(SPPCA_DATA_DIR) + "/breast_cancer.csv";
    IngestOptions opts;
    opts.standardize = true;
    opts.drop_columns = {"target"};
    const DenseMatrix m = ingest_csv(path, opts);
    REQUIRE(m.rows == 569);
    REQUIRE(m.cols == 30);
    const double n = static_cast<double>(m.rows);
    for (std::size_t c = 0; c < m.cols; ++c) {
        double mean = 0.0, second = 0.0;
        for (std::size_t r = 0; r < m.rows; ++r) {
            mean += m(r, c);
            second += m(r, c) * m(r, c);
        }
        mean /= n;
        second /= n;
        CHECK(std::abs(mean) < 1e-10);
        CHECK(std::abs(second - 1.0) < 1e-10);
    }

    IngestOptions keep_all;
    const DenseMatrix full = ingest_csv(path, keep_all);
    CHECK(full.cols == 31);
}

TEST_CASE("generate_synthetic: planted covariance and truth file agree with the data") {
    TempDir dir("synth_cov");
    SynthConfig config;
    config.n = 20000;
    config.d = 4;
    config.q = 2;
    config.sigma = {2.0, 1.0};
    config.noise_sd = 0.3;
    config.seed = 11;
    generate_synthetic(config, dir.file("y.csv"), dir.file("truth.json"));

    const CsvTable t = read_csv(dir.file("y.csv"));
    CHECK(t.had_header);
    REQUIRE(t.header.size() == 4);
    CHECK(t.header[0] == "y0");
    CHECK(t.header[3] == "y3");
    REQUIRE(t.values.rows == 20000);

    const nlohmann::json truth = load_json(dir.file("truth.json"));
    CHECK(truth["n"] == 20000);
    CHECK(truth["d"] == 4);
    CHECK(truth["q"] == 2);
    CHECK(truth["noise_sd"] == 0.3);
    CHECK(truth["seed"] == 11);
    REQUIRE(truth["sigma"].size() == 2);
    CHECK(truth["sigma"][0] == 2.0);
    CHECK(truth["sigma"][1] == 1.0);

    const DenseMatrix u = json_matrix(truth["U"]);
    const DenseMatrix w = json_matrix(truth["W"]);
    REQUIRE(u.rows == 4);
    REQUIRE(u.cols == 2);
    const DenseMatrix utu = gram(u);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(std::abs(utu(i, j) - (i == j ? 1.0 : 0.0)) < 1e-12);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(w(i, j) == doctest::Approx(u(i, j) * config.sigma[j]).epsilon(1e-12));

    // Law of large numbers: the second-moment matrix of 20000 rows sits
    // within a few sampling sd of W W^T + noise^2 I.
    DenseMatrix cov(4, 4);
    for (std::size_t r = 0; r < t.values.rows; ++r)
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j)
                cov(i, j) += t.values(r, i) * t.values(r, j);
    for (double& v : cov.data) v /= static_cast<double>(t.values.rows);
    const DenseMatrix wwt = matmul(w, transpose(w));
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            const double expect = wwt(i, j) + (i == j ? 0.09 : 0.0);
            CHECK(std::abs(cov(i, j) - expect) < 0.15);
        }
}

TEST_CASE("generate_synthetic: identical seeds give identical bytes") {
    TempDir dir("synth_rep");
    SynthConfig config;
    config.n = 200;
    config.seed = 42;
    generate_synthetic(config, dir.file("a.csv"), dir.file("a.json"));
    generate_synthetic(config, dir.file("b.csv"), dir.file("b.json"));
    CHECK(read_bytes(dir.file("a.csv")) == read_bytes(dir.file("b.csv")));
    CHECK(read_bytes(dir.file("a.json")) == read_bytes(dir.file("b.json")));

    config.seed = 43;
    generate_synthetic(config, dir.file("c.csv"), dir.file("c.json"));
    CHECK(read_bytes(dir.file("a.csv")) != read_bytes(dir.file("c.csv")));
}

TEST_CASE("generate_synthetic: scale vector validation") {
    TempDir dir("synth_bad");
    SynthConfig config;

    config.sigma = {3.0};
    CHECK_THROWS_AS(
        generate_synthetic(config, dir.file("x.csv"), dir.file("x.json")),
        DimensionMismatch);

    config.sigma = {1.0, 1.0};
    CHECK_THROWS_AS(generate_synthetic(config, dir.file("x.csv"), dir.file("x.json")),
                    Error);

    config.sigma = {1.0, 2.0};
    CHECK_THROWS_AS(generate_synthetic(config, dir.file("x.csv"), dir.file("x.json")),
                    Error);

    config.sigma = {2.0, -1.0};
    CHECK_THROWS_AS(generate_synthetic(config, dir.file("x.csv"), dir.file("x.json")),
                    Error);
}

TEST_CASE("cli: every subcommand produces its files and exits zero") {
    TempDir dir("cli_ok");

    const int synth_rc = run_cli("synth --n 60 --d 3 --q 1 --sigma 2 --noise-sd 0.05 "
                                 "--seed 5 --out " +
                                 dir.file("synth.csv") + " --truth " +
                                 dir.file("truth.json"));
    REQUIRE(synth_rc == 0);
    CHECK(fs::exists(dir.file("synth.csv")));
    CHECK(fs::exists(dir.file("truth.json")));

    const int ml_rc = run_cli("ml --input " + dir.file("synth.csv") +
                              " --output-dir " + dir.file("ml") + " --q 1");
    CHECK(ml_rc == 0);
    CHECK(fs::exists(dir.file("ml/ml_solution.json")));
    CHECK(fs::exists(dir.file("ml/metadata.json")));

    const int pca_rc = run_cli("pca --input " + dir.file("synth.csv") +
                               " --output-dir " + dir.file("pca") + " --q 1");
    CHECK(pca_rc == 0);
    CHECK(fs::exists(dir.file("pca/pca_solution.json")));
    CHECK(fs::exists(dir.file("pca/pca_projections.csv")));

    const int fit_rc = run_cli("fit --input " + dir.file("synth.csv") +
                               " --output-dir " + dir.file("fit") +
                               " --model ppca-householder --q 1 --chains 2 "
                               "--warmup 200 --draws 100 --seed 9");
    REQUIRE(fit_rc == 0);
    for (const char* name :
         {"draws.csv", "summary.csv", "summary.json", "diagnostics.json",
          "metadata.json"})
        CHECK(fs::exists(dir.file(std::string("fit/") + name)));

    CHECK(first_line(dir.file("fit/draws.csv")) ==
          "chain,draw,logp,W_0_0,W_1_0,W_2_0,sigma_1,mu_1,mu_2,mu_3,sigma_noise");
    CHECK(line_count(dir.file("fit/draws.csv")) == 1 + 2 * 100);

    const nlohmann::json summary = load_json(dir.file("fit/summary.json"));
    REQUIRE(summary.contains("sigma_1"));
    for (const char* key : {"mean", "sd", "q2_5", "q50", "q97_5", "rhat", "ess"})
        CHECK(summary["sigma_1"].contains(key));

    const int diag_rc = run_cli("diag --draws " + dir.file("fit/draws.csv") +
                                " --output-dir " + dir.file("diag"));
    CHECK(diag_rc == 0);
    CHECK(fs::exists(dir.file("diag/summary.json")));
    CHECK(fs::exists(dir.file("diag/diagnostics.json")));
}

TEST_CASE("cli: failures exit nonzero and leave an error report behind") {
    TempDir dir("cli_bad");

    const int missing_rc = run_cli("ml --input " + dir.file("absent.csv") +
                                   " --output-dir " + dir.file("mlbad"));
    CHECK(missing_rc == 1);
    CHECK(fs::exists(dir.file("mlbad/error.json")));
    const nlohmann::json err = load_json(dir.file("mlbad/error.json"));
    CHECK(err.contains("error"));

    write_text(dir.file("tiny.csv"), "1,2\n3,4\n");
    CHECK(run_cli("fit --input " + dir.file("tiny.csv") + " --output-dir " +
                  dir.file("out") + " --model bogus --seed 1") == 2);
    CHECK(run_cli("fit --input " + dir.file("tiny.csv") + " --output-dir " +
                  dir.file("out") + " --model ppca-standard --noise-prior bogus "
                  "--seed 1") == 2);

    // Missing the required --seed is a parse failure, not a run failure.
    CHECK(run_cli("fit --input " + dir.file("tiny.csv") + " --output-dir " +
                  dir.file("out")) != 0);

    CHECK(run_cli("synth --seed 3 --sigma 1,1 --out " + dir.file("x.csv") +
                  " --truth " + dir.file("x.json")) == 1);
}
