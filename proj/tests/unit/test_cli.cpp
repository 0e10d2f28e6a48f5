#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "dirfdr/cli.hpp"
#include "dirfdr/data_io.hpp"
#include "dirfdr/rng.hpp"
#include "dirfdr/simulation.hpp"
#include "test_util.hpp"

using namespace dirfdr;
using testutil::TempDir;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = dispatch(args, out, err);
    return {code, out.str(), err.str()};
}

// Small logistic data set written as design and response files.
void write_logistic(const TempDir& dir, const std::string& stem, std::uint64_t seed) {
    const int n = 150, p = 8;
    Philox xs(seed, 0, StreamRole::Design), ys(seed, 0, StreamRole::Responses);
    const Eigen::MatrixXd x = generate_design(n, p, -1.0, 1.0, xs);
    const GroundTruth truth = generate_coefficients(p, 2, 1.5);
    const Eigen::VectorXd y = sample_responses(x, truth, GlmFamily::Logistic, ys);
    write_matrix_csv(dir / (stem + "_x.csv"), x);
    write_matrix_csv(dir / (stem + "_y.csv"), y);
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
    CHECK(run({}).code == kExitUsage);
    CHECK(run({"frobnicate"}).code == kExitUsage);
    CHECK(run({"fit", "--bogus"}).code == kExitUsage);
    TempDir dir;
    write_logistic(dir, "a", 1);
    const Run r = run({"infer", "--design", (dir / "a_x.csv").string(), "--response",
                       (dir / "a_y.csv").string(), "--family", "frobnicate", "--out",
                       (dir / "r.csv").string()});
    CHECK(r.code == kExitUsage);
    CHECK_FALSE(std::filesystem::exists(dir / "r.csv"));
    CHECK(run({"infer", "--design", (dir / "a_x.csv").string(), "--response", (dir / "a_y.csv").string(),
               "--family", "logistic", "--alpha", "0.2", "--fdv", "1", "--out", (dir / "r.csv").string()})
              .code == kExitUsage);
    CHECK(run({"infer", "--design", (dir / "a_x.csv").string(), "--response", (dir / "a_y.csv").string(),
               "--family", "logistic", "--alpha", "1.5", "--out", (dir / "r.csv").string()})
              .code == kExitUsage);
}

TEST_CASE("help exits 0 on every subcommand") {
    for (const char* cmd : {"fit", "precision", "infer", "two-sample", "simulate"}) {
        const Run r = run({cmd, "--help"});
        CHECK(r.code == kExitSuccess);
        CHECK(r.out.find("--") != std::string::npos);
    }
    CHECK(run({"--help"}).code == kExitSuccess);
}

TEST_CASE("data errors exit 2 without output") {
    TempDir dir;
    const Run r = run({"simulate", "--config", (dir / "missing.json").string(), "--out-dir",
                       (dir / "out").string()});
    CHECK(r.code == kExitData);
    CHECK_FALSE(std::filesystem::exists(dir / "out" / "trials.csv"));
    testutil::write_text(dir / "bad.json", "{\"n\": 10, \"whatever\": 1}");
    CHECK(run({"simulate", "--config", (dir / "bad.json").string(), "--out-dir", (dir / "out").string()})
              .code == kExitData);
    testutil::write_text(dir / "x.csv", "1,2\n3,4\n");
    testutil::write_text(dir / "y.csv", "1\n0\n1\n");
    CHECK(run({"fit", "--design", (dir / "x.csv").string(), "--response", (dir / "y.csv").string(),
               "--family", "logistic", "--lambda", "0.1", "--out", (dir / "f.csv").string()})
              .code == kExitData);
    CHECK_FALSE(std::filesystem::exists(dir / "f.csv"));
}

TEST_CASE("infer writes the documented columns") {
    TempDir dir;
    write_logistic(dir, "a", 2);
    const auto out = (dir / "r.csv").string();
    const Run r = run({"infer", "--design", (dir / "a_x.csv").string(), "--response",
                       (dir / "a_y.csv").string(), "--family", "logistic", "--alpha", "0.2", "--seed", "7",
                       "--out", out});
    REQUIRE(r.code == kExitSuccess);
    CHECK(r.err.find("seed = 7") != std::string::npos);
    CHECK(r.err.find("cv_folds = 5") != std::string::npos);
    const auto rows = lines(testutil::read_text(out));
    REQUIRE(rows.size() == 9);
    CHECK(rows[0] == "index,beta_hat,beta_debiased,theta_jj,statistic,selected,sign");
    for (std::size_t k = 1; k < rows.size(); ++k) {
        CHECK(std::count(rows[k].begin(), rows[k].end(), ',') == 6);
        CHECK(rows[k].substr(0, rows[k].find(',')) == std::to_string(k));
        const bool selected = rows[k].find(",1,") != std::string::npos;
        const char last = rows[k].back();
        CHECK((selected ? last == '1' : last == ','));
    }
    const Run again = run({"infer", "--design", (dir / "a_x.csv").string(), "--response",
                           (dir / "a_y.csv").string(), "--family", "logistic", "--alpha", "0.2", "--seed",
                           "7", "--out", (dir / "r2.csv").string()});
    CHECK(again.code == kExitSuccess);
    CHECK(testutil::read_text(out) == testutil::read_text(dir / "r2.csv"));
}

TEST_CASE("fit, precision and two-sample") {
    TempDir dir;
    write_logistic(dir, "a", 3);
    write_logistic(dir, "b", 4);
    const auto x = (dir / "a_x.csv").string(), y = (dir / "a_y.csv").string();
    REQUIRE(run({"fit", "--design", x, "--response", y, "--family", "logistic", "--out",
                 (dir / "fit.csv").string()})
                .code == kExitSuccess);
    CHECK(lines(testutil::read_text(dir / "fit.csv"))[0] == "index,beta_hat");
    REQUIRE(run({"precision", "--design", x, "--response", y, "--family", "logistic", "--beta",
                 (dir / "fit.csv").string(), "--lambda-n", "0.1", "--out", (dir / "theta.csv").string()})
                .code == kExitSuccess);
    const CsvTable theta = read_csv(dir / "theta.csv");
    CHECK(theta.values.rows() == 8);
    CHECK(theta.values.cols() == 8);
    const Run ts = run({"two-sample", "--design1", x, "--response1", y, "--design2",
                        (dir / "b_x.csv").string(), "--response2", (dir / "b_y.csv").string(), "--family",
                        "logistic", "--fwer", "0.1", "--out", (dir / "m.csv").string()});
    REQUIRE(ts.code == kExitSuccess);
    CHECK(lines(testutil::read_text(dir / "m.csv"))[0] ==
          "index,beta_debiased_1,beta_debiased_2,theta_jj_1,theta_jj_2,m_statistic,selected,sign");
}

TEST_CASE("simulate writes both tables") {
    TempDir dir;
    testutil::write_text(dir / "c.json",
                         "{\"family\":\"logistic\",\"n\":100,\"p\":10,\"s0\":2,\"signal\":1.0,\"trials\":2,"
                         "\"lasso_grid_size\":20,\"clime_grid\":[0.1,0.3,0.9]}");
    const Run r = run({"simulate", "--config", (dir / "c.json").string(), "--jobs", "2", "--out-dir",
                       (dir / "o").string()});
    REQUIRE(r.code == kExitSuccess);
    CHECK(lines(testutil::read_text(dir / "o" / "trials.csv")).size() == 3);
    CHECK(lines(testutil::read_text(dir / "o" / "summary.csv")).size() == 2);
}
