#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "jointdag/errors.hpp"
#include "jointdag/io.hpp"
#include "test_util.hpp"

using namespace jointdag;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("jointdag_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

// CLI binary under test, supplied by the build (unset when run standalone).
const char* cli_path() { return std::getenv("JOINTDAG_CLI"); }

int run_cli(const std::string& args) {
    const std::string cmd = std::string(cli_path()) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

const char* kSimConfig = R"({
  "p": 6, "K": 2, "core_edges": 5, "extra_edges": 1,
  "weight_range": [[-1.0, -0.3], [0.3, 1.0]],
  "variance_range": [1.0, 1.5],
  "seed": 11,
  "n_k": [300, 300]
})";

}  // namespace

TEST_CASE("graph files round trip") {
    TempDir tmp;
    std::mt19937_64 rng(227);
    const Dag d = testutil::random_dag(7, 0.4, rng);
    io::write_dag(tmp.path / "g.edges", d);
    CHECK(io::read_dag(tmp.path / "g.edges") == d);

    const Pdag g = complete_to_cpdag(d);
    io::write_pdag(tmp.path / "g.cpdag", g);
    CHECK(io::read_pdag(tmp.path / "g.cpdag") == g);

    CHECK_THROWS_AS(io::read_dag(tmp.path / "missing.edges"), IoError);
}

TEST_CASE("sem files round trip bit-exactly") {
    TempDir tmp;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
    a(0, 1) = 0.123456789012345678;
    a(1, 2) = -0.87;
    const SemModel m(a, Eigen::VectorXd::Constant(3, 1.37));
    io::write_sem(tmp.path / "m.sem", m);
    const SemModel back = io::read_sem(tmp.path / "m.sem");
    CHECK(back.coeffs == m.coeffs);
    CHECK(back.noise_var == m.noise_var);
}

TEST_CASE("csv round trip and header validation") {
    TempDir tmp;
    std::mt19937_64 rng(229);
    Eigen::MatrixXd x(5, 3);
    std::normal_distribution<double> gauss;
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 3; ++c) x(r, c) = gauss(rng);
    io::write_csv(tmp.path / "x.csv", x);
    CHECK(io::read_csv(tmp.path / "x.csv") == x);

    spit(tmp.path / "bad.csv", "A,B\n1,2\n");
    CHECK_THROWS_AS(io::read_csv(tmp.path / "bad.csv"), IoError);
}

TEST_CASE("intervention files") {
    TempDir tmp;
    const InterventionSpec spec{{{1, 2}, {}}, 4};
    io::write_interventions(tmp.path / "iv.json", spec);
    const InterventionSpec back = io::read_interventions(tmp.path / "iv.json", 2, 4);
    CHECK(back.targets == spec.targets);
    CHECK_THROWS_AS(io::read_interventions(tmp.path / "iv.json", 3, 4), SizeMismatchError);
    spit(tmp.path / "bad.json", "{not json");
    CHECK_THROWS_AS(io::read_interventions(tmp.path / "bad.json", 2, 4), ConfigError);
}

TEST_CASE("config parsing is strict about field names") {
    const auto cfg = io::parse_simulation_config(kSimConfig);
    CHECK(cfg.model.p == 6);
    CHECK(cfg.samples_per_class == std::vector<long>{300, 300});

    CHECK_THROWS_AS(io::parse_simulation_config(R"({"p": 3, "K": 1, "n_k": [10], "typo": 1})"),
                    ConfigError);
    CHECK_THROWS_AS(io::parse_simulation_config("not json"), ConfigError);
    CHECK_THROWS_AS(io::parse_simulation_config(R"({"p": 3, "K": 2, "n_k": [10]})"),
                    ConfigError);
}

TEST_CASE("file digests are stable") {
    TempDir tmp;
    spit(tmp.path / "a.txt", "hello");
    spit(tmp.path / "b.txt", "hello");
    CHECK(io::file_digest(tmp.path / "a.txt") == io::file_digest(tmp.path / "b.txt"));
    spit(tmp.path / "c.txt", "hellp");
    CHECK(io::file_digest(tmp.path / "a.txt") != io::file_digest(tmp.path / "c.txt"));
}

TEST_CASE("cli simulate, fit, evaluate round trip") {
    if (!cli_path()) return;  // library-only build
    TempDir tmp;
    spit(tmp.path / "sim.json", kSimConfig);

    REQUIRE(run_cli("--out " + (tmp.path / "sim").string() + " simulate --config " +
                    (tmp.path / "sim.json").string()) == 0);
    CHECK(fs::exists(tmp.path / "sim/class_0.csv"));
    CHECK(fs::exists(tmp.path / "sim/class_1.csv"));
    CHECK(fs::exists(tmp.path / "sim/true_class_1.sem"));
    CHECK(fs::exists(tmp.path / "sim/manifest.json"));

    REQUIRE(run_cli("--out " + (tmp.path / "fit").string() + " fit --data " +
                    (tmp.path / "sim/class_0.csv").string() + " " +
                    (tmp.path / "sim/class_1.csv").string() + " --lambda1-c 2 --lambda2 0.05") ==
            0);
    CHECK(fs::exists(tmp.path / "fit/union.edges"));
    CHECK(fs::exists(tmp.path / "fit/class_0.sem"));
    CHECK(fs::exists(tmp.path / "fit/class_1.sem"));
    CHECK(fs::exists(tmp.path / "fit/trace.jsonl"));
    CHECK(fs::exists(tmp.path / "fit/summary.json"));

    REQUIRE(run_cli("--out " + (tmp.path / "eval").string() + " evaluate --estimate " +
                    (tmp.path / "fit/class_0.sem").string() + " " +
                    (tmp.path / "fit/class_1.sem").string() + " --truth " +
                    (tmp.path / "sim/true_class_0.sem").string() + " " +
                    (tmp.path / "sim/true_class_1.sem").string()) == 0);
    CHECK(fs::exists(tmp.path / "eval/metrics.csv"));
    CHECK(fs::exists(tmp.path / "eval/metrics.json"));

    // Estimate equal to truth scores zero everywhere.
    REQUIRE(run_cli("--out " + (tmp.path / "eval0").string() + " evaluate --estimate " +
                    (tmp.path / "sim/true_class_0.sem").string() + " --truth " +
                    (tmp.path / "sim/true_class_0.sem").string()) == 0);
    CHECK(slurp(tmp.path / "eval0/metrics.json").find("\"mean_shd\": 0.0") != std::string::npos);
}

TEST_CASE("cli separate mode writes cpdag files and no union") {
    if (!cli_path()) return;
    TempDir tmp;
    spit(tmp.path / "sim.json", kSimConfig);
    REQUIRE(run_cli("--out " + (tmp.path / "sim").string() + " simulate --config " +
                    (tmp.path / "sim.json").string()) == 0);
    REQUIRE(run_cli("--out " + (tmp.path / "fit").string() + " fit --mode separate --data " +
                    (tmp.path / "sim/class_0.csv").string() + " " +
                    (tmp.path / "sim/class_1.csv").string()) == 0);
    CHECK(fs::exists(tmp.path / "fit/class_0.cpdag"));
    CHECK(fs::exists(tmp.path / "fit/class_1.cpdag"));
    CHECK(!fs::exists(tmp.path / "fit/union.edges"));
}

TEST_CASE("cli exit codes") {
    if (!cli_path()) return;
    TempDir tmp;
    spit(tmp.path / "bad.json", "{broken");
    CHECK(run_cli("--out " + (tmp.path / "o").string() + " simulate --config " +
                  (tmp.path / "bad.json").string()) == 2);
    // Malformed config leaves no partial outputs behind.
    CHECK(!fs::exists(tmp.path / "o/manifest.json"));

    CHECK(run_cli("--out " + (tmp.path / "o").string() + " evaluate --estimate " +
                  (tmp.path / "nope.edges").string() + " --truth " +
                  (tmp.path / "nope.edges").string()) == 3);

    // Mismatched node counts.
    io::write_dag(tmp.path / "p2.edges", Dag(2, {{0, 1}}));
    io::write_dag(tmp.path / "p3.edges", Dag(3, {{0, 1}}));
    CHECK(run_cli("--out " + (tmp.path / "o").string() + " evaluate --estimate " +
                  (tmp.path / "p2.edges").string() + " --truth " +
                  (tmp.path / "p3.edges").string()) == 4);

    // Reversing one edge costs exactly one operation.
    io::write_dag(tmp.path / "fwd.edges", Dag(3, {{0, 1}, {1, 2}}));
    io::write_dag(tmp.path / "rev.edges", Dag(3, {{0, 1}, {2, 1}}));
    REQUIRE(run_cli("--out " + (tmp.path / "rev").string() + " evaluate --estimate " +
                    (tmp.path / "rev.edges").string() + " --truth " +
                    (tmp.path / "fwd.edges").string()) == 0);
    CHECK(slurp(tmp.path / "rev/metrics.json").find("\"shd\": 1") != std::string::npos);
}

TEST_CASE("cli interventional fit zeroes the targeted columns") {
    if (!cli_path()) return;
    TempDir tmp;
    spit(tmp.path / "sim.json", R"({
      "p": 3, "K": 2, "core_edges": 2, "extra_edges": 0,
      "seed": 5, "n_k": [400, 400]
    })");
    REQUIRE(run_cli("--out " + (tmp.path / "sim").string() + " simulate --config " +
                    (tmp.path / "sim.json").string()) == 0);
    spit(tmp.path / "iv.json", "[[], [2]]");
    REQUIRE(run_cli("--out " + (tmp.path / "fit").string() + " fit --data " +
                    (tmp.path / "sim/class_0.csv").string() + " " +
                    (tmp.path / "sim/class_1.csv").string() + " --interventions " +
                    (tmp.path / "iv.json").string()) == 0);
    const SemModel m1 = io::read_sem(tmp.path / "fit/class_1.sem");
    CHECK(m1.coeffs.col(2).norm() == 0.0);
}

TEST_CASE("cli simulate is idempotent apart from the manifest") {
    if (!cli_path()) return;
    TempDir tmp;
    spit(tmp.path / "sim.json", kSimConfig);
    REQUIRE(run_cli("--out " + (tmp.path / "a").string() + " simulate --config " +
                    (tmp.path / "sim.json").string()) == 0);
    REQUIRE(run_cli("--out " + (tmp.path / "b").string() + " simulate --config " +
                    (tmp.path / "sim.json").string()) == 0);
    for (const char* name : {"class_0.csv", "class_1.csv", "true_class_0.sem"})
        CHECK(slurp(tmp.path / "a" / name) == slurp(tmp.path / "b" / name));
}

TEST_CASE("cli replicate smoke with parallel determinism") {
    if (!cli_path()) return;
    TempDir tmp;
    spit(tmp.path / "exp.json", R"({
      "model": {"p": 8, "K": 2, "core_edges": 6, "extra_edges": 1, "n_k": [80, 80]},
      "replicates": 2,
      "scaling_grid": [2.0, 3.0],
      "tuning_grid": [1.0, 8.0],
      "master_seed": 33,
      "cv_folds": 4,
      "lasso_grid_size": 8
    })");
    REQUIRE(run_cli("--jobs 1 --out " + (tmp.path / "r1").string() + " replicate --config " +
                    (tmp.path / "exp.json").string()) == 0);
    REQUIRE(run_cli("--jobs 2 --out " + (tmp.path / "r2").string() + " replicate --config " +
                    (tmp.path / "exp.json").string()) == 0);
    CHECK(fs::exists(tmp.path / "r1/summary.csv"));
    CHECK(fs::exists(tmp.path / "r1/roc.csv"));
    CHECK(slurp(tmp.path / "r1/summary.csv") == slurp(tmp.path / "r2/summary.csv"));
    CHECK(slurp(tmp.path / "r1/summary.json") == slurp(tmp.path / "r2/summary.json"));
    CHECK(slurp(tmp.path / "r1/roc.csv") == slurp(tmp.path / "r2/roc.csv"));
}
