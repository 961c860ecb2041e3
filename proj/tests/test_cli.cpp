#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "graphident/checkpoint.hpp"
#include "graphident/harness.hpp"
#include "run_config.hpp"

using namespace graphident;
namespace fs = std::filesystem;

namespace {

fs::path workdir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "graphident_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Run {
  int code;
  std::string err;
};

Run run_cli(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string("GRAPHIDENT_LOG=quiet ") + GRAPHIDENT_CLI_PATH + " " + args + " > " +
                          (dir / "stdout.txt").string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(err)};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("config reader reports fields") {
  CHECK_THROWS_AS(cli::formation_spec(nlohmann::json{{"p", 1.5}}, false), ConfigError);
  try {
    cli::formation_spec(nlohmann::json{{"n", 10}, {"bogus", 1}}, false);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field == "bogus");
  }
  try {
    cli::formation_spec(nlohmann::json{{"n", "ten"}}, false);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field == "n");
  }
  try {
    cli::eval_run(nlohmann::json{{"grid", {{"repetitions", 0}}}}, false, false);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field == "grid.repetitions");
  }
  CHECK(cli::formation_spec(nlohmann::json::object(), true).n == 50);
  const auto base = cli::eval_run(nlohmann::json::object(), false, true);
  CHECK(base.solver.alpha == 0.2);
  CHECK(base.solver.beta == 1e-4);
  CHECK(cli::eval_run(nlohmann::json::object(), true, false).grid.ns.size() == 6);
  const auto flock = cli::train_run(nlohmann::json{{"architecture", "flocking"}, {"policy", "uniform"}}, false);
  CHECK(flock.arch.fc1 == std::vector<int>{2, 4, 4, 1});
  CHECK(flock.train.policy == SamplePolicy::Uniform);
}

TEST_CASE("per-dimension baseline with one component is a direct solve") {
  const Eigen::MatrixXd W = sample_er_graph(7, 0.4, 3);
  const TrajectoryTensor two = sample_smooth_signals(W, 0.1, 40, 4);
  TrajectoryTensor one(7, 1, 40);
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t t = 0; t < 40; ++t) one(i, 0, t) = two(i, 0, t);
  }
  SolverConfig cfg;
  const Eigen::VectorXd direct = identify_graph(half_vectorize(distance_matrix(one)), 7, cfg).w;
  CHECK(half_vectorize(identify_baseline(one, cfg)) == direct);
}

TEST_CASE("generation subcommands") {
  const fs::path dir = workdir("gen");
  write_file(dir / "bad.json", R"({"p": 1.5})");
  const Run bad = run_cli("gen-formation --config " + (dir / "bad.json").string() + " --out " + dir.string(), dir);
  CHECK(bad.code == 2);
  CHECK(bad.err.find("p:") != std::string::npos);

  write_file(dir / "unknown.json", R"({"nodes": 10})");
  const Run unknown = run_cli("gen-formation --config " + (dir / "unknown.json").string() + " --out " + dir.string(), dir);
  CHECK(unknown.code == 2);
  CHECK(unknown.err.find("nodes") != std::string::npos);

  write_file(dir / "f.json", R"({"n": 30, "d": 100, "windows": 3})");
  CHECK(run_cli("gen-formation --config " + (dir / "f.json").string() + " --out " + (dir / "f").string(), dir).code == 0);
  const auto summary = nlohmann::json::parse(read_file(dir / "f" / "summary.json"));
  CHECK(summary["samples"] == 3);
  CHECK(std::abs(summary["density"]["mean"].get<double>() - 0.2 * 29.0 / 30.0) < 0.06);
  CHECK(fs::exists(dir / "f" / "dataset.gid"));

  write_file(dir / "k.json", R"({"n": 20})");
  CHECK(run_cli("gen-flocking --config " + (dir / "k.json").string() + " --out " + (dir / "k").string(), dir).code == 0);
  const auto ksum = nlohmann::json::parse(read_file(dir / "k" / "summary.json"));
  CHECK(ksum["samples"] == 15);
  CHECK(ksum["density"]["max"].get<double>() > ksum["density"]["min"].get<double>());

  CHECK(run_cli("gen-formation --config " + (dir / "missing.json").string() + " --out " + dir.string(), dir).code == 4);
  CHECK(run_cli("no-such-command", dir).code == 2);
}

TEST_CASE("train, resume, eval and baseline") {
  const fs::path dir = workdir("train");
  write_file(dir / "f.json", R"({"n": 10, "d": 200, "windows": 10, "seed": 3})");
  REQUIRE(run_cli("gen-formation --config " + (dir / "f.json").string() + " --out " + (dir / "data").string(), dir).code ==
          0);
  const std::string dataset = (dir / "data" / "dataset.gid").string();
  write_file(dir / "t.json", R"({"total_steps": 500})");

  const Run train = run_cli("train --config " + (dir / "t.json").string() + " --dataset " + dataset + " --out " +
                            (dir / "run").string(),
                        dir);
  REQUIRE(train.code == 0);
  auto rows = lines(read_file(dir / "run" / "metrics.csv"));
  CHECK(rows.size() == 501);
  CHECK(rows.front() == "step,loss,mae,alpha,beta,sample_id,wallclock_ms");

  SUBCASE("determinism") {
    REQUIRE(run_cli("train --config " + (dir / "t.json").string() + " --dataset " + dataset + " --out " +
                    (dir / "run2").string(),
                dir)
                .code == 0);
    CHECK(read_file(dir / "run" / "metrics.csv") == read_file(dir / "run2" / "metrics.csv"));
  }

  SUBCASE("resume appends") {
    write_file(dir / "t2.json", R"({"total_steps": 20})");
    REQUIRE(run_cli("train --config " + (dir / "t2.json").string() + " --dataset " + dataset + " --resume " +
                    (dir / "run" / "checkpoint.json").string() + " --out " + (dir / "run").string(),
                dir)
                .code == 0);
    rows = lines(read_file(dir / "run" / "metrics.csv"));
    CHECK(rows.size() == 521);
    CHECK(rows[501].rfind("501,", 0) == 0);
    CHECK(load_train_state((dir / "run" / "checkpoint.json").string()).step == 520);
  }

  SUBCASE("missing dataset") {
    const Run r = run_cli("train --dataset " + (dir / "nope.gid").string() + " --out " + (dir / "x").string(), dir);
    CHECK(r.code == 4);
    CHECK(r.err.find("not found") != std::string::npos);
  }

  SUBCASE("eval grids") {
    const std::string ckpt = (dir / "run" / "checkpoint.json").string();
    write_file(dir / "e1.json", R"({"grid": {"ns": [8], "repetitions": 1, "d": 50}})");
    REQUIRE(run_cli("eval --config " + (dir / "e1.json").string() + " --checkpoint " + ckpt + " --out " +
                    (dir / "e1").string(),
                dir)
                .code == 0);
    const auto one = lines(read_file(dir / "e1" / "eval.csv"));
    REQUIRE(one.size() == 2);
    CHECK(one[1].find(",1,") != std::string::npos);
    CHECK(one[0].find("mae_std") != std::string::npos);
    const auto fields = [](const std::string& l) {
      std::vector<std::string> f;
      std::istringstream in(l);
      for (std::string x; std::getline(in, x, ',');) f.push_back(x);
      return f;
    };
    CHECK(std::stod(fields(one[1])[4]) == 0.0);
    CHECK(fs::exists(dir / "e1" / "matrices" / "eval_n8_p0.2_hat.csv"));

    write_file(dir / "e9.json", R"({"grid": {"ns": [5, 6, 7], "ps": [0.2, 0.3, 0.5], "repetitions": 2, "d": 20}})");
    REQUIRE(run_cli("eval --config " + (dir / "e9.json").string() + " --checkpoint " + ckpt + " --workers 3 --out " +
                    (dir / "e9").string(),
                dir)
                .code == 0);
    CHECK(lines(read_file(dir / "e9" / "eval.csv")).size() == 10);
    REQUIRE(run_cli("eval --config " + (dir / "e9.json").string() + " --checkpoint " + ckpt + " --workers 1 --out " +
                    (dir / "e9b").string(),
                dir)
                .code == 0);
    CHECK(read_file(dir / "e9" / "eval.csv") == read_file(dir / "e9b" / "eval.csv"));
  }

  SUBCASE("trained model beats the baseline on its own graph") {
    write_file(dir / "d.json", "{\"dataset\": \"" + dataset + "\"}");
    REQUIRE(run_cli("eval --config " + (dir / "d.json").string() + " --checkpoint " +
                    (dir / "run" / "checkpoint.json").string() + " --out " + (dir / "ed").string(),
                dir)
                .code == 0);
    REQUIRE(run_cli("baseline --config " + (dir / "d.json").string() + " --out " + (dir / "ed").string(), dir).code == 0);
    const auto mean_mae = [](const fs::path& csv) {
      const auto ls = lines(read_file(csv));
      double sum = 0.0;
      for (std::size_t k = 1; k < ls.size(); ++k) {
        std::istringstream in(ls[k]);
        std::string f;
        for (int c = 0; c < 3; ++c) std::getline(in, f, ',');
        sum += std::stod(f);
      }
      return sum / static_cast<double>(ls.size() - 1);
    };
    const double model = mean_mae(dir / "ed" / "eval_records.csv");
    const double base = mean_mae(dir / "ed" / "baseline_records.csv");
    MESSAGE("model " << model << " baseline " << base);
    CHECK(model < base);
  }

  SUBCASE("state dimension mismatch") {
    EncoderArchitecture arch = EncoderArchitecture::flocking();
    arch.fc1 = {3, 4, 1};
    save_params((dir / "s3.json").string(), init_params(arch, 1));
    write_file(dir / "d.json", "{\"dataset\": \"" + dataset + "\"}");
    const Run r = run_cli("eval --config " + (dir / "d.json").string() + " --checkpoint " + (dir / "s3.json").string() +
                          " --out " + (dir / "mm").string(),
                      dir);
    CHECK(r.code == 2);
  }

  SUBCASE("large beta baseline") {
    write_file(dir / "b.json", R"({"beta": 1000, "grid": {"ns": [6], "repetitions": 2, "d": 10}})");
    REQUIRE(run_cli("baseline --config " + (dir / "b.json").string() + " --out " + (dir / "bb").string(), dir).code == 0);
    const auto hat = lines(read_file(dir / "bb" / "matrices" / "baseline_n6_p0.2_hat.csv"));
    double top = 0.0;
    for (const auto& l : hat) {
      std::istringstream in(l);
      for (std::string x; std::getline(in, x, ',');) top = std::max(top, std::stod(x));
    }
    CHECK(top < 0.05);
  }
}
