#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "c2g/error.hpp"
#include "commands.hpp"
#include "config.hpp"

using namespace c2g;
using namespace c2g::app;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / ("c2g_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

// Exit status of the CLI with `args`; stdout goes to `stdout_file` when given.
int run_cli(const std::string& args, const fs::path& stdout_file = {}) {
  std::string cmd = std::string(C2G_CLI_PATH) + " " + args;
  cmd += stdout_file.empty() ? " > /dev/null" : " > '" + stdout_file.string() + "'";
  cmd += " 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> data_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') out.push_back(line);
  }
  return out;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!s.empty() && s.back() == ',') out.emplace_back();
  return out;
}

// Simulated additive dataset shared by the fit-select cases.
fs::path simulated(double tau, Index n) {
  const fs::path dir = scratch() / ("sim_tau" + std::to_string(static_cast<int>(tau)) + "_n" + std::to_string(n));
  const fs::path csv = dir / ("additive_n" + std::to_string(n) + "_tau" + std::to_string(static_cast<int>(tau)) + "_seed3.csv");
  if (!fs::exists(csv)) {
    REQUIRE(run_cli("simulate --scenario additive --n " + std::to_string(n) + " --tau " +
                    std::to_string(tau) + " --seed 3 --out '" + dir.string() + "'") == 0);
  }
  return csv;
}

fs::path truth_of(const fs::path& csv) {
  fs::path t = csv;
  t.replace_extension(".truth.json");
  return t;
}

nlohmann::json fit(const std::string& args) {
  const fs::path out = scratch() / "fit.json";
  fs::remove(out);
  REQUIRE(run_cli("fit-select " + args + " --out '" + out.string() + "'") == 0);
  std::ifstream in(out);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("simulate writes n rows and is byte-identical on rerun") {
  const fs::path a = scratch() / "sim_a";
  const fs::path listing = scratch() / "sim_listing.txt";
  const std::string args = "simulate --scenario additive --n 100 --d 4 --tau 2 --seed 9 --out '" + a.string() + "'";
  REQUIRE(run_cli(args, listing) == 0);
  const std::string name = "additive_n100_tau2_seed9";
  const fs::path csv = a / (name + ".csv");
  REQUIRE(fs::exists(csv));
  REQUIRE(fs::exists(a / (name + ".truth.json")));
  CHECK(slurp(listing).find(name + ".csv") != std::string::npos);

  const auto lines = data_lines(csv);
  REQUIRE(lines.size() == 101);
  CHECK(lines.front() == "x1,x2,x3,x4,y,t,h");
  const std::string first_csv = slurp(csv);
  const std::string first_truth = slurp(a / (name + ".truth.json"));
  REQUIRE(run_cli(args) == 0);
  CHECK(slurp(csv) == first_csv);
  CHECK(slurp(a / (name + ".truth.json")) == first_truth);

  const Dataset ds = load_dataset(csv, true);
  const Simulation sim = simulate(Scenario::additive, 100, 4, 2.0, 9);
  CHECK(ds.x == sim.data.x);
  CHECK(ds.y == sim.data.y);
  CHECK(*ds.h == *sim.data.h);

  const GeneratorTruth t = load_truth(a / (name + ".truth.json"));
  CHECK(t.pi == sim.truth.pi);
  CHECK(t.gamma == sim.truth.gamma);
}

TEST_CASE("simulate writes one file per (n, tau, seed)") {
  const fs::path dir = scratch() / "sim_grid";
  REQUIRE(run_cli("simulate --scenario canonical --n 20 30 --tau 1 --seeds 1 2 --out '" + dir.string() + "'") == 0);
  int csvs = 0;
  for (const auto& e : fs::directory_iterator(dir)) csvs += e.path().extension() == ".csv";
  CHECK(csvs == 4);
}

TEST_CASE("invalid inputs exit with a usage error") {
  const fs::path dir = scratch() / "bad";
  CHECK(run_cli("simulate --scenario bogus --n 50 --out '" + dir.string() + "'") == 2);
  CHECK(run_cli("simulate --n 5 --out '" + dir.string() + "'") == 2);
  CHECK(run_cli("benchmark --method nope --n 50 --out '" + dir.string() + "'") == 2);
  CHECK(run_cli("benchmark --alpha 0.2 0.1 --n 50 --out '" + dir.string() + "'") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("fit-select") == 2);
  CHECK(run_cli("fit-select --data '" + (scratch() / "missing.csv").string() + "'") == 2);
}

TEST_CASE("np-oracle without a truth file is rejected") {
  const fs::path csv = simulated(5.0, 300);
  CHECK(run_cli("fit-select --data '" + csv.string() + "' --method np-oracle") == 2);
}

TEST_CASE("alpha = 0 selects nothing") {
  const fs::path csv = simulated(5.0, 300);
  const auto j = fit("--data '" + csv.string() + "' --truth '" + truth_of(csv).string() +
                     "' --method np-oracle --alpha 0");
  CHECK(j["selected"].empty());
  CHECK(j["selected_count"] == 0);
  CHECK(j["fdp"] == 0.0);
}

TEST_CASE("a strong effect yields a non-empty selection") {
  const fs::path csv = simulated(5.0, 300);
  const auto oracle = fit("--data '" + csv.string() + "' --truth '" + truth_of(csv).string() +
                          "' --method np-oracle --alpha 0.1");
  CHECK(!oracle["selected"].empty());
  CHECK(oracle["estimated_fdr"].get<double>() <= 0.1);

  const auto add = fit("--data '" + csv.string() + "' --method add-c2g --alpha 0.1 --seed 2");
  CHECK(!add["selected"].empty());
  CHECK(add["level"] == 0.1);
  const Dataset ds = load_dataset(csv);
  CHECK(add["scores"].size() == static_cast<std::size_t>(ds.t.sum()));
  for (const auto& s : add["scores"]) {
    CHECK(s["w"].get<double>() >= 0.0);
    CHECK(s["w"].get<double>() <= 1.0);
    CHECK(ds.t[s["index"].get<Index>()] == 1);
  }
  // Running twice with the same seed reproduces the result.
  const auto again = fit("--data '" + csv.string() + "' --method add-c2g --alpha 0.1 --seed 2");
  CHECK(again["selected"] == add["selected"]);
}

TEST_CASE("frequentist-bh reports p-values") {
  const fs::path csv = simulated(5.0, 300);
  const auto j = fit("--data '" + csv.string() + "' --method frequentist-bh --alpha 0.1");
  for (const auto& s : j["scores"]) {
    CHECK(s.contains("pvalue"));
    CHECK(s["pvalue"].get<double>() >= 0.0);
    CHECK(s["pvalue"].get<double>() <= 1.0);
  }
}

TEST_CASE("benchmark tables, aggregates, curves and metrics recompute") {
  const fs::path one = scratch() / "bench1";
  const fs::path two = scratch() / "bench2";
  const std::string common =
      " --scenario additive --n 200 --d 5 --tau 4 --seeds 1 2 --alpha 0.05 0.1 0.2"
      " --method np-oracle frequentist-bh";
  REQUIRE(run_cli("benchmark" + common + " --workers 1 --out '" + one.string() + "'") == 0);
  REQUIRE(run_cli("benchmark" + common + " --workers 2 --out '" + two.string() + "'") == 0);

  for (const char* f : {"metrics.csv", "curves.csv", "estimands.csv", "aggregate.csv"}) {
    CAPTURE(f);
    // Comment headers record the worker count and output path; the tables must match.
    CHECK(data_lines(one / f) == data_lines(two / f));
  }

  const auto metrics = data_lines(one / "metrics.csv");
  REQUIRE(metrics.size() == 13);
  CHECK(metrics.front() == metrics_header());
  for (std::size_t i = 1; i < metrics.size(); ++i) CHECK(split(metrics[i]).back() == "ok");

  // Hand mean of fdp per (method, alpha) against the aggregate table.
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> hand;
  for (std::size_t i = 1; i < metrics.size(); ++i) {
    const auto c = split(metrics[i]);
    auto& acc = hand[{c[0], c[4]}];
    acc.first += std::stod(c[6]);
    acc.second += 1;
  }
  const auto agg = data_lines(one / "aggregate.csv");
  REQUIRE(agg.size() == 7);
  CHECK(agg.front() == aggregate_header());
  for (std::size_t i = 1; i < agg.size(); ++i) {
    const auto c = split(agg[i]);
    const auto& acc = hand.at({c[0], c[4]});
    CHECK(std::stoi(c[5]) == 2);
    CHECK(std::stod(c[7]) == doctest::Approx(acc.first / acc.second).epsilon(1e-14));
  }

  // Selection counts grow with the level for each (method, seed).
  const auto curves = data_lines(one / "curves.csv");
  REQUIRE(curves.size() == 13);
  std::map<std::pair<std::string, std::string>, std::vector<long>> counts;
  for (std::size_t i = 1; i < curves.size(); ++i) {
    const auto c = split(curves[i]);
    counts[{c[0], c[4]}].push_back(std::stol(c[6]));
  }
  for (const auto& [key, v] : counts) {
    CHECK(v.size() == 3);
    for (std::size_t k = 1; k < v.size(); ++k) CHECK(v[k] >= v[k - 1]);
  }

  const fs::path again = scratch() / "aggregate_again.csv";
  REQUIRE(run_cli("metrics --in '" + (one / "metrics.csv").string() + "' --out '" + again.string() + "'") == 0);
  CHECK(slurp(again) == slurp(one / "aggregate.csv"));
}

TEST_CASE("benchmark config files are parsed strictly") {
  const fs::path good = scratch() / "good.json";
  const fs::path bad = scratch() / "bad.json";
  {
    std::ofstream(good) << R"({"scenario": "canonical", "n": 40, "seeds": [1], "methods": ["np-oracle"],
                              "alpha_grid": [0.1], "out": ")" << (scratch() / "cfg_out").string() << "\"}";
    std::ofstream(bad) << R"({"scenario": "canonical", "n": 40, "sedes": [1]})";
  }
  CHECK(run_cli("benchmark --config '" + good.string() + "'") == 0);
  CHECK(data_lines(scratch() / "cfg_out" / "metrics.csv").size() == 2);
  CHECK(run_cli("benchmark --config '" + bad.string() + "'") == 2);

  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"n": "many"})")), ValidationError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"hyperparameters": {"bootstrap": 3}})")), ValidationError);
  const ExperimentConfig c = config_from_json(nlohmann::json::parse(R"({"n": 50, "tau": 2})"));
  CHECK(c.n == std::vector<Index>{50});
  CHECK(c.tau == std::vector<double>{2.0});
  CHECK(config_from_json(to_json(c)).n == c.n);
}

TEST_CASE("cancellation stops streaming after the callback declines") {
  ExperimentConfig c;
  c.scenario = Scenario::additive;
  c.n = {100};
  c.d = 3;
  c.tau = {2.0};
  c.seeds = {1, 2, 3, 4, 5};
  c.methods = {"np-oracle"};
  c.out = (scratch() / "cancel").string();
  const BenchmarkSummary s = cmd_benchmark(c, [](const SeedProgress& p) { return p.done < 2; });
  CHECK(s.cancelled);
  CHECK(s.done == 2);
  CHECK(data_lines(s.metrics).size() == 3);
  CHECK(data_lines(s.aggregate).size() == 2);
}

TEST_CASE("cleanup") { fs::remove_all(scratch()); }
