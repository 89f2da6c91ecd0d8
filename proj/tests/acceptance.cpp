// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "c2g/cde.hpp"
#include "c2g/kernel_regression.hpp"
#include "c2g/np_c2g.hpp"
#include "c2g/numeric.hpp"
#include "c2g/predictive_recursion.hpp"
#include "c2g/selection.hpp"
#include "c2g/simgen.hpp"
#include "commands.hpp"
#include "config.hpp"

using namespace c2g;
using namespace c2g::app;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("c2g_acceptance_" + std::to_string(::getpid())) / name;
  fs::create_directories(p);
  return p;
}

std::vector<std::uint64_t> seeds(int count) {
  std::vector<std::uint64_t> s;
  for (int i = 1; i <= count; ++i) s.push_back(static_cast<std::uint64_t>(i));
  return s;
}

struct BenchRun {
  std::vector<AggregateRow> aggregate;
  std::vector<EstimandRow> estimands;
  Index failures = 0;
};

BenchRun run_benchmark(ExperimentConfig c, const std::string& name) {
  c.out = scratch(name).string();
  c.workers = std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  BenchRun out;
  std::vector<MetricRow> rows;
  cmd_benchmark(c, [&](const SeedProgress& p) {
    rows.insert(rows.end(), p.result->metrics.begin(), p.result->metrics.end());
    out.estimands.insert(out.estimands.end(), p.result->estimands.begin(), p.result->estimands.end());
    std::fprintf(stderr, "  [%s] seed %llu done (%lld/%lld)\n", name.c_str(),
                 static_cast<unsigned long long>(p.result->seed), static_cast<long long>(p.done),
                 static_cast<long long>(p.total));
    return true;
  });
  for (const auto& r : rows) out.failures += r.status != "ok";
  out.aggregate = aggregate(rows);
  return out;
}

const AggregateRow& row_for(const BenchRun& run, const std::string& method) {
  for (const auto& r : run.aggregate) {
    if (r.method == method) return r;
  }
  throw std::runtime_error("no aggregate row for " + method);
}

std::string describe(const AggregateRow& r) {
  return r.method + " fdr " + fmt("%.3f", r.mean_fdr) + " power " + fmt("%.3f", r.mean_power) +
         " reps " + std::to_string(r.reps) + " failures " + std::to_string(r.failures);
}

ExperimentConfig table_config(Scenario s, double tau, std::vector<std::string> methods) {
  ExperimentConfig c;
  c.scenario = s;
  c.n = {1000};
  c.d = 10;
  c.tau = {tau};
  c.seeds = seeds(20);
  c.alpha_grid = {0.1};
  c.methods = std::move(methods);
  return c;
}

// Criteria 1 and 3 share one additive run.
const BenchRun& additive_table() {
  static const BenchRun run =
      run_benchmark(table_config(Scenario::additive, 5.0, {"add-c2g", "np-c2g"}), "additive");
  return run;
}

Outcome criterion1() {
  const BenchRun& run = additive_table();
  const AggregateRow& add = row_for(run, "add-c2g");
  const AggregateRow& np = row_for(run, "np-c2g");
  const bool ok = add.mean_fdr >= 0.05 && add.mean_fdr <= 0.17 && add.mean_power >= 0.75 &&
                  np.mean_fdr <= 0.13 && np.mean_power >= 0.70 && run.failures == 0;
  return {ok, describe(add) + "; " + describe(np)};
}

Outcome criterion2() {
  const BenchRun run = run_benchmark(
      table_config(Scenario::nonadditive, 3.0, {"np-c2g", "frequentist-bh"}), "nonadditive");
  const AggregateRow& np = row_for(run, "np-c2g");
  const AggregateRow& bh = row_for(run, "frequentist-bh");
  const bool ok = np.mean_fdr <= 0.13 && np.mean_power >= 0.55 && bh.mean_fdr <= 0.05 &&
                  bh.mean_power < np.mean_power && run.failures == 0;
  return {ok, describe(np) + "; " + describe(bh)};
}

Outcome criterion3() {
  const BenchRun& run = additive_table();
  std::vector<double> j;
  for (const auto& e : run.estimands) {
    if (e.method == "np-c2g" && e.jaccard) j.push_back(*e.jaccard);
  }
  const double m = j.empty() ? 0.0 : mean(j);
  return {j.size() == 20 && m >= 0.65,
          "mean Jaccard " + fmt("%.3f", m) + " over " + std::to_string(j.size()) + " seeds"};
}

Outcome criterion4() {
  const std::vector<double> alphas{0.05, 0.1, 0.25};
  std::vector<double> fdp_sum(alphas.size(), 0.0);
  const int reps = 500;
  for (int r = 0; r < reps; ++r) {
    const Simulation sim = gen_additive(500, 10, 5.0, 100000 + static_cast<std::uint64_t>(r));
    const PosteriorScores w = true_posteriors(sim.truth, sim.data);
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      fdp_sum[a] += fdr_metric(select_by_average(w, alphas[a]).selected, *sim.data.h);
    }
  }
  bool ok = true;
  std::string detail;
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    const double m = fdp_sum[a] / reps;
    ok = ok && m <= alphas[a] + 0.02;
    if (!detail.empty()) detail += "; ";
    detail += "alpha " + fmt("%.2f", alphas[a]) + " mean fdp " + fmt("%.4f", m);
  }
  return {ok, detail};
}

Outcome criterion5() {
  Rng rng(2024);
  std::uniform_int_distribution<int> size(1, 12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mismatches = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const int n = size(rng);
    PosteriorScores s;
    s.w.resize(n);
    for (int i = 0; i < n; ++i) {
      const double r = u(rng);
      s.w[i] = r < 0.1 ? 0.0 : (r < 0.2 ? 1.0 : std::round(u(rng) * 20.0) / 20.0);
      if (u(rng) < 0.5) s.w[i] = u(rng);
      s.indices.push_back(i);
    }
    const double alpha = u(rng) * 0.6;
    std::size_t best = 0;
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
      double sum = 0.0;
      std::size_t k = 0;
      for (int i = 0; i < n; ++i) {
        if (mask & (1u << i)) {
          sum += s.w[i];
          ++k;
        }
      }
      if (sum <= alpha * static_cast<double>(k) && k > best) best = k;
    }
    mismatches += select_by_average(s, alpha).selected.size() != best;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches in 1000 vectors"};
}

Outcome criterion6() {
  const Eigen::VectorXd grid = linspace(-10.0, 15.0, 5001);
  const double mix = conservative_pi(
      [](double y) { return normal_pdf(y, 0.0, 1.0); },
      [](double y) { return 0.5 * normal_pdf(y, 0.0, 1.0) + 0.5 * normal_pdf(y, 5.0, 1.0); }, grid);
  const double same = conservative_pi([](double y) { return normal_pdf(y, 1.0, 2.0); },
                                      [](double y) { return normal_pdf(y, 1.0, 2.0); }, grid);
  const Eigen::VectorXd ugrid = linspace(-1.0, 4.0, 501);
  const double disjoint =
      conservative_pi([](double y) { return (y >= 0.0 && y <= 1.0) ? 1.0 : 0.0; },
                      [](double y) { return (y >= 2.0 && y <= 3.0) ? 1.0 : 0.0; }, ugrid);
  const bool ok = std::abs(mix - 0.5) <= 1e-3 && same == 0.0 && disjoint >= 0.999;
  return {ok, "mixture " + fmt("%.6f", mix) + ", identical " + fmt("%g", same) + ", disjoint " +
                  fmt("%.6f", disjoint)};
}

Outcome criterion7() {
  Rng rng(77);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const Index n = 30;
    Eigen::MatrixXd x(n, 5);
    Eigen::VectorXd y(n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < 5; ++j) x(i, j) = z(rng);
      y[i] = std::sin(x(i, 0)) + 0.5 * x(i, 1) + 0.3 * z(rng);
    }
    const double bandwidth = 0.5 + 3.0 * u(rng);
    const double ridge = std::pow(10.0, -3.0 + 4.0 * u(rng));
    const Eigen::VectorXd loo = loo_predictions(fit_krr(x, y, bandwidth, ridge), y);
    for (Index i = 0; i < n; ++i) {
      IndexList keep;
      for (Index k = 0; k < n; ++k) {
        if (k != i) keep.push_back(k);
      }
      const KrrModel m = fit_krr(select_rows(x, keep), select_rows(y, keep), bandwidth, ridge);
      const double literal = m.predict(x.row(i))[0];
      worst = std::max(worst, std::abs(literal - loo[i]));
    }
  }
  return {worst <= 1e-8, "max |closed form - refit| " + fmt("%.3e", worst)};
}

double trapezoid(const std::function<double(double)>& f, double lo, double hi, double step) {
  const auto points = static_cast<Index>(std::ceil((hi - lo) / step)) + 1;
  const Eigen::VectorXd g = linspace(lo, hi, points);
  const Eigen::VectorXd w = trapezoid_weights(g);
  double s = 0.0;
  for (Index i = 0; i < points; ++i) s += w[i] * f(g[i]);
  return s;
}

Outcome criterion8() {
  Rng rng(8);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_pr = 0.0;
  double worst_cde = 0.0;
  for (int q = 0; q < 50; ++q) {
    std::vector<double> r(150);
    for (auto& v : r) v = u(rng) < 0.3 ? 3.0 + z(rng) : z(rng);
    const double h = 0.1 + 0.9 * u(rng);
    PrConfig pc;
    pc.seed = static_cast<std::uint64_t>(q);
    const PrDensity g = predictive_recursion(r, h, pc);
    const double lo = g.grid.minCoeff() - 12.0 * h;
    const double hi = g.grid.maxCoeff() + 12.0 * h;
    const double mass = trapezoid([&](double y) { return g.density(y); }, lo, hi, h / 50.0);
    worst_pr = std::max(worst_pr, std::abs(mass - 1.0));
  }
  for (int q = 0; q < 50; ++q) {
    const Index n = 60 + static_cast<Index>(u(rng) * 100.0);
    Eigen::MatrixXd x(n, 3);
    Eigen::VectorXd y(n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < 3; ++j) x(i, j) = z(rng);
      y[i] = x(i, 0) + (u(rng) < 0.4 ? 4.0 : 0.0) + z(rng);
    }
    CdeHyper hyper;
    hyper.h1 = 0.2 + 2.0 * u(rng);
    hyper.h2 = 0.05 + 1.0 * u(rng);
    hyper.k = 1 + static_cast<Index>(u(rng) * static_cast<double>(n - 1));
    const CdeModel model(x, y, hyper);
    Eigen::VectorXd query(3);
    for (Index j = 0; j < 3; ++j) query[j] = 1.5 * z(rng);
    const NeighborWeights nw = model.neighbor_weights(query);
    const double lo = y.minCoeff() - 12.0 * hyper.h2;
    const double hi = y.maxCoeff() + 12.0 * hyper.h2;
    const double mass =
        trapezoid([&](double v) { return model.density(nw, v); }, lo, hi, hyper.h2 / 50.0);
    worst_cde = std::max(worst_cde, std::abs(mass - 1.0));
  }
  return {worst_pr <= 1e-6 && worst_cde <= 1e-6,
          "max |mass - 1|: predictive recursion " + fmt("%.3e", worst_pr) + ", conditional " +
              fmt("%.3e", worst_cde)};
}

Outcome criterion9() {
  ExperimentConfig c;
  c.scenario = Scenario::response;
  c.n = {2000};
  c.tau = {5.0};
  c.seeds = seeds(20);
  c.alpha_grid = {0.1};
  c.methods = {"add-c2g"};
  const BenchRun run = run_benchmark(c, "response");
  const AggregateRow& add = row_for(run, "add-c2g");

  const Simulation sim = gen_confounded(Scenario::canonical, 1000, 10, 5.0, 1);
  NpC2gConfig nc;
  nc.seed = 1;
  const NpC2gFit fit = fit_np_c2g(sim.data, nc);
  Index high = 0;
  for (Index i = 0; i < fit.pi_star.size(); ++i) high += fit.pi_star[i] > 0.9;
  const double frac = static_cast<double>(high) / static_cast<double>(fit.pi_star.size());
  const bool ok = add.mean_fdr <= 0.15 && run.failures == 0 && frac >= 0.95;
  return {ok, "response-confounded " + describe(add) + "; canonical fraction pi* > 0.9 " +
                  fmt("%.3f", frac)};
}

Outcome criterion10() {
  ExperimentConfig c;
  c.scenario = Scenario::additive;
  c.n = {10000};
  c.d = 10;
  c.tau = {1.0, 3.0, 5.0};
  c.seeds = seeds(50);
  c.alpha_grid = default_alpha_grid();
  c.methods = {"np-oracle"};
  c.out = scratch("full_scale").string();
  validate(c);
  Index streamed_rows = -1;
  const BenchmarkSummary s = cmd_benchmark(c, [&](const SeedProgress& p) {
    // The first seed's rows must already be on disk when the callback fires.
    std::ifstream in(fs::path(c.out) / "metrics.csv");
    std::string line;
    streamed_rows = 0;
    while (std::getline(in, line)) streamed_rows += !line.empty() && line[0] != '#';
    --streamed_rows;
    return p.done < 1;
  });
  const auto expected = static_cast<Index>(c.alpha_grid.size());
  const bool ok = s.total == 150 && s.done == 1 && s.cancelled && streamed_rows == expected;
  return {ok, "tasks " + std::to_string(s.total) + ", streamed " + std::to_string(streamed_rows) +
                  " rows after the first seed, cancelled " + (s.cancelled ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria{
      criterion1, criterion2, criterion3, criterion4, criterion5,
      criterion6, criterion7, criterion8, criterion9, criterion10};
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::printf("criterion %d: %s (%s) [%.0fs]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  fs::remove_all(fs::temp_directory_path() / ("c2g_acceptance_" + std::to_string(::getpid())));
  return failed == 0 ? 0 : 1;
}
