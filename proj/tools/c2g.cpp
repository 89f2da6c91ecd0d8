#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "c2g/error.hpp"
#include "commands.hpp"
#include "config.hpp"

using namespace c2g;
using namespace c2g::app;

namespace {

// Flags left unset keep the config file (or default) value.
struct ExperimentFlags {
  std::string config;
  std::string scenario;
  std::vector<long long> n;
  long long d = 0;
  std::vector<double> tau;
  std::vector<std::uint64_t> seeds;
  std::vector<double> alpha;
  std::vector<std::string> methods;
  std::string out;
  int workers = 0;
  int bootstrap = 0;
  bool standardize = false;

  void add_to(CLI::App* cmd, bool with_methods) {
    cmd->add_option("--config", config, "JSON experiment config");
    cmd->add_option("--scenario", scenario,
                    "additive, nonadditive, response, effect, canonical or total");
    cmd->add_option("--n", n, "sample sizes");
    cmd->add_option("--d", d, "covariate dimension");
    cmd->add_option("--tau", tau, "effect sizes");
    cmd->add_option("--seed,--seeds", seeds, "seeds");
    cmd->add_option("--out", out, "output directory");
    if (with_methods) {
      cmd->add_option("--alpha", alpha, "nominal levels, increasing");
      cmd->add_option("--method", methods, "add-c2g, np-c2g, np-oracle, frequentist-bh");
      cmd->add_option("--workers", workers, "seed-level worker threads");
      cmd->add_option("--bootstrap", bootstrap, "bootstrap replicates for np-c2g");
      cmd->add_flag("--standardize", standardize, "z-score covariates before fitting");
    }
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c = config.empty() ? ExperimentConfig{} : load_config(config);
    if (!scenario.empty()) c.scenario = parse_scenario(scenario);
    if (!n.empty()) c.n.assign(n.begin(), n.end());
    if (d > 0) c.d = d;
    if (!tau.empty()) c.tau = tau;
    if (!seeds.empty()) c.seeds = seeds;
    if (!alpha.empty()) c.alpha_grid = alpha;
    if (!methods.empty()) c.methods = methods;
    if (!out.empty()) c.out = out;
    if (workers > 0) c.workers = workers;
    if (bootstrap > 0) c.hyper.bootstrap_replicates = bootstrap;
    if (standardize) c.standardize = true;
    validate(c);
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal two-groups screening: simulate, fit, select and benchmark"};
  app.require_subcommand(1);

  ExperimentFlags sim_flags;
  CLI::App* sim = app.add_subcommand("simulate", "write simulated datasets and truth files");
  sim_flags.add_to(sim, false);

  FitSelectArgs fit_args;
  std::string fit_data, fit_truth, fit_out, fit_config;
  int fit_bootstrap = 0;
  CLI::App* fit = app.add_subcommand("fit-select", "fit one method and select at one level");
  fit->add_option("--data", fit_data, "dataset CSV")->required();
  fit->add_option("--truth", fit_truth, "truth JSON written by simulate");
  fit->add_option("--method", fit_args.method, "add-c2g, np-c2g, np-oracle, frequentist-bh");
  fit->add_option("--alpha", fit_args.alpha, "nominal level in [0, 1)");
  fit->add_option("--seed", fit_args.seed, "estimator seed");
  fit->add_option("--config", fit_config, "JSON config supplying hyperparameters");
  fit->add_option("--bootstrap", fit_bootstrap, "bootstrap replicates for np-c2g");
  fit->add_flag("--standardize", fit_args.standardize, "z-score covariates before fitting");
  fit->add_option("--out", fit_out, "results JSON (stdout when omitted)");

  ExperimentFlags bench_flags;
  CLI::App* bench = app.add_subcommand("benchmark", "per-seed metrics, aggregates and curves");
  bench_flags.add_to(bench, true);

  std::string metrics_in, metrics_out;
  CLI::App* metrics = app.add_subcommand("metrics", "recompute aggregates from metrics.csv");
  metrics->add_option("--in", metrics_in, "metrics CSV")->required();
  metrics->add_option("--out", metrics_out, "aggregate CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*sim) {
      for (const auto& path : cmd_simulate(sim_flags.resolve())) std::cout << path.string() << '\n';
    } else if (*fit) {
      fit_args.data = fit_data;
      if (!fit_truth.empty()) fit_args.truth = fit_truth;
      if (!fit_config.empty()) fit_args.hyper = load_config(fit_config).hyper;
      if (fit_bootstrap > 0) fit_args.hyper.bootstrap_replicates = fit_bootstrap;
      const std::string text = cmd_fit_select(fit_args).dump(1);
      if (fit_out.empty()) {
        std::cout << text << '\n';
      } else {
        std::ofstream out(fit_out);
        out << text << '\n';
        if (!out) throw ValidationError("cannot write " + fit_out);
      }
    } else if (*bench) {
      const ExperimentConfig config = bench_flags.resolve();
      const BenchmarkSummary s = cmd_benchmark(config, [](const SeedProgress& p) {
        std::cerr << "seed " << p.result->seed << " n=" << p.result->n << " tau=" << p.result->tau
                  << " done (" << p.done << "/" << p.total << ")\n";
        return true;
      });
      std::cout << s.metrics.string() << '\n'
                << s.aggregate.string() << '\n'
                << s.curves.string() << '\n'
                << s.estimands.string() << '\n';
    } else if (*metrics) {
      cmd_metrics(metrics_in, metrics_out);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const EstimatorError& e) {
    std::cerr << "estimator failure: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
