#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "c2g/dataset.hpp"
#include "c2g/estimands.hpp"
#include "c2g/selection.hpp"
#include "c2g/simgen.hpp"
#include "config.hpp"

namespace c2g::app {

nlohmann::json truth_to_json(const GeneratorTruth& t);
GeneratorTruth truth_from_json(const nlohmann::json& j);
GeneratorTruth load_truth(const std::filesystem::path& path);

/// Copy with covariate columns centered and scaled to unit sample sd
/// (constant columns are only centered).
Dataset standardize_covariates(const Dataset& ds);

/// One method applied to one dataset at a list of levels.
struct MethodRun {
  std::string method;
  PosteriorScores scores;  // null posteriors; p-values for frequentist-bh
  Eigen::VectorXd pi;      // responder prior per treated sample, empty for frequentist-bh
  std::vector<SelectionResult> selections;  // one per level
  std::optional<EstimandReport> estimands;
  nlohmann::json diagnostics = nlohmann::json::object();
};

/// `truth` is required by np-oracle. A level of zero selects nothing.
MethodRun run_method(const std::string& method, const Dataset& ds, const GeneratorTruth* truth,
                     const std::vector<double>& alphas, const Hyperparameters& hyper,
                     std::uint64_t seed, bool standardize = false);

/// Writes <scenario>_n<n>_tau<tau>_seed<seed>.csv and .truth.json into
/// `config.out` for every (n, tau, seed). Returns the CSV paths.
std::vector<std::filesystem::path> cmd_simulate(const ExperimentConfig& config);

struct FitSelectArgs {
  std::filesystem::path data;
  std::optional<std::filesystem::path> truth;
  std::string method = "np-c2g";
  double alpha = 0.1;
  Hyperparameters hyper;
  std::uint64_t seed = 0;
  bool standardize = false;
};

nlohmann::json cmd_fit_select(const FitSelectArgs& args);

struct MetricRow {
  std::string method;
  std::string scenario;
  Index n = 0;
  double tau = 0.0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  double fdp = 0.0;
  std::optional<double> power;
  Index selected = 0;
  std::string status = "ok";
};

struct CurveRow {
  std::string method;
  std::string scenario;
  Index n = 0;
  double tau = 0.0;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  Index selected = 0;
  double estimated_fdr = 0.0;
};

struct EstimandRow {
  std::string method;
  std::string scenario;
  Index n = 0;
  double tau = 0.0;
  std::uint64_t seed = 0;
  double are_lo = 0.0;
  double are_hi = 0.0;
  double erpf = 0.0;
  Index unbounded = 0;
  std::optional<double> oracle_are_lo;
  std::optional<double> oracle_are_hi;
  std::optional<double> jaccard;
};

/// Everything produced for one (n, tau, seed) task.
struct SeedResult {
  Index n = 0;
  double tau = 0.0;
  std::uint64_t seed = 0;
  std::vector<MetricRow> metrics;
  std::vector<CurveRow> curves;
  std::vector<EstimandRow> estimands;
};

/// Method failures become per-seed error rows instead of exceptions.
SeedResult run_seed(const ExperimentConfig& config, Index n, double tau, std::uint64_t seed);

struct AggregateRow {
  std::string method;
  std::string scenario;
  Index n = 0;
  double tau = 0.0;
  double alpha = 0.0;
  Index reps = 0;      // successful seeds
  Index failures = 0;  // seeds with an error status
  double mean_fdr = 0.0;
  double fdr_ci95 = 0.0;
  double mean_power = 0.0;
  double power_ci95 = 0.0;
  double valid_power = 0.0;
};

/// Groups rows by (method, scenario, n, tau, alpha) in order of first
/// appearance; seeds contribute in row order.
std::vector<AggregateRow> aggregate(const std::vector<MetricRow>& rows);

// CSV schemas shared by benchmark and metrics. Numbers use 17 significant
// digits so parsing recovers them exactly.
std::string metrics_header();
std::string format_metric(const MetricRow& r);
std::string aggregate_header();
std::string format_aggregate(const AggregateRow& r);
std::string curves_header();
std::string format_curve(const CurveRow& r);
std::string estimands_header();
std::string format_estimand(const EstimandRow& r);

struct ParsedMetrics {
  std::vector<std::string> comments;  // leading "# " lines, prefix removed
  std::vector<MetricRow> rows;
};
ParsedMetrics read_metrics(const std::filesystem::path& path);

struct SeedProgress {
  Index done = 0;
  Index total = 0;
  const SeedResult* result = nullptr;
};

struct BenchmarkSummary {
  Index total = 0;
  Index done = 0;
  bool cancelled = false;
  std::filesystem::path metrics;
  std::filesystem::path aggregate;
  std::filesystem::path curves;
  std::filesystem::path estimands;
};

/// Runs tasks on `config.workers` threads. Results are appended and flushed
/// in task order as soon as each prefix completes; `on_seed_done` sees them
/// in that order and cancels the remaining tasks by returning false.
BenchmarkSummary cmd_benchmark(const ExperimentConfig& config,
                               const std::function<bool(const SeedProgress&)>& on_seed_done = {});

/// Recomputes the aggregate table from a metrics CSV.
void cmd_metrics(const std::filesystem::path& metrics_csv, const std::filesystem::path& out);

}  // namespace c2g::app
