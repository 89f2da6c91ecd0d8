#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "c2g/add_c2g.hpp"
#include "c2g/np_c2g.hpp"
#include "c2g/simgen.hpp"

namespace c2g::app {

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m{"add-c2g", "np-c2g", "np-oracle", "frequentist-bh"};
  return m;
}

// Empty grids fall back to the data-driven defaults of each estimator.
struct Hyperparameters {
  int bootstrap_replicates = 100;
  double bootstrap_q = 0.05;
  std::vector<Index> k_grid;
  std::vector<double> h1_grid;
  std::vector<double> h2_grid;
  std::vector<double> krr_bandwidths;
  std::vector<double> krr_ridges;
  std::vector<double> pr_bandwidths;
  int em_max_iter = 200;
  double em_tol = 1e-7;
  int em_restarts = 1;
  Index rff_dim = 256;
  int folds = 5;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::additive;
  std::vector<Index> n{1000};
  Index d = 10;
  std::vector<double> tau{5.0};
  std::vector<std::uint64_t> seeds{1};
  std::vector<double> alpha_grid{0.1};
  std::vector<std::string> methods{"add-c2g", "np-c2g"};
  Hyperparameters hyper;
  bool standardize = false;  // z-score covariate columns before fitting
  int workers = 1;
  std::string out = "out";
};

/// Strict parse: unknown keys and wrong types raise ValidationError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& c);

/// Throws ValidationError on the first violated invariant.
void validate(const ExperimentConfig& c);

AddC2gConfig add_c2g_config(const Hyperparameters& h, std::uint64_t seed);
NpC2gConfig np_c2g_config(const Hyperparameters& h, std::uint64_t seed);
CdeGrid cde_grid(const Hyperparameters& h);

}  // namespace c2g::app
