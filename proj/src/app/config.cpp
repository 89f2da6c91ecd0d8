#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "c2g/error.hpp"

namespace c2g::app {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ValidationError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config key '") + key + "': " + e.what());
  }
}

// Accepts a scalar or a list.
template <typename T>
void read_list(const json& j, const char* key, std::vector<T>& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  try {
    out = v.is_array() ? v.get<std::vector<T>>() : std::vector<T>{v.get<T>()};
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config key '") + key + "': " + e.what());
  }
}

Hyperparameters hyper_from_json(const json& j) {
  reject_unknown(j,
                 {"bootstrap_replicates", "bootstrap_q", "k_grid", "h1_grid", "h2_grid",
                  "krr_bandwidths", "krr_ridges", "pr_bandwidths", "em_max_iter", "em_tol",
                  "em_restarts", "rff_dim", "folds"},
                 "hyperparameters");
  Hyperparameters h;
  read(j, "bootstrap_replicates", h.bootstrap_replicates);
  read(j, "bootstrap_q", h.bootstrap_q);
  read_list(j, "k_grid", h.k_grid);
  read_list(j, "h1_grid", h.h1_grid);
  read_list(j, "h2_grid", h.h2_grid);
  read_list(j, "krr_bandwidths", h.krr_bandwidths);
  read_list(j, "krr_ridges", h.krr_ridges);
  read_list(j, "pr_bandwidths", h.pr_bandwidths);
  read(j, "em_max_iter", h.em_max_iter);
  read(j, "em_tol", h.em_tol);
  read(j, "em_restarts", h.em_restarts);
  read(j, "rff_dim", h.rff_dim);
  read(j, "folds", h.folds);
  return h;
}

bool all_positive(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; });
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  reject_unknown(j,
                 {"scenario", "n", "d", "tau", "seeds", "alpha_grid", "methods",
                  "hyperparameters", "standardize", "workers", "out"},
                 "config");
  ExperimentConfig c;
  if (j.contains("scenario")) {
    std::string s;
    read(j, "scenario", s);
    c.scenario = parse_scenario(s);
  }
  read_list(j, "n", c.n);
  read(j, "d", c.d);
  read_list(j, "tau", c.tau);
  read_list(j, "seeds", c.seeds);
  read_list(j, "alpha_grid", c.alpha_grid);
  read_list(j, "methods", c.methods);
  if (j.contains("hyperparameters")) c.hyper = hyper_from_json(j.at("hyperparameters"));
  read(j, "standardize", c.standardize);
  read(j, "workers", c.workers);
  read(j, "out", c.out);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

json to_json(const ExperimentConfig& c) {
  const Hyperparameters& h = c.hyper;
  return json{
      {"scenario", to_string(c.scenario)},
      {"n", c.n},
      {"d", c.d},
      {"tau", c.tau},
      {"seeds", c.seeds},
      {"alpha_grid", c.alpha_grid},
      {"methods", c.methods},
      {"hyperparameters",
       {{"bootstrap_replicates", h.bootstrap_replicates},
        {"bootstrap_q", h.bootstrap_q},
        {"k_grid", h.k_grid},
        {"h1_grid", h.h1_grid},
        {"h2_grid", h.h2_grid},
        {"krr_bandwidths", h.krr_bandwidths},
        {"krr_ridges", h.krr_ridges},
        {"pr_bandwidths", h.pr_bandwidths},
        {"em_max_iter", h.em_max_iter},
        {"em_tol", h.em_tol},
        {"em_restarts", h.em_restarts},
        {"rff_dim", h.rff_dim},
        {"folds", h.folds}}},
      {"standardize", c.standardize},
      {"workers", c.workers},
      {"out", c.out},
  };
}

void validate(const ExperimentConfig& c) {
  if (c.seeds.empty()) throw ValidationError("config: seeds must be non-empty");
  if (c.n.empty() || c.tau.empty()) throw ValidationError("config: n and tau must be non-empty");
  for (Index n : c.n) {
    if (n < 10) throw ValidationError("config: n must be at least 10");
  }
  if (c.d < 1) throw ValidationError("config: d must be positive");
  if (c.alpha_grid.empty()) throw ValidationError("config: alpha_grid must be non-empty");
  for (std::size_t i = 0; i < c.alpha_grid.size(); ++i) {
    const double a = c.alpha_grid[i];
    if (!(a > 0.0 && a < 1.0)) throw ValidationError("config: alpha_grid values must lie in (0, 1)");
    if (i > 0 && !(a > c.alpha_grid[i - 1])) {
      throw ValidationError("config: alpha_grid must be strictly increasing");
    }
  }
  if (c.methods.empty()) throw ValidationError("config: methods must be non-empty");
  const auto& known = known_methods();
  for (const auto& m : c.methods) {
    if (std::find(known.begin(), known.end(), m) == known.end()) {
      throw ValidationError("config: unknown method '" + m + "'");
    }
  }
  if (c.workers < 1) throw ValidationError("config: workers must be at least 1");
  const Hyperparameters& h = c.hyper;
  if (h.bootstrap_replicates < 1) throw ValidationError("config: bootstrap_replicates must be >= 1");
  if (!(h.bootstrap_q > 0.0 && h.bootstrap_q < 0.5)) {
    throw ValidationError("config: bootstrap_q must lie in (0, 0.5)");
  }
  for (Index k : h.k_grid) {
    if (k < 1) throw ValidationError("config: k_grid values must be positive");
  }
  if (!all_positive(h.h1_grid) || !all_positive(h.h2_grid) || !all_positive(h.krr_bandwidths) ||
      !all_positive(h.krr_ridges) || !all_positive(h.pr_bandwidths)) {
    throw ValidationError("config: bandwidth and ridge grids must be positive");
  }
  if (h.em_max_iter < 1 || !(h.em_tol > 0.0) || h.em_restarts < 1) {
    throw ValidationError("config: invalid EM settings");
  }
  if (h.rff_dim < 1 || h.folds < 2) throw ValidationError("config: invalid rff_dim or folds");
}

AddC2gConfig add_c2g_config(const Hyperparameters& h, std::uint64_t seed) {
  AddC2gConfig a;
  a.krr_grid.bandwidths = h.krr_bandwidths;
  a.krr_grid.ridges = h.krr_ridges;
  a.pr_bandwidths = h.pr_bandwidths;
  a.em_max_iter = h.em_max_iter;
  a.em_tol = h.em_tol;
  a.restarts = h.em_restarts;
  a.rff_dim = h.rff_dim;
  a.folds = h.folds;
  a.seed = seed;
  return a;
}

CdeGrid cde_grid(const Hyperparameters& h) {
  CdeGrid g;
  g.h1 = h.h1_grid;
  g.h2 = h.h2_grid;
  g.k = h.k_grid;
  return g;
}

NpC2gConfig np_c2g_config(const Hyperparameters& h, std::uint64_t seed) {
  NpC2gConfig c;
  c.untreated_grid = cde_grid(h);
  c.treated_grid = cde_grid(h);
  c.bootstrap.replicates = h.bootstrap_replicates;
  c.bootstrap.q = h.bootstrap_q;
  c.seed = seed;
  return c;
}

}  // namespace c2g::app
