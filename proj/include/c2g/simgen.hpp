#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "c2g/dataset.hpp"
#include "c2g/rng.hpp"
#include "c2g/selection.hpp"

namespace c2g {

enum class Scenario { additive, nonadditive, response, effect, canonical, total };

std::string to_string(Scenario s);
/// Throws ValidationError on an unknown name.
Scenario parse_scenario(const std::string& name);

/// Conditional outcome law of one sample under one latent group.
struct ComponentLaw {
  enum class Kind { normal, uniform, unavailable };
  Kind kind = Kind::unavailable;
  double a = 0.0;  // mean, or lower end
  double b = 1.0;  // sd, or upper end

  static ComponentLaw normal(double mean, double sd) { return {Kind::normal, mean, sd}; }
  static ComponentLaw uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }

  double pdf(double y) const;
  double mean() const;
};

/// Everything the generator drew, plus per-sample oracle quantities.
struct GeneratorTruth {
  Scenario scenario = Scenario::additive;
  Index n = 0;
  Index d = 0;
  double tau = 0.0;
  std::uint64_t seed = 0;

  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  Eigen::VectorXd theta;
  double c = 0.0;
  Eigen::MatrixXd interaction_mask;     // B_ij (nonadditive)
  Eigen::MatrixXd interaction_weights;  // Z_ij (nonadditive)

  Eigen::VectorXd pi;      // Pr(H = 1 | x_i, T = 1)
  Eigen::VectorXd latent;  // u_i for confounded scenarios, empty otherwise
  std::vector<ComponentLaw> null_law;         // Y | x_i, T = 0
  std::vector<ComponentLaw> nonresponder_law;  // Y | x_i, H = 0, T = 1
  std::vector<ComponentLaw> responder_law;     // Y | x_i, H = 1, T = 1

  bool analytic() const;
};

struct Simulation {
  Dataset data;
  GeneratorTruth truth;
};

/// Standard deviation of each coefficient draw, N(0, I_d / d).
double coefficient_sd(Index d);

Simulation gen_additive(Index n, Index d, double tau, std::uint64_t seed);
Simulation gen_nonadditive(Index n, Index d, double tau, std::uint64_t seed);
/// Latent-confounding constructions: response, effect, canonical, total.
Simulation gen_confounded(Scenario scenario, Index n, Index d, double tau, std::uint64_t seed);
/// Dispatch on any scenario.
Simulation simulate(Scenario scenario, Index n, Index d, double tau, std::uint64_t seed);

/// Pr(h_i = 0 | x_i, y_i, t_i = 1) under the generating model.
double true_posterior(const GeneratorTruth& truth, const Dataset& ds, Index i);
PosteriorScores true_posteriors(const GeneratorTruth& truth, const Dataset& ds);

/// Draw from Student's t with `dof` degrees of freedom.
double student_t(Rng& rng, double dof);

}  // namespace c2g
