#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "c2g/dataset.hpp"
#include "c2g/estimands.hpp"
#include "c2g/kernel_regression.hpp"
#include "c2g/predictive_recursion.hpp"
#include "c2g/selection.hpp"

namespace c2g {

struct AddC2gConfig {
  KrrGrid krr_grid;                   // empty grids use default_krr_grid
  std::vector<double> pr_bandwidths;  // empty uses default_pr_bandwidths
  PrConfig pr;
  Index rff_dim = 256;
  double rff_bandwidth_scale = 1.0;  // times the median heuristic of treated x
  double pi_start = 0.5;  // responder prior at the EM start
  double pi_l2 = 1.0;
  double mu1_l2 = 1.0;
  int em_max_iter = 200;
  double em_tol = 1e-7;  // relative log-likelihood change
  int m_step_max_iter = 50;
  double m_step_tol = 1e-6;
  int folds = 5;
  int restarts = 1;
  double pi_floor = 1e-4;
  std::uint64_t seed = 0;
};

/// Linear model on [1, phi(x)] where phi is a random Fourier feature map.
/// coef[0] is the intercept.
struct RffLinearModel {
  RffMap map;
  Eigen::VectorXd coef;

  Eigen::MatrixXd design(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd eval(const Eigen::MatrixXd& x) const { return design(x) * coef; }
};

/// Responder prior pi(x) = sigmoid(eta(x)) and effect tau(x), so that
/// mu1(x) = mu0(x) + tau(x).
struct AddC2gParams {
  RffLinearModel pi_logit;
  RffLinearModel tau;
};

struct EmDiagnostics {
  std::vector<double> trace;  // penalized log-likelihood after each iteration
  int iterations = 0;
  bool converged = false;
  bool stalled = false;           // no improvement past the first iteration
  bool no_responder_mass = false;  // some M-step saw all w = 1
  Index zero_density_count = 0;    // E-step points with both densities zero
  Index clamped_pi_count = 0;      // pi values moved by the clamp
};

struct AddC2gFit {
  KrrModel mu0;
  PrDensity g_hat;
  AddC2gParams params;  // fit on all treated samples
  EmDiagnostics em;

  IndexList treated;            // dataset rows
  std::vector<int> fold;        // fold of each treated sample
  Eigen::VectorXd mu0_treated;  // mu0 at treated x
  Eigen::VectorXd pi_hat;       // out-of-fold, clamped
  Eigen::VectorXd mu1_hat;      // out-of-fold
  PosteriorScores w;
  Index zero_density_count = 0;  // treated points where the E-step fell back to w = 1
  Index clamped_pi_count = 0;
  std::vector<EmDiagnostics> fold_em;
};

/// Null posterior (1 - pi) g(y - mu0) / [(1 - pi) g(y - mu0) + pi g(y - mu1)].
/// Returns 1 when both terms vanish and bumps `zero_count` if given.
double em_e_step(const TabulatedDensity& g, double mu0, double mu1, double pi, double y,
                 Index* zero_count = nullptr);

struct MStepResult {
  bool no_responder_mass = false;
  int pi_iterations = 0;
  int tau_iterations = 0;
};

/// Precomputed data for repeated M-steps on one training set: the design
/// [1, phi(x)] and curvature bounds for both objectives.
class MStepSolver {
 public:
  MStepSolver(Eigen::MatrixXd design, Eigen::VectorXd y, Eigen::VectorXd mu0,
              const TabulatedDensity& g, double g_variance, const AddC2gConfig& config);

  /// Maximizes sum w log(1 - pi) + (1 - w) log pi over the logistic model
  /// and sum (1 - w) log g(y - mu0 - tau) over the effect model, each with
  /// an L2 penalty on non-intercept coefficients. Starts from and updates
  /// the given coefficients.
  MStepResult solve(const Eigen::VectorXd& w, Eigen::VectorXd& pi_coef,
                    Eigen::VectorXd& tau_coef) const;

  double pi_objective(const Eigen::VectorXd& w, const Eigen::VectorXd& coef) const;
  double tau_objective(const Eigen::VectorXd& w, const Eigen::VectorXd& coef) const;
  /// Penalized observed-data log-likelihood.
  double log_likelihood(const Eigen::VectorXd& pi_coef, const Eigen::VectorXd& tau_coef,
                        Index* clamped = nullptr) const;
  Eigen::VectorXd e_step(const Eigen::VectorXd& pi_coef, const Eigen::VectorXd& tau_coef,
                         Index* zero_count = nullptr, Index* clamped = nullptr) const;

  const Eigen::MatrixXd& design() const { return design_; }

 private:
  int ascend(const Eigen::VectorXd& w, Eigen::VectorXd& coef, bool pi_part) const;

  Eigen::MatrixXd design_;
  Eigen::VectorXd y_;
  Eigen::VectorXd mu0_;
  const TabulatedDensity* g_;
  const AddC2gConfig* config_;
  Eigen::LDLT<Eigen::MatrixXd> pi_bound_;
  Eigen::LDLT<Eigen::MatrixXd> tau_bound_;
};

/// EM from pi = config.pi_start and tau = tau_coef[0] (the caller's starting effect).
/// Extra restarts jitter that start; the best final likelihood wins.
EmDiagnostics run_em(const MStepSolver& solver, const AddC2gConfig& config,
                     Eigen::VectorXd& pi_coef, Eigen::VectorXd& tau_coef, std::uint64_t seed);

AddC2gFit fit_add_c2g(const Dataset& ds, const AddC2gConfig& config = {});

/// CARE(x) = mu1(x) - mu0(x) as a degenerate interval; ERPF = mean pi over
/// treated samples.
EstimandReport add_c2g_estimands(const AddC2gFit& fit);

}  // namespace c2g
