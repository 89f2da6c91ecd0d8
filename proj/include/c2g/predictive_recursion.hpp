#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "c2g/types.hpp"

namespace c2g {

struct PrConfig {
  Index grid_size = 512;
  double weight_exponent = 0.67;  // gamma_i = (i + 1)^-exponent
  int permutations = 10;
  std::uint64_t seed = 0;
};

/// Normal location mixture g(y) = int N(y | theta, h^2) m(theta) dtheta with the
/// mixing density m tabulated on an equally spaced grid.
struct PrDensity {
  Eigen::VectorXd grid;
  Eigen::VectorXd mixing;
  Eigen::VectorXd weights;  // trapezoid weights on grid
  double kernel_bandwidth = 1.0;
  double prml = 0.0;  // log marginal likelihood, averaged over orderings

  double density(double y) const;
  double cdf(double y) const;
  /// Integral of the mixing density (1 up to rounding).
  double mixing_mass() const { return weights.dot(mixing); }
};

/// Predictive recursion estimate of the mixing density, averaged over
/// `config.permutations` seeded orderings of the data.
PrDensity predictive_recursion(std::span<const double> residuals, double bandwidth,
                               const PrConfig& config = {});

/// Candidate with maximal PRML; ties go to the smaller bandwidth.
double prml_select_bandwidth(std::span<const double> residuals,
                             const std::vector<double>& candidates, const PrConfig& config = {});

/// Default PRML candidates: sd(residuals) x {0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1}.
std::vector<double> default_pr_bandwidths(std::span<const double> residuals);

/// Fast evaluator of a PrDensity for repeated queries: linear interpolation
/// on a fine table, Gaussian decay from the table edges outside it.
class TabulatedDensity {
 public:
  explicit TabulatedDensity(const PrDensity& density, Index points = 4096);

  double log_value(double r) const;
  double value(double r) const;
  /// d/dr log g(r).
  double score(double r) const;

 private:
  Eigen::VectorXd values_;
  double lo_ = 0.0;
  double step_ = 1.0;
  double h_ = 1.0;
  double theta_lo_ = 0.0;
  double theta_hi_ = 0.0;
};

}  // namespace c2g
