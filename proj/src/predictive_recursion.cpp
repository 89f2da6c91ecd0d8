#include "c2g/predictive_recursion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "c2g/error.hpp"
#include "c2g/numeric.hpp"
#include "c2g/rng.hpp"

namespace c2g {

double PrDensity::density(double y) const {
  double acc = 0.0;
  for (Index j = 0; j < grid.size(); ++j) {
    acc += weights[j] * mixing[j] * normal_pdf(y, grid[j], kernel_bandwidth);
  }
  return acc;
}

double PrDensity::cdf(double y) const {
  double acc = 0.0;
  for (Index j = 0; j < grid.size(); ++j) {
    acc += weights[j] * mixing[j] * normal_cdf(y, grid[j], kernel_bandwidth);
  }
  return acc;
}

PrDensity predictive_recursion(std::span<const double> residuals, double bandwidth,
                               const PrConfig& config) {
  const auto n = residuals.size();
  if (n < 2) throw ValidationError("predictive_recursion: need at least 2 residuals");
  if (!(bandwidth > 0.0)) throw ValidationError("predictive_recursion: bandwidth must be positive");
  if (!(config.weight_exponent > 0.5 && config.weight_exponent <= 1.0)) {
    throw ValidationError("predictive_recursion: weight exponent must lie in (0.5, 1]");
  }
  if (config.grid_size < 2 || config.permutations < 1) {
    throw ValidationError("predictive_recursion: grid_size >= 2 and permutations >= 1 required");
  }
  const auto [lo_it, hi_it] = std::minmax_element(residuals.begin(), residuals.end());
  const double lo = *lo_it - 3.0 * bandwidth;
  const double hi = *hi_it + 3.0 * bandwidth;
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) {
    throw EstimatorError("predictive_recursion: degenerate support grid");
  }

  PrDensity out;
  out.kernel_bandwidth = bandwidth;
  out.grid = linspace(lo, hi, config.grid_size);
  out.weights = trapezoid_weights(out.grid);
  out.mixing = Eigen::VectorXd::Zero(config.grid_size);
  const Eigen::VectorXd uniform =
      Eigen::VectorXd::Constant(config.grid_size, 1.0 / out.weights.sum());

  std::vector<std::size_t> order(n);
  Rng rng = make_rng(config.seed, stream::kPermutations);
  Eigen::VectorXd m(config.grid_size);
  Eigen::VectorXd lik(config.grid_size);
  double prml_total = 0.0;
  for (int p = 0; p < config.permutations; ++p) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    m = uniform;
    double prml = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double y = residuals[order[i]];
      for (Index j = 0; j < config.grid_size; ++j) lik[j] = normal_pdf(y, out.grid[j], bandwidth);
      const double marginal = out.weights.dot(m.cwiseProduct(lik));
      if (!(marginal > 0.0)) throw EstimatorError("predictive_recursion: marginal underflow");
      prml += std::log(marginal);
      const double gamma = std::pow(static_cast<double>(i + 2), -config.weight_exponent);
      m = m.cwiseProduct(((1.0 - gamma) * Eigen::VectorXd::Ones(config.grid_size)) +
                         (gamma / marginal) * lik);
      m /= out.weights.dot(m);
    }
    out.mixing += m;
    prml_total += prml;
  }
  out.mixing /= static_cast<double>(config.permutations);
  out.mixing /= out.weights.dot(out.mixing);
  out.prml = prml_total / static_cast<double>(config.permutations);
  return out;
}

double prml_select_bandwidth(std::span<const double> residuals,
                             const std::vector<double>& candidates, const PrConfig& config) {
  if (candidates.empty()) throw ValidationError("prml_select_bandwidth: no candidates");
  double best_h = 0.0;
  double best_prml = -INFINITY;
  bool found = false;
  for (double h : candidates) {
    const double prml = predictive_recursion(residuals, h, config).prml;
    if (!found || prml > best_prml || (prml == best_prml && h < best_h)) {
      found = true;
      best_h = h;
      best_prml = prml;
    }
  }
  return best_h;
}

std::vector<double> default_pr_bandwidths(std::span<const double> residuals) {
  double sd = sample_sd(residuals);
  if (!(sd > 0.0)) sd = 1.0;
  std::vector<double> out;
  for (double s : {0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0}) out.push_back(s * sd);
  return out;
}

TabulatedDensity::TabulatedDensity(const PrDensity& density, Index points)
    : h_(density.kernel_bandwidth),
      theta_lo_(density.grid[0]),
      theta_hi_(density.grid[density.grid.size() - 1]) {
  lo_ = theta_lo_ - 6.0 * h_;
  const double hi = theta_hi_ + 6.0 * h_;
  step_ = (hi - lo_) / static_cast<double>(points - 1);
  values_.resize(points);
  for (Index j = 0; j < points; ++j) {
    values_[j] = std::max(density.density(lo_ + step_ * static_cast<double>(j)), 1e-300);
  }
}

double TabulatedDensity::log_value(double r) const {
  const Index last = values_.size() - 1;
  const double hi = lo_ + step_ * static_cast<double>(last);
  if (r <= lo_) {
    const double a = r - theta_lo_;
    const double b = lo_ - theta_lo_;
    return std::log(values_[0]) - (a * a - b * b) / (2.0 * h_ * h_);
  }
  if (r >= hi) {
    const double a = r - theta_hi_;
    const double b = hi - theta_hi_;
    return std::log(values_[last]) - (a * a - b * b) / (2.0 * h_ * h_);
  }
  const double pos = (r - lo_) / step_;
  const Index j = std::min<Index>(static_cast<Index>(pos), last - 1);
  const double frac = pos - static_cast<double>(j);
  return std::log(values_[j] + frac * (values_[j + 1] - values_[j]));
}

double TabulatedDensity::value(double r) const { return std::exp(log_value(r)); }

double TabulatedDensity::score(double r) const {
  const Index last = values_.size() - 1;
  const double hi = lo_ + step_ * static_cast<double>(last);
  if (r <= lo_) return -(r - theta_lo_) / (h_ * h_);
  if (r >= hi) return -(r - theta_hi_) / (h_ * h_);
  const double pos = (r - lo_) / step_;
  const Index j = std::min<Index>(static_cast<Index>(pos), last - 1);
  const double frac = pos - static_cast<double>(j);
  const double v = values_[j] + frac * (values_[j + 1] - values_[j]);
  return (values_[j + 1] - values_[j]) / step_ / v;
}

}  // namespace c2g
