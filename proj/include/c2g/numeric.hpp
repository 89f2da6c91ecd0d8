#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace c2g {

template <typename Scalar>
Scalar normal_pdf(Scalar y, Scalar mean, Scalar sd) {
  const Scalar z = (y - mean) / sd;
  return std::exp(Scalar(-0.5) * z * z) / (sd * Scalar(std::sqrt(2.0 * std::numbers::pi)));
}

template <typename Scalar>
Scalar log_normal_pdf(Scalar y, Scalar mean, Scalar sd) {
  const Scalar z = (y - mean) / sd;
  return Scalar(-0.5) * z * z - std::log(sd) - Scalar(0.5 * std::log(2.0 * std::numbers::pi));
}

template <typename Scalar>
Scalar normal_cdf(Scalar y, Scalar mean, Scalar sd) {
  return Scalar(0.5) * std::erfc(-(y - mean) / (sd * Scalar(std::numbers::sqrt2)));
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  if (z > 30.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

/// Equally spaced points covering [lo, hi] inclusive.
inline Eigen::VectorXd linspace(double lo, double hi, Eigen::Index count) {
  return Eigen::VectorXd::LinSpaced(count, lo, hi);
}

/// Trapezoid weights for an equally spaced grid.
inline Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& grid) {
  const Eigen::Index m = grid.size();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
  if (m < 2) return w;
  for (Eigen::Index j = 0; j + 1 < m; ++j) {
    const double half = 0.5 * (grid[j + 1] - grid[j]);
    w[j] += half;
    w[j + 1] += half;
  }
  return w;
}

/// Order statistic at 1-based rank ceil(level * count), clamped to [1, count].
/// Reorders `values`.
inline double order_statistic(std::span<double> values, double level) {
  const auto count = static_cast<long>(values.size());
  long rank = static_cast<long>(std::ceil(level * static_cast<double>(count) - 1e-9));
  rank = std::clamp(rank, 1L, count);
  auto nth = values.begin() + (rank - 1);
  std::nth_element(values.begin(), nth, values.end());
  return *nth;
}

inline double log_sum_exp(std::span<const double> logs) {
  double peak = -INFINITY;
  for (double v : logs) peak = std::max(peak, v);
  if (!std::isfinite(peak)) return peak;
  double acc = 0.0;
  for (double v : logs) acc += std::exp(v - peak);
  return peak + std::log(acc);
}

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace c2g
