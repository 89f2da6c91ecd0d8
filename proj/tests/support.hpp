#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "c2g/rng.hpp"
#include "c2g/types.hpp"

namespace c2g::test {

// Hand-rolled generators for property tests.
struct Gen {
  Rng rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  }
  double normal(double mean = 0.0, double sd = 1.0) {
    return std::normal_distribution<double>(mean, sd)(rng);
  }
  Index integer(Index lo, Index hi) {
    return std::uniform_int_distribution<Index>(lo, hi)(rng);
  }
  bool coin(double p = 0.5) { return uniform() < p; }

  Eigen::MatrixXd normal_matrix(Index rows, Index cols, double sd = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (Index j = 0; j < cols; ++j) {
      for (Index i = 0; i < rows; ++i) m(i, j) = normal(0.0, sd);
    }
    return m;
  }
  Eigen::VectorXd normal_vector(Index n, double sd = 1.0) { return normal_matrix(n, 1, sd).col(0); }
  Eigen::VectorXd uniform_vector(Index n, double lo = 0.0, double hi = 1.0) {
    Eigen::VectorXd v(n);
    for (Index i = 0; i < n; ++i) v[i] = uniform(lo, hi);
    return v;
  }
  // Score vectors with repeated values and exact zeros mixed in.
  Eigen::VectorXd score_vector(Index n) {
    Eigen::VectorXd v(n);
    for (Index i = 0; i < n; ++i) {
      const double r = uniform();
      v[i] = r < 0.15 ? 0.0 : (r < 0.3 ? 0.5 : uniform());
      if (coin(0.1)) v[i] = std::round(v[i] * 10.0) / 10.0;
    }
    return v;
  }
};

// Trapezoid integral of f over [lo, hi] with `points` nodes.
template <typename F>
double integrate(const F& f, double lo, double hi, int points = 20001) {
  const double step = (hi - lo) / (points - 1);
  double s = 0.0;
  for (int i = 0; i < points; ++i) {
    const double w = (i == 0 || i == points - 1) ? 0.5 : 1.0;
    s += w * f(lo + step * i);
  }
  return s * step;
}

}  // namespace c2g::test
