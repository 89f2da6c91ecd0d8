#include "c2g/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "c2g/error.hpp"
#include "c2g/numeric.hpp"

namespace c2g {

std::string to_string(ScoreSource s) {
  switch (s) {
    case ScoreSource::additive: return "additive";
    case ScoreSource::nonparametric: return "nonparametric";
    case ScoreSource::oracle: return "oracle";
  }
  return "unknown";
}

SelectionResult select_by_average(const PosteriorScores& scores, double alpha) {
  const auto m = scores.indices.size();
  if (static_cast<Index>(m) != scores.w.size()) {
    throw ValidationError("select_by_average: indices and scores differ in length");
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double wa = scores.w[static_cast<Index>(a)];
    const double wb = scores.w[static_cast<Index>(b)];
    return wa < wb || (wa == wb && scores.indices[a] < scores.indices[b]);
  });

  std::size_t take = 0;
  double sum = 0.0;
  double kept_sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sum += scores.w[static_cast<Index>(order[i])];
    if (sum / static_cast<double>(i + 1) <= alpha) {
      take = i + 1;
      kept_sum = sum;
    }
  }
  SelectionResult out;
  out.level = alpha;
  out.estimated_fdr = take > 0 ? kept_sum / static_cast<double>(take) : 0.0;
  for (std::size_t i = 0; i < take; ++i) out.selected.push_back(scores.indices[order[i]]);
  std::sort(out.selected.begin(), out.selected.end());
  return out;
}

IndexList bh_procedure(std::span<const double> pvalues, double alpha) {
  const std::size_t m = pvalues.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pvalues[a] < pvalues[b] || (pvalues[a] == pvalues[b] && a < b);
  });
  std::size_t k = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (pvalues[order[i]] <= static_cast<double>(i + 1) * alpha / static_cast<double>(m)) k = i + 1;
  }
  IndexList out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(static_cast<Index>(order[i]));
  std::sort(out.begin(), out.end());
  return out;
}

double density_level_pvalue(const Eigen::VectorXd& density_on_grid,
                            const Eigen::VectorXd& y_grid, double density_at_y) {
  const Eigen::VectorXd w = trapezoid_weights(y_grid);
  const double mass = w.dot(density_on_grid);
  if (std::abs(mass - 1.0) > 1e-3) {
    throw EstimatorError("frequentist p-value: quadrature mass " + std::to_string(mass) +
                         " deviates from 1");
  }
  double tail = 0.0;
  for (Index j = 0; j < y_grid.size(); ++j) {
    if (density_on_grid[j] <= density_at_y) tail += w[j] * density_on_grid[j];
  }
  return std::clamp(tail / mass, 0.0, 1.0);
}

std::vector<double> frequentist_pvalues(const CdeModel& f0, const Eigen::MatrixXd& x,
                                        const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& y_grid) {
  if (x.rows() != y.size()) throw ValidationError("frequentist_pvalues: shape mismatch");
  const GridKernel kernel(f0, y_grid);
  std::vector<double> p(static_cast<std::size_t>(y.size()));
  for (Index i = 0; i < y.size(); ++i) {
    const NeighborWeights nw = f0.neighbor_weights(x.row(i).transpose());
    p[static_cast<std::size_t>(i)] = density_level_pvalue(kernel.eval(nw), y_grid, f0.density(nw, y[i]));
  }
  return p;
}

double fdr_metric(const IndexList& selected, const Eigen::VectorXi& h) {
  if (selected.empty()) return 0.0;
  std::size_t nulls = 0;
  for (Index i : selected) nulls += h[i] == 0;
  return static_cast<double>(nulls) / static_cast<double>(selected.size());
}

std::optional<double> power_metric(const IndexList& selected, const Eigen::VectorXi& h) {
  const auto responders = h.sum();
  if (responders == 0) return std::nullopt;
  std::size_t hits = 0;
  for (Index i : selected) hits += h[i] == 1;
  return static_cast<double>(hits) / static_cast<double>(responders);
}

double valid_power(double mean_fdr, double ci_halfwidth, double mean_power, double alpha) {
  return mean_fdr - ci_halfwidth > alpha ? 0.0 : mean_power;
}

MeanCi mean_ci95(std::span<const double> values) {
  MeanCi out;
  out.mean = mean(values);
  if (values.size() >= 2) {
    out.halfwidth = 1.96 * sample_sd(values) / std::sqrt(static_cast<double>(values.size()));
  }
  return out;
}

std::vector<double> valid_power_curve(const Eigen::MatrixXd& fdp, const Eigen::MatrixXd& power,
                                      std::span<const double> alphas) {
  if (fdp.rows() < 2 || fdp.rows() != power.rows() || fdp.cols() != power.cols() ||
      fdp.cols() != static_cast<Index>(alphas.size())) {
    throw ValidationError("valid_power_curve: need >= 2 repetitions and matching shapes");
  }
  std::vector<double> out;
  for (Index j = 0; j < fdp.cols(); ++j) {
    const Eigen::VectorXd f = fdp.col(j);
    const Eigen::VectorXd p = power.col(j);
    const MeanCi fc = mean_ci95(as_span(f));
    out.push_back(valid_power(fc.mean, fc.halfwidth, p.mean(), alphas[static_cast<std::size_t>(j)]));
  }
  return out;
}

namespace {

std::vector<Interval> normalize(std::span<const Interval> set) {
  std::vector<Interval> v;
  for (const auto& iv : set) {
    if (iv.hi < iv.lo) throw ValidationError("interval with hi < lo");
    if (iv.hi > iv.lo) v.push_back(iv);
  }
  std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> merged;
  for (const auto& iv : v) {
    if (!merged.empty() && iv.lo <= merged.back().hi) {
      merged.back().hi = std::max(merged.back().hi, iv.hi);
    } else {
      merged.push_back(iv);
    }
  }
  return merged;
}

}  // namespace

double union_measure(std::span<const Interval> set) {
  double total = 0.0;
  for (const auto& iv : normalize(set)) total += iv.hi - iv.lo;
  return total;
}

double jaccard_intervals(std::span<const Interval> a, std::span<const Interval> b) {
  const auto na = normalize(a);
  const auto nb = normalize(b);
  double inter = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < na.size() && j < nb.size()) {
    const double lo = std::max(na[i].lo, nb[j].lo);
    const double hi = std::min(na[i].hi, nb[j].hi);
    if (hi > lo) inter += hi - lo;
    if (na[i].hi < nb[j].hi) ++i; else ++j;
  }
  double total_a = 0.0;
  double total_b = 0.0;
  for (const auto& iv : na) total_a += iv.hi - iv.lo;
  for (const auto& iv : nb) total_b += iv.hi - iv.lo;
  const double uni = total_a + total_b - inter;
  if (uni <= 0.0) return 1.0;
  return inter / uni;
}

}  // namespace c2g
