#include "c2g/cde.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "c2g/error.hpp"
#include "c2g/kernel.hpp"
#include "c2g/numeric.hpp"

namespace c2g {

DistanceOrder order_by_distance(const Eigen::MatrixXd& x, const Eigen::VectorXd& query,
                                Index exclude) {
  const Index n = x.rows();
  const Eigen::VectorXd sq = (x.rowwise() - query.transpose()).rowwise().squaredNorm();
  IndexList rows;
  rows.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    if (i != exclude) rows.push_back(i);
  }
  std::sort(rows.begin(), rows.end(), [&](Index a, Index b) {
    return sq[a] < sq[b] || (sq[a] == sq[b] && a < b);
  });
  DistanceOrder out;
  out.sq_dist.reserve(rows.size());
  for (Index r : rows) out.sq_dist.push_back(sq[r]);
  out.rows = std::move(rows);
  return out;
}

std::vector<double> covariate_weights(std::span<const double> sq_dist, double h1) {
  std::vector<double> w(sq_dist.size());
  if (sq_dist.empty()) return w;
  const double base = *std::min_element(sq_dist.begin(), sq_dist.end());
  const double scale = 1.0 / (2.0 * h1 * h1);
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(-(sq_dist[i] - base) * scale);
    total += w[i];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw EstimatorError("cde: covariate kernel weights vanish");
  }
  for (double& v : w) v /= total;
  return w;
}

CdeModel::CdeModel(Eigen::MatrixXd x, Eigen::VectorXd y, CdeHyper hyper)
    : x_(std::move(x)), y_(std::move(y)), hyper_(hyper) {
  if (x_.rows() != y_.size() || y_.size() < 1) throw ValidationError("cde: bad reference data");
  if (!(hyper_.h1 > 0.0) || !(hyper_.h2 > 0.0)) {
    throw ValidationError("cde: bandwidths must be positive");
  }
  if (hyper_.k < 1 || hyper_.k > y_.size()) {
    throw ValidationError("cde: neighbor count must lie in [1, group size]");
  }
}

NeighborWeights CdeModel::neighbor_weights(const Eigen::VectorXd& query, Index exclude) const {
  if (query.size() != x_.cols()) throw ValidationError("cde: query dimension mismatch");
  DistanceOrder order = order_by_distance(x_, query, exclude);
  const auto k = std::min(static_cast<std::size_t>(hyper_.k), order.rows.size());
  order.rows.resize(k);
  order.sq_dist.resize(k);
  NeighborWeights nw;
  try {
    nw.weights = covariate_weights(order.sq_dist, hyper_.h1);
  } catch (const EstimatorError&) {
    std::string where;
    for (Index j = 0; j < query.size(); ++j) where += (j ? "," : "") + std::to_string(query[j]);
    throw EstimatorError("cde: zero kernel denominator at query (" + where + ")");
  }
  nw.rows = std::move(order.rows);
  return nw;
}

double CdeModel::density(const NeighborWeights& nw, double y) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < nw.rows.size(); ++i) {
    acc += nw.weights[i] * normal_pdf(y, y_[nw.rows[i]], hyper_.h2);
  }
  return acc;
}

Eigen::VectorXd CdeModel::density(const NeighborWeights& nw, const Eigen::VectorXd& ys) const {
  Eigen::VectorXd out(ys.size());
  for (Index j = 0; j < ys.size(); ++j) out[j] = density(nw, ys[j]);
  return out;
}

double CdeModel::mean(const NeighborWeights& nw) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < nw.rows.size(); ++i) acc += nw.weights[i] * y_[nw.rows[i]];
  return acc;
}

double cde_eval(const CdeModel& model, const Eigen::VectorXd& x, double y) {
  return model.density(x, y);
}

namespace {

// Neighbors of every training row with itself excluded, truncated to k_max.
std::vector<DistanceOrder> loo_orders(const Eigen::MatrixXd& x, Index k_max) {
  const Index n = x.rows();
  std::vector<DistanceOrder> orders(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    DistanceOrder o = order_by_distance(x, x.row(i).transpose(), i);
    const auto keep = static_cast<std::size_t>(std::min<Index>(k_max, n - 1));
    o.rows.resize(keep);
    o.sq_dist.resize(keep);
    orders[static_cast<std::size_t>(i)] = std::move(o);
  }
  return orders;
}

// Leave-one-out log density at row i, computed in log space.
double loo_log_density(const DistanceOrder& o, const Eigen::VectorXd& y, Index i, Index k,
                       double h1, double h2, std::vector<double>& scratch) {
  const auto kk = static_cast<std::size_t>(k);
  const double base = o.sq_dist[0];
  const double s1 = 1.0 / (2.0 * h1 * h1);
  scratch.resize(kk);
  double log_norm_terms = -INFINITY;
  {
    std::vector<double> lw(kk);
    for (std::size_t j = 0; j < kk; ++j) lw[j] = -(o.sq_dist[j] - base) * s1;
    log_norm_terms = log_sum_exp(lw);
    for (std::size_t j = 0; j < kk; ++j) {
      scratch[j] = lw[j] + log_normal_pdf(y[i], y[o.rows[j]], h2);
    }
  }
  return log_sum_exp(scratch) - log_norm_terms;
}

}  // namespace

double cde_loo_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const CdeHyper& hyper) {
  const Index n = x.rows();
  if (n < 3) throw ValidationError("cde_loo_objective: need at least 3 rows");
  if (hyper.k < 1 || hyper.k > n - 1) throw ValidationError("cde_loo_objective: bad k");
  const auto orders = loo_orders(x, hyper.k);
  std::vector<double> scratch;
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    total += loo_log_density(orders[static_cast<std::size_t>(i)], y, i, hyper.k, hyper.h1,
                             hyper.h2, scratch);
  }
  return total / static_cast<double>(n);
}

CdeGrid default_cde_grid(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const double med = median_heuristic(x);
  double sd = sample_sd(as_span(y));
  if (!(sd > 0.0)) sd = 1.0;
  CdeGrid g;
  for (double s : {0.125, 0.25, 0.5, 1.0}) g.h1.push_back(s * med);
  for (double s : {0.05, 0.1, 0.2, 0.3, 0.5}) g.h2.push_back(s * sd);
  g.k = {5, 10, 20, 40, 80, 160};
  return g;
}

std::vector<CdeCandidate> cde_loo_table(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                        const CdeGrid& grid) {
  const Index n = x.rows();
  if (n < 3 || y.size() != n) throw ValidationError("cde_tune: group size must be >= 3");
  if (grid.h1.empty() || grid.h2.empty() || grid.k.empty()) {
    throw ValidationError("cde_tune: empty grid");
  }
  auto h1s = grid.h1;
  auto h2s = grid.h2;
  auto ks = grid.k;
  std::sort(h1s.begin(), h1s.end());
  std::sort(h2s.begin(), h2s.end());
  std::sort(ks.begin(), ks.end());
  for (double h : h1s) {
    if (!(h > 0.0)) throw ValidationError("cde_tune: bandwidths must be positive");
  }
  for (double h : h2s) {
    if (!(h > 0.0)) throw ValidationError("cde_tune: bandwidths must be positive");
  }

  Index k_max = 0;
  for (Index k : ks) {
    if (k >= 1 && k <= n - 1) k_max = std::max(k_max, k);
  }
  if (k_max == 0) throw ValidationError("cde_tune: no neighbor count fits the group size");
  const auto orders = loo_orders(x, k_max);

  std::vector<double> scratch;
  std::vector<double> objective(h2s.size());
  std::vector<CdeCandidate> table;
  for (Index k : ks) {
    if (k < 1 || k > n - 1) continue;
    for (double h1 : h1s) {
      std::fill(objective.begin(), objective.end(), 0.0);
      for (Index i = 0; i < n; ++i) {
        const auto& o = orders[static_cast<std::size_t>(i)];
        for (std::size_t c = 0; c < h2s.size(); ++c) {
          objective[c] += loo_log_density(o, y, i, k, h1, h2s[c], scratch);
        }
      }
      for (std::size_t c = 0; c < h2s.size(); ++c) {
        table.push_back({{h1, h2s[c], k}, objective[c] / static_cast<double>(n)});
      }
    }
  }
  return table;
}

namespace {

// First strict maximum in table order (k, then h1, then h2 ascending).
CdeHyper best_of(const std::vector<CdeCandidate>& table) {
  const CdeCandidate* best = nullptr;
  for (const auto& c : table) {
    if (std::isfinite(c.value) && (best == nullptr || c.value > best->value)) best = &c;
  }
  if (best == nullptr) throw EstimatorError("cde_tune: every candidate has -infinite objective");
  return best->hyper;
}

}  // namespace

CdeModel cde_tune(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const CdeGrid& grid) {
  return CdeModel(x, y, best_of(cde_loo_table(x, y, grid)));
}

CdeHyper cde_tune_shared(const Eigen::MatrixXd& x0, const Eigen::VectorXd& y0,
                         const Eigen::MatrixXd& x1, const Eigen::VectorXd& y1,
                         const CdeGrid& grid) {
  CdeGrid common = grid;
  const Index limit = std::min(x0.rows(), x1.rows()) - 1;
  std::erase_if(common.k, [&](Index k) { return k < 1 || k > limit; });
  if (common.k.empty()) throw ValidationError("cde_tune: no neighbor count fits both groups");
  const auto a = cde_loo_table(x0, y0, common);
  const auto b = cde_loo_table(x1, y1, common);
  const double n0 = static_cast<double>(x0.rows());
  const double n1 = static_cast<double>(x1.rows());
  std::vector<CdeCandidate> pooled = a;
  for (std::size_t c = 0; c < pooled.size(); ++c) {
    pooled[c].value = (n0 * a[c].value + n1 * b[c].value) / (n0 + n1);
  }
  return best_of(pooled);
}

GridKernel::GridKernel(const CdeModel& model, const Eigen::VectorXd& grid)
    : grid_(grid), table_(grid.size(), model.size()) {
  const double h2 = model.hyper().h2;
  for (Index r = 0; r < model.size(); ++r) {
    const double center = model.y()[r];
    for (Index j = 0; j < grid.size(); ++j) table_(j, r) = normal_pdf(grid[j], center, h2);
  }
}

Eigen::VectorXd GridKernel::eval(const NeighborWeights& nw) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(grid_.size());
  for (std::size_t i = 0; i < nw.rows.size(); ++i) {
    out.noalias() += nw.weights[i] * table_.col(nw.rows[i]);
  }
  return out;
}

}  // namespace c2g
