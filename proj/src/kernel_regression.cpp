#include "c2g/kernel_regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "c2g/error.hpp"
#include "c2g/rng.hpp"

namespace c2g {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Eigendecomposition of the Gram matrix, shared by every ridge value at a
// given bandwidth.
struct Spectrum {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

Spectrum spectrum_of(const Eigen::MatrixXd& x, double bandwidth) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(kernel_matrix(x, x, bandwidth));
  if (solver.info() != Eigen::Success) {
    throw EstimatorError("gcv: eigendecomposition of the kernel matrix failed");
  }
  return {solver.eigenvalues().cwiseMax(0.0), solver.eigenvectors()};
}

double gcv_from_spectrum(const Spectrum& sp, const Eigen::VectorXd& y, double ridge) {
  const Index n = y.size();
  const Eigen::VectorXd projected = sp.vectors.transpose() * y;
  Eigen::VectorXd shrink(n);
  for (Index k = 0; k < n; ++k) {
    const double denom = sp.values[k] + ridge;
    shrink[k] = denom > 0.0 ? sp.values[k] / denom : 0.0;
  }
  const Eigen::VectorXd residual = y - sp.vectors * shrink.cwiseProduct(projected);
  const double nd = static_cast<double>(n);
  const double trace_ratio = (nd - shrink.sum()) / nd;
  if (trace_ratio <= 1e-10) return kInf;
  return (residual.squaredNorm() / nd) / (trace_ratio * trace_ratio);
}

bool has_duplicate_rows(const Eigen::MatrixXd& x) {
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = i + 1; j < x.rows(); ++j) {
      if (x.row(i) == x.row(j)) return true;
    }
  }
  return false;
}

}  // namespace

double median_heuristic(const Eigen::MatrixXd& x) {
  const Index n = x.rows();
  const Index stride = std::max<Index>(1, n / 1000);
  std::vector<Index> rows;
  for (Index i = 0; i < n; i += stride) rows.push_back(i);
  std::vector<double> dists;
  dists.reserve(rows.size() * rows.size() / 2);
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = a + 1; b < rows.size(); ++b) {
      dists.push_back((x.row(rows[a]) - x.row(rows[b])).norm());
    }
  }
  if (dists.empty()) return 1.0;
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  return *mid > 0.0 ? *mid : 1.0;
}

Eigen::VectorXd KrrModel::predict(const Eigen::MatrixXd& x) const {
  return kernel_matrix(x, train_x, bandwidth) * dual_weights;
}

KrrModel fit_krr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double bandwidth,
                 double ridge) {
  const Index n = x.rows();
  if (n < 1 || y.size() != n) throw ValidationError("fit_krr: need n >= 1 matching rows");
  if (!(bandwidth > 0.0)) throw ValidationError("fit_krr: bandwidth must be positive");
  if (!(ridge >= 0.0)) throw ValidationError("fit_krr: ridge must be non-negative");
  if (ridge == 0.0 && has_duplicate_rows(x)) {
    throw EstimatorError("fit_krr: singular system (ridge 0 with duplicate training points)");
  }

  const Eigen::MatrixXd k = kernel_matrix(x, x, bandwidth);
  Eigen::MatrixXd system = k;
  system.diagonal().array() += ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) {
    system.diagonal().array() += 1e-10 * k.trace() / static_cast<double>(n);
    llt.compute(system);
    if (llt.info() != Eigen::Success) throw EstimatorError("fit_krr: factorization failed");
  }

  KrrModel model;
  model.train_x = x;
  model.bandwidth = bandwidth;
  model.ridge = ridge;
  model.dual_weights = llt.solve(y);
  model.hat_diag = llt.solve(k).diagonal();
  model.fitted = k * model.dual_weights;
  return model;
}

double gcv_score(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double bandwidth,
                 double ridge) {
  if (x.rows() < 1 || y.size() != x.rows()) throw ValidationError("gcv_score: bad shapes");
  if (!(bandwidth > 0.0)) throw ValidationError("gcv_score: bandwidth must be positive");
  if (!(ridge >= 0.0)) throw ValidationError("gcv_score: ridge must be non-negative");
  return gcv_from_spectrum(spectrum_of(x, bandwidth), y, ridge);
}

KrrGrid default_krr_grid(const Eigen::MatrixXd& x) {
  const double med = median_heuristic(x);
  const double n = static_cast<double>(x.rows());
  KrrGrid grid;
  for (double s : {0.25, 0.5, 1.0, 2.0, 4.0}) grid.bandwidths.push_back(med * s);
  for (double s : {1e-3, 1e-2, 1e-1, 1.0}) grid.ridges.push_back(s * n);
  return grid;
}

KrrModel tune_krr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  const std::vector<double>& bandwidths, const std::vector<double>& ridges) {
  if (bandwidths.empty() || ridges.empty()) throw ValidationError("tune_krr: empty grid");
  double best_score = kInf;
  double best_bw = 0.0;
  double best_ridge = 0.0;
  bool found = false;
  for (double bw : bandwidths) {
    if (!(bw > 0.0)) throw ValidationError("tune_krr: bandwidth must be positive");
    const Spectrum sp = spectrum_of(x, bw);
    for (double ridge : ridges) {
      if (!(ridge >= 0.0)) throw ValidationError("tune_krr: ridge must be non-negative");
      const double score = gcv_from_spectrum(sp, y, ridge);
      if (!std::isfinite(score)) continue;
      const bool better =
          !found || score < best_score ||
          (score == best_score &&
           (ridge > best_ridge || (ridge == best_ridge && bw > best_bw)));
      if (better) {
        found = true;
        best_score = score;
        best_bw = bw;
        best_ridge = ridge;
      }
    }
  }
  if (!found) throw EstimatorError("tune_krr: every grid point has infinite GCV");
  return fit_krr(x, y, best_bw, best_ridge);
}

Eigen::VectorXd loo_predictions(const KrrModel& model, const Eigen::VectorXd& y) {
  const Index n = y.size();
  if (model.hat_diag.size() != n) throw ValidationError("loo_predictions: size mismatch");
  Eigen::VectorXd out(n);
  for (Index i = 0; i < n; ++i) {
    const double s = model.hat_diag[i];
    if (s >= 1.0 - 1e-12) {
      throw EstimatorError("loo_predictions: hat diagonal at index " + std::to_string(i) +
                           " is numerically 1");
    }
    out[i] = (model.fitted[i] - s * y[i]) / (1.0 - s);
  }
  return out;
}

Eigen::MatrixXd RffMap::features(const Eigen::MatrixXd& x) const {
  if (x.cols() != frequencies.cols()) throw ValidationError("rff: dimension mismatch");
  const double scale = std::sqrt(2.0 / static_cast<double>(dim()));
  Eigen::MatrixXd z = x * frequencies.transpose();
  z.rowwise() += phases.transpose();
  return (z.array().cos() * scale).matrix();
}

RffMap make_rff_map(Index input_dim, double bandwidth, Index feature_dim, std::uint64_t seed) {
  if (feature_dim < 1) throw ValidationError("rff: feature dimension must be >= 1");
  if (!(bandwidth > 0.0)) throw ValidationError("rff: bandwidth must be positive");
  Rng rng = make_rng(seed, stream::kFeatures);
  std::normal_distribution<double> normal(0.0, 1.0 / bandwidth);
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
  RffMap map;
  map.bandwidth = bandwidth;
  map.seed = seed;
  map.frequencies.resize(feature_dim, input_dim);
  map.phases.resize(feature_dim);
  for (Index j = 0; j < feature_dim; ++j) {
    for (Index c = 0; c < input_dim; ++c) map.frequencies(j, c) = normal(rng);
    map.phases[j] = uniform(rng);
  }
  return map;
}

Eigen::MatrixXd rff_features(const Eigen::MatrixXd& x, double bandwidth, Index feature_dim,
                             std::uint64_t seed) {
  return make_rff_map(x.cols(), bandwidth, feature_dim, seed).features(x);
}

}  // namespace c2g
