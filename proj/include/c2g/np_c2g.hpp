#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "c2g/bootstrap.hpp"
#include "c2g/cde.hpp"
#include "c2g/dataset.hpp"
#include "c2g/estimands.hpp"
#include "c2g/selection.hpp"
#include "c2g/simgen.hpp"

namespace c2g {

/// Alpha levels 0.01, 0.02, ..., 0.30.
std::vector<double> default_alpha_grid();

struct NpC2gConfig {
  // With shared hyperparameters both groups use one triple tuned on
  // `untreated_grid`; otherwise each group is tuned on its own grid. Empty
  // grids use default_cde_grid on the data they are tuned on.
  bool shared_hyper = false;
  CdeGrid untreated_grid;
  CdeGrid treated_grid;
  BootstrapConfig bootstrap;
  Index y_grid_size = 401;
  double y_grid_margin = 6.0;  // in outcome bandwidths
  std::vector<double> alpha_grid = default_alpha_grid();
  double pi_floor = 1e-3;  // below this no responder mass is detected
  // The min over y only visits grid points where the point estimate of f0
  // reaches this fraction of its peak. Zero visits the whole grid.
  double support_fraction = 0.05;
  std::uint64_t seed = 0;
};

/// Per-sample quantities at one (x, y).
struct NpPointEstimate {
  double pi_star = 0.0;
  double w = 1.0;
  double mu0 = 0.0;
  double mut = 0.0;
  bool zero_denominator = false;
};

struct NpC2gFit {
  CdeModel f0;
  CdeModel ft;
  Eigen::VectorXd y_grid;
  IndexList treated;
  IndexList untreated;
  std::vector<NpPointEstimate> treated_points;
  std::vector<NpPointEstimate> untreated_points;
  Eigen::VectorXd pi_star;  // treated samples
  PosteriorScores w;        // treated samples
  PosteriorScores w_untreated;
  Index zero_denominator_count = 0;
  double pi_floor = 1e-3;
};

/// 1 - min_j ft_j / f0_j over paired grid values, clamped to [0, 1]. Grid
/// points where both vanish are skipped; throws EstimatorError when f0
/// vanishes at every point.
double conservative_pi(std::span<const double> f0_values, std::span<const double> ft_values);

/// Indicator of grid points where `f0_values` is at least `fraction` of its
/// maximum (all points when fraction is zero).
std::vector<char> support_mask(std::span<const double> f0_values, double fraction);

/// Same for callables evaluated along `y_grid`.
template <typename F0, typename Ft>
double conservative_pi(const F0& f0, const Ft& ft, const Eigen::VectorXd& y_grid) {
  std::vector<double> a(static_cast<std::size_t>(y_grid.size()));
  std::vector<double> b(a.size());
  for (Index j = 0; j < y_grid.size(); ++j) {
    a[static_cast<std::size_t>(j)] = f0(y_grid[j]);
    b[static_cast<std::size_t>(j)] = ft(y_grid[j]);
  }
  return conservative_pi(a, b);
}

double conservative_pi(const CdeModel& f0, const CdeModel& ft, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& y_grid);

/// min_j ft_upper_j / f0_lower_j. Points where f0_lower_j vanishes do not
/// constrain the minimum; +inf when no point does.
double min_density_ratio(std::span<const double> f0_lower, std::span<const double> ft_upper,
                         const std::vector<char>& mask = {});

/// [f0_upper(y) / ft_lower(y)] * min_ratio clamped to [0, 1]; 1 when
/// ft_lower(y) is zero (flagged through `zero_denominator`) or min_ratio is
/// infinite.
double np_posterior_w(double f0_upper_at_y, double ft_lower_at_y, double min_ratio,
                      bool* zero_denominator = nullptr);

struct EmpiricalControlResult {
  SelectionResult selection;  // treated selection at the chosen level
  std::vector<double> levels;
  std::vector<double> ratios;  // e_k per level <= alpha
  bool found = false;
};

/// Picks the largest alpha_k <= alpha whose untreated-to-treated selection
/// ratio e_k is at most alpha_k.
EmpiricalControlResult empirical_control(const PosteriorScores& w_treated,
                                         const PosteriorScores& w_untreated,
                                         std::span<const double> alpha_grid, double alpha);

struct CareInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool unbounded = false;
};

/// Between the CATE mu_t - mu_0 and the extremal responder effect
/// (mu_t - mu_0) / pi_star.
CareInterval care_interval(double mu_t, double mu_0, double pi_star, double pi_floor = 1e-3);

NpC2gFit fit_np_c2g(const Dataset& ds, const NpC2gConfig& config = {});

/// Selection by empirical control at level alpha.
EmpiricalControlResult np_select(const NpC2gFit& fit, const NpC2gConfig& config, double alpha);

EstimandReport np_estimands(const NpC2gFit& fit,
                            const std::optional<std::vector<bool>>& mask = std::nullopt);

/// Outcome grid over the pooled range extended by `margin` on each side.
Eigen::VectorXd pooled_y_grid(const Eigen::VectorXd& y, double margin, Index points);

/// The nonparametric formulas applied to the generator's analytic laws:
/// f0 is the untreated law and ft the treated mixture at x_i.
NpPointEstimate np_oracle_posterior(const GeneratorTruth& truth, const Dataset& ds, Index i,
                                    const Eigen::VectorXd& y_grid);

struct NpOracle {
  PosteriorScores w;
  EstimandReport estimands;
};

NpOracle np_oracle(const GeneratorTruth& truth, const Dataset& ds, double pi_floor = 1e-3);

}  // namespace c2g
