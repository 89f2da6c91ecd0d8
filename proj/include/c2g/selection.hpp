#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "c2g/cde.hpp"
#include "c2g/types.hpp"

namespace c2g {

enum class ScoreSource { additive, nonparametric, oracle };

std::string to_string(ScoreSource s);

/// Null posterior estimates w_i for treated samples. `indices` are dataset
/// rows; `w[i]` belongs to `indices[i]`.
struct PosteriorScores {
  IndexList indices;
  Eigen::VectorXd w;
  ScoreSource source = ScoreSource::additive;
};

struct SelectionResult {
  IndexList selected;  // dataset rows, ascending
  double level = 0.0;
  double estimated_fdr = 0.0;  // mean of the selected w
};

/// Longest prefix of the w-ascending order (ties by index) whose running mean
/// stays at or below alpha.
SelectionResult select_by_average(const PosteriorScores& scores, double alpha);

/// Benjamini-Hochberg step-up. Returns positions into `pvalues`, ascending.
IndexList bh_procedure(std::span<const double> pvalues, double alpha);

/// Density-level p-values p = Pr_{Y ~ f0(.|x)}[f0(Y|x) <= f0(y|x)], by
/// trapezoid quadrature on `y_grid`. Throws EstimatorError when the
/// quadrature mass at some x deviates from one by more than 1e-3.
std::vector<double> frequentist_pvalues(const CdeModel& f0, const Eigen::MatrixXd& x,
                                        const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& y_grid);

/// Same construction for an arbitrary tabulated null density.
double density_level_pvalue(const Eigen::VectorXd& density_on_grid,
                            const Eigen::VectorXd& y_grid, double density_at_y);

/// Realized false discovery proportion #(selected, h=0) / max(1, #selected).
double fdr_metric(const IndexList& selected, const Eigen::VectorXi& h);

/// #(selected, h=1) / #(h=1); empty optional when there are no responders.
std::optional<double> power_metric(const IndexList& selected, const Eigen::VectorXi& h);

/// 0 when mean_fdr - ci_halfwidth > alpha, else mean_power.
double valid_power(double mean_fdr, double ci_halfwidth, double mean_power, double alpha);

/// Mean and normal-approximation 95% half-width of a sample.
struct MeanCi {
  double mean = 0.0;
  double halfwidth = 0.0;
};
MeanCi mean_ci95(std::span<const double> values);

/// Valid power at each alpha from per-repetition FDP and power curves
/// (rows = repetitions, cols = alphas).
std::vector<double> valid_power_curve(const Eigen::MatrixXd& fdp, const Eigen::MatrixXd& power,
                                      std::span<const double> alphas);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Lebesgue measure of the union of the intervals.
double union_measure(std::span<const Interval> set);

/// lambda(I n J) / lambda(I u J) for finite unions of intervals; 1 when both
/// have measure zero.
double jaccard_intervals(std::span<const Interval> a, std::span<const Interval> b);

}  // namespace c2g
