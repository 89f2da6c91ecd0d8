#include "c2g/np_c2g.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "c2g/error.hpp"
#include "c2g/numeric.hpp"
#include "c2g/rng.hpp"

namespace c2g {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double quantile_of(std::vector<double> values, double level) {
  return order_statistic(values, level);
}

}  // namespace

std::vector<double> default_alpha_grid() {
  std::vector<double> out;
  for (int k = 1; k <= 30; ++k) out.push_back(k / 100.0);
  return out;
}

double conservative_pi(std::span<const double> f0_values, std::span<const double> ft_values) {
  if (f0_values.size() != ft_values.size()) {
    throw ValidationError("conservative_pi: density vectors differ in length");
  }
  double min_ratio = kInf;
  bool any = false;
  for (std::size_t j = 0; j < f0_values.size(); ++j) {
    if (f0_values[j] > 0.0) {
      any = true;
      min_ratio = std::min(min_ratio, ft_values[j] / f0_values[j]);
    }
  }
  if (!any) throw EstimatorError("conservative_pi: f0 vanishes at every grid point");
  return std::clamp(1.0 - min_ratio, 0.0, 1.0);
}

double conservative_pi(const CdeModel& f0, const CdeModel& ft, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& y_grid) {
  const Eigen::VectorXd a = f0.density(f0.neighbor_weights(x), y_grid);
  const Eigen::VectorXd b = ft.density(ft.neighbor_weights(x), y_grid);
  return conservative_pi(as_span(a), as_span(b));
}

std::vector<char> support_mask(std::span<const double> f0_values, double fraction) {
  double peak = 0.0;
  for (double v : f0_values) peak = std::max(peak, v);
  std::vector<char> mask(f0_values.size(), 1);
  if (fraction <= 0.0) return mask;
  for (std::size_t j = 0; j < f0_values.size(); ++j) mask[j] = f0_values[j] >= fraction * peak;
  return mask;
}

double min_density_ratio(std::span<const double> f0_lower, std::span<const double> ft_upper,
                         const std::vector<char>& mask) {
  double min_ratio = kInf;
  for (std::size_t j = 0; j < f0_lower.size(); ++j) {
    if (!mask.empty() && !mask[j]) continue;
    if (f0_lower[j] > 0.0) min_ratio = std::min(min_ratio, ft_upper[j] / f0_lower[j]);
  }
  return min_ratio;
}

double np_posterior_w(double f0_upper_at_y, double ft_lower_at_y, double min_ratio,
                      bool* zero_denominator) {
  if (!(ft_lower_at_y > 0.0)) {
    if (zero_denominator != nullptr) *zero_denominator = true;
    return 1.0;
  }
  if (!std::isfinite(min_ratio)) return 1.0;
  return std::clamp(f0_upper_at_y / ft_lower_at_y * min_ratio, 0.0, 1.0);
}

EmpiricalControlResult empirical_control(const PosteriorScores& w_treated,
                                         const PosteriorScores& w_untreated,
                                         std::span<const double> alpha_grid, double alpha) {
  if (!std::is_sorted(alpha_grid.begin(), alpha_grid.end())) {
    throw ValidationError("empirical control: alpha grid must be sorted ascending");
  }
  EmpiricalControlResult out;
  out.selection.level = 0.0;
  for (double level : alpha_grid) {
    if (level > alpha) break;
    const SelectionResult treated = select_by_average(w_treated, level);
    const SelectionResult untreated = select_by_average(w_untreated, level);
    const double num = static_cast<double>(untreated.selected.size());
    const double den = static_cast<double>(treated.selected.size());
    double e = 0.0;
    if (den > 0.0) {
      e = num / den;
    } else if (num > 0.0) {
      e = kInf;
    }
    out.levels.push_back(level);
    out.ratios.push_back(e);
    if (e <= level) {
      out.selection = treated;
      out.found = true;
    }
  }
  return out;
}

CareInterval care_interval(double mu_t, double mu_0, double pi_star, double pi_floor) {
  CareInterval out;
  if (!(pi_star > pi_floor)) {
    out.unbounded = true;
    out.lo = -kInf;
    out.hi = kInf;
    return out;
  }
  const double cate = mu_t - mu_0;
  const double mu1 = (mu_t - mu_0) / pi_star + mu_0;
  const double extremal = mu1 - mu_0;
  out.lo = std::min(cate, extremal);
  out.hi = std::max(cate, extremal);
  return out;
}

Eigen::VectorXd pooled_y_grid(const Eigen::VectorXd& y, double margin, Index points) {
  if (points < 2) throw ValidationError("outcome grid needs at least 2 points");
  return linspace(y.minCoeff() - margin, y.maxCoeff() + margin, points);
}

NpC2gFit fit_np_c2g(const Dataset& ds, const NpC2gConfig& config) {
  validate(ds);
  const TreatmentSplit split = split_by_treatment(ds);
  if (split.treated.size() < 3 || split.untreated.size() < 3) {
    throw EstimatorError("np-c2g: each treatment group needs at least 3 samples");
  }
  NpC2gFit fit;
  fit.treated = split.treated;
  fit.untreated = split.untreated;
  fit.pi_floor = config.pi_floor;

  const Eigen::MatrixXd x0 = select_rows(ds.x, split.untreated);
  const Eigen::VectorXd y0 = select_rows(ds.y, split.untreated);
  const Eigen::MatrixXd x1 = select_rows(ds.x, split.treated);
  const Eigen::VectorXd y1 = select_rows(ds.y, split.treated);
  const auto filled = [](CdeGrid grid, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const CdeGrid defaults = default_cde_grid(x, y);
    if (grid.h1.empty()) grid.h1 = defaults.h1;
    if (grid.h2.empty()) grid.h2 = defaults.h2;
    if (grid.k.empty()) grid.k = defaults.k;
    return grid;
  };
  if (config.shared_hyper) {
    const CdeHyper hyper = cde_tune_shared(x0, y0, x1, y1, filled(config.untreated_grid, ds.x, ds.y));
    fit.f0 = CdeModel(x0, y0, hyper);
    fit.ft = CdeModel(x1, y1, hyper);
  } else {
    fit.f0 = cde_tune(x0, y0, filled(config.untreated_grid, x0, y0));
    fit.ft = cde_tune(x1, y1, filled(config.treated_grid, x1, y1));
  }

  const double h2 = std::max(fit.f0.hyper().h2, fit.ft.hyper().h2);
  fit.y_grid = pooled_y_grid(ds.y, config.y_grid_margin * h2, config.y_grid_size);
  const GridKernel grid0(fit.f0, fit.y_grid);
  const GridKernel gridt(fit.ft, fit.y_grid);
  const int reps = config.bootstrap.replicates;
  const double q = config.bootstrap.q;
  const BootstrapEnsemble boot0(fit.f0, reps, derive_seed(config.seed, 0));
  const BootstrapEnsemble boott(fit.ft, reps, derive_seed(config.seed, 1));

  const Index g = fit.y_grid.size();
  Eigen::MatrixXd values0(reps, g);
  Eigen::MatrixXd valuest(reps, g);
  std::vector<double> at_y0(static_cast<std::size_t>(reps));
  std::vector<double> at_yt(static_cast<std::size_t>(reps));

  // A sample's own group density at its own (x, y) leaves that sample out.
  const auto evaluate = [&](Index row, Index self0, Index selft) {
    const Eigen::VectorXd x = ds.x.row(row).transpose();
    const double y = ds.y[row];
    NpPointEstimate p;
    const NeighborWeights nw0 = fit.f0.neighbor_weights(x, self0);
    const NeighborWeights nwt = fit.ft.neighbor_weights(x, selft);
    const Eigen::VectorXd d0 = grid0.eval(nw0);
    const Eigen::VectorXd dt = gridt.eval(nwt);
    const std::vector<char> mask = support_mask(as_span(d0), config.support_fraction);
    const double point_ratio = min_density_ratio(as_span(d0), as_span(dt), mask);
    if (!std::isfinite(point_ratio)) {
      throw EstimatorError("np-c2g: f0 vanishes along the outcome grid at row " +
                           std::to_string(row));
    }
    p.pi_star = std::clamp(1.0 - point_ratio, 0.0, 1.0);
    p.mu0 = fit.f0.mean(nw0);
    p.mut = fit.ft.mean(nwt);

    const auto r0 = boot0.neighbor_weights(x, self0);
    const auto rt = boott.neighbor_weights(x, selft);
    for (int b = 0; b < reps; ++b) {
      const auto bi = static_cast<std::size_t>(b);
      values0.row(b) = grid0.eval(r0[bi]).transpose();
      valuest.row(b) = gridt.eval(rt[bi]).transpose();
      at_y0[bi] = fit.f0.density(r0[bi], y);
      at_yt[bi] = fit.ft.density(rt[bi], y);
    }
    const Eigen::VectorXd f0_lower = envelope_from_replicates(values0, q).lower;
    const Eigen::VectorXd ft_upper = envelope_from_replicates(valuest, q).upper;
    const double ratio = min_density_ratio(as_span(f0_lower), as_span(ft_upper), mask);
    p.w = np_posterior_w(quantile_of(at_y0, 1.0 - q), quantile_of(at_yt, q), ratio,
                         &p.zero_denominator);
    if (p.zero_denominator) ++fit.zero_denominator_count;
    return p;
  };

  for (std::size_t k = 0; k < split.treated.size(); ++k) {
    fit.treated_points.push_back(evaluate(split.treated[k], -1, static_cast<Index>(k)));
  }
  for (std::size_t k = 0; k < split.untreated.size(); ++k) {
    fit.untreated_points.push_back(evaluate(split.untreated[k], static_cast<Index>(k), -1));
  }

  const auto scores = [](const IndexList& rows, const std::vector<NpPointEstimate>& pts) {
    PosteriorScores s;
    s.source = ScoreSource::nonparametric;
    s.indices = rows;
    s.w.resize(static_cast<Index>(pts.size()));
    for (std::size_t k = 0; k < pts.size(); ++k) s.w[static_cast<Index>(k)] = pts[k].w;
    return s;
  };
  fit.w = scores(fit.treated, fit.treated_points);
  fit.w_untreated = scores(fit.untreated, fit.untreated_points);
  fit.pi_star.resize(static_cast<Index>(fit.treated_points.size()));
  for (std::size_t k = 0; k < fit.treated_points.size(); ++k) {
    fit.pi_star[static_cast<Index>(k)] = fit.treated_points[k].pi_star;
  }
  return fit;
}

EmpiricalControlResult np_select(const NpC2gFit& fit, const NpC2gConfig& config, double alpha) {
  return empirical_control(fit.w, fit.w_untreated, config.alpha_grid, alpha);
}

namespace {

EstimandReport report_from_points(const IndexList& rows, const std::vector<NpPointEstimate>& pts,
                                  double pi_floor,
                                  const std::optional<std::vector<bool>>& mask) {
  EstimandReport r;
  r.indices = rows;
  const auto m = static_cast<Index>(pts.size());
  r.care_lo.resize(m);
  r.care_hi.resize(m);
  r.pi.resize(m);
  r.unbounded.resize(pts.size());
  for (Index k = 0; k < m; ++k) {
    const NpPointEstimate& p = pts[static_cast<std::size_t>(k)];
    const CareInterval c = care_interval(p.mut, p.mu0, p.pi_star, pi_floor);
    r.care_lo[k] = c.lo;
    r.care_hi[k] = c.hi;
    r.pi[k] = p.pi_star;
    r.unbounded[static_cast<std::size_t>(k)] = c.unbounded;
  }
  summarize(r, mask);
  return r;
}

// log f0 and log ft at y for sample i under the generator's laws.
double log_law(const ComponentLaw& law, double y) {
  if (law.kind == ComponentLaw::Kind::normal) return log_normal_pdf(y, law.a, law.b);
  const double v = law.pdf(y);
  return v > 0.0 ? std::log(v) : -kInf;
}

void law_span(const ComponentLaw& law, double& lo, double& hi) {
  if (law.kind == ComponentLaw::Kind::normal) {
    lo = std::min(lo, law.a - 60.0 * law.b);
    hi = std::max(hi, law.a + 60.0 * law.b);
  } else {
    lo = std::min(lo, law.a);
    hi = std::max(hi, law.b);
  }
}

}  // namespace

EstimandReport np_estimands(const NpC2gFit& fit, const std::optional<std::vector<bool>>& mask) {
  return report_from_points(fit.treated, fit.treated_points, fit.pi_floor, mask);
}

NpPointEstimate np_oracle_posterior(const GeneratorTruth& truth, const Dataset& ds, Index i,
                                    const Eigen::VectorXd& y_grid) {
  if (!ds.has_truth()) throw ValidationError("np-oracle: dataset carries no generator truth");
  if (i < 0 || i >= ds.n() || i >= truth.n) {
    throw ValidationError("np-oracle: index out of range");
  }
  const auto idx = static_cast<std::size_t>(i);
  const ComponentLaw& null_law = truth.null_law[idx];
  const ComponentLaw& f_h0 = truth.nonresponder_law[idx];
  const ComponentLaw& f_h1 = truth.responder_law[idx];
  for (const ComponentLaw* law : {&null_law, &f_h0, &f_h1}) {
    if (law->kind == ComponentLaw::Kind::unavailable) {
      throw ValidationError("np-oracle: scenario '" + to_string(truth.scenario) +
                            "' has no analytic outcome laws");
    }
  }
  const double pi = truth.pi[i];
  const auto log_ft = [&](double y) {
    const double terms[2] = {std::log1p(-pi) + log_law(f_h0, y), std::log(pi) + log_law(f_h1, y)};
    return log_sum_exp(terms);
  };

  NpPointEstimate p;
  double min_ratio = kInf;
  for (Index j = 0; j < y_grid.size(); ++j) {
    const double l0 = log_law(null_law, y_grid[j]);
    if (l0 == -kInf) continue;
    min_ratio = std::min(min_ratio, std::exp(log_ft(y_grid[j]) - l0));
  }
  if (!std::isfinite(min_ratio)) min_ratio = 1.0;
  p.pi_star = std::clamp(1.0 - min_ratio, 0.0, 1.0);
  const double y = ds.y[i];
  const double lt = log_ft(y);
  if (lt == -kInf) {
    p.w = 1.0;
    p.zero_denominator = true;
  } else {
    p.w = std::clamp((1.0 - p.pi_star) * std::exp(log_law(null_law, y) - lt), 0.0, 1.0);
  }
  p.mu0 = null_law.mean();
  p.mut = (1.0 - pi) * f_h0.mean() + pi * f_h1.mean();
  return p;
}

NpOracle np_oracle(const GeneratorTruth& truth, const Dataset& ds, double pi_floor) {
  NpOracle out;
  out.w.source = ScoreSource::oracle;
  std::vector<NpPointEstimate> pts;
  for (Index i = 0; i < ds.n(); ++i) {
    if (ds.t[i] != 1) continue;
    const auto idx = static_cast<std::size_t>(i);
    double lo = kInf;
    double hi = -kInf;
    for (const ComponentLaw* law :
         {&truth.null_law[idx], &truth.nonresponder_law[idx], &truth.responder_law[idx]}) {
      if (law->kind == ComponentLaw::Kind::unavailable) {
        throw ValidationError("np-oracle: scenario '" + to_string(truth.scenario) +
                              "' has no analytic outcome laws");
      }
      law_span(*law, lo, hi);
    }
    out.w.indices.push_back(i);
    pts.push_back(np_oracle_posterior(truth, ds, i, linspace(lo, hi, 4001)));
  }
  out.w.w.resize(static_cast<Index>(pts.size()));
  for (std::size_t k = 0; k < pts.size(); ++k) out.w.w[static_cast<Index>(k)] = pts[k].w;
  out.estimands = report_from_points(out.w.indices, pts, pi_floor, std::nullopt);
  return out;
}

}  // namespace c2g
