#include "c2g/add_c2g.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "c2g/error.hpp"
#include "c2g/numeric.hpp"
#include "c2g/rng.hpp"

namespace c2g {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& features) {
  Eigen::MatrixXd out(features.rows(), features.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(features.cols()) = features;
  return out;
}

double clamp_pi(double p, double floor, Index* clamped) {
  const double c = std::clamp(p, floor, 1.0 - floor);
  if (clamped != nullptr && c != p) ++*clamped;
  return c;
}

double penalty(const Eigen::VectorXd& coef, double l2) {
  return 0.5 * l2 * coef.tail(coef.size() - 1).squaredNorm();
}

Eigen::VectorXd penalty_grad(const Eigen::VectorXd& coef, double l2) {
  Eigen::VectorXd g = l2 * coef;
  g[0] = 0.0;
  return g;
}

Eigen::LDLT<Eigen::MatrixXd> curvature_bound(const Eigen::MatrixXd& design, double scale,
                                            double l2) {
  const Index p = design.cols();
  Eigen::MatrixXd m = scale * design.transpose() * design;
  for (Index j = 0; j < p; ++j) m(j, j) += (j == 0 ? 0.0 : l2) + 1e-8;
  return Eigen::LDLT<Eigen::MatrixXd>(m);
}

double mixture_variance(const PrDensity& g) {
  const Eigen::VectorXd wm = g.weights.cwiseProduct(g.mixing);
  const double mass = wm.sum();
  const double m1 = wm.dot(g.grid) / mass;
  const double m2 = wm.dot(g.grid.cwiseProduct(g.grid)) / mass;
  return std::max(m2 - m1 * m1, 0.0) + g.kernel_bandwidth * g.kernel_bandwidth;
}

}  // namespace

Eigen::MatrixXd RffLinearModel::design(const Eigen::MatrixXd& x) const {
  return with_intercept(map.features(x));
}

double em_e_step(const TabulatedDensity& g, double mu0, double mu1, double pi, double y,
                 Index* zero_count) {
  const double a = std::log1p(-pi) + g.log_value(y - mu0);
  const double b = std::log(pi) + g.log_value(y - mu1);
  if (!(a > kNegInf) && !(b > kNegInf)) {
    if (zero_count != nullptr) ++*zero_count;
    return 1.0;
  }
  return 1.0 / (1.0 + std::exp(b - a));
}

MStepSolver::MStepSolver(Eigen::MatrixXd design, Eigen::VectorXd y, Eigen::VectorXd mu0,
                         const TabulatedDensity& g, double g_variance,
                         const AddC2gConfig& config)
    : design_(std::move(design)),
      y_(std::move(y)),
      mu0_(std::move(mu0)),
      g_(&g),
      config_(&config),
      pi_bound_(curvature_bound(design_, 0.25, config.pi_l2)),
      tau_bound_(curvature_bound(design_, 1.0 / g_variance, config.mu1_l2)) {}

double MStepSolver::pi_objective(const Eigen::VectorXd& w, const Eigen::VectorXd& coef) const {
  const Eigen::VectorXd eta = design_ * coef;
  double s = 0.0;
  for (Index i = 0; i < eta.size(); ++i) {
    s -= w[i] * softplus(eta[i]) + (1.0 - w[i]) * softplus(-eta[i]);
  }
  return s - penalty(coef, config_->pi_l2);
}

double MStepSolver::tau_objective(const Eigen::VectorXd& w, const Eigen::VectorXd& coef) const {
  const Eigen::VectorXd r = y_ - mu0_ - design_ * coef;
  double s = 0.0;
  for (Index i = 0; i < r.size(); ++i) {
    if (w[i] < 1.0) s += (1.0 - w[i]) * g_->log_value(r[i]);
  }
  return s - penalty(coef, config_->mu1_l2);
}

int MStepSolver::ascend(const Eigen::VectorXd& w, Eigen::VectorXd& coef, bool pi_part) const {
  const auto objective = [&](const Eigen::VectorXd& c) {
    return pi_part ? pi_objective(w, c) : tau_objective(w, c);
  };
  const double n = static_cast<double>(y_.size());
  double current = objective(coef);
  int it = 0;
  for (; it < config_->m_step_max_iter; ++it) {
    Eigen::VectorXd grad;
    if (pi_part) {
      const Eigen::VectorXd eta = design_ * coef;
      Eigen::VectorXd resid(eta.size());
      for (Index i = 0; i < eta.size(); ++i) resid[i] = (1.0 - w[i]) - sigmoid(eta[i]);
      grad = design_.transpose() * resid - penalty_grad(coef, config_->pi_l2);
    } else {
      const Eigen::VectorXd r = y_ - mu0_ - design_ * coef;
      Eigen::VectorXd s(r.size());
      for (Index i = 0; i < r.size(); ++i) s[i] = (1.0 - w[i]) * g_->score(r[i]);
      grad = -(design_.transpose() * s) - penalty_grad(coef, config_->mu1_l2);
    }
    if (grad.cwiseAbs().maxCoeff() <= config_->m_step_tol * std::max(1.0, n)) break;
    const Eigen::VectorXd step = (pi_part ? pi_bound_ : tau_bound_).solve(grad);
    double t = 1.0;
    bool moved = false;
    while (t > 1e-8) {
      Eigen::VectorXd trial = coef + t * step;
      const double value = objective(trial);
      if (value >= current) {
        moved = value > current;
        coef = std::move(trial);
        current = value;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
  }
  return it;
}

MStepResult MStepSolver::solve(const Eigen::VectorXd& w, Eigen::VectorXd& pi_coef,
                               Eigen::VectorXd& tau_coef) const {
  MStepResult out;
  out.pi_iterations = ascend(w, pi_coef, true);
  if ((1.0 - w.array()).sum() <= 1e-12) {
    out.no_responder_mass = true;
    return out;
  }
  out.tau_iterations = ascend(w, tau_coef, false);
  return out;
}

Eigen::VectorXd MStepSolver::e_step(const Eigen::VectorXd& pi_coef,
                                    const Eigen::VectorXd& tau_coef, Index* zero_count,
                                    Index* clamped) const {
  const Eigen::VectorXd eta = design_ * pi_coef;
  const Eigen::VectorXd tau = design_ * tau_coef;
  Eigen::VectorXd w(y_.size());
  for (Index i = 0; i < w.size(); ++i) {
    const double pi = clamp_pi(sigmoid(eta[i]), config_->pi_floor, clamped);
    w[i] = em_e_step(*g_, mu0_[i], mu0_[i] + tau[i], pi, y_[i], zero_count);
  }
  return w;
}

double MStepSolver::log_likelihood(const Eigen::VectorXd& pi_coef,
                                   const Eigen::VectorXd& tau_coef, Index* clamped) const {
  const Eigen::VectorXd eta = design_ * pi_coef;
  const Eigen::VectorXd tau = design_ * tau_coef;
  double s = 0.0;
  for (Index i = 0; i < y_.size(); ++i) {
    const double pi = clamp_pi(sigmoid(eta[i]), config_->pi_floor, clamped);
    const double terms[2] = {std::log1p(-pi) + g_->log_value(y_[i] - mu0_[i]),
                             std::log(pi) + g_->log_value(y_[i] - mu0_[i] - tau[i])};
    s += log_sum_exp(terms);
  }
  return s - penalty(pi_coef, config_->pi_l2) - penalty(tau_coef, config_->mu1_l2);
}

EmDiagnostics run_em(const MStepSolver& solver, const AddC2gConfig& config,
                     Eigen::VectorXd& pi_coef, Eigen::VectorXd& tau_coef, std::uint64_t seed) {
  const Index p = solver.design().cols();
  // The incoming tau intercept is the starting effect size.
  const double spread = tau_coef.size() == p ? tau_coef[0] : 1.0;

  EmDiagnostics best;
  Eigen::VectorXd best_pi;
  Eigen::VectorXd best_tau;
  Rng rng = make_rng(seed, stream::kRestarts);
  std::normal_distribution<double> jitter(0.0, 1.0);
  std::uniform_real_distribution<double> stretch(0.5, 2.0);

  for (int r = 0; r < std::max(1, config.restarts); ++r) {
    Eigen::VectorXd pc = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd tc = Eigen::VectorXd::Zero(p);
    pc[0] = std::log(config.pi_start / (1.0 - config.pi_start));
    tc[0] = spread;
    if (r > 0) {
      pc[0] += jitter(rng);
      tc[0] = spread * stretch(rng);
    }
    EmDiagnostics diag;
    double previous = solver.log_likelihood(pc, tc);
    for (int it = 0; it < config.em_max_iter; ++it) {
      const Eigen::VectorXd w = solver.e_step(pc, tc);
      const MStepResult m = solver.solve(w, pc, tc);
      diag.no_responder_mass = diag.no_responder_mass || m.no_responder_mass;
      const double ll = solver.log_likelihood(pc, tc);
      diag.trace.push_back(ll);
      diag.iterations = it + 1;
      if (std::abs(ll - previous) <= config.em_tol * std::max(1.0, std::abs(previous))) {
        diag.converged = true;
        break;
      }
      previous = ll;
    }
    diag.stalled = diag.trace.size() >= 2 &&
                   diag.trace.back() - diag.trace.front() <=
                       1e-9 * std::max(1.0, std::abs(diag.trace.front()));
    if (r == 0 || diag.trace.back() > best.trace.back()) {
      best = std::move(diag);
      best_pi = pc;
      best_tau = tc;
    }
  }
  pi_coef = std::move(best_pi);
  tau_coef = std::move(best_tau);
  return best;
}

AddC2gFit fit_add_c2g(const Dataset& ds, const AddC2gConfig& config) {
  validate(ds);
  const TreatmentSplit split = split_by_treatment(ds);
  if (split.untreated.size() < 3) {
    throw EstimatorError("add-c2g: need at least 3 untreated samples");
  }
  AddC2gFit fit;
  fit.treated = split.treated;

  // Stage 1: null regression and its leave-one-out residual density.
  const Eigen::MatrixXd x0 = select_rows(ds.x, split.untreated);
  const Eigen::VectorXd y0 = select_rows(ds.y, split.untreated);
  KrrGrid grid = config.krr_grid;
  if (grid.bandwidths.empty() || grid.ridges.empty()) {
    const KrrGrid defaults = default_krr_grid(x0);
    if (grid.bandwidths.empty()) grid.bandwidths = defaults.bandwidths;
    if (grid.ridges.empty()) grid.ridges = defaults.ridges;
  }
  fit.mu0 = tune_krr(x0, y0, grid.bandwidths, grid.ridges);
  const Eigen::VectorXd residuals = y0 - loo_predictions(fit.mu0, y0);
  const std::span<const double> rs = as_span(residuals);
  const std::vector<double> candidates =
      config.pr_bandwidths.empty() ? default_pr_bandwidths(rs) : config.pr_bandwidths;
  PrConfig pr = config.pr;
  pr.seed = derive_seed(config.seed, stream::kPermutations);
  fit.g_hat = predictive_recursion(rs, prml_select_bandwidth(rs, candidates, pr), pr);
  const TabulatedDensity g(fit.g_hat);
  const double g_variance = mixture_variance(fit.g_hat);

  // Stage 2: EM on the treated group.
  const Eigen::MatrixXd x1 = select_rows(ds.x, split.treated);
  const Eigen::VectorXd y1 = select_rows(ds.y, split.treated);
  fit.mu0_treated = fit.mu0.predict(x1);
  const Index m = y1.size();
  const RffMap map = make_rff_map(ds.d(), config.rff_bandwidth_scale * median_heuristic(x1),
                                  config.rff_dim, config.seed);
  const Eigen::MatrixXd design = with_intercept(map.features(x1));
  // The starting effect is the outcome spread of each EM's own training rows.
  const Eigen::VectorXd shifted = y1 - fit.mu0_treated;

  const auto em_on = [&](const IndexList& rows, std::uint64_t seed, Eigen::VectorXd& pc,
                         Eigen::VectorXd& tc) {
    MStepSolver solver(design(rows, Eigen::all), select_rows(y1, rows),
                       select_rows(fit.mu0_treated, rows), g, g_variance, config);
    pc = Eigen::VectorXd::Zero(design.cols());
    tc = Eigen::VectorXd::Zero(design.cols());
    tc[0] = std::max(sample_sd(as_span(Eigen::VectorXd(shifted(rows)))), 1e-6);
    return run_em(solver, config, pc, tc, seed);
  };

  IndexList all(static_cast<std::size_t>(m));
  std::iota(all.begin(), all.end(), Index{0});
  Eigen::VectorXd pc;
  Eigen::VectorXd tc;
  fit.em = em_on(all, config.seed, pc, tc);
  fit.params.pi_logit = {map, pc};
  fit.params.tau = {map, tc};

  // Out-of-fold predictions for the treated population.
  const int k = static_cast<int>(std::min<Index>(config.folds, m));
  fit.fold.assign(static_cast<std::size_t>(m), 0);
  Eigen::VectorXd eta(m);
  Eigen::VectorXd tau(m);
  if (k < 2) {
    eta = design * pc;
    tau = design * tc;
  } else {
    IndexList order = all;
    Rng rng = make_rng(config.seed, stream::kFolds);
    std::shuffle(order.begin(), order.end(), rng);
    for (Index j = 0; j < m; ++j) {
      fit.fold[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])] =
          static_cast<int>(j % k);
    }
    for (int f = 0; f < k; ++f) {
      IndexList train;
      IndexList held;
      for (Index i = 0; i < m; ++i) {
        (fit.fold[static_cast<std::size_t>(i)] == f ? held : train).push_back(i);
      }
      Eigen::VectorXd fpc;
      Eigen::VectorXd ftc;
      fit.fold_em.push_back(em_on(train, derive_seed(config.seed, 100 + f), fpc, ftc));
      const Eigen::MatrixXd dh = design(held, Eigen::all);
      eta(held) = dh * fpc;
      tau(held) = dh * ftc;
    }
  }

  fit.pi_hat.resize(m);
  fit.mu1_hat.resize(m);
  fit.w.indices = fit.treated;
  fit.w.source = ScoreSource::additive;
  fit.w.w.resize(m);
  for (Index i = 0; i < m; ++i) {
    fit.pi_hat[i] = clamp_pi(sigmoid(eta[i]), config.pi_floor, &fit.clamped_pi_count);
    fit.mu1_hat[i] = fit.mu0_treated[i] + tau[i];
    fit.w.w[i] = em_e_step(g, fit.mu0_treated[i], fit.mu1_hat[i], fit.pi_hat[i], y1[i],
                           &fit.zero_density_count);
  }
  return fit;
}

EstimandReport add_c2g_estimands(const AddC2gFit& fit) {
  EstimandReport r;
  r.indices = fit.treated;
  r.care_lo = fit.mu1_hat - fit.mu0_treated;
  r.care_hi = r.care_lo;
  r.pi = fit.pi_hat;
  r.unbounded.assign(fit.treated.size(), false);
  summarize(r);
  return r;
}

}  // namespace c2g
