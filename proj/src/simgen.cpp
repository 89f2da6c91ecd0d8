#include "c2g/simgen.hpp"

#include <cmath>

#include "c2g/error.hpp"
#include "c2g/numeric.hpp"
#include "c2g/rng.hpp"

namespace c2g {

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::additive: return "additive";
    case Scenario::nonadditive: return "nonadditive";
    case Scenario::response: return "response";
    case Scenario::effect: return "effect";
    case Scenario::canonical: return "canonical";
    case Scenario::total: return "total";
  }
  return "unknown";
}

Scenario parse_scenario(const std::string& name) {
  for (Scenario s : {Scenario::additive, Scenario::nonadditive, Scenario::response,
                     Scenario::effect, Scenario::canonical, Scenario::total}) {
    if (to_string(s) == name) return s;
  }
  throw ValidationError("unknown scenario '" + name + "'");
}

double ComponentLaw::pdf(double y) const {
  switch (kind) {
    case Kind::normal: return normal_pdf(y, a, b);
    case Kind::uniform: return (y >= a && y <= b) ? 1.0 / (b - a) : 0.0;
    case Kind::unavailable: break;
  }
  throw ValidationError("component law has no analytic density");
}

double ComponentLaw::mean() const {
  switch (kind) {
    case Kind::normal: return a;
    case Kind::uniform: return 0.5 * (a + b);
    case Kind::unavailable: break;
  }
  throw ValidationError("component law has no analytic mean");
}

bool GeneratorTruth::analytic() const {
  for (const auto* laws : {&null_law, &nonresponder_law, &responder_law}) {
    for (const auto& law : *laws) {
      if (law.kind == ComponentLaw::Kind::unavailable) return false;
    }
  }
  return true;
}

// Coefficient variance 1/d keeps the linear predictors at unit scale.
double coefficient_sd(Index d) { return 1.0 / std::sqrt(static_cast<double>(d)); }

double student_t(Rng& rng, double dof) {
  std::student_t_distribution<double> t(dof);
  return t(rng);
}

namespace {

void check_shape(Index n, Index d) {
  if (n < 2) throw ValidationError("generator: n must be >= 2");
  if (d < 1) throw ValidationError("generator: d must be >= 1");
}

Eigen::VectorXd normal_vector(Rng& rng, Index size, double sd) {
  std::normal_distribution<double> normal(0.0, sd);
  Eigen::VectorXd v(size);
  for (Index i = 0; i < size; ++i) v[i] = normal(rng);
  return v;
}

Eigen::MatrixXd normal_covariates(Rng& rng, Index n, Index d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) x(i, j) = normal(rng);
  }
  return x;
}

GeneratorTruth base_truth(Scenario s, Index n, Index d, double tau, std::uint64_t seed) {
  GeneratorTruth truth;
  truth.scenario = s;
  truth.n = n;
  truth.d = d;
  truth.tau = tau;
  truth.seed = seed;
  truth.pi.resize(n);
  truth.null_law.resize(static_cast<std::size_t>(n));
  truth.nonresponder_law.resize(static_cast<std::size_t>(n));
  truth.responder_law.resize(static_cast<std::size_t>(n));
  return truth;
}

// Shared additive-family draws: beta, gamma, theta, X, and the effect size
// tau * sum_i |x_i| |gamma_i|.
struct AdditiveCore {
  Eigen::MatrixXd x;
  Eigen::VectorXd mu0;
  Eigen::VectorXd mu1;
};

AdditiveCore additive_core(GeneratorTruth& truth, Index n, Index d, double tau, std::uint64_t seed) {
  Rng params = make_rng(seed, stream::kParameters);
  const double sd = coefficient_sd(d);
  truth.beta = normal_vector(params, d, sd);
  truth.gamma = normal_vector(params, d, sd);
  truth.theta = normal_vector(params, d, sd);
  Rng cov = make_rng(seed, stream::kCovariates);
  AdditiveCore core;
  core.x = normal_covariates(cov, n, d);
  core.mu0 = core.x * truth.gamma;
  core.mu1 = core.mu0 + tau * (core.x.cwiseAbs() * truth.gamma.cwiseAbs());
  return core;
}

// Pr(H = 1 | x, T = 1) when U ~ N(0,1) enters T through sigmoid(u) and H
// through sigmoid(beta'x + u). Trapezoid quadrature over u in [-10, 10].
double response_confounded_pi(double linear) {
  constexpr int kPoints = 2001;
  const double lo = -10.0;
  const double step = 20.0 / (kPoints - 1);
  double num = 0.0;
  double den = 0.0;
  for (int j = 0; j < kPoints; ++j) {
    const double u = lo + step * j;
    const double w = (j == 0 || j == kPoints - 1 ? 0.5 : 1.0) * normal_pdf(u, 0.0, 1.0) * sigmoid(u);
    num += w * sigmoid(linear + u);
    den += w;
  }
  return num / den;
}

}  // namespace

Simulation gen_additive(Index n, Index d, double tau, std::uint64_t seed) {
  check_shape(n, d);
  GeneratorTruth truth = base_truth(Scenario::additive, n, d, tau, seed);
  AdditiveCore core = additive_core(truth, n, d, tau, seed);

  Rng treat = make_rng(seed, stream::kTreatment);
  Rng resp = make_rng(seed, stream::kResponse);
  Rng noise = make_rng(seed, stream::kNoise);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> eps(0.0, 1.0);

  Eigen::VectorXd y(n);
  Eigen::VectorXi t(n);
  Eigen::VectorXi h(n);
  for (Index i = 0; i < n; ++i) {
    truth.pi[i] = sigmoid(core.x.row(i).dot(truth.beta));
    t[i] = coin(treat) ? 1 : 0;
    const bool responds = unif(resp) < truth.pi[i];
    h[i] = (t[i] == 1 && responds) ? 1 : 0;
    y[i] = (h[i] ? core.mu1[i] : core.mu0[i]) + eps(noise);
    const auto idx = static_cast<std::size_t>(i);
    truth.null_law[idx] = truth.nonresponder_law[idx] = ComponentLaw::normal(core.mu0[i], 1.0);
    truth.responder_law[idx] = ComponentLaw::normal(core.mu1[i], 1.0);
  }
  return {make_dataset(std::move(core.x), std::move(y), std::move(t), std::move(h)),
          std::move(truth)};
}

Simulation gen_nonadditive(Index n, Index d, double tau, std::uint64_t seed) {
  check_shape(n, d);
  GeneratorTruth truth = base_truth(Scenario::nonadditive, n, d, tau, seed);
  Rng params = make_rng(seed, stream::kParameters);
  const double sd = coefficient_sd(d);
  truth.beta = normal_vector(params, d, sd);
  truth.gamma = normal_vector(params, d, sd);
  truth.theta = normal_vector(params, d, sd);
  std::normal_distribution<double> half(0.0, 2.0);
  truth.c = std::abs(half(params));

  Rng inter = make_rng(seed, stream::kInteractions);
  std::bernoulli_distribution mask(0.1);
  truth.interaction_mask.resize(d, d);
  truth.interaction_weights.resize(d, d);
  for (Index a = 0; a < d; ++a) {
    for (Index b = 0; b < d; ++b) {
      truth.interaction_mask(a, b) = mask(inter) ? 1.0 : 0.0;
      truth.interaction_weights(a, b) = student_t(inter, 3.0);
    }
  }
  const Eigen::MatrixXd quad = truth.interaction_mask.cwiseProduct(truth.interaction_weights);

  Rng cov = make_rng(seed, stream::kCovariates);
  Eigen::MatrixXd x = normal_covariates(cov, n, d);
  Rng treat = make_rng(seed, stream::kTreatment);
  Rng resp = make_rng(seed, stream::kResponse);
  Rng noise = make_rng(seed, stream::kNoise);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> eps(0.0, 1.0);

  Eigen::VectorXd y(n);
  Eigen::VectorXi t(n);
  Eigen::VectorXi h(n);
  for (Index i = 0; i < n; ++i) {
    const Eigen::VectorXd xi = x.row(i).transpose();
    const double w = truth.gamma.dot(xi);
    const double l = xi.dot(quad * xi);
    const double base = truth.c * w + truth.theta.dot(xi) + l;
    truth.pi[i] = sigmoid(truth.beta.dot(xi));
    t[i] = unif(treat) < sigmoid(w) ? 1 : 0;
    const bool responds = unif(resp) < truth.pi[i];
    h[i] = (t[i] == 1 && responds) ? 1 : 0;
    const double m0 = softplus(base);
    const double m1 = softplus(base + tau);
    y[i] = (h[i] ? m1 : m0) + eps(noise);
    const auto idx = static_cast<std::size_t>(i);
    truth.null_law[idx] = truth.nonresponder_law[idx] = ComponentLaw::normal(m0, 1.0);
    truth.responder_law[idx] = ComponentLaw::normal(m1, 1.0);
  }
  return {make_dataset(std::move(x), std::move(y), std::move(t), std::move(h)), std::move(truth)};
}

Simulation gen_confounded(Scenario scenario, Index n, Index d, double tau, std::uint64_t seed) {
  check_shape(n, d);
  if (scenario == Scenario::additive || scenario == Scenario::nonadditive) {
    throw ValidationError("gen_confounded: '" + to_string(scenario) +
                          "' is not a confounding scenario");
  }
  GeneratorTruth truth = base_truth(scenario, n, d, tau, seed);
  AdditiveCore core = additive_core(truth, n, d, tau, seed);

  Rng treat = make_rng(seed, stream::kTreatment);
  Rng resp = make_rng(seed, stream::kResponse);
  Rng noise = make_rng(seed, stream::kNoise);
  Rng latent = make_rng(seed, stream::kLatent);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> std_normal(0.0, 1.0);

  truth.latent.resize(n);
  Eigen::VectorXd y(n);
  Eigen::VectorXi t(n);
  Eigen::VectorXi h(n);
  for (Index i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const double linear = core.x.row(i).dot(truth.beta);
    switch (scenario) {
      case Scenario::response: {
        const double u = std_normal(latent);
        truth.latent[i] = u;
        t[i] = unif(treat) < sigmoid(u) ? 1 : 0;
        const bool responds = unif(resp) < sigmoid(linear + u);
        h[i] = (t[i] == 1 && responds) ? 1 : 0;
        y[i] = (h[i] ? core.mu1[i] : core.mu0[i]) + std_normal(noise);
        truth.pi[i] = response_confounded_pi(linear);
        truth.null_law[idx] = truth.nonresponder_law[idx] = ComponentLaw::normal(core.mu0[i], 1.0);
        truth.responder_law[idx] = ComponentLaw::normal(core.mu1[i], 1.0);
        break;
      }
      case Scenario::effect: {
        const double u = std_normal(latent);
        truth.latent[i] = u;
        t[i] = unif(treat) < 0.5 ? 1 : 0;
        truth.pi[i] = sigmoid(linear);
        const bool responds = unif(resp) < truth.pi[i];
        h[i] = (t[i] == 1 && responds) ? 1 : 0;
        y[i] = (h[i] ? core.mu1[i] : core.mu0[i] + u) + std_normal(noise);
        truth.null_law[idx] = truth.nonresponder_law[idx] =
            ComponentLaw::normal(core.mu0[i], std::sqrt(2.0));
        truth.responder_law[idx] = ComponentLaw::normal(core.mu1[i], 1.0);
        break;
      }
      case Scenario::canonical: {
        // U = 1 forces T = 0 and outcomes on [2, 3]; U = 0 forces T = 1 and
        // outcomes on [0, 1] whatever H is.
        const bool u = unif(latent) < 0.5;
        truth.latent[i] = u ? 1.0 : 0.0;
        t[i] = u ? 0 : 1;
        truth.pi[i] = 0.5;
        h[i] = (t[i] == 1 && unif(resp) < 0.5) ? 1 : 0;
        y[i] = (u ? 2.0 : 0.0) + unif(noise);
        truth.null_law[idx] = ComponentLaw::uniform(2.0, 3.0);
        truth.nonresponder_law[idx] = truth.responder_law[idx] = ComponentLaw::uniform(0.0, 1.0);
        break;
      }
      case Scenario::total: {
        const double u = std_normal(latent);
        truth.latent[i] = u;
        t[i] = unif(treat) < sigmoid(u) ? 1 : 0;
        const bool responds = unif(resp) < sigmoid(linear + u);
        h[i] = (t[i] == 1 && responds) ? 1 : 0;
        y[i] = (h[i] ? core.mu1[i] : core.mu0[i] + u) + std_normal(noise);
        truth.pi[i] = response_confounded_pi(linear);
        // Y | x, T and Y | x, H = 0, T = 1 are non-normal u-mixtures here.
        truth.null_law[idx] = truth.nonresponder_law[idx] = ComponentLaw{};
        truth.responder_law[idx] = ComponentLaw::normal(core.mu1[i], 1.0);
        break;
      }
      default: break;
    }
  }
  return {make_dataset(std::move(core.x), std::move(y), std::move(t), std::move(h)),
          std::move(truth)};
}

Simulation simulate(Scenario scenario, Index n, Index d, double tau, std::uint64_t seed) {
  switch (scenario) {
    case Scenario::additive: return gen_additive(n, d, tau, seed);
    case Scenario::nonadditive: return gen_nonadditive(n, d, tau, seed);
    default: return gen_confounded(scenario, n, d, tau, seed);
  }
}

double true_posterior(const GeneratorTruth& truth, const Dataset& ds, Index i) {
  if (i < 0 || i >= ds.n() || ds.t[i] != 1) {
    throw ValidationError("true_posterior: index " + std::to_string(i) + " is not a treated sample");
  }
  const auto idx = static_cast<std::size_t>(i);
  const auto& f0 = truth.nonresponder_law[idx];
  const auto& f1 = truth.responder_law[idx];
  if (f0.kind == ComponentLaw::Kind::unavailable || f1.kind == ComponentLaw::Kind::unavailable) {
    throw ValidationError("true_posterior: scenario '" + to_string(truth.scenario) +
                          "' has no analytic component densities");
  }
  const double pi = truth.pi[i];
  const double a = (1.0 - pi) * f0.pdf(ds.y[i]);
  const double b = pi * f1.pdf(ds.y[i]);
  if (a + b <= 0.0) return 1.0;
  return a / (a + b);
}

PosteriorScores true_posteriors(const GeneratorTruth& truth, const Dataset& ds) {
  PosteriorScores s;
  s.source = ScoreSource::oracle;
  for (Index i = 0; i < ds.n(); ++i) {
    if (ds.t[i] == 1) s.indices.push_back(i);
  }
  s.w.resize(static_cast<Index>(s.indices.size()));
  for (std::size_t k = 0; k < s.indices.size(); ++k) {
    s.w[static_cast<Index>(k)] = true_posterior(truth, ds, s.indices[k]);
  }
  return s;
}

}  // namespace c2g
