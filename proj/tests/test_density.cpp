#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "c2g/bootstrap.hpp"
#include "c2g/cde.hpp"
#include "c2g/error.hpp"
#include "c2g/numeric.hpp"
#include "c2g/predictive_recursion.hpp"
#include "support.hpp"

using namespace c2g;

namespace {

std::vector<double> normal_draws(std::uint64_t seed, int n, double mean = 0.0, double sd = 1.0) {
  test::Gen gen(seed);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& e : v) e = gen.normal(mean, sd);
  return v;
}

double pr_integral(const PrDensity& g) {
  const double lo = g.grid[0] - 8 * g.kernel_bandwidth;
  const double hi = g.grid[g.grid.size() - 1] + 8 * g.kernel_bandwidth;
  return test::integrate([&](double y) { return g.density(y); }, lo, hi, 40001);
}

}  // namespace

TEST_CASE("predictive recursion normalization") {
  test::Gen gen(1);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> r = normal_draws(100 + rep, 200, gen.uniform(-2, 2), gen.uniform(0.3, 3));
    if (rep % 2 == 1) {
      for (std::size_t i = 0; i < r.size() / 3; ++i) r[i] += 6.0;  // bimodal
    }
    const PrDensity g = predictive_recursion(r, gen.uniform(0.1, 1.0));
    CHECK(g.mixing.minCoeff() >= 0.0);
    CHECK(std::abs(g.mixing_mass() - 1.0) < 1e-6);
    CHECK(std::abs(pr_integral(g) - 1.0) < 1e-6);
  }
}

TEST_CASE("predictive recursion recovers a standard normal") {
  std::vector<double> r = normal_draws(2, 5000);
  PrConfig config;
  config.permutations = 3;
  const PrDensity g = predictive_recursion(r, 0.3, config);
  double ks = 0.0;
  for (double y = -5.0; y <= 5.0; y += 0.01) {
    ks = std::max(ks, std::abs(g.cdf(y) - normal_cdf(y, 0.0, 1.0)));
  }
  CHECK(ks < 0.03);
}

TEST_CASE("predictive recursion is deterministic given its seed") {
  const std::vector<double> r = normal_draws(3, 300);
  PrConfig config;
  config.permutations = 1;
  config.seed = 9;
  const PrDensity a = predictive_recursion(r, 0.4, config);
  const PrDensity b = predictive_recursion(r, 0.4, config);
  CHECK(a.mixing == b.mixing);
  CHECK(a.prml == b.prml);
  CHECK_THROWS_AS(predictive_recursion(std::vector<double>{1.0}, 0.4), ValidationError);
}

TEST_CASE("PRML bandwidth selection") {
  const std::vector<double> r = normal_draws(4, 400);
  CHECK(prml_select_bandwidth(r, {0.7}) == 0.7);
  const std::vector<double> cands{0.05, 0.3, 3.0};
  std::vector<double> prml;
  for (double h : cands) prml.push_back(predictive_recursion(r, h).prml);
  const auto best = std::max_element(prml.begin(), prml.end()) - prml.begin();
  CHECK(prml_select_bandwidth(r, cands) == cands[static_cast<std::size_t>(best)]);
  CHECK(prml_select_bandwidth(r, {0.4, 0.4}) == 0.4);
  // Equal PRML from a duplicated candidate list in either order keeps the smaller one.
  CHECK(prml_select_bandwidth(r, {0.5, 0.3, 0.5, 0.3}) ==
        prml_select_bandwidth(r, {0.3, 0.5}));
}

TEST_CASE("cde_eval examples") {
  SUBCASE("k = 1 is a single normal kernel") {
    test::Gen gen(5);
    const Eigen::MatrixXd x = gen.normal_matrix(30, 2);
    const Eigen::VectorXd y = gen.normal_vector(30);
    const CdeModel m(x, y, {0.7, 0.4, 1});
    const Eigen::VectorXd q = x.row(4).transpose() + Eigen::Vector2d(1e-3, 0.0);
    for (double v : {-1.0, 0.0, 0.3, 2.0}) {
      CHECK(cde_eval(m, q, v) == doctest::Approx(normal_pdf(v, y[4], 0.4)).epsilon(1e-12));
    }
  }
  SUBCASE("k = 2 equidistant neighbors") {
    Eigen::MatrixXd x(3, 1);
    x << 1.0, -1.0, 5.0;
    const Eigen::Vector3d y(0.0, 2.0, 40.0);
    const CdeModel m(x, y, {1.0, 1.0, 2});
    const double expect = 0.5 * normal_pdf(1.0, 0.0, 1.0) + 0.5 * normal_pdf(1.0, 2.0, 1.0);
    CHECK(cde_eval(m, Eigen::VectorXd::Zero(1), 1.0) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(expect == doctest::Approx(0.24197).epsilon(1e-4));
  }
}

TEST_CASE("property: conditional densities are non-negative, normalized and row-order invariant") {
  test::Gen gen(6);
  for (int rep = 0; rep < 10; ++rep) {
    const Index n = gen.integer(5, 60);
    const Index d = gen.integer(1, 4);
    const Eigen::MatrixXd x = gen.normal_matrix(n, d);
    const Eigen::VectorXd y = gen.normal_vector(n, gen.uniform(0.5, 3.0));
    const CdeHyper hyper{gen.uniform(0.2, 2.0), gen.uniform(0.1, 1.0), gen.integer(1, n)};
    const CdeModel m(x, y, hyper);

    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen.rng);
    Eigen::MatrixXd xp(n, d);
    Eigen::VectorXd yp(n);
    for (Index i = 0; i < n; ++i) {
      xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
      yp[i] = y[perm[static_cast<std::size_t>(i)]];
    }
    const CdeModel mp(xp, yp, hyper);

    for (int q = 0; q < 5; ++q) {
      const Eigen::VectorXd query = gen.normal_vector(d);
      const double lo = y.minCoeff() - 8 * hyper.h2;
      const double hi = y.maxCoeff() + 8 * hyper.h2;
      const double mass = test::integrate([&](double v) { return cde_eval(m, query, v); }, lo, hi);
      CHECK(std::abs(mass - 1.0) < 1e-6);
      const double v = gen.normal();
      CHECK(cde_eval(m, query, v) >= 0.0);
      CHECK(cde_eval(mp, query, v) == doctest::Approx(cde_eval(m, query, v)).epsilon(1e-12));
    }
  }
}

TEST_CASE("cde tuning") {
  test::Gen gen(7);
  const Index n = 60;
  const Eigen::MatrixXd x = gen.normal_matrix(n, 2);
  Eigen::VectorXd y = x.col(0) + 0.5 * gen.normal_vector(n);

  SUBCASE("grid of one triple") {
    const CdeModel m = cde_tune(x, y, {{0.5}, {0.3}, {7}});
    CHECK(m.hyper().h1 == 0.5);
    CHECK(m.hyper().h2 == 0.3);
    CHECK(m.hyper().k == 7);
  }
  SUBCASE("tiny outcome bandwidth overfits") {
    const CdeHyper tiny{1.0, 1e-3, 10};
    const CdeHyper moderate{1.0, 0.4, 10};
    CHECK(cde_loo_objective(x, y, tiny) < cde_loo_objective(x, y, moderate));
    const CdeModel m = cde_tune(x, y, {{1.0}, {1e-3, 0.4}, {10}});
    CHECK(m.hyper().h2 == 0.4);
  }
  SUBCASE("leave-one-out objective equals literal refits") {
    const CdeHyper hyper{0.8, 0.35, 9};
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
      Eigen::MatrixXd xi(n - 1, 2);
      Eigen::VectorXd yi(n - 1);
      for (Index j = 0, k = 0; j < n; ++j) {
        if (j == i) continue;
        xi.row(k) = x.row(j);
        yi[k++] = y[j];
      }
      total += std::log(cde_eval(CdeModel(xi, yi, hyper), x.row(i).transpose(), y[i]));
    }
    CHECK(cde_loo_objective(x, y, hyper) == doctest::Approx(total / n).epsilon(1e-10));
  }
  SUBCASE("ties go to the smaller covariate bandwidth") {
    // Both bandwidths make every covariate weight exactly one.
    const CdeGrid grid{{1e10, 1e9}, {0.3}, {5}};
    const std::vector<CdeCandidate> table = cde_loo_table(x, y, grid);
    REQUIRE(table.size() == 2);
    CHECK(table[0].value == table[1].value);
    CHECK(cde_tune(x, y, grid).hyper().h1 == 1e9);
  }
}

TEST_CASE("bootstrap envelopes") {
  test::Gen gen(8);
  const Index n = 80;
  const Eigen::MatrixXd x = gen.normal_matrix(n, 2);
  const Eigen::VectorXd y = x.col(1) + 0.5 * gen.normal_vector(n);
  const CdeModel m(x, y, {0.8, 0.3, 15});
  const Eigen::MatrixXd qx = gen.normal_matrix(40, 2);
  const Eigen::VectorXd qy = qx.col(1) + 0.5 * gen.normal_vector(40);

  SUBCASE("B = 1 gives equal bounds") {
    const DensityEnvelope e = bootstrap_envelopes(m, {1, 0.05, 3}, qx, qy);
    CHECK(e.lower == e.upper);
  }
  SUBCASE("q = 0.5 gives the median") {
    const DensityEnvelope e = bootstrap_envelopes(m, {21, 0.5, 3}, qx, qy);
    CHECK(e.lower == e.upper);
  }
  SUBCASE("lower <= upper and point-estimate coverage") {
    const double q = 0.05;
    const DensityEnvelope e = bootstrap_envelopes(m, {100, q, 4}, qx, qy);
    int covered = 0;
    for (Index i = 0; i < qx.rows(); ++i) {
      CHECK(e.lower[i] <= e.upper[i]);
      const double point = cde_eval(m, qx.row(i).transpose(), qy[i]);
      covered += (e.lower[i] <= point && point <= e.upper[i]) ? 1 : 0;
    }
    CHECK(covered >= static_cast<int>(std::ceil((1 - 2 * q) * qx.rows())));
  }
}

TEST_CASE("property: envelope quantiles match a sort-based reference") {
  test::Gen gen(9);
  for (int rep = 0; rep < 50; ++rep) {
    const Index b = gen.integer(1, 40);
    const Index points = gen.integer(1, 6);
    const double q = gen.uniform(0.01, 0.5);
    Eigen::MatrixXd values(b, points);
    for (Index i = 0; i < b; ++i) {
      for (Index j = 0; j < points; ++j) values(i, j) = gen.coin(0.2) ? 0.25 : gen.uniform();
    }
    const DensityEnvelope e = envelope_from_replicates(values, q);
    for (Index j = 0; j < points; ++j) {
      std::vector<double> col(values.col(j).data(), values.col(j).data() + b);
      std::sort(col.begin(), col.end());
      const auto rank = [&](double level) {
        long r = static_cast<long>(std::ceil(level * static_cast<double>(b) - 1e-9));
        return static_cast<std::size_t>(std::clamp(r, 1L, static_cast<long>(b)) - 1);
      };
      CHECK(e.lower[j] == col[rank(q)]);
      CHECK(e.upper[j] == col[rank(1 - q)]);
      CHECK(e.lower[j] <= e.upper[j]);
    }
  }
}
