#include "gradphi/sampler.hpp"

#include <doctest.h>

#include <cmath>

using namespace gradphi;

TEST_CASE("chain config validation") {
  ChainConfig cfg;
  cfg.steps = 100;
  cfg.burn_in = 200;
  CHECK_THROWS(cfg.validate());
  cfg.burn_in = 10;
  cfg.step_size = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg.step_size = 0.5;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("identical configs give bit-identical traces") {
  auto q1 = make_cube(2, 1);
  DirichletEnsemble ens(q1, Eigen::Vector2d(0, 0), Potential::logcosh(1.0));
  ChainConfig cfg;
  cfg.steps = 3000;
  cfg.burn_in = 500;
  cfg.seed = 42;
  const auto obs = standard_observables(ens);
  const auto [t1, s1] = mala_chain(ens, cfg, obs);
  const auto [t2, s2] = mala_chain(ens, cfg, obs);
  REQUIRE(t1.length() == t2.length());
  for (size_t o = 0; o < t1.series.size(); ++o)
    for (size_t i = 0; i < t1.series[o].size(); ++i)
      CHECK(t1.series[o][i] == t2.series[o][i]);
  CHECK(s1.acceptance == s2.acceptance);
}

TEST_CASE("blend and neumann chains are deterministic too") {
  auto q1 = make_cube(2, 1);
  auto a = std::make_shared<NeumannTarget>(
      NeumannEnsemble(q1, Eigen::Vector2d(0, 0), Potential::quadratic(1.0)));
  auto b = std::make_shared<NeumannTarget>(
      NeumannEnsemble(q1, Eigen::Vector2d(0, 0), Potential::logcosh(1.0)));
  const BlendTarget blend(a, b, 0.37);
  ChainConfig cfg;
  cfg.steps = 2000;
  cfg.burn_in = 200;
  cfg.seed = 99;
  ObservableSet obs;
  obs.add("l2", [](const Vec& s) { return s.squaredNorm(); });
  const auto [t1, s1] = mala_chain(blend, cfg, obs);
  const auto [t2, s2] = mala_chain(blend, cfg, obs);
  for (size_t i = 0; i < t1.series[0].size(); ++i)
    CHECK(t1.series[0][i] == t2.series[0][i]);
}

TEST_CASE("single free site: chain matches the 1d Gaussian") {
  // Q_1, p = 0, quadratic beta = 1: marginal density ~ exp(-4 phi^2),
  // variance 1/8.
  auto q1 = make_cube(2, 1);
  DirichletEnsemble ens(q1, Eigen::Vector2d(0, 0), Potential::quadratic(1.0));
  const int center = q1->index_of({0, 0, 0});
  ObservableSet obs;
  obs.add("phi", [center](const Vec& s) { return s[center]; });
  obs.add("phi2", [center](const Vec& s) { return s[center] * s[center]; });

  ChainConfig cfg;
  cfg.steps = 120000;
  cfg.burn_in = 5000;
  cfg.seed = 7;
  const auto [trace, stats] = mala_chain(ens, cfg, obs);
  REQUIRE(stats.ok);
  CHECK(stats.acceptance > 0.1);
  CHECK(stats.acceptance < 0.9);
  CHECK(std::abs(stats.mean[0]) < 3 * stats.stderrs[0]);
  CHECK(std::abs(stats.mean[1] - 0.125) < 3 * stats.stderrs[1]);
}

TEST_CASE("neumann chains stay mean-zero") {
  auto q1 = make_cube(2, 1);
  NeumannEnsemble ens(q1, Eigen::Vector2d(1, 0), Potential::logcosh(1.0));
  ObservableSet obs;
  obs.add("mean_abs", [](const Vec& s) { return std::abs(s.sum()); });
  ChainConfig cfg;
  cfg.steps = 5000;
  cfg.burn_in = 500;
  cfg.seed = 3;
  const auto [trace, stats] = mala_chain(ens, cfg, obs);
  for (double v : trace.series[0]) CHECK(v < 1e-9);
}

TEST_CASE("exact dirichlet draws: center-site variance 1/(8 beta)") {
  auto q1 = make_cube(2, 1);
  const double beta = 1.0;
  DirichletEnsemble ens(q1, Eigen::Vector2d(0.5, 0), Potential::quadratic(beta));
  const int center = q1->index_of({0, 0, 0});
  const int count = 40000;
  const auto draws = exact_gaussian_sample(ens, 11, count);
  double mean = 0, m2 = 0;
  for (const auto& d : draws) {
    mean += d[center];
    m2 += d[center] * d[center];
  }
  mean /= count;
  m2 /= count;
  const double var = m2 - mean * mean;
  const double se_mean = std::sqrt(var / count);
  const double se_var = var * std::sqrt(2.0 / (count - 1));
  CHECK(std::abs(mean) < 3 * se_mean);
  CHECK(std::abs(var - 1.0 / (8 * beta)) < 3 * se_var);
}

TEST_CASE("exact neumann draws reproduce the oracle slope mean") {
  auto q2 = make_cube(2, 2);
  const double beta = 1.0;
  const Eigen::Vector2d q(1.0, 0.0);
  NeumannEnsemble ens(q2, q, Potential::quadratic(beta));
  const auto expect = grad_nustar_exact(2, 2, beta, q);

  const int count = 20000;
  const auto draws = exact_gaussian_sample(ens, 13, count);
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Vector2d m2 = Eigen::Vector2d::Zero();
  for (const auto& d : draws) {
    CHECK(std::abs(d.sum()) < 1e-8 * std::max(1.0, d.cwiseAbs().maxCoeff()));
    Eigen::Vector2d s = Eigen::Vector2d::Zero();
    for (int e = 0; e < q2->num_bonds(); ++e) {
      const Bond& b = q2->bonds()[e];
      s[b.axis] += d[b.head] - d[b.tail];
    }
    s /= q2->num_vertices();
    mean += s;
    m2 += s.cwiseProduct(s);
  }
  mean /= count;
  m2 /= count;
  for (int axis = 0; axis < 2; ++axis) {
    const double se =
        std::sqrt((m2[axis] - mean[axis] * mean[axis]) / count);
    CHECK(std::abs(mean[axis] - expect[axis]) < 3 * se);
  }
}

TEST_CASE("diagnostics: iid, AR(1), constant, short") {
  Rng rng(19);
  SUBCASE("iid normal has iact near 1") {
    std::vector<double> xs(200000);
    for (auto& x : xs) x = rng.normal();
    const auto d = diagnostics(xs);
    CHECK(d.defined);
    CHECK(d.iact == doctest::Approx(1.0).epsilon(0.2));
  }
  SUBCASE("AR(1) with rho = 0.9 has iact near 19") {
    std::vector<double> xs(400000);
    double x = 0;
    for (auto& v : xs) {
      x = 0.9 * x + rng.normal();
      v = x;
    }
    const auto d = diagnostics(xs);
    CHECK(d.defined);
    CHECK(d.iact == doctest::Approx(19.0).epsilon(0.25));
  }
  SUBCASE("constant trace is degenerate") {
    std::vector<double> xs(1000, 2.0);
    const auto d = diagnostics(xs);
    CHECK(!d.defined);
    CHECK(d.stderr_batch == 0.0);
  }
  SUBCASE("short trace throws") {
    std::vector<double> xs(50, 1.0);
    CHECK_THROWS(diagnostics(xs));
  }
}

TEST_CASE("MALA agrees with the exact sampler on 20 observables") {
  auto q2 = make_cube(2, 2);
  const double beta = 1.0;
  const Eigen::Vector2d q(1.0, 0.0);
  NeumannEnsemble ens(q2, q, Potential::quadratic(beta));

  ObservableSet obs = standard_observables(ens);
  for (int k = 0; static_cast<int>(obs.fns.size()) < 20; ++k) {
    const int site = (7 * k + 3) % q2->num_vertices();
    obs.add("site2_" + std::to_string(site),
            [site](const Vec& s) { return s[site] * s[site]; });
  }

  ChainConfig cfg;
  cfg.steps = 150000;
  cfg.burn_in = 10000;
  cfg.seed = 5;
  cfg.thin = 2;
  const auto [trace, stats] = mala_chain(ens, cfg, obs);
  REQUIRE(stats.ok);

  const int count = 30000;
  const auto draws = exact_gaussian_sample(ens, 17, count);
  for (int o = 0; o < obs.size(); ++o) {
    double mean = 0, m2 = 0;
    for (const auto& d : draws) {
      const double v = obs.fns[o](d);
      mean += v;
      m2 += v * v;
    }
    mean /= count;
    m2 /= count;
    const double se_exact = std::sqrt((m2 - mean * mean) / count);
    const double comb =
        std::sqrt(se_exact * se_exact + stats.stderrs[o] * stats.stderrs[o]);
    INFO("observable ", obs.names[o]);
    CHECK(std::abs(stats.mean[o] - mean) < 4 * comb);
  }
}

TEST_CASE("pooled chains aggregate deterministically") {
  auto q1 = make_cube(2, 1);
  NeumannEnsemble ens(q1, Eigen::Vector2d(0, 0), Potential::logcosh(1.0));
  ChainConfig cfg;
  cfg.steps = 12000;
  cfg.burn_in = 2000;
  cfg.seed = 23;
  auto make = [&]() -> std::unique_ptr<Target> {
    return std::make_unique<NeumannTarget>(ens);
  };
  Observable grad_sq = [rp = q1.get()](const Vec& s) {
    double acc = 0;
    for (int e = 0; e < rp->num_bonds(); ++e) {
      const Bond& b = rp->bonds()[e];
      const double g = s[b.head] - s[b.tail];
      acc += g * g;
    }
    return acc / rp->num_bonds();
  };
  const auto a = mc_estimate(make, cfg, grad_sq, "grad_sq", 4, 4);
  const auto b = mc_estimate(make, cfg, grad_sq, "grad_sq", 4, 2);
  CHECK(a.value == b.value);  // same chains, any thread count
  CHECK(a.stderr_total == b.stderr_total);
  CHECK(a.ok);
}
