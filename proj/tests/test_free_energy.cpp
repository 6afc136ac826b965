#include "gradphi/free_energy.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace gradphi;

namespace {

ChainConfig quick_cfg(std::uint64_t seed, long steps = 60000) {
  ChainConfig cfg;
  cfg.steps = steps;
  cfg.burn_in = steps / 10;
  cfg.seed = seed;
  cfg.step_size = 0.3;
  return cfg;
}

}  // namespace

TEST_CASE("grad_nu_mc: quadratic mean and symmetry") {
  // On Q_1 with a quadratic potential the integrand is deterministic (the
  // odd part cancels), so these checks carry an absolute roundoff floor.
  const double atol = 1e-9;
  const Potential V = Potential::quadratic(1.0);
  SUBCASE("tilt derivative carries the bond-count factor") {
    const auto [g, se] = grad_nu_mc(2, 1, Eigen::Vector2d(1, 0), V,
                                    quick_cfg(101));
    // 2 beta p (3^n - 1)/3^n with the cross term averaging to zero
    CHECK(std::abs(g[0] - 4.0 / 3.0) < 3 * se[0] + atol);
    CHECK(std::abs(g[1]) < 3 * se[1] + atol);
  }
  SUBCASE("zero tilt, even potential: zero gradient") {
    const auto [g, se] = grad_nu_mc(2, 1, Eigen::Vector2d(0, 0),
                                    Potential::logcosh(1.0), quick_cfg(102));
    CHECK(std::abs(g[0]) < 3 * se[0] + atol);
    CHECK(std::abs(g[1]) < 3 * se[1] + atol);
  }
  SUBCASE("matches finite differences of the exact oracle") {
    const Eigen::Vector2d p(0.7, -0.4);
    const auto [g, se] = grad_nu_mc(2, 1, p, V, quick_cfg(103));
    const double h = 1e-3;
    for (int axis = 0; axis < 2; ++axis) {
      Eigen::Vector2d up = p, dn = p;
      up[axis] += h;
      dn[axis] -= h;
      const double fd =
          (nu_exact(2, 1, 1.0, up) - nu_exact(2, 1, 1.0, dn)) / (2 * h);
      CHECK(std::abs(g[axis] - fd) < 3 * se[axis] + atol);
    }
  }
}

TEST_CASE("grad_nustar_mc agrees with the oracle") {
  const Potential V = Potential::quadratic(1.0);
  const Eigen::Vector2d q(1.0, 0.0);
  const auto [g, se] = grad_nustar_mc(2, 1, q, V, quick_cfg(104, 120000));
  const auto exact = grad_nustar_exact(2, 1, 1.0, q);
  for (int axis = 0; axis < 2; ++axis)
    CHECK(std::abs(g[axis] - exact[axis]) < 3 * se[axis] + 1e-9);

  const auto [g0, se0] = grad_nustar_mc(2, 1, Eigen::Vector2d(0, 0),
                                        Potential::logcosh(1.0),
                                        quick_cfg(105));
  CHECK(std::abs(g0[0]) < 3 * se0[0]);
  CHECK(std::abs(g0[1]) < 3 * se0[1]);
}

TEST_CASE("nu_estimate: quadratic anchor and tilt path") {
  const Potential V = Potential::quadratic(1.0);
  SUBCASE("pure anchor is exact") {
    const auto est =
        nu_estimate(2, 1, Eigen::Vector2d(0, 0), V, quick_cfg(106));
    CHECK(est.method == "exact-oracle");
    CHECK(est.stderr_total == 0.0);
    CHECK(est.value ==
          doctest::Approx(nu_exact(2, 1, 1.0, Eigen::Vector2d(0, 0))));
  }
  SUBCASE("tilt path reproduces the oracle") {
    const Eigen::Vector2d p(1.0, 0.0);
    TiOptions opts;
    opts.refine = false;
    const auto est = nu_estimate(2, 1, p, V, quick_cfg(107), opts);
    CHECK(est.method == "gradient-path");
    CHECK(std::abs(est.value - nu_exact(2, 1, 1.0, p)) <
          3 * est.stderr_total + 1e-9);
  }
}

TEST_CASE("gradient-path differences match oracle differences at two tilts") {
  const Potential V = Potential::quadratic(1.0);
  TiOptions opts;
  opts.refine = false;
  for (auto pv : {Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 1)}) {
    const auto est = nu_estimate(2, 1, pv, V, quick_cfg(113), opts);
    const double exact_diff = nu_exact(2, 1, 1.0, pv) -
                              nu_exact(2, 1, 1.0, Eigen::Vector2d(0, 0));
    const double est_diff =
        est.value - nu_exact(2, 1, 1.0, Eigen::Vector2d(0, 0));
    CHECK(std::abs(est_diff - exact_diff) < 3 * est.stderr_total + 1e-9);
  }
}

TEST_CASE("nustar estimates are midpoint convex in q") {
  const Potential V = Potential::quadratic(1.0);
  TiOptions opts;
  opts.refine = false;
  ChainConfig cfg = quick_cfg(114, 80000);
  const Eigen::Vector2d q(1.0, 0.0);
  const auto v0 = nustar_estimate(2, 1, Eigen::Vector2d(0, 0), V, cfg, opts);
  const auto vh = nustar_estimate(2, 1, Eigen::Vector2d(0.5, 0), V, cfg, opts);
  const auto v1 = nustar_estimate(2, 1, q, V, cfg, opts);
  const double gap = 0.5 * v0.value + 0.5 * v1.value - vh.value;
  const double slack =
      3 * std::sqrt(0.25 * v0.stderr_total * v0.stderr_total +
                    0.25 * v1.stderr_total * v1.stderr_total +
                    vh.stderr_total * vh.stderr_total);
  CHECK(gap > -slack - 1e-9);
}

TEST_CASE("nu_estimate: logcosh vs one-dimensional quadrature") {
  const Potential V = Potential::logcosh(1.0);
  TiOptions opts;
  opts.refine = false;
  SUBCASE("zero tilt") {
    const auto est =
        nu_estimate(2, 1, Eigen::Vector2d(0, 0), V, quick_cfg(108, 100000), opts);
    const double oracle =
        oracles::nu_q1_quadrature(Eigen::Vector2d(0, 0), V);
    CHECK(std::abs(est.value - oracle) < 3 * est.stderr_total);
  }
  SUBCASE("tilted") {
    const auto est =
        nu_estimate(2, 1, Eigen::Vector2d(1, 0), V, quick_cfg(109, 100000), opts);
    const double oracle =
        oracles::nu_q1_quadrature(Eigen::Vector2d(1, 0), V);
    CHECK(std::abs(est.value - oracle) < 3 * est.stderr_total);
  }
}

TEST_CASE("nustar_estimate: quadratic oracle and logcosh QMC oracle") {
  SUBCASE("quadratic anchor") {
    const auto est = nustar_estimate(2, 1, Eigen::Vector2d(0, 0),
                                     Potential::quadratic(1.0), quick_cfg(110));
    CHECK(est.stderr_total == 0.0);
    CHECK(est.value ==
          doctest::Approx(nustar_exact(2, 1, 1.0, Eigen::Vector2d(0, 0))));
  }
  SUBCASE("logcosh against randomized Halton quadrature") {
    const Potential V = Potential::logcosh(1.0);
    const Eigen::Vector2d q(1.0, 0.0);
    TiOptions opts;
    opts.refine = false;
    const auto est = nustar_estimate(2, 1, q, V, quick_cfg(111, 120000), opts);
    const auto oracle = oracles::nustar_q1_qmc(q, V);
    const double comb = std::sqrt(est.stderr_total * est.stderr_total +
                                  oracle.stderr_total * oracle.stderr_total);
    CHECK(std::abs(est.value - oracle.value) < 3 * comb);
  }
}

TEST_CASE("defects: differences, quadrature errors, level gaps") {
  auto mk = [](int n, double v, double s) {
    SurfaceTensionEstimate e;
    e.n = n;
    e.value = v;
    e.stderr_total = s;
    e.tilt = Eigen::Vector2d(0, 0);
    return e;
  };
  SUBCASE("identical values give zero defect") {
    const auto ds = defects({mk(1, 2.0, 0.1), mk(2, 2.0, 0.2)});
    REQUIRE(ds.size() == 1);
    CHECK(ds[0].tau == 0.0);
    CHECK(ds[0].stderr_total ==
          doctest::Approx(std::sqrt(0.01 + 0.04)).epsilon(1e-12));
  }
  SUBCASE("level gaps are rejected") {
    CHECK_THROWS(defects({mk(1, 1.0, 0), mk(3, 0.5, 0)}));
  }
  SUBCASE("GFF defects respect the subadditivity direction") {
    std::vector<SurfaceTensionEstimate> table;
    const Eigen::Vector2d p(1.0, 0.0);
    for (int n = 1; n <= 4; ++n)
      table.push_back(mk(n, nu_exact(2, n, 1.0, p), 0.0));
    for (const auto& def : defects(table))
      CHECK(def.tau > -(1 + p.squaredNorm()) * std::pow(3.0, -def.n));
  }
}

TEST_CASE("uniform-increment bound: closed form on Q_1") {
  // 4 one-interior bonds and 8 frozen bonds:
  // (1/9) beta [6 |p|^2 + 4/3].
  const double beta = 1.3;
  const Eigen::Vector2d p(0.8, -0.5);
  const double expect = beta * (6 * p.squaredNorm() + 4.0 / 3.0) / 9.0;
  CHECK(uniform_increment_energy(Region::cube(2, 1), p,
                                 Potential::quadratic(beta)) ==
        doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("quadratic upper bound check on cubes and the annulus") {
  ChainConfig cfg = quick_cfg(112, 40000);
  SUBCASE("quadratic on Q_1: oracle below the bound") {
    auto rep = quadratic_upper_bound_check(make_cube(2, 1),
                                           Eigen::Vector2d(1, 0),
                                           Potential::quadratic(1.0), cfg);
    CHECK(rep.pass);
    CHECK(rep.nu_estimate < rep.bound);
    CHECK(rep.nu_stderr == 0.0);
  }
  SUBCASE("p = 0 reduces the bound to a constant") {
    auto rep = quadratic_upper_bound_check(make_cube(2, 1),
                                           Eigen::Vector2d(0, 0),
                                           Potential::quadratic(1.0), cfg);
    CHECK(rep.fitted_c == doctest::Approx(rep.bound));
    CHECK(rep.pass);
  }
  SUBCASE("cube difference with logcosh") {
    auto annulus = std::make_shared<Region>(
        Region::difference(Region::cube(2, 2), Region::cube(2, 1)));
    TiOptions opts;
    opts.nodes = 4;
    opts.refine = false;
    auto rep = quadratic_upper_bound_check(annulus, Eigen::Vector2d(1, 1),
                                           Potential::logcosh(1.0), cfg, opts);
    CHECK(rep.pass);
    CHECK(std::isfinite(rep.fitted_c));
  }
}
