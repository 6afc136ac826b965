// Acceptance suite: every quantitative exit criterion, one pass/fail line
// each. Returns the number of failed criteria.

#include "gradphi/io.hpp"
#include "gradphi/verify.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>

using namespace gradphi;

namespace {

int failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

void report(int idx, const std::string& name, bool pass, double seconds,
            const std::string& detail) {
  std::printf("[%s] %2d %-28s (%6.1fs) %s\n", pass ? "PASS" : "FAIL", idx,
              name.c_str(), seconds, detail.c_str());
  if (!pass) ++failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

// 1. GFF rate of convergence at zero tilt.
void criterion_rate() {
  Timer t;
  std::vector<std::pair<int, double>> vals;
  for (int n = 1; n <= 5; ++n)
    vals.push_back({n, nu_exact(2, n, 1.0, Eigen::Vector2d(0, 0))});
  const auto rep = check_convergence_rate(vals, 0.8, 1.2);
  report(1, "gff rate alpha in [0.8,1.2]", rep.pass && t.seconds() < 120,
         t.seconds(),
         fmt("alpha=%.4f limit=%.6f", rep.constants.at("alpha"),
             rep.constants.at("limit")));
}

// 2. Convex duality of the extrapolated limits.
void criterion_duality() {
  Timer t;
  std::vector<GaussianExact> dir, neu;
  std::vector<Eigen::MatrixXd> forms;
  std::vector<double> at_zero;
  for (int n = 1; n <= 5; ++n) {
    dir.emplace_back(make_cube(2, n), 1.0, GaussianExact::Bc::dirichlet);
    neu.emplace_back(make_cube(2, n), 1.0, GaussianExact::Bc::neumann);
    forms.push_back(neu.back().nustar_tilt_form());
    at_zero.push_back(neu.back().nustar(Eigen::Vector2d(0, 0)));
  }
  auto nubar = [&](const Eigen::VectorXd& p) {
    std::vector<std::pair<int, double>> vals;
    for (int n = 1; n <= 5; ++n) vals.push_back({n, dir[n - 1].nu(p)});
    return extrapolate_limit(vals).limit;
  };
  auto nubarstar = [&](const Eigen::VectorXd& q) {
    std::vector<std::pair<int, double>> vals;
    for (int n = 1; n <= 5; ++n)
      vals.push_back({n, q.dot(forms[n - 1] * q) + at_zero[n - 1]});
    return extrapolate_limit(vals).limit;
  };
  const std::vector<Eigen::VectorXd> qs = {
      Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 1)};
  const auto res = check_duality(nubar, nubarstar, qs, 3.0, 1e-3);
  report(2, "gff duality within 1e-3", res.report.pass && t.seconds() < 60,
         t.seconds(),
         fmt("gaps %.2e %.2e %.2e", res.gaps[0], res.gaps[1], res.gaps[2]));
}

// 3. Oracle vs sampler at n = 2, q = (1,0).
void criterion_oracle_sampler() {
  Timer t;
  const Eigen::Vector2d q(1.0, 0.0);
  auto cube = make_cube(2, 2);
  const double beta = 1.0;
  GaussianExact oracle(cube, beta, GaussianExact::Bc::neumann);
  const auto slope_exact = oracle.grad_nustar(q);
  const double var_exact = oracle.slope_variance().trace();
  const double energy_exact = oracle.mean_gradient_energy(q);

  NeumannEnsemble ens(cube, q, Potential::quadratic(beta));
  const Region* rp = cube.get();
  ObservableSet set;
  for (int axis = 0; axis < 2; ++axis) {
    set.add("slope_" + std::to_string(axis), [rp, axis](const Vec& s) {
      double acc = 0;
      for (int e = 0; e < rp->num_bonds(); ++e) {
        const Bond& b = rp->bonds()[e];
        if (b.axis == axis) acc += s[b.head] - s[b.tail];
      }
      return acc / rp->num_vertices();
    });
  }
  set.add("grad_energy", [rp, beta](const Vec& s) {
    double acc = 0;
    for (int e = 0; e < rp->num_bonds(); ++e) {
      const Bond& b = rp->bonds()[e];
      const double g = s[b.head] - s[b.tail];
      acc += beta * g * g;
    }
    return acc / rp->num_vertices();
  });
  ChainConfig cfg;
  cfg.steps = 500000;
  cfg.burn_in = 20000;
  cfg.thin = 2;
  cfg.seed = 333;
  const auto [trace, stats] = mala_chain(ens, cfg, set);

  bool pass = stats.ok;
  std::string why;
  double min_ess = 1e18;
  for (int o = 0; o < 3; ++o) min_ess = std::min(min_ess, stats.ess[o]);
  for (int axis = 0; axis < 2; ++axis) {
    if (std::abs(stats.mean[axis] - slope_exact[axis]) >
        3 * stats.stderrs[axis] + 1e-12)
      pass = false, why += " slope";
  }
  if (std::abs(stats.mean[2] - energy_exact) > 3 * stats.stderrs[2])
    pass = false, why += " energy";

  double var_mc = 0, var_se2 = 0, var_ess = 1e18;
  for (int axis = 0; axis < 2; ++axis) {
    const auto& xs = trace.series[axis];
    std::vector<double> centered(xs.size());
    for (size_t i = 0; i < xs.size(); ++i)
      centered[i] = (xs[i] - stats.mean[axis]) * (xs[i] - stats.mean[axis]);
    const auto dg = diagnostics(centered);
    var_mc += dg.mean;
    var_se2 += dg.stderr_batch * dg.stderr_batch;
    var_ess = std::min(var_ess, dg.ess);
  }
  min_ess = std::min(min_ess, var_ess);
  if (std::abs(var_mc - var_exact) > 3 * std::sqrt(var_se2))
    pass = false, why += " variance";
  if (min_ess < 1000) pass = false, why += " ess";

  report(3, "oracle vs MALA at n=2", pass && t.seconds() < 300, t.seconds(),
         fmt("slope=(%.4f,%.4f) exact=(%.4f,%.4f) ess_min=%.0f%s",
             stats.mean[0], stats.mean[1], slope_exact[0], slope_exact[1],
             min_ess, why.c_str()));
}

// 4. Basic-property suite on the exact tables.
void criterion_property_suite() {
  Timer t;
  const auto tilts = tilt_grid2(-2.0, 2.0, 0.5);
  const auto nu = gff_nu_table(2, 1, 5, 1.0, tilts);
  const auto nustar = gff_nustar_table(2, 1, 5, 1.0, tilts);
  const auto sub = check_subadditivity(nu);
  const auto sub2 = check_subadditivity(nustar);
  const auto osd = check_one_sided_duality(nu, nustar);
  const auto qb = check_quadratic_bounds(nu);
  const auto qb2 = check_quadratic_bounds(nustar);
  const auto uc = check_uniform_convexity(nu);
  const bool pass = sub.pass && sub2.pass && osd.pass && qb.pass && qb2.pass &&
                    uc.pass;
  report(4, "property suite on GFF table", pass && t.seconds() < 120,
         t.seconds(),
         fmt("C_sub=%.3f C_osd=%.3f c=%.3f C_uc=%.3f",
             sub.constants.at("C"), osd.constants.at("C"),
             qb.constants.at("c"), uc.constants.at("C")));
}

// 5. Non-Gaussian thermodynamic integration against brute-force quadrature.
void criterion_ti_validation() {
  Timer t;
  const Potential V = Potential::logcosh(1.0);
  ChainConfig cfg;
  cfg.steps = 200000;
  cfg.burn_in = 20000;
  cfg.seed = 777;
  TiOptions opts;
  opts.nodes = 8;
  opts.refine = false;

  const Eigen::Vector2d p(1.0, 0.0);
  const auto nu_est = nu_estimate(2, 1, p, V, cfg, opts);
  const double nu_oracle = oracles::nu_q1_quadrature(p, V);
  const bool nu_ok =
      std::abs(nu_est.value - nu_oracle) < 3 * nu_est.stderr_total;

  const Eigen::Vector2d q(1.0, 0.0);
  const auto ns_est = nustar_estimate(2, 1, q, V, cfg, opts);
  const auto ns_oracle = oracles::nustar_q1_qmc(q, V);
  const double comb = std::sqrt(ns_est.stderr_total * ns_est.stderr_total +
                                ns_oracle.stderr_total * ns_oracle.stderr_total);
  const bool ns_ok = std::abs(ns_est.value - ns_oracle.value) < 3 * comb;

  report(5, "logcosh TI vs quadrature", nu_ok && ns_ok && t.seconds() < 600,
         t.seconds(),
         fmt("nu %.5f vs %.5f (se %.1e); nu* %.5f vs %.5f (se %.1e)",
             nu_est.value, nu_oracle, nu_est.stderr_total, ns_est.value,
             ns_oracle.value, comb));
}

// 6. Slope-variance contraction.
void criterion_contraction() {
  Timer t;
  const auto exact = gff_slope_variance_series(2, 4, 1.0);
  bool strict = true;
  for (size_t i = 0; i + 1 < exact.values.size(); ++i)
    if (!(exact.values[i] > exact.values[i + 1])) strict = false;
  const auto rep_exact =
      check_slope_variance_contraction(exact, Eigen::Vector2d(0, 0));

  ChainConfig cfg;
  cfg.steps = 600000;
  cfg.burn_in = 40000;
  cfg.thin = 5;
  cfg.seed = 991;
  const Eigen::Vector2d q(1.0, 0.0);
  const auto mc = mc_slope_variance_series(2, 3, q, Potential::logcosh(1.0), cfg);
  const auto rep_mc = check_slope_variance_contraction(mc, q);

  report(6, "slope-variance contraction",
         strict && rep_exact.pass && rep_mc.pass, t.seconds(),
         fmt("gff %.2e>%.2e>%.2e>%.2e; mc %.2e>%.2e>%.2e", exact.values[0],
             exact.values[1], exact.values[2], exact.values[3], mc.values[0],
             mc.values[1], mc.values[2]));
}

// 7. L2 flatness.
void criterion_flatness() {
  Timer t;
  const auto exact_d = gff_flatness_series_dirichlet(2, 4, 1.0);
  const auto rep_d = check_flatness(exact_d);
  bool strict = true;
  for (size_t i = 0; i + 1 < exact_d.values.size(); ++i)
    if (!(exact_d.values[i] > exact_d.values[i + 1])) strict = false;

  ChainConfig cfg;
  cfg.steps = 600000;
  cfg.burn_in = 40000;
  cfg.thin = 5;
  cfg.seed = 992;
  const Eigen::Vector2d q(1.0, 0.0);
  const auto mc = mc_flatness_series_neumann(2, 3, q, Potential::logcosh(1.0), cfg);
  const auto rep_mc = check_flatness(mc);

  report(7, "L2 flatness decreasing", strict && rep_d.pass && rep_mc.pass,
         t.seconds(),
         fmt("gff %.2e..%.2e; mc %.2e>%.2e>%.2e", exact_d.values[0],
             exact_d.values[3], mc.values[0], mc.values[1], mc.values[2]));
}

// 8. Functional inequalities, 1000 fields on Q_3 and Q_4.
void criterion_inequalities() {
  Timer t;
  const auto p3 = check_poincare_suite(2, 3, 1000, 501);
  const auto p4 = check_poincare_suite(2, 4, 1000, 502);
  const auto m3 = check_multiscale_poincare_suite(2, 3, 1000, 503);
  const auto m4 = check_multiscale_poincare_suite(2, 4, 1000, 504);
  const auto s3 = check_sobolev_suite(2, 3, 3.0, 1000, 505);
  const auto s4 = check_sobolev_suite(2, 4, 3.0, 1000, 506);
  const bool pass =
      p3.pass && p4.pass && m3.pass && m4.pass && s3.pass && s4.pass;
  const double c_ms = std::max(m3.constants.at("C"), m4.constants.at("C"));
  const double c_p = std::max(p3.constants.at("C"), p4.constants.at("C"));
  const double c_s = std::max(s3.constants.at("C"), s4.constants.at("C"));
  report(8, "poincare/multiscale/sobolev", pass && t.seconds() < 120,
         t.seconds(),
         fmt("C_poinc=%.3f C_multi=%.3f C_sobolev=%.3f (0 violations)", c_p,
             c_ms, c_s));
}

// 9. Patching operator: determinant, fixed subspace, norms.
void criterion_patching() {
  Timer t;
  const auto ld = check_patching_logdet(2, 1);
  const auto mult = check_patching_multiplicity(2, 2, 1e-8);
  const bool dim_ok = mult.constants.at("verified_dim") >= 3888;
  const auto norms = check_patching_norms(2, 1, 2, 200);
  report(9, "patching operator", ld.pass && mult.pass && dim_ok && norms.pass
                                     && t.seconds() < 600,
         t.seconds(),
         fmt("|lndet|=%.3f fixed=%d/%d C_norm=%.3f",
             std::abs(ld.constants.at("logdet")),
             static_cast<int>(mult.constants.at("verified_dim")),
             static_cast<int>(mult.constants.at("expected_dim")),
             norms.constants.at("C")));
}

// 10. Appendix block integral bound.
void criterion_block_integral() {
  Timer t;
  const auto rep = check_block_integral_bound(2, 0.5, {{1, 2}, {1, 3}, {2, 3}});
  report(10, "block integral bound", rep.pass && t.seconds() < 60, t.seconds(),
         fmt("C=%.4f", rep.constants.at("C")));
}

// 11. Variational formula.
void criterion_variational() {
  Timer t;
  ScalarFunctionSpec spec;
  spec.dim = 1;
  spec.f = [](const Eigen::VectorXd& x) { return x[0] * x[0]; };
  const auto rep = check_variational_formula_lowdim(spec, 20);
  report(11, "variational formula", rep.pass && t.seconds() < 10, t.seconds(),
         fmt("gap=%.2e competitors_excess>=%.3f",
             std::abs(rep.constants.at("free_energy") -
                      rep.constants.at("gibbs_functional")),
             rep.constants.at("min_competitor_excess")));
}

// 12. Appendix regularity estimates.
void criterion_regularity() {
  Timer t;
  const std::vector<BallSpec> balls = {
      {{0, 0, 0}, 2},   {{3, 2, 0}, 2},  {{-4, 1, 0}, 2}, {{2, -5, 0}, 2},
      {{-3, -3, 0}, 2}, {{5, 5, 0}, 2},  {{0, 4, 0}, 3},  {{-2, 3, 0}, 3},
      {{4, -2, 0}, 3},  {{-5, -1, 0}, 3}};
  const Eigen::Vector2d q(1.0, 0.0);
  const auto cac = check_caccioppoli_quadratic(2, 3, 1.0, q, balls);
  const auto rh = check_reverse_holder_quadratic(2, 3, 1.0, q, balls);
  const auto my = check_meyers_quadratic(2, 3, 1.0, q, 0.75, 0.1);

  ChainConfig cfg;
  cfg.steps = 700000;
  cfg.burn_in = 50000;
  cfg.thin = 7;
  cfg.seed = 443;
  const auto est =
      mc_edge_second_moments(2, 3, q, Potential::logcosh(1.0), cfg, balls);
  const auto cac_mc = check_caccioppoli_mc(est, 2, 3, balls);
  const auto rh_mc = check_reverse_holder_mc(est, 2, 3, balls);
  const auto my_mc = check_meyers_mc(est, 2, 3, 0.75, 0.1);

  const bool pass = cac.pass && rh.pass && my.pass && cac_mc.pass &&
                    rh_mc.pass && my_mc.pass && !cac_mc.inconclusive &&
                    !my_mc.inconclusive;
  report(12, "caccioppoli/holder/meyers", pass && t.seconds() < 900,
         t.seconds(),
         fmt("C_cac=%.3f C_rh=%.3f C_meyers=%.3f (mc: %.3f %.3f %.3f)",
             cac.constants.at("C"), rh.constants.at("C"),
             my.constants.at("C"), cac_mc.constants.at("C"),
             rh_mc.constants.at("C"), my_mc.constants.at("C")));
}

}  // namespace

int main() {
  Timer total;
  criterion_rate();
  criterion_duality();
  criterion_oracle_sampler();
  criterion_property_suite();
  criterion_ti_validation();
  criterion_contraction();
  criterion_flatness();
  criterion_inequalities();
  criterion_patching();
  criterion_block_integral();
  criterion_variational();
  criterion_regularity();
  std::printf("acceptance: %d/12 criteria passed (%.1fs total)\n",
              12 - failures, total.seconds());
  return failures;
}
