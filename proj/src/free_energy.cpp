#include "gradphi/free_energy.hpp"

#include "gradphi/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gradphi {

namespace {

ObservableSet grad_nu_observables(const Region& r, const Eigen::VectorXd& p,
                                  const Potential& V) {
  ObservableSet set;
  const Region* rp = &r;
  for (int axis = 0; axis < r.d(); ++axis) {
    set.add("dnu_dp" + std::to_string(axis), [rp, p, V, axis](const Vec& s) {
      double acc = 0;
      for (int e = 0; e < rp->num_bonds(); ++e) {
        const Bond& b = rp->bonds()[e];
        if (b.axis != axis) continue;
        acc += V.deriv(p[b.axis] + s[b.head] - s[b.tail]);
      }
      return acc / rp->num_vertices();
    });
  }
  return set;
}

ObservableSet slope_observables(const Region& r) {
  ObservableSet set;
  const Region* rp = &r;
  for (int axis = 0; axis < r.d(); ++axis) {
    set.add("slope_" + std::to_string(axis), [rp, axis](const Vec& s) {
      double acc = 0;
      for (int e = 0; e < rp->num_bonds(); ++e) {
        const Bond& b = rp->bonds()[e];
        if (b.axis == axis) acc += s[b.head] - s[b.tail];
      }
      return acc / rp->num_vertices();
    });
  }
  return set;
}

struct LegResult {
  double value = 0;
  double stderr_mc = 0;    // quadrature-weighted chain errors
  double discrepancy = 0;  // Gauss vs trapezoid on the same nodes
  bool ok = true;
  std::string flag;
};

// Integrate a node-sampled function over [0, 1] with Gauss-Legendre weights;
// a piecewise-linear pass over the same nodes feeds the discrepancy term.
LegResult integrate_leg(
    const std::function<std::pair<double, double>(double)>& estimate_at,
    int nodes) {
  const auto [xs, ws] = gauss_legendre01(nodes);
  std::vector<double> vals(nodes), errs(nodes);
  LegResult leg;
  for (int k = 0; k < nodes; ++k) {
    const auto [v, s] = estimate_at(xs[k]);
    vals[k] = v;
    errs[k] = s;
  }
  double sum = 0, var = 0;
  for (int k = 0; k < nodes; ++k) {
    sum += ws[k] * vals[k];
    var += ws[k] * ws[k] * errs[k] * errs[k];
  }
  leg.value = sum;
  leg.stderr_mc = std::sqrt(var);

  double trap = vals[0] * xs[0];
  for (int k = 0; k + 1 < nodes; ++k)
    trap += 0.5 * (vals[k] + vals[k + 1]) * (xs[k + 1] - xs[k]);
  trap += vals[nodes - 1] * (1.0 - xs[nodes - 1]);
  leg.discrepancy = std::abs(trap - sum);
  return leg;
}

std::uint64_t node_seed(std::uint64_t base, int leg, int node) {
  return Rng(base, 1000 * (leg + 1) + node).next_u64();
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::VectorXd> grad_nu_mc(
    int d, int n, const Eigen::VectorXd& p, const Potential& potential,
    const ChainConfig& cfg) {
  auto cube = make_cube(d, n);
  DirichletEnsemble ens(cube, p, potential);
  const auto obs = grad_nu_observables(*cube, p, potential);
  const auto [trace, stats] = mala_chain(ens, cfg, obs);
  if (!stats.ok) throw std::runtime_error("grad_nu_mc: " + stats.flag);
  Eigen::VectorXd g(d), s(d);
  for (int axis = 0; axis < d; ++axis) {
    g[axis] = stats.mean[axis];
    s[axis] = stats.stderrs[axis];
  }
  return {g, s};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> grad_nustar_mc(
    int d, int n, const Eigen::VectorXd& q, const Potential& potential,
    const ChainConfig& cfg) {
  auto cube = make_cube(d, n);
  NeumannEnsemble ens(cube, q, potential);
  const auto obs = slope_observables(*cube);
  const auto [trace, stats] = mala_chain(ens, cfg, obs);
  if (!stats.ok) throw std::runtime_error("grad_nustar_mc: " + stats.flag);
  Eigen::VectorXd g(d), s(d);
  for (int axis = 0; axis < d; ++axis) {
    g[axis] = stats.mean[axis];
    s[axis] = stats.stderrs[axis];
  }
  return {g, s};
}

namespace {

// One full TI evaluation at a fixed node count.
SurfaceTensionEstimate estimate_with_nodes(bool dual, int d, int n,
                                           const Eigen::VectorXd& tilt,
                                           const Potential& V,
                                           const ChainConfig& cfg, int nodes) {
  SurfaceTensionEstimate est;
  est.quantity = dual ? "nustar" : "nu";
  est.d = d;
  est.n = n;
  est.tilt = tilt;
  est.seed = cfg.seed;
  est.nodes = nodes;

  auto cube = make_cube(d, n);
  const double beta_ref = V.second_deriv(0.0) / 2.0;
  const Potential ref = Potential::quadratic(beta_ref);
  GaussianExact anchor(cube, beta_ref,
                       dual ? GaussianExact::Bc::neumann
                            : GaussianExact::Bc::dirichlet);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
  const double anchor_value = dual ? anchor.nustar(zero) : anchor.nu(zero);
  const double vol = cube->num_vertices();

  double value = anchor_value;
  double var_mc = 0, disc = 0;
  bool ok = true;
  std::string flag;

  const bool is_reference =
      V.kind() == PotentialKind::quadratic && V.beta() == beta_ref;

  // Coupling leg: d/dt of the free energy along (1-t) H_ref + t H_V at zero
  // tilt; identically zero when V is the reference.
  if (!is_reference) {
    auto delta_h = [&](const Vec& s) {
      CompensatedSum acc;
      for (int e = 0; e < cube->num_bonds(); ++e) {
        const Bond& b = cube->bonds()[e];
        const double g = s[b.head] - s[b.tail];
        acc.add(V.eval(g) - ref.eval(g));
      }
      return acc.value() / vol;
    };
    auto estimate_at = [&](double t) -> std::pair<double, double> {
      ChainConfig node_cfg = cfg;
      node_cfg.seed = node_seed(cfg.seed, 0, static_cast<int>(t * 1e6));
      ObservableSet set;
      set.add("delta_h", delta_h);
      std::shared_ptr<Target> a, b;
      if (dual) {
        a = std::make_shared<NeumannTarget>(NeumannEnsemble(cube, zero, ref));
        b = std::make_shared<NeumannTarget>(NeumannEnsemble(cube, zero, V));
      } else {
        a = std::make_shared<DirichletTarget>(
            DirichletEnsemble(cube, zero, ref));
        b = std::make_shared<DirichletTarget>(DirichletEnsemble(cube, zero, V));
      }
      const BlendTarget blend(a, b, t);
      const auto [trace, stats] = mala_chain(blend, node_cfg, set);
      if (!stats.ok) {
        ok = false;
        flag = stats.flag;
      }
      return {stats.mean[0], stats.stderrs[0]};
    };
    const LegResult leg = integrate_leg(estimate_at, nodes);
    // nu is a negative log, nustar a log: the energy derivative enters with
    // opposite signs.
    value += dual ? -leg.value : leg.value;
    var_mc += leg.stderr_mc * leg.stderr_mc;
    disc += leg.discrepancy;
  }

  // Tilt leg: int_0^1 tilt . grad(s tilt) ds.
  if (!tilt.isZero()) {
    auto estimate_at = [&](double s) -> std::pair<double, double> {
      ChainConfig node_cfg = cfg;
      node_cfg.seed = node_seed(cfg.seed, 1, static_cast<int>(s * 1e6));
      const Eigen::VectorXd st = s * tilt;
      const auto [g, se] = dual ? grad_nustar_mc(d, n, st, V, node_cfg)
                                : grad_nu_mc(d, n, st, V, node_cfg);
      double err = 0;
      for (int i = 0; i < d; ++i) err += tilt[i] * tilt[i] * se[i] * se[i];
      return {tilt.dot(g), std::sqrt(err)};
    };
    const LegResult leg = integrate_leg(estimate_at, nodes);
    value += leg.value;
    var_mc += leg.stderr_mc * leg.stderr_mc;
    disc += leg.discrepancy;
  }

  est.value = value;
  est.stderr_total = std::sqrt(var_mc) + disc;
  est.ok = ok;
  est.flag = flag;
  const bool pure_anchor = tilt.isZero() && is_reference;
  est.method = pure_anchor ? "exact-oracle"
                           : (tilt.isZero() ? "reference-TI" : "gradient-path");
  if (pure_anchor) est.stderr_total = 0;
  return est;
}

SurfaceTensionEstimate refine_nodes(bool dual, int d, int n,
                                    const Eigen::VectorXd& tilt,
                                    const Potential& potential,
                                    const ChainConfig& cfg,
                                    const TiOptions& opts) {
  SurfaceTensionEstimate est =
      estimate_with_nodes(dual, d, n, tilt, potential, cfg, opts.nodes);
  if (!opts.refine || est.method == "exact-oracle") return est;
  int nodes = opts.nodes;
  while (2 * nodes <= opts.max_nodes) {
    SurfaceTensionEstimate fine =
        estimate_with_nodes(dual, d, n, tilt, potential, cfg, 2 * nodes);
    const double gap = std::abs(fine.value - est.value);
    const double scale = std::max(fine.stderr_total, est.stderr_total);
    est = fine;
    nodes *= 2;
    if (gap < std::max(scale, 1e-12)) return est;
  }
  est.flag = "node doubling did not stabilize";
  return est;
}

}  // namespace

SurfaceTensionEstimate nu_estimate(int d, int n, const Eigen::VectorXd& p,
                                   const Potential& potential,
                                   const ChainConfig& cfg,
                                   const TiOptions& opts) {
  return refine_nodes(false, d, n, p, potential, cfg, opts);
}

SurfaceTensionEstimate nustar_estimate(int d, int n, const Eigen::VectorXd& q,
                                       const Potential& potential,
                                       const ChainConfig& cfg,
                                       const TiOptions& opts) {
  return refine_nodes(true, d, n, q, potential, cfg, opts);
}

std::vector<Defect> defects(const std::vector<SurfaceTensionEstimate>& table) {
  std::vector<SurfaceTensionEstimate> sorted = table;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.n < b.n; });
  std::vector<Defect> out;
  for (size_t i = 0; i + 1 < sorted.size(); ++i) {
    if (sorted[i + 1].n != sorted[i].n + 1)
      throw std::invalid_argument("defects need consecutive levels");
    Defect d;
    d.n = sorted[i].n;
    d.tilt = sorted[i].tilt;
    d.tau = sorted[i].value - sorted[i + 1].value;
    d.stderr_total =
        std::sqrt(sorted[i].stderr_total * sorted[i].stderr_total +
                  sorted[i + 1].stderr_total * sorted[i + 1].stderr_total);
    out.push_back(std::move(d));
  }
  return out;
}

double uniform_increment_energy(const Region& region,
                                const Eigen::VectorXd& p,
                                const Potential& potential) {
  // Bond classes by the number of interior endpoints; boundary vertices
  // carry X = 0, interior vertices i.i.d. uniform [0, 1].
  auto both_interior = [&](double pe) {
    // increment density is triangular on [-1, 1]
    return integrate_simpson(
        [&](double w) { return potential.eval(pe + w) * (1.0 - std::abs(w)); },
        -1.0, 1.0, 1e-12);
  };
  auto one_interior = [&](double pe, double sign) {
    return integrate_simpson(
        [&](double u) { return potential.eval(pe + sign * u); }, 0.0, 1.0,
        1e-12);
  };
  CompensatedSum acc;
  for (int e = 0; e < region.num_bonds(); ++e) {
    const Bond& b = region.bonds()[e];
    const bool ti = !region.is_boundary(b.tail);
    const bool hi = !region.is_boundary(b.head);
    const double pe = p[b.axis];
    if (ti && hi)
      acc.add(both_interior(pe));
    else if (hi)
      acc.add(one_interior(pe, +1.0));
    else if (ti)
      acc.add(one_interior(pe, -1.0));
    else
      acc.add(potential.eval(pe));
  }
  return acc.value() / region.num_vertices();
}

UpperBoundReport quadratic_upper_bound_check(RegionPtr region,
                                             const Eigen::VectorXd& p,
                                             const Potential& potential,
                                             const ChainConfig& cfg,
                                             const TiOptions& opts) {
  UpperBoundReport rep;
  rep.bound = uniform_increment_energy(*region, p, potential);
  rep.fitted_c = rep.bound / (1.0 + p.squaredNorm());

  const double beta_ref = potential.second_deriv(0.0) / 2.0;
  GaussianExact anchor(region, beta_ref, GaussianExact::Bc::dirichlet);
  if (potential.kind() == PotentialKind::quadratic) {
    rep.nu_estimate = anchor.nu(p);
    rep.nu_stderr = 0;
  } else {
    // TI on the region at fixed tilt p, anchored at its own Gaussian value.
    const Potential ref = Potential::quadratic(beta_ref);
    const double vol = region->num_vertices();
    auto delta_h = [&](const Vec& s) {
      CompensatedSum acc;
      for (int e = 0; e < region->num_bonds(); ++e) {
        const Bond& b = region->bonds()[e];
        const double g = p[b.axis] + s[b.head] - s[b.tail];
        acc.add(potential.eval(g) - ref.eval(g));
      }
      return acc.value() / vol;
    };
    auto estimate_at = [&](double t) -> std::pair<double, double> {
      ChainConfig node_cfg = cfg;
      node_cfg.seed = node_seed(cfg.seed, 2, static_cast<int>(t * 1e6));
      ObservableSet set;
      set.add("delta_h", delta_h);
      auto a =
          std::make_shared<DirichletTarget>(DirichletEnsemble(region, p, ref));
      auto b = std::make_shared<DirichletTarget>(
          DirichletEnsemble(region, p, potential));
      const BlendTarget blend(a, b, t);
      const auto [trace, stats] = mala_chain(blend, node_cfg, set);
      return {stats.mean[0], stats.stderrs[0]};
    };
    const LegResult leg = integrate_leg(estimate_at, opts.nodes);
    rep.nu_estimate = anchor.nu(p) + leg.value;
    rep.nu_stderr = leg.stderr_mc + leg.discrepancy;
  }
  rep.pass = rep.nu_estimate <= rep.bound + 3 * rep.nu_stderr;
  return rep;
}

}  // namespace gradphi
