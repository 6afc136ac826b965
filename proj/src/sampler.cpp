#include "gradphi/sampler.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace gradphi {

void ChainConfig::validate() const {
  if (steps <= burn_in || burn_in < 0)
    throw std::invalid_argument("chain needs steps > burn_in >= 0");
  if (!(step_size > 0)) throw std::invalid_argument("step size must be positive");
  if (thin < 1) throw std::invalid_argument("thin must be >= 1");
}

Vec Target::initial_state() const {
  Vec s = Vec::Zero(region().num_vertices());
  project(s);
  return s;
}

DirichletTarget::DirichletTarget(DirichletEnsemble ens) : ens_(std::move(ens)) {}

double DirichletTarget::energy(const Vec& state) const {
  return dirichlet_energy_raw(*ens_.region, ens_.tilt, ens_.potentials, state);
}

void DirichletTarget::force(const Vec& state, Vec& out) const {
  dirichlet_force_raw(*ens_.region, ens_.tilt, ens_.potentials, state, out);
}

void DirichletTarget::project(Vec& state) const {
  for (int i : ens_.region->boundary_indices()) state[i] = 0.0;
}

void DirichletTarget::noise(Rng& rng, Vec& out) const {
  out.setZero(ens_.region->num_vertices());
  for (int i : ens_.region->interior_indices()) out[i] = rng.normal();
}

int DirichletTarget::free_dim() const {
  return static_cast<int>(ens_.region->interior_indices().size());
}

NeumannTarget::NeumannTarget(NeumannEnsemble ens) : ens_(std::move(ens)) {}

double NeumannTarget::energy(const Vec& state) const {
  return neumann_energy_raw(*ens_.cube, ens_.tilt, ens_.potentials, state);
}

void NeumannTarget::force(const Vec& state, Vec& out) const {
  neumann_force_raw(*ens_.cube, ens_.tilt, ens_.potentials, state, out);
}

void NeumannTarget::project(Vec& state) const {
  state.array() -= state.mean();
}

void NeumannTarget::noise(Rng& rng, Vec& out) const {
  out.resize(ens_.cube->num_vertices());
  for (int i = 0; i < out.size(); ++i) out[i] = rng.normal();
  out.array() -= out.mean();
}

int NeumannTarget::free_dim() const { return ens_.cube->num_vertices() - 1; }

BlendTarget::BlendTarget(std::shared_ptr<const Target> a,
                         std::shared_ptr<const Target> b, double t)
    : a_(std::move(a)), b_(std::move(b)), t_(t) {
  if (!(t >= 0 && t <= 1)) throw std::invalid_argument("blend weight in [0,1]");
  if (a_->region().num_vertices() != b_->region().num_vertices())
    throw std::invalid_argument("blend targets on different state spaces");
}

double BlendTarget::energy(const Vec& state) const {
  return (1 - t_) * a_->energy(state) + t_ * b_->energy(state);
}

void BlendTarget::force(const Vec& state, Vec& out) const {
  Vec fb;
  a_->force(state, out);
  b_->force(state, fb);
  out = (1 - t_) * out + t_ * fb;
}

void ObservableSet::add(std::string name, Observable fn) {
  names.push_back(std::move(name));
  fns.push_back(std::move(fn));
}

namespace {

ObservableSet base_observables(const Region& r) {
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
  set.add("l2", [](const Vec& s) { return s.squaredNorm(); });
  set.add("grad_sq", [rp](const Vec& s) {
    double acc = 0;
    for (int e = 0; e < rp->num_bonds(); ++e) {
      const Bond& b = rp->bonds()[e];
      const double g = s[b.head] - s[b.tail];
      acc += g * g;
    }
    return acc / rp->num_bonds();
  });
  return set;
}

}  // namespace

ObservableSet standard_observables(const DirichletEnsemble& ens) {
  ObservableSet set;
  const DirichletEnsemble* e = &ens;
  set.add("energy", [e](const Vec& s) {
    return dirichlet_energy_raw(*e->region, e->tilt, e->potentials, s);
  });
  auto rest = base_observables(*ens.region);
  for (size_t i = 0; i < rest.fns.size(); ++i)
    set.add(rest.names[i], rest.fns[i]);
  return set;
}

ObservableSet standard_observables(const NeumannEnsemble& ens) {
  ObservableSet set;
  const NeumannEnsemble* e = &ens;
  set.add("energy", [e](const Vec& s) {
    return neumann_energy_raw(*e->cube, e->tilt, e->potentials, s);
  });
  auto rest = base_observables(*ens.cube);
  for (size_t i = 0; i < rest.fns.size(); ++i)
    set.add(rest.names[i], rest.fns[i]);
  return set;
}

std::pair<Trace, ChainStats> mala_chain(
    const Target& target, const ChainConfig& cfg, const ObservableSet& obs,
    const std::function<void(const Vec&, long)>& on_sample) {
  cfg.validate();
  Rng rng(cfg.seed, 0);

  Vec x = target.initial_state();
  Vec fx(x.size()), xi(x.size()), y(x.size()), fy(x.size());
  double ex = target.energy(x);
  target.force(x, fx);

  double eps = cfg.step_size;
  const double target_acc = 0.574;

  Trace trace;
  trace.names = obs.names;
  trace.series.assign(obs.size(), {});
  const long retained_hint = (cfg.steps - cfg.burn_in) / cfg.thin + 1;
  for (auto& s : trace.series) s.reserve(retained_hint);

  long accepted = 0, proposals = 0;
  long retained = 0;
  for (long step = 0; step < cfg.steps; ++step) {
    target.noise(rng, xi);
    y = x + (0.5 * eps * eps) * fx + eps * xi;
    target.project(y);
    const double ey = target.energy(y);
    target.force(y, fy);
    // log q(x->y) = -|y - x - (eps^2/2) fx|^2 / (2 eps^2), and reverse.
    const double fwd = (y - x - (0.5 * eps * eps) * fx).squaredNorm();
    const double bwd = (x - y - (0.5 * eps * eps) * fy).squaredNorm();
    const double log_ratio = (ex - ey) + (fwd - bwd) / (2 * eps * eps);
    const double acc_prob = std::min(1.0, std::exp(std::min(0.0, log_ratio)));
    const bool accept = rng.uniform() < acc_prob;
    if (accept) {
      x.swap(y);
      fx.swap(fy);
      ex = ey;
    }
    if (step < cfg.burn_in) {
      if (cfg.adapt) {
        const double gamma = 1.0 / std::pow(1.0 + step / 10.0, 0.7);
        eps *= std::exp(gamma * (acc_prob - target_acc));
      }
    } else {
      ++proposals;
      accepted += accept ? 1 : 0;
      const long k = step - cfg.burn_in;
      if (k % cfg.thin == 0) {
        for (int o = 0; o < obs.size(); ++o)
          trace.series[o].push_back(obs.fns[o](x));
        if (on_sample) on_sample(x, retained);
        ++retained;
      }
    }
  }

  ChainStats stats = diagnostics(trace);
  stats.acceptance = proposals ? static_cast<double>(accepted) / proposals : 0;
  if (stats.acceptance < 0.1 || stats.acceptance > 0.9) {
    stats.ok = false;
    stats.flag = "acceptance outside [0.1, 0.9] after adaptation";
  }
  return {std::move(trace), std::move(stats)};
}

std::pair<Trace, ChainStats> mala_chain(const DirichletEnsemble& ens,
                                        const ChainConfig& cfg,
                                        const ObservableSet& obs) {
  return mala_chain(DirichletTarget(ens), cfg, obs);
}

std::pair<Trace, ChainStats> mala_chain(const NeumannEnsemble& ens,
                                        const ChainConfig& cfg,
                                        const ObservableSet& obs) {
  return mala_chain(NeumannTarget(ens), cfg, obs);
}

namespace {

void require_quadratic(const std::vector<Potential>& vs) {
  for (const auto& v : vs)
    if (v.kind() != PotentialKind::quadratic)
      throw std::invalid_argument("exact sampling needs a quadratic potential");
}

}  // namespace

std::vector<Vec> exact_gaussian_sample(const DirichletEnsemble& ens,
                                       std::uint64_t seed, int count) {
  require_quadratic(ens.potentials);
  GaussianExact g(ens.region, ens.potentials[0].beta(),
                  GaussianExact::Bc::dirichlet);
  Rng rng(seed, 1);
  std::vector<Vec> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(g.sample(rng, ens.tilt));
  return out;
}

std::vector<Vec> exact_gaussian_sample(const NeumannEnsemble& ens,
                                       std::uint64_t seed, int count) {
  require_quadratic(ens.potentials);
  GaussianExact g(ens.cube, ens.potentials[0].beta(),
                  GaussianExact::Bc::neumann);
  Rng rng(seed, 1);
  std::vector<Vec> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(g.sample(rng, ens.tilt));
  return out;
}

TraceDiagnostics diagnostics(const std::vector<double>& trace) {
  const long n = static_cast<long>(trace.size());
  if (n < 100) throw std::invalid_argument("diagnostics needs >= 100 samples");
  TraceDiagnostics d;
  double mean = 0;
  for (double v : trace) mean += v;
  mean /= n;
  d.mean = mean;
  double var = 0;
  for (double v : trace) var += (v - mean) * (v - mean);
  var /= (n - 1);
  d.variance = var;
  if (var <= 0 || !(std::abs(var) > 1e-300)) {
    d.defined = false;  // constant trace: iact undefined, stderr zero
    d.iact = 0;
    d.ess = 0;
    d.stderr_batch = 0;
    return d;
  }

  // Self-consistent window: smallest W with W >= 5 tau(W).
  const long wmax = n / 3;
  double tau = 1.0;
  for (long w = 1; w <= wmax; ++w) {
    double c = 0;
    for (long i = 0; i + w < n; ++i) c += (trace[i] - mean) * (trace[i + w] - mean);
    c /= (n - w);
    tau += 2.0 * c / var;
    if (w >= 5.0 * tau) break;
  }
  d.iact = std::max(tau, 1e-2);
  d.ess = n / std::max(d.iact, 1.0);

  const long nb = static_cast<long>(std::floor(std::sqrt(static_cast<double>(n))));
  const long bs = n / nb;
  double bm_mean = 0;
  std::vector<double> bmeans(nb);
  for (long b = 0; b < nb; ++b) {
    double s = 0;
    for (long i = b * bs; i < (b + 1) * bs; ++i) s += trace[i];
    bmeans[b] = s / bs;
    bm_mean += bmeans[b];
  }
  bm_mean /= nb;
  double bv = 0;
  for (double v : bmeans) bv += (v - bm_mean) * (v - bm_mean);
  bv /= (nb - 1);
  d.stderr_batch = std::sqrt(bv / nb);
  return d;
}

ChainStats diagnostics(const Trace& trace) {
  ChainStats stats;
  for (size_t o = 0; o < trace.series.size(); ++o) {
    const auto d = diagnostics(trace.series[o]);
    stats.mean.push_back(d.mean);
    stats.iact.push_back(d.iact);
    stats.ess.push_back(d.ess);
    stats.stderrs.push_back(d.stderr_batch);
    // A constant observable is exact (stderr 0), not a chain failure; note
    // it so callers can tell iact is undefined for it.
    if (!d.defined)
      stats.flag += (stats.flag.empty() ? "" : "; ") + std::string(
          "degenerate trace: ") + trace.names[o];
  }
  return stats;
}

PooledEstimate mc_estimate(const std::function<std::unique_ptr<Target>()>& make,
                           const ChainConfig& cfg, const Observable& obs,
                           const std::string& name, int n_chains, int threads) {
  std::vector<double> means(n_chains), errs(n_chains), esses(n_chains);
  std::vector<std::string> flags(n_chains);
  std::atomic<int> next{0};
  auto worker = [&]() {
    auto target = make();
    ObservableSet set;
    set.add(name, obs);
    for (;;) {
      const int c = next.fetch_add(1);
      if (c >= n_chains) return;
      ChainConfig ccfg = cfg;
      ccfg.seed = Rng(cfg.seed, static_cast<std::uint64_t>(c) + 1).next_u64();
      auto [trace, stats] = mala_chain(*target, ccfg, set);
      means[c] = stats.mean[0];
      errs[c] = stats.stderrs[0];
      esses[c] = stats.ess[0];
      if (!stats.ok) flags[c] = stats.flag;
    }
  };
  const int nw = std::max(1, std::min(threads, n_chains));
  std::vector<std::thread> pool;
  pool.reserve(nw);
  for (int i = 0; i < nw; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  PooledEstimate out;
  double wsum = 0;
  for (int c = 0; c < n_chains; ++c) {
    out.value += means[c];
    wsum += errs[c] * errs[c];
    out.ess += esses[c];
    if (!flags[c].empty()) {
      out.ok = false;
      out.flag = flags[c];
    }
  }
  out.value /= n_chains;
  out.stderr_total = std::sqrt(wsum) / n_chains;
  return out;
}

}  // namespace gradphi
