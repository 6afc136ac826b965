#pragma once

#include "gradphi/ensemble.hpp"
#include "gradphi/gff.hpp"
#include "gradphi/rng.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace gradphi {

struct ChainConfig {
  long steps = 20000;
  long burn_in = 2000;
  double step_size = 0.1;
  std::uint64_t seed = 1;
  long thin = 1;
  bool adapt = true;  // tune step size during burn-in toward acceptance 0.574

  void validate() const;
};

struct ChainStats {
  double acceptance = 0;
  std::vector<double> mean;
  std::vector<double> iact;
  std::vector<double> ess;
  std::vector<double> stderrs;  // batch-means standard errors
  bool ok = true;
  std::string flag;
};

struct Trace {
  std::vector<std::string> names;
  std::vector<std::vector<double>> series;  // one per observable

  long length() const { return series.empty() ? 0 : static_cast<long>(series[0].size()); }
};

// Sampling target: energy, force and the constraint projection of one Gibbs
// ensemble (or a blend, for thermodynamic integration).
class Target {
 public:
  virtual ~Target() = default;
  virtual const Region& region() const = 0;
  virtual double energy(const Vec& state) const = 0;
  virtual void force(const Vec& state, Vec& out) const = 0;
  virtual void project(Vec& state) const = 0;
  virtual void noise(Rng& rng, Vec& out) const = 0;
  virtual int free_dim() const = 0;
  Vec initial_state() const;
};

class DirichletTarget : public Target {
 public:
  explicit DirichletTarget(DirichletEnsemble ens);
  const Region& region() const override { return *ens_.region; }
  double energy(const Vec& state) const override;
  void force(const Vec& state, Vec& out) const override;
  void project(Vec& state) const override;
  void noise(Rng& rng, Vec& out) const override;
  int free_dim() const override;
  const DirichletEnsemble& ensemble() const { return ens_; }

 private:
  DirichletEnsemble ens_;
};

class NeumannTarget : public Target {
 public:
  explicit NeumannTarget(NeumannEnsemble ens);
  const Region& region() const override { return *ens_.cube; }
  double energy(const Vec& state) const override;
  void force(const Vec& state, Vec& out) const override;
  void project(Vec& state) const override;
  void noise(Rng& rng, Vec& out) const override;
  int free_dim() const override;
  const NeumannEnsemble& ensemble() const { return ens_; }

 private:
  NeumannEnsemble ens_;
};

// (1 - t) A + t B on a common state space.
class BlendTarget : public Target {
 public:
  BlendTarget(std::shared_ptr<const Target> a, std::shared_ptr<const Target> b,
              double t);
  const Region& region() const override { return a_->region(); }
  double energy(const Vec& state) const override;
  void force(const Vec& state, Vec& out) const override;
  void project(Vec& state) const override { a_->project(state); }
  void noise(Rng& rng, Vec& out) const override { a_->noise(rng, out); }
  int free_dim() const override { return a_->free_dim(); }

 private:
  std::shared_ptr<const Target> a_, b_;
  double t_;
};

using Observable = std::function<double(const Vec&)>;

struct ObservableSet {
  std::vector<std::string> names;
  std::vector<Observable> fns;

  void add(std::string name, Observable fn);
  int size() const { return static_cast<int>(fns.size()); }
};

// energy, slope components, L2 norm, per-bond gradient second moment.
ObservableSet standard_observables(const DirichletEnsemble& ens);
ObservableSet standard_observables(const NeumannEnsemble& ens);

// Metropolis-adjusted Langevin chain targeting exp(-energy)/Z. Identical
// (target, cfg) including the seed give bit-identical traces.
std::pair<Trace, ChainStats> mala_chain(
    const Target& target, const ChainConfig& cfg, const ObservableSet& obs,
    const std::function<void(const Vec&, long)>& on_sample = nullptr);

std::pair<Trace, ChainStats> mala_chain(const DirichletEnsemble& ens,
                                        const ChainConfig& cfg,
                                        const ObservableSet& obs);
std::pair<Trace, ChainStats> mala_chain(const NeumannEnsemble& ens,
                                        const ChainConfig& cfg,
                                        const ObservableSet& obs);

// Exact i.i.d. draws for quadratic potentials via the factorized precision
// operator (2 beta A resp. 2 beta L).
std::vector<Vec> exact_gaussian_sample(const DirichletEnsemble& ens,
                                       std::uint64_t seed, int count);
std::vector<Vec> exact_gaussian_sample(const NeumannEnsemble& ens,
                                       std::uint64_t seed, int count);

// Integrated autocorrelation time (self-consistent Sokal window), effective
// sample size and batch-means standard error of a scalar trace.
struct TraceDiagnostics {
  double mean = 0;
  double variance = 0;
  double iact = 0;
  double ess = 0;
  double stderr_batch = 0;
  bool defined = true;  // false for degenerate (constant) traces
};

TraceDiagnostics diagnostics(const std::vector<double>& trace);
ChainStats diagnostics(const Trace& trace);

// Independent chains with per-chain streams (seed, chain index); results are
// aggregated in chain order regardless of scheduling.
struct PooledEstimate {
  double value = 0;
  double stderr_total = 0;
  double ess = 0;
  bool ok = true;
  std::string flag;
};

PooledEstimate mc_estimate(const std::function<std::unique_ptr<Target>()>& make,
                           const ChainConfig& cfg, const Observable& obs,
                           const std::string& name, int n_chains, int threads);

}  // namespace gradphi
