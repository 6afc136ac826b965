#pragma once

#include "gradphi/gff.hpp"
#include "gradphi/sampler.hpp"

#include <string>
#include <vector>

namespace gradphi {

struct SurfaceTensionEstimate {
  std::string quantity;  // "nu" | "nustar"
  int d = 2;
  int n = 1;
  Eigen::VectorXd tilt;
  double value = 0;
  double stderr_total = 0;
  std::string method;  // "gradient-path" | "reference-TI" | "exact-oracle"
  int nodes = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string flag;
};

struct Defect {
  int n = 0;
  Eigen::VectorXd tilt;
  double tau = 0;
  double stderr_total = 0;
};

struct TiOptions {
  int nodes = 8;        // Gauss-Legendre nodes per leg
  bool refine = true;   // double nodes until the two finest agree within 1 se
  int max_nodes = 32;
  int threads = 1;
};

// E[(1/|Q_n|) sum_e V'(p.e + grad phi(e)) e] componentwise, batch-means
// standard errors.
std::pair<Eigen::VectorXd, Eigen::VectorXd> grad_nu_mc(
    int d, int n, const Eigen::VectorXd& p, const Potential& potential,
    const ChainConfig& cfg);

// E[<grad psi>_{Q_n}] = grad_q nu*.
std::pair<Eigen::VectorXd, Eigen::VectorXd> grad_nustar_mc(
    int d, int n, const Eigen::VectorXd& q, const Potential& potential,
    const ChainConfig& cfg);

// nu(Q_n, p) by thermodynamic integration from the exact Gaussian anchor:
// a coupling leg H_t = (1-t) H_quad + t H_V at zero tilt, then the tilt leg
// int_0^1 p . grad_nu(t p) dt. The quadratic reference matches V''(0).
SurfaceTensionEstimate nu_estimate(int d, int n, const Eigen::VectorXd& p,
                                   const Potential& potential,
                                   const ChainConfig& cfg,
                                   const TiOptions& opts = {});

SurfaceTensionEstimate nustar_estimate(int d, int n, const Eigen::VectorXd& q,
                                       const Potential& potential,
                                       const ChainConfig& cfg,
                                       const TiOptions& opts = {});

// tau_n = nu(Q_n) - nu(Q_{n+1}) over consecutive levels.
std::vector<Defect> defects(const std::vector<SurfaceTensionEstimate>& table);

struct UpperBoundReport {
  double nu_estimate = 0;
  double nu_stderr = 0;
  double bound = 0;        // proof-side test-measure expectation
  double fitted_c = 0;     // bound / (1 + |p|^2)
  bool pass = false;
};

// nu(U, p) <= E[(1/|U|) sum_e V(p.e + grad X)] for X i.i.d. uniform on the
// interior; the right side is evaluated in closed form per bond class.
UpperBoundReport quadratic_upper_bound_check(RegionPtr region,
                                             const Eigen::VectorXd& p,
                                             const Potential& potential,
                                             const ChainConfig& cfg,
                                             const TiOptions& opts = {});

// Exact proof-side expectation alone (also used by tests).
double uniform_increment_energy(const Region& region,
                                const Eigen::VectorXd& p,
                                const Potential& potential);

}  // namespace gradphi
