#pragma once

#include "gradphi/lattice.hpp"
#include "gradphi/potential.hpp"

#include <vector>

namespace gradphi {

// Target Gibbs family P_{n,p}: zero-boundary fields phi on a region, energy
// sum_e V_e(p(e) + grad phi(e)).
struct DirichletEnsemble {
  RegionPtr region;
  Eigen::VectorXd tilt;              // p
  std::vector<Potential> potentials;  // one entry (isotropic) or one per axis

  DirichletEnsemble(RegionPtr r, Eigen::VectorXd p, Potential v)
      : region(std::move(r)), tilt(std::move(p)), potentials{std::move(v)} {}
  DirichletEnsemble(RegionPtr r, Eigen::VectorXd p, std::vector<Potential> vs)
      : region(std::move(r)), tilt(std::move(p)), potentials(std::move(vs)) {}

  const Potential& potential(int axis) const {
    return potentials[potentials.size() == 1 ? 0 : axis];
  }
};

// Target Gibbs family P*_{n,q}: mean-zero fields psi on a cube, energy
// sum_e (V_e(grad psi(e)) - q . grad psi(e)).
struct NeumannEnsemble {
  RegionPtr cube;
  Eigen::VectorXd tilt;  // q
  std::vector<Potential> potentials;

  NeumannEnsemble(RegionPtr c, Eigen::VectorXd q, Potential v)
      : cube(std::move(c)), tilt(std::move(q)), potentials{std::move(v)} {}

  const Potential& potential(int axis) const {
    return potentials[potentials.size() == 1 ? 0 : axis];
  }
};

double energy_dirichlet(const DirichletEnsemble& ens, const Field& phi);
double energy_neumann(const NeumannEnsemble& ens, const Field& psi);

// Negative energy gradient in the vertex values. Dirichlet: zero on the
// boundary (pinned coordinates). Neumann: projected onto the mean-zero
// subspace.
Field force(const DirichletEnsemble& ens, const Field& phi);
Field force(const NeumannEnsemble& ens, const Field& psi);

// Hot-loop kernels on raw vectors (no admissibility checks, compensated sums).
double dirichlet_energy_raw(const Region& r, const Eigen::VectorXd& p,
                            const std::vector<Potential>& vs, const Vec& phi);
void dirichlet_force_raw(const Region& r, const Eigen::VectorXd& p,
                         const std::vector<Potential>& vs, const Vec& phi,
                         Vec& out);
double neumann_energy_raw(const Region& r, const Eigen::VectorXd& q,
                          const std::vector<Potential>& vs, const Vec& psi);
void neumann_force_raw(const Region& r, const Eigen::VectorXd& q,
                       const std::vector<Potential>& vs, const Vec& psi,
                       Vec& out);

}  // namespace gradphi
