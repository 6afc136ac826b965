#include "gradphi/ensemble.hpp"

#include "gradphi/numeric.hpp"

#include <cmath>
#include <stdexcept>

namespace gradphi {

double dirichlet_energy_raw(const Region& r, const Eigen::VectorXd& p,
                            const std::vector<Potential>& vs, const Vec& phi) {
  CompensatedSum acc;
  const auto bonds = r.bonds();
  const bool iso = vs.size() == 1;
  for (int e = 0; e < r.num_bonds(); ++e) {
    const Bond& b = bonds[e];
    const Potential& V = vs[iso ? 0 : b.axis];
    acc.add(V.eval(p[b.axis] + phi[b.head] - phi[b.tail]));
  }
  return acc.value();
}

void dirichlet_force_raw(const Region& r, const Eigen::VectorXd& p,
                         const std::vector<Potential>& vs, const Vec& phi,
                         Vec& out) {
  out.setZero(r.num_vertices());
  const auto bonds = r.bonds();
  const bool iso = vs.size() == 1;
  for (int e = 0; e < r.num_bonds(); ++e) {
    const Bond& b = bonds[e];
    const Potential& V = vs[iso ? 0 : b.axis];
    const double dv = V.deriv(p[b.axis] + phi[b.head] - phi[b.tail]);
    out[b.head] -= dv;
    out[b.tail] += dv;
  }
  for (int i : r.boundary_indices()) out[i] = 0.0;
}

double neumann_energy_raw(const Region& r, const Eigen::VectorXd& q,
                          const std::vector<Potential>& vs, const Vec& psi) {
  CompensatedSum acc;
  const auto bonds = r.bonds();
  const bool iso = vs.size() == 1;
  for (int e = 0; e < r.num_bonds(); ++e) {
    const Bond& b = bonds[e];
    const Potential& V = vs[iso ? 0 : b.axis];
    const double g = psi[b.head] - psi[b.tail];
    acc.add(V.eval(g) - q[b.axis] * g);
  }
  return acc.value();
}

void neumann_force_raw(const Region& r, const Eigen::VectorXd& q,
                       const std::vector<Potential>& vs, const Vec& psi,
                       Vec& out) {
  out.setZero(r.num_vertices());
  const auto bonds = r.bonds();
  const bool iso = vs.size() == 1;
  for (int e = 0; e < r.num_bonds(); ++e) {
    const Bond& b = bonds[e];
    const Potential& V = vs[iso ? 0 : b.axis];
    const double dv = V.deriv(psi[b.head] - psi[b.tail]) - q[b.axis];
    out[b.head] -= dv;
    out[b.tail] += dv;
  }
  out.array() -= out.mean();
}

namespace {

void require_zero_boundary(const Region& r, const Vec& phi) {
  for (int i : r.boundary_indices()) {
    if (phi[i] != 0.0)
      throw std::invalid_argument("state is not zero on the region boundary");
  }
}

void require_mean_zero(const Region& r, const Vec& psi) {
  const double m = psi.mean();
  const double scale = std::max(1.0, psi.cwiseAbs().maxCoeff());
  if (std::abs(m) > 1e-9 * scale)
    throw std::invalid_argument("state mean exceeds 1e-9");
  (void)r;
}

}  // namespace

double energy_dirichlet(const DirichletEnsemble& ens, const Field& phi) {
  if (!phi.region().same_geometry(*ens.region))
    throw std::invalid_argument("field region does not match ensemble");
  require_zero_boundary(*ens.region, phi.values());
  return dirichlet_energy_raw(*ens.region, ens.tilt, ens.potentials,
                              phi.values());
}

double energy_neumann(const NeumannEnsemble& ens, const Field& psi) {
  if (!psi.region().same_geometry(*ens.cube))
    throw std::invalid_argument("field region does not match ensemble");
  require_mean_zero(*ens.cube, psi.values());
  return neumann_energy_raw(*ens.cube, ens.tilt, ens.potentials, psi.values());
}

Field force(const DirichletEnsemble& ens, const Field& phi) {
  Vec out;
  dirichlet_force_raw(*ens.region, ens.tilt, ens.potentials, phi.values(), out);
  return Field(phi.region_ptr(), std::move(out));
}

Field force(const NeumannEnsemble& ens, const Field& psi) {
  Vec out;
  neumann_force_raw(*ens.cube, ens.tilt, ens.potentials, psi.values(), out);
  return Field(psi.region_ptr(), std::move(out));
}

}  // namespace gradphi
