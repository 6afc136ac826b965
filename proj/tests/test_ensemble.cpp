#include "gradphi/ensemble.hpp"
#include "gradphi/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace gradphi;

namespace {

Vec random_zero_boundary(const Region& r, Rng& rng) {
  Vec v = Vec::Zero(r.num_vertices());
  for (int i : r.interior_indices()) v[i] = rng.normal();
  return v;
}

Vec random_mean_zero(const Region& r, Rng& rng) {
  Vec v(r.num_vertices());
  for (int i = 0; i < v.size(); ++i) v[i] = rng.normal();
  v.array() -= v.mean();
  return v;
}

// Independent bond-loop oracle kept free of the library energy path.
double energy_oracle(const Region& r, const Eigen::VectorXd& tilt,
                     const Potential& V, const Vec& state, bool neumann,
                     const Eigen::VectorXd& q) {
  double acc = 0;
  for (int e = 0; e < r.num_bonds(); ++e) {
    const Bond& b = r.bonds()[e];
    const double g = state[b.head] - state[b.tail];
    if (neumann)
      acc += V.eval(g) - q[b.axis] * g;
    else
      acc += V.eval(tilt[b.axis] + g);
  }
  return acc;
}

}  // namespace

TEST_CASE("dirichlet energy: zero state") {
  auto q1 = make_cube(2, 1);
  DirichletEnsemble ens(q1, Eigen::Vector2d(0, 0), Potential::quadratic(1.0));
  CHECK(energy_dirichlet(ens, Field::zeros(q1)) == 0.0);
}

TEST_CASE("dirichlet energy: pure tilt on Q_1 gives one unit per aligned bond") {
  auto q1 = make_cube(2, 1);
  DirichletEnsemble ens(q1, Eigen::Vector2d(1, 0), Potential::quadratic(1.0));
  // 6 horizontal bonds each contribute (p.e)^2 = 1.
  CHECK(energy_dirichlet(ens, Field::zeros(q1)) == doctest::Approx(6.0));
}

TEST_CASE("dirichlet energy matches a direct bond loop") {
  auto q1 = make_cube(2, 1);
  Rng rng(21);
  for (const Potential& V :
       {Potential::quadratic(1.3), Potential::logcosh(1.0)}) {
    DirichletEnsemble ens(q1, Eigen::Vector2d(0.4, -0.2), V);
    const Vec phi = random_zero_boundary(*q1, rng);
    const double lib = energy_dirichlet(ens, Field(q1, phi));
    const double ora =
        energy_oracle(*q1, ens.tilt, V, phi, false, Eigen::Vector2d(0, 0));
    CHECK(lib == doctest::Approx(ora).epsilon(1e-13));
  }
}

TEST_CASE("dirichlet energy rejects boundary violations") {
  auto q1 = make_cube(2, 1);
  DirichletEnsemble ens(q1, Eigen::Vector2d(0, 0), Potential::quadratic(1.0));
  Vec v = Vec::Zero(q1->num_vertices());
  v[q1->boundary_indices()[0]] = 0.5;
  CHECK_THROWS(energy_dirichlet(ens, Field(q1, v)));
}

TEST_CASE("neumann energy: zero state, direct loop, mean guard") {
  auto q1 = make_cube(2, 1);
  NeumannEnsemble ens(q1, Eigen::Vector2d(1, 0), Potential::quadratic(1.0));
  CHECK(energy_neumann(NeumannEnsemble(q1, Eigen::Vector2d(0, 0),
                                       Potential::quadratic(1.0)),
                       Field::zeros(q1)) == 0.0);

  Rng rng(22);
  const Vec psi = random_mean_zero(*q1, rng);
  const double lib = energy_neumann(ens, Field(q1, psi));
  const double ora = energy_oracle(*q1, ens.tilt, ens.potentials[0], psi, true,
                                   ens.tilt);
  CHECK(lib == doctest::Approx(ora).epsilon(1e-13));

  Vec bad = psi;
  bad.array() += 1.0;
  CHECK_THROWS(energy_neumann(ens, Field(q1, bad)));
}

TEST_CASE("neumann tilt term is linear: E_q = E_0 - |Q| q . slope") {
  auto q2 = make_cube(2, 2);
  Rng rng(23);
  const Eigen::Vector2d q(0.8, -1.1);
  NeumannEnsemble ens_q(q2, q, Potential::logcosh(1.0));
  NeumannEnsemble ens_0(q2, Eigen::Vector2d(0, 0), Potential::logcosh(1.0));
  const Vec psi = random_mean_zero(*q2, rng);
  const Field f(q2, psi);
  const auto s = slope(gradient(f));
  const double lhs = energy_neumann(ens_q, f);
  const double rhs =
      energy_neumann(ens_0, f) - q2->num_vertices() * q.dot(s);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("force matches finite differences of the energy") {
  auto q1 = make_cube(2, 1);
  Rng rng(24);
  const double h = 1e-5;

  SUBCASE("dirichlet") {
    for (const Potential& V :
         {Potential::quadratic(1.0), Potential::logcosh(1.0)}) {
      DirichletEnsemble ens(q1, Eigen::Vector2d(0.5, 0.25), V);
      for (int rep = 0; rep < 100; ++rep) {
        Vec phi = random_zero_boundary(*q1, rng);
        Vec f;
        dirichlet_force_raw(*q1, ens.tilt, ens.potentials, phi, f);
        for (int i : q1->interior_indices()) {
          Vec up = phi, dn = phi;
          up[i] += h;
          dn[i] -= h;
          const double fd =
              -(dirichlet_energy_raw(*q1, ens.tilt, ens.potentials, up) -
                dirichlet_energy_raw(*q1, ens.tilt, ens.potentials, dn)) /
              (2 * h);
          CHECK(f[i] == doctest::Approx(fd).epsilon(1e-6));
        }
      }
    }
  }

  SUBCASE("neumann: projected gradient, vertex sum vanishes") {
    NeumannEnsemble ens(q1, Eigen::Vector2d(1.0, 0.0), Potential::logcosh(1.0));
    for (int rep = 0; rep < 100; ++rep) {
      Vec psi = random_mean_zero(*q1, rng);
      Vec f;
      neumann_force_raw(*q1, ens.tilt, ens.potentials, psi, f);
      CHECK(std::abs(f.sum()) < 1e-12 * std::max(1.0, f.cwiseAbs().maxCoeff()));
      // Directional agreement along mean-zero directions.
      Vec dir = random_mean_zero(*q1, rng);
      Vec up = psi + h * dir, dn = psi - h * dir;
      const double fd =
          -(neumann_energy_raw(*q1, ens.tilt, ens.potentials, up) -
            neumann_energy_raw(*q1, ens.tilt, ens.potentials, dn)) /
          (2 * h);
      CHECK(f.dot(dir) == doctest::Approx(fd).epsilon(1e-6));
    }
  }

  SUBCASE("zero state, no tilt: zero force") {
    DirichletEnsemble ens(q1, Eigen::Vector2d(0, 0), Potential::quadratic(1.0));
    const Field f = force(ens, Field::zeros(q1));
    CHECK(f.values().cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("neumann change of variables: tilted potential vs shifted state") {
  // With tV(x) = V(p.e + x): sum_e [tV(grad psi) - q grad psi]
  //   = sum_e [V(grad chi) - q grad chi] + sum_e q(e) p(e),
  // where chi = psi + l_p - (l_p)_Q. This is the energy-level form of the
  // nu*(q) - p.q tilt identity.
  auto q2 = make_cube(2, 2);
  Rng rng(25);
  const Eigen::Vector2d p(0.6, -0.3), q(1.2, 0.5);
  const Potential V = Potential::logcosh(1.0);
  NeumannEnsemble ens(q2, q, V);

  const Vec chi = random_mean_zero(*q2, rng);
  Field lp = affine_field(q2, p);
  Vec lp_centered = lp.values();
  lp_centered.array() -= lp_centered.mean();
  const Vec psi = chi - lp_centered;

  // Left side: direct loop with the shifted potential.
  double lhs = 0;
  for (int e = 0; e < q2->num_bonds(); ++e) {
    const Bond& b = q2->bonds()[e];
    const double g = psi[b.head] - psi[b.tail];
    lhs += V.eval(p[b.axis] + g) - q[b.axis] * g;
  }

  double qp_pairing = 0;
  for (int e = 0; e < q2->num_bonds(); ++e)
    qp_pairing += q[q2->bonds()[e].axis] * p[q2->bonds()[e].axis];

  const double rhs = energy_neumann(ens, Field(q2, chi)) + qp_pairing;
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));
}
