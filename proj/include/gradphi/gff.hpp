#pragma once

#include "gradphi/linalg.hpp"
#include "gradphi/rng.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace gradphi {

// Vertex functional b with b^T psi = sum_e q . grad psi(e); supported on the
// region boundary (the constant field q is divergence-free at interior
// vertices).
Vec tilt_functional(const Region& r, const Eigen::VectorXd& q);

// sum_e (p . e)^2 over the bonds of the region.
double tilt_energy(const Region& r, const Eigen::VectorXd& p);

// Closed-form/exact linear algebra for the quadratic potential V = beta x^2.
// Dirichlet ensembles have precision 2 beta A, Neumann ensembles 2 beta L on
// the mean-zero subspace.
class GaussianExact {
 public:
  enum class Bc { dirichlet, neumann };

  GaussianExact(RegionPtr region, double beta, Bc bc);

  const Region& region() const;
  double beta() const { return beta_; }
  Bc bc() const { return bc_; }
  // ln det A (Dirichlet) or ln of the product of nonzero eigenvalues of L.
  double logdet() const;

  // nu(U, p) = (beta/|U|) sum_e (p.e)^2
  //          - (1/|U|) [ (N/2) ln(pi/beta) - (1/2) ln det A ].
  double nu(const Eigen::VectorXd& p) const;

  // nu*(Q, q) = (1/|Q|) [ b^T L^+ b / (4 beta)
  //           + ((|Q|-1)/2) ln(pi/beta) - (1/2) ln det' L ].
  double nustar(const Eigen::VectorXd& q) const;

  // E[<grad psi>_Q] = grad_q nu*(Q, q).
  Eigen::VectorXd grad_nustar(const Eigen::VectorXd& q) const;
  // Cov[<grad psi>_Q]; independent of the tilt.
  Eigen::MatrixXd slope_variance() const;
  // M with nu*(Q, q) = q^T M q + nu*(Q, 0); d solves, then any tilt is free.
  Eigen::MatrixXd nustar_tilt_form() const;

  // Dirichlet: E sum_x phi^2 = tr((2 beta A)^{-1}), by N solves (Hutchinson
  // with certified stderr above the size cap).
  double l2_trace() const;
  // Neumann: tr((2 beta L)^+), spectral sum for cubes.
  double field_l2_trace() const;

  // Mean interface: zero (Dirichlet) or (2 beta L)^+ b (Neumann).
  Vec mean_field(const Eigen::VectorXd& tilt) const;

  // E[(1/|U|) sum_e V(tilt(e) + grad field(e))] for V = beta x^2.
  double mean_gradient_energy(const Eigen::VectorXd& tilt) const;

  // One exact draw (full-length field; zero boundary resp. mean zero, the
  // Neumann draw is shifted by the tilt mean).
  Vec sample(Rng& rng, const Eigen::VectorXd& tilt) const;

  const DirichletOperator& dirichlet_op() const { return *dir_; }
  const NeumannOperator& neumann_op() const { return *neu_; }

 private:
  double beta_;
  Bc bc_;
  Eigen::VectorXd axis_bonds_;
  std::shared_ptr<DirichletOperator> dir_;
  std::shared_ptr<NeumannOperator> neu_;
};

// Convenience wrappers on centered cubes Q_n.
double nu_exact(int d, int n, double beta, const Eigen::VectorXd& p);
double nustar_exact(int d, int n, double beta, const Eigen::VectorXd& q);
Eigen::VectorXd grad_nustar_exact(int d, int n, double beta,
                                  const Eigen::VectorXd& q);
Eigen::MatrixXd slope_variance_exact(int d, int n, double beta);
double l2_trace_exact(int d, int n, double beta);

// Exact log of the Gaussian block integral over the piecewise-constant
// space H (cells z + Q_m tiling Q_n), quadratic integrand with ellipticity
// lambda and psi = 0: reduces to the rescaled coarse-lattice Laplacian on
// Q_{n-m}.
double block_log_integral_exact(int d, int m, int n, double lambda);

// 1-D spectra of the path Laplacians: building blocks of the cube spectra.
std::vector<double> dirichlet_spectrum_1d(int interior_side);
std::vector<double> neumann_spectrum_1d(int side);
// sum over nonzero Kronecker-sum eigenvalues of f(lambda) for the cube Q_n.
double neumann_spectral_sum(int d, int n, double (*f)(double));

struct ExtrapolationResult {
  double limit = 0;
  double rate = 0;      // alpha with value_n ~ limit + c 3^{-alpha n}
  double coeff = 0;     // c
  double residual = 0;  // rms misfit over the tail levels used
  int tail_start = 0;   // first level of the monotone tail
  bool identifiable = true;
  bool monotone_tail = true;
  std::string flag;
};

// Geometric-sequence fit value_n ~ limit + c 3^{-alpha n}. The head of the
// sequence is dropped until the difference sequence has a constant sign; the
// rate is solved exactly from the last three tail levels.
ExtrapolationResult extrapolate_limit(
    const std::vector<std::pair<int, double>>& values);

}  // namespace gradphi
