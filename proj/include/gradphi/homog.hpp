#pragma once

#include "gradphi/lattice.hpp"
#include "gradphi/linalg.hpp"

#include <memory>
#include <utility>

namespace gradphi {

// kappa in h^1_0(region_plus) with Delta kappa = div f at every interior
// vertex; f lives on the bonds of the interior cube and is zero-extended to
// the collar bonds. Conjugate gradient to relative residual 1e-10; kappa is
// the L2-closest gradient to f among zero-boundary potentials.
Field poisson_dirichlet(const EdgeField& f, RegionPtr region_plus);

// Orthogonal split over the cells of a partition: (block, constant) with
// block per-cell mean-zero and constant piecewise constant; block + constant
// reconstructs the input.
std::pair<Field, Field> project_blocks(const Field& phi,
                                       const TriadicPartition& part);

// The patching isomorphism between h^1(Q_{2n}) and h^1_0(Q_{2n}^+): a Poisson
// solve on the block part (the block gradient field zero-extended across
// connecting bonds) and an orthonormal basis map H -> (im L)^perp on the
// piecewise-constant part. The basis map is materialized on the dense path
// only (d = 2, n <= 1); block-part applications work at any level.
class PatchingOperator {
 public:
  PatchingOperator(int d, int n);

  int d() const { return domain_->d(); }
  int n() const { return n_; }
  const Region& domain() const { return *domain_; }      // Q_{2n}
  const Region& codomain() const { return *codomain_; }  // Q_{2n}^+
  const TriadicPartition& cells() const { return *part_; }
  bool dense_path() const { return dense_available_; }

  // L(psi) for psi on Q_{2n}; values indexed by the domain cube (the
  // codomain field is its zero extension). Inputs with a piecewise-constant
  // component need the dense path.
  Vec apply(const Vec& psi) const;
  // Block-only application (throws if psi has a piecewise-constant part
  // beyond tolerance).
  Vec apply_block(const Vec& psi_block) const;
  // Adjoint of the block-restricted operator.
  Vec apply_block_adjoint(const Vec& y) const;

  // Exact residual witness for L(psi) = psi: A+ psi - div f(psi) = 0.
  double fixed_point_residual(const Vec& psi) const;

  // Dense materialization (|Q_{2n}| square matrix); d = 2, n <= 1.
  const Eigen::MatrixXd& dense_matrix() const;
  double logdet_dense() const;  // ln |det L|

  // Count of verified unit eigenvectors from the cell-interior subspace
  // (basis of mean-zero fields supported strictly inside each cell, checked
  // with full Poisson solves to tol).
  int unit_eigenspace_verified_dim(double tol) const;
  // Dimension of that subspace: 3^{dn} (|Q_n interior| - 1).
  int unit_eigenspace_dim() const;

  // (|||L|||, |||L^{-1}|||): dense SVD on the dense path, otherwise Krylov
  // (Lanczos) estimates on the block part; the basis-map part is an isometry
  // so its singular values are 1.
  std::pair<double, double> operator_norms(int iterations) const;

 private:
  Vec poisson_from_block(const Vec& block) const;
  void build_dense() const;

  int n_;
  RegionPtr domain_;
  RegionPtr codomain_;
  std::shared_ptr<TriadicPartition> part_;
  std::shared_ptr<DirichletOperator> aplus_;
  std::vector<int> dom_to_cod_;
  std::vector<std::uint8_t> connecting_mask_;
  bool dense_available_ = false;
  mutable Eigen::MatrixXd dense_L_;
};

}  // namespace gradphi
