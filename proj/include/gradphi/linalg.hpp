#pragma once

#include "gradphi/lattice.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <memory>

namespace gradphi {

using SpMat = Eigen::SparseMatrix<double>;

// Dirichlet graph Laplacian: the matrix A on interior vertices with
// sum_{e in U} |grad phi(e)|^2 = phi^T A phi for phi vanishing on the
// boundary of U.
SpMat dirichlet_laplacian(const Region& r);

// Full graph Laplacian of the region (Neumann): psi^T L psi =
// sum_{e in U} |grad psi(e)|^2. Singular, kernel = constants.
SpMat neumann_laplacian(const Region& r);

// Grounded Laplacian: L with the row/column of the last vertex removed.
SpMat grounded_laplacian(const Region& r);

struct CgResult {
  int iterations = 0;
  double rel_residual = 0;
  bool converged = false;
};

CgResult conjugate_gradient(const SpMat& A, const Vec& b, Vec& x,
                            double rel_tol, int max_iter);

// CG on the mean-zero subspace of a singular Neumann Laplacian; b must be
// orthogonal to constants (it is projected first).
CgResult deflated_cg(const SpMat& L, const Vec& b, Vec& x, double rel_tol,
                     int max_iter);

// Cached sparse Cholesky of the Dirichlet Laplacian of a region; exposes
// log-determinant, solves and exact Gaussian draws with precision 2 beta A.
class DirichletOperator {
 public:
  explicit DirichletOperator(RegionPtr region);

  const Region& region() const { return *region_; }
  RegionPtr region_ptr() const { return region_; }
  int dim() const { return static_cast<int>(interior_.size()); }
  double logdet() const { return logdet_; }

  // Solve A x = b in interior coordinates.
  Vec solve(const Vec& b_interior) const;
  // z = P^T L^{-T} xi has covariance A^{-1}.
  Vec sample_interior(const Vec& xi) const;

  // Scatter interior coordinates into a full-length field (zero boundary).
  Vec extend(const Vec& interior_values) const;
  Vec restrict_interior(const Vec& full) const;
  int interior_index(int full_index) const { return full_to_interior_[full_index]; }

 private:
  RegionPtr region_;
  std::vector<int> interior_;
  std::vector<int> full_to_interior_;
  SpMat A_;
  Eigen::SimplicialLLT<SpMat> llt_;
  double logdet_ = 0;
};

// Neumann counterpart: grounded Cholesky for pseudo-log-determinant and
// exact mean-zero Gaussian draws; deflated CG for pseudo-inverse actions.
class NeumannOperator {
 public:
  explicit NeumannOperator(RegionPtr region);

  const Region& region() const { return *region_; }
  RegionPtr region_ptr() const { return region_; }
  int dim() const { return region_->num_vertices(); }

  // ln of the product of the nonzero eigenvalues of L
  // (= ln det grounded + ln |U|, by the matrix-tree identity).
  double pseudo_logdet() const { return pseudo_logdet_; }

  const SpMat& matrix() const { return L_; }

  // x = L^+ b, relative residual 1e-12.
  Vec pseudo_solve(const Vec& b) const;

  // Mean-zero draw with covariance (2 beta L)^+ restricted to the subspace.
  Vec sample_mean_zero(const Vec& xi, double beta) const;

 private:
  RegionPtr region_;
  SpMat L_;
  Eigen::SimplicialLLT<SpMat> grounded_llt_;
  double pseudo_logdet_ = 0;
};

double sparse_logdet(const Eigen::SimplicialLLT<SpMat>& llt);

}  // namespace gradphi
