#include "gradphi/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace gradphi {

SpMat dirichlet_laplacian(const Region& r) {
  const auto interior = r.interior_indices();
  std::vector<int> full_to_int(r.num_vertices(), -1);
  for (int k = 0; k < static_cast<int>(interior.size()); ++k)
    full_to_int[interior[k]] = k;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(interior.size() * 5);
  for (int e = 0; e < r.num_bonds(); ++e) {
    const Bond& b = r.bonds()[e];
    const int it = full_to_int[b.tail];
    const int ih = full_to_int[b.head];
    // |grad phi(e)|^2 contributes to every bond with an interior endpoint.
    if (it >= 0) trips.emplace_back(it, it, 1.0);
    if (ih >= 0) trips.emplace_back(ih, ih, 1.0);
    if (it >= 0 && ih >= 0) {
      trips.emplace_back(it, ih, -1.0);
      trips.emplace_back(ih, it, -1.0);
    }
  }
  SpMat A(static_cast<int>(interior.size()), static_cast<int>(interior.size()));
  A.setFromTriplets(trips.begin(), trips.end());
  return A;
}

SpMat neumann_laplacian(const Region& r) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(r.num_bonds() * 4);
  for (int e = 0; e < r.num_bonds(); ++e) {
    const Bond& b = r.bonds()[e];
    trips.emplace_back(b.tail, b.tail, 1.0);
    trips.emplace_back(b.head, b.head, 1.0);
    trips.emplace_back(b.tail, b.head, -1.0);
    trips.emplace_back(b.head, b.tail, -1.0);
  }
  SpMat L(r.num_vertices(), r.num_vertices());
  L.setFromTriplets(trips.begin(), trips.end());
  return L;
}

SpMat grounded_laplacian(const Region& r) {
  const int n = r.num_vertices() - 1;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(r.num_bonds() * 4);
  for (int e = 0; e < r.num_bonds(); ++e) {
    const Bond& b = r.bonds()[e];
    if (b.tail < n) trips.emplace_back(b.tail, b.tail, 1.0);
    if (b.head < n) trips.emplace_back(b.head, b.head, 1.0);
    if (b.tail < n && b.head < n) {
      trips.emplace_back(b.tail, b.head, -1.0);
      trips.emplace_back(b.head, b.tail, -1.0);
    }
  }
  SpMat G(n, n);
  G.setFromTriplets(trips.begin(), trips.end());
  return G;
}

CgResult conjugate_gradient(const SpMat& A, const Vec& b, Vec& x,
                            double rel_tol, int max_iter) {
  CgResult res;
  const double bnorm = b.norm();
  if (bnorm == 0) {
    x.setZero(b.size());
    res.converged = true;
    return res;
  }
  if (x.size() != b.size()) x.setZero(b.size());
  Vec r = b - A * x;
  Vec p = r;
  Vec Ap(b.size());
  double rs = r.squaredNorm();
  for (int it = 0; it < max_iter; ++it) {
    Ap.noalias() = A * p;
    const double alpha = rs / p.dot(Ap);
    x += alpha * p;
    r -= alpha * Ap;
    const double rs_new = r.squaredNorm();
    res.iterations = it + 1;
    if (std::sqrt(rs_new) <= rel_tol * bnorm) {
      res.converged = true;
      res.rel_residual = std::sqrt(rs_new) / bnorm;
      return res;
    }
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  res.rel_residual = std::sqrt(rs) / bnorm;
  return res;
}

CgResult deflated_cg(const SpMat& L, const Vec& b, Vec& x, double rel_tol,
                     int max_iter) {
  Vec bp = b;
  bp.array() -= bp.mean();
  CgResult res;
  const double bnorm = bp.norm();
  if (bnorm == 0) {
    x.setZero(b.size());
    res.converged = true;
    return res;
  }
  x.setZero(b.size());
  Vec r = bp;
  Vec p = r;
  Vec Lp(b.size());
  double rs = r.squaredNorm();
  for (int it = 0; it < max_iter; ++it) {
    Lp.noalias() = L * p;
    Lp.array() -= Lp.mean();  // guard roundoff drift off the subspace
    const double alpha = rs / p.dot(Lp);
    x += alpha * p;
    r -= alpha * Lp;
    const double rs_new = r.squaredNorm();
    res.iterations = it + 1;
    if (std::sqrt(rs_new) <= rel_tol * bnorm) {
      x.array() -= x.mean();
      res.converged = true;
      res.rel_residual = std::sqrt(rs_new) / bnorm;
      return res;
    }
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  x.array() -= x.mean();
  res.rel_residual = std::sqrt(rs) / bnorm;
  return res;
}

double sparse_logdet(const Eigen::SimplicialLLT<SpMat>& llt) {
  SpMat L = llt.matrixL();
  double s = 0;
  for (int k = 0; k < L.outerSize(); ++k) s += std::log(L.coeff(k, k));
  return 2.0 * s;
}

DirichletOperator::DirichletOperator(RegionPtr region)
    : region_(std::move(region)) {
  const auto ii = region_->interior_indices();
  interior_.assign(ii.begin(), ii.end());
  if (interior_.empty())
    throw std::invalid_argument("region has empty interior");
  full_to_interior_.assign(region_->num_vertices(), -1);
  for (int k = 0; k < static_cast<int>(interior_.size()); ++k)
    full_to_interior_[interior_[k]] = k;
  A_ = dirichlet_laplacian(*region_);
  llt_.compute(A_);
  if (llt_.info() != Eigen::Success)
    throw std::runtime_error("Dirichlet Laplacian factorization failed");
  logdet_ = sparse_logdet(llt_);
}

Vec DirichletOperator::solve(const Vec& b_interior) const {
  return llt_.solve(b_interior);
}

Vec DirichletOperator::sample_interior(const Vec& xi) const {
  // P A P^T = L L^T, so z = P^T L^{-T} xi has covariance A^{-1}.
  Vec y = llt_.matrixU().solve(xi);
  return llt_.permutationPinv() * y;
}

Vec DirichletOperator::extend(const Vec& interior_values) const {
  Vec full = Vec::Zero(region_->num_vertices());
  for (int k = 0; k < static_cast<int>(interior_.size()); ++k)
    full[interior_[k]] = interior_values[k];
  return full;
}

Vec DirichletOperator::restrict_interior(const Vec& full) const {
  Vec out(interior_.size());
  for (int k = 0; k < static_cast<int>(interior_.size()); ++k)
    out[k] = full[interior_[k]];
  return out;
}

NeumannOperator::NeumannOperator(RegionPtr region) : region_(std::move(region)) {
  L_ = neumann_laplacian(*region_);
  SpMat G = grounded_laplacian(*region_);
  grounded_llt_.compute(G);
  if (grounded_llt_.info() != Eigen::Success)
    throw std::runtime_error("grounded Laplacian factorization failed");
  pseudo_logdet_ =
      sparse_logdet(grounded_llt_) + std::log(static_cast<double>(dim()));
}

Vec NeumannOperator::pseudo_solve(const Vec& b) const {
  Vec x;
  const auto res = deflated_cg(L_, b, x, 1e-12, 20 * dim() + 200);
  if (!res.converged)
    throw std::runtime_error("deflated CG did not reach 1e-12");
  return x;
}

Vec NeumannOperator::sample_mean_zero(const Vec& xi, double beta) const {
  // Pin the last vertex to zero, draw with precision 2 beta L restricted,
  // then project onto mean zero; the projection is measure-preserving for
  // the Gibbs density on the subspace.
  const int n = dim() - 1;
  Vec y = grounded_llt_.matrixU().solve(xi.head(n));
  Vec z = Vec::Zero(dim());
  z.head(n) = grounded_llt_.permutationPinv() * y;
  z /= std::sqrt(2.0 * beta);
  z.array() -= z.mean();
  return z;
}

}  // namespace gradphi
