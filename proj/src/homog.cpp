#include "gradphi/homog.hpp"

#include "gradphi/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace gradphi {

Field poisson_dirichlet(const EdgeField& f, RegionPtr region_plus) {
  const Region& inner = f.region();
  const Region& plus = *region_plus;
  const Region plus_interior = interior(plus);
  if (!plus_interior.same_geometry(inner))
    throw std::invalid_argument(
        "poisson_dirichlet: f must live on the interior of region_plus");

  // Weak form: A+ kappa = -div f in interior coordinates (f zero on the
  // collar bonds).
  Vec rhs_inner;
  divergence_into(inner, f.values(), rhs_inner);
  rhs_inner = -rhs_inner;

  const SpMat A = dirichlet_laplacian(plus);
  std::vector<int> inner_to_int(inner.num_vertices(), -1);
  {
    int k = 0;
    for (int i : plus.interior_indices()) {
      const int j = inner.index_of(plus.point(i));
      if (j < 0) throw std::logic_error("interior mismatch");
      inner_to_int[j] = k++;
    }
  }
  Vec rhs(A.rows());
  for (int j = 0; j < inner.num_vertices(); ++j)
    rhs[inner_to_int[j]] = rhs_inner[j];

  Vec x;
  const auto res =
      conjugate_gradient(A, rhs, x, 1e-10, 10 * static_cast<int>(A.rows()));
  if (!res.converged)
    throw std::runtime_error("poisson_dirichlet: CG did not converge");

  Vec full = Vec::Zero(plus.num_vertices());
  {
    int k = 0;
    for (int i : plus.interior_indices()) full[i] = x[k++];
  }
  return Field(std::move(region_plus), std::move(full));
}

std::pair<Field, Field> project_blocks(const Field& phi,
                                       const TriadicPartition& part) {
  if (!phi.region().same_geometry(part.cube()))
    throw std::invalid_argument("field does not live on the partition cube");
  Vec block = phi.values();
  Vec constant = Vec::Zero(block.size());
  for (int c = 0; c < part.num_cells(); ++c) {
    double m = 0;
    for (int v : part.cell_vertices(c)) m += block[v];
    m /= static_cast<double>(part.cell_vertices(c).size());
    for (int v : part.cell_vertices(c)) {
      block[v] -= m;
      constant[v] = m;
    }
  }
  return {Field(phi.region_ptr(), std::move(block)),
          Field(phi.region_ptr(), std::move(constant))};
}

PatchingOperator::PatchingOperator(int d, int n) : n_(n) {
  if (n < 0) throw std::invalid_argument("level must be >= 0");
  domain_ = make_cube(d, 2 * n);
  codomain_ = make_cube_plus(d, 2 * n);
  part_ = std::make_shared<TriadicPartition>(domain_, n);
  aplus_ = std::make_shared<DirichletOperator>(codomain_);

  dom_to_cod_.resize(domain_->num_vertices());
  for (int i = 0; i < domain_->num_vertices(); ++i) {
    const int j = codomain_->index_of(domain_->point(i));
    const int k = aplus_->interior_index(j);
    if (k < 0) throw std::logic_error("domain vertex not interior to Q+");
    dom_to_cod_[i] = k;
  }

  connecting_mask_.assign(domain_->num_bonds(), 0);
  for (int e : part_->connecting_bonds()) connecting_mask_[e] = 1;

  dense_available_ = (d == 2 && n <= 1);
}

Vec PatchingOperator::poisson_from_block(const Vec& block) const {
  const Region& dom = *domain_;
  // f = block gradient on cell bonds, zero on connecting bonds.
  Vec f(dom.num_bonds());
  gradient_into(dom, block, f);
  for (int e = 0; e < dom.num_bonds(); ++e)
    if (connecting_mask_[e]) f[e] = 0.0;
  Vec rhs_dom;
  divergence_into(dom, f, rhs_dom);
  rhs_dom = -rhs_dom;
  Vec rhs(aplus_->dim());
  for (int i = 0; i < dom.num_vertices(); ++i) rhs[dom_to_cod_[i]] = rhs_dom[i];
  const Vec sol = aplus_->solve(rhs);
  Vec out(dom.num_vertices());
  for (int i = 0; i < dom.num_vertices(); ++i) out[i] = sol[dom_to_cod_[i]];
  return out;
}

Vec PatchingOperator::apply_block(const Vec& psi_block) const {
  const double scale = std::max(1.0, psi_block.cwiseAbs().maxCoeff());
  for (int c = 0; c < part_->num_cells(); ++c) {
    double m = 0;
    for (int v : part_->cell_vertices(c)) m += psi_block[v];
    m /= static_cast<double>(part_->cell_vertices(c).size());
    if (std::abs(m) > 1e-9 * scale)
      throw std::invalid_argument("apply_block: input has cell means");
  }
  return poisson_from_block(psi_block);
}

Vec PatchingOperator::apply_block_adjoint(const Vec& y) const {
  const Region& dom = *domain_;
  Vec rhs(aplus_->dim());
  for (int i = 0; i < dom.num_vertices(); ++i) rhs[dom_to_cod_[i]] = y[i];
  const Vec sol = aplus_->solve(rhs);
  Vec w(dom.num_vertices());
  for (int i = 0; i < dom.num_vertices(); ++i) w[i] = sol[dom_to_cod_[i]];
  Vec g(dom.num_bonds());
  gradient_into(dom, w, g);
  for (int e = 0; e < dom.num_bonds(); ++e)
    if (connecting_mask_[e]) g[e] = 0.0;
  Vec out;
  divergence_into(dom, g, out);
  out = -out;
  for (int c = 0; c < part_->num_cells(); ++c) {
    double m = 0;
    for (int v : part_->cell_vertices(c)) m += out[v];
    m /= static_cast<double>(part_->cell_vertices(c).size());
    for (int v : part_->cell_vertices(c)) out[v] -= m;
  }
  return out;
}

Vec PatchingOperator::apply(const Vec& psi) const {
  Vec block = psi;
  Eigen::VectorXd cell_means(part_->num_cells());
  for (int c = 0; c < part_->num_cells(); ++c) {
    double m = 0;
    for (int v : part_->cell_vertices(c)) m += block[v];
    m /= static_cast<double>(part_->cell_vertices(c).size());
    cell_means[c] = m;
    for (int v : part_->cell_vertices(c)) block[v] -= m;
  }
  Vec out = poisson_from_block(block);
  const double scale = std::max(1.0, psi.cwiseAbs().maxCoeff());
  if (cell_means.cwiseAbs().maxCoeff() > 1e-12 * scale) {
    if (!dense_available_)
      throw std::runtime_error(
          "piecewise-constant component needs the dense basis map (n <= 1)");
    build_dense();
    const double cell_norm =
        std::sqrt(static_cast<double>(part_->cell_vertices(0).size()));
    for (int c = 0; c < part_->num_cells(); ++c) {
      if (cell_means[c] == 0.0) continue;
      Vec h = Vec::Zero(domain_->num_vertices());
      for (int v : part_->cell_vertices(c)) h[v] = 1.0 / cell_norm;
      out += (cell_means[c] * cell_norm) * (dense_L_ * h);
    }
  }
  return out;
}

double PatchingOperator::fixed_point_residual(const Vec& psi) const {
  const Region& dom = *domain_;
  Vec f(dom.num_bonds());
  gradient_into(dom, psi, f);
  for (int e = 0; e < dom.num_bonds(); ++e)
    if (connecting_mask_[e]) f[e] = 0.0;
  Vec rhs_dom;
  divergence_into(dom, f, rhs_dom);
  rhs_dom = -rhs_dom;

  // A+ psi on the domain: 2d psi(v) minus the neighbors inside Q_{2n}
  // (collar neighbors carry psi = 0).
  Vec lhs = 2.0 * dom.d() * psi;
  for (int e = 0; e < dom.num_bonds(); ++e) {
    const Bond& b = dom.bonds()[e];
    lhs[b.tail] -= psi[b.head];
    lhs[b.head] -= psi[b.tail];
  }
  const double denom = std::max(1e-300, rhs_dom.norm());
  return (lhs - rhs_dom).norm() / denom;
}

void PatchingOperator::build_dense() const {
  if (dense_L_.size() != 0) return;
  if (!dense_available_)
    throw std::runtime_error("dense patching matrix capped at d = 2, n <= 1");
  const Region& dom = *domain_;
  const int N = dom.num_vertices();
  const int cells = part_->num_cells();
  const int block_dim = N - cells;

  // Orthonormal basis of the block subspace, cell by cell.
  Eigen::MatrixXd B(N, block_dim);
  int col = 0;
  for (int c = 0; c < cells; ++c) {
    const auto verts = part_->cell_vertices(c);
    const int m = static_cast<int>(verts.size());
    for (int k = 0; k + 1 < m; ++k) {
      Vec v = Vec::Zero(N);
      for (int j = 0; j < m; ++j) v[verts[j]] = (j == k ? 1.0 : 0.0) - 1.0 / m;
      for (int pass = 0; pass < 2; ++pass)
        for (int p = 0; p < col; ++p) v -= B.col(p).dot(v) * B.col(p);
      B.col(col++) = v / v.norm();
    }
  }

  Eigen::MatrixXd img(N, block_dim);
  for (int k = 0; k < block_dim; ++k) img.col(k) = poisson_from_block(B.col(k));

  // Orthonormal basis of im L, then a deterministic completion for
  // (im L)^perp (Gram-Schmidt over canonical seed vectors, tolerance 1e-9).
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(img);
  Eigen::MatrixXd Qimg =
      qr.householderQ() * Eigen::MatrixXd::Identity(N, block_dim);
  Eigen::MatrixXd tilde(N, cells);
  int found = 0;
  for (int seed = 0; seed < N && found < cells; ++seed) {
    Vec v = Vec::Zero(N);
    v[seed] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      v -= Qimg * (Qimg.transpose() * v);
      for (int p = 0; p < found; ++p) v -= tilde.col(p).dot(v) * tilde.col(p);
    }
    if (v.norm() > 1e-9) tilde.col(found++) = v / v.norm();
  }
  if (found < cells)
    throw std::runtime_error("failed to complete the (im L) complement basis");

  const double cell_norm =
      std::sqrt(static_cast<double>(part_->cell_vertices(0).size()));
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(N, cells);
  for (int c = 0; c < cells; ++c)
    for (int v : part_->cell_vertices(c)) H(v, c) = 1.0 / cell_norm;

  dense_L_ = img * B.transpose() + tilde * H.transpose();
}

const Eigen::MatrixXd& PatchingOperator::dense_matrix() const {
  build_dense();
  return dense_L_;
}

double PatchingOperator::logdet_dense() const {
  build_dense();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(dense_L_);
  double s = 0;
  for (int i = 0; i < dense_L_.rows(); ++i)
    s += std::log(std::abs(lu.matrixLU()(i, i)));
  return s;
}

int PatchingOperator::unit_eigenspace_dim() const {
  const Region cell_interior = interior(Region::cube(domain_->d(), n_));
  return static_cast<int>(part_->num_cells()) *
         (cell_interior.num_vertices() - 1);
}

int PatchingOperator::unit_eigenspace_verified_dim(double tol) const {
  const Region& dom = *domain_;
  const std::int64_t half = (pow3(n_) - 1) / 2;
  int verified = 0;
  for (int c = 0; c < part_->num_cells(); ++c) {
    const Point z = part_->cell_origin(c);
    std::vector<int> inner;
    for (int v : part_->cell_vertices(c)) {
      const Point& p = dom.point(v);
      bool strict = true;
      for (int i = 0; i < dom.d(); ++i)
        if (std::abs(p[i] - z[i]) > half - 1) {
          strict = false;
          break;
        }
      if (strict) inner.push_back(v);
    }
    // Independent mean-zero basis supported strictly inside the cell.
    for (size_t k = 0; k + 1 < inner.size(); ++k) {
      Vec u = Vec::Zero(dom.num_vertices());
      u[inner[k]] = 1.0;
      u[inner[k + 1]] = -1.0;
      const Vec Lu = poisson_from_block(u);
      if ((Lu - u).norm() <= tol * u.norm()) ++verified;
    }
  }
  return verified;
}

std::pair<double, double> PatchingOperator::operator_norms(
    int iterations) const {
  if (dense_available_) {
    build_dense();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense_L_);
    const auto& sv = svd.singularValues();
    return {sv(0), 1.0 / sv(sv.size() - 1)};
  }
  // Lanczos with full reorthogonalization on S = M^T M over the block
  // subspace; the basis-map part is an isometry with orthogonal image, so
  // it only contributes singular values 1.
  const int N = domain_->num_vertices();
  const int iters = std::min(iterations, N - part_->num_cells());
  auto apply_S = [&](const Vec& x) {
    return apply_block_adjoint(poisson_from_block(x));
  };
  Rng rng(0xFEEDFACEULL, 0);
  Vec v = Vec::Zero(N);
  for (int i = 0; i < N; ++i) v[i] = rng.normal();
  for (int c = 0; c < part_->num_cells(); ++c) {
    double m = 0;
    for (int w : part_->cell_vertices(c)) m += v[w];
    m /= static_cast<double>(part_->cell_vertices(c).size());
    for (int w : part_->cell_vertices(c)) v[w] -= m;
  }
  v /= v.norm();

  std::vector<Vec> basis;
  std::vector<double> alpha, beta;
  Vec w = v;
  for (int it = 0; it < iters; ++it) {
    basis.push_back(w);
    Vec s = apply_S(w);
    const double a = w.dot(s);
    alpha.push_back(a);
    for (const auto& b : basis) s -= b.dot(s) * b;
    for (const auto& b : basis) s -= b.dot(s) * b;
    const double bn = s.norm();
    if (bn < 1e-13) break;
    beta.push_back(bn);
    w = s / bn;
  }
  const int k = static_cast<int>(alpha.size());
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    T(i, i) = alpha[i];
    if (i + 1 < k) {
      T(i, i + 1) = beta[i];
      T(i + 1, i) = beta[i];
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
  const double smax = std::sqrt(std::max(0.0, es.eigenvalues()(k - 1)));
  const double smin = std::sqrt(std::max(1e-300, es.eigenvalues()(0)));
  return {std::max(1.0, smax), std::max(1.0, 1.0 / smin)};
}

}  // namespace gradphi
