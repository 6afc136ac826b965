#include "gradphi/homog.hpp"
#include "gradphi/rng.hpp"

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

using namespace gradphi;

namespace {

Vec random_zero_boundary(const Region& r, Rng& rng) {
  Vec v = Vec::Zero(r.num_vertices());
  for (int i : r.interior_indices()) v[i] = rng.normal();
  return v;
}

// Extend an inner-bond edge field by zero to the bonds of the plus region.
Vec extend_edges(const Region& inner, const Vec& f, const Region& plus) {
  Vec out = Vec::Zero(plus.num_bonds());
  for (int e = 0; e < plus.num_bonds(); ++e) {
    const Bond& b = plus.bonds()[e];
    const int t = inner.index_of(plus.point(b.tail));
    const int h = inner.index_of(plus.point(b.head));
    if (t < 0 || h < 0) continue;
    for (int ie : inner.incident_bonds(t)) {
      const Bond& ib = inner.bonds()[ie];
      if (ib.tail == t && ib.head == h) out[e] = f[ie];
    }
  }
  return out;
}

}  // namespace

TEST_CASE("poisson solve: exact representability and optimality") {
  auto inner = make_cube(2, 2);
  auto plus = make_cube_plus(2, 2);
  Rng rng(31);

  SUBCASE("f = grad g reconstructs g") {
    const Vec g = random_zero_boundary(*inner, rng);
    Vec fg(inner->num_bonds());
    gradient_into(*inner, g, fg);
    const Field kappa = poisson_dirichlet(EdgeField(inner, fg), plus);
    for (int i = 0; i < inner->num_vertices(); ++i) {
      const int j = plus->index_of(inner->point(i));
      CHECK(kappa(j) == doctest::Approx(g[i]).epsilon(1e-8));
    }
  }

  SUBCASE("f = 0 gives kappa = 0") {
    const Field kappa = poisson_dirichlet(EdgeField::zeros(inner), plus);
    CHECK(kappa.values().cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("kappa is the closest gradient among zero-boundary competitors") {
    Vec f(inner->num_bonds());
    for (int e = 0; e < f.size(); ++e) f[e] = rng.normal();
    const Field kappa = poisson_dirichlet(EdgeField(inner, f), plus);
    const Vec fext = extend_edges(*inner, f, *plus);
    Vec gk(plus->num_bonds());
    gradient_into(*plus, kappa.values(), gk);
    const double best = (fext - gk).squaredNorm();
    for (int rep = 0; rep < 100; ++rep) {
      const Vec g = random_zero_boundary(*plus, rng);
      Vec gg(plus->num_bonds());
      gradient_into(*plus, g, gg);
      CHECK(best <= (fext - gg).squaredNorm() + 1e-9);
    }
  }
}

TEST_CASE("block projection is an orthogonal split") {
  auto q2 = make_cube(2, 2);
  const TriadicPartition part(q2, 1);
  Rng rng(33);

  SUBCASE("per-cell mean-zero input has no constant part") {
    Vec v(q2->num_vertices());
    for (int i = 0; i < v.size(); ++i) v[i] = rng.normal();
    for (int c = 0; c < part.num_cells(); ++c) {
      double m = 0;
      for (int w : part.cell_vertices(c)) m += v[w];
      m /= 9.0;
      for (int w : part.cell_vertices(c)) v[w] -= m;
    }
    const auto [block, constant] = project_blocks(Field(q2, v), part);
    CHECK(constant.values().cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("step function has no block part") {
    Vec v(q2->num_vertices());
    for (int c = 0; c < part.num_cells(); ++c)
      for (int w : part.cell_vertices(c)) v[w] = 1.0 + c;
    const auto [block, constant] = project_blocks(Field(q2, v), part);
    CHECK(block.values().cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("pythagoras and reconstruction") {
    Vec v(q2->num_vertices());
    for (int i = 0; i < v.size(); ++i) v[i] = rng.normal();
    const auto [block, constant] = project_blocks(Field(q2, v), part);
    CHECK((block.values() + constant.values() - v).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK(v.squaredNorm() ==
          doctest::Approx(block.values().squaredNorm() +
                          constant.values().squaredNorm())
              .epsilon(1e-10));
  }
}

TEST_CASE("patching operator at n = 1: dense path") {
  PatchingOperator L(2, 1);
  REQUIRE(L.dense_path());
  const int N = L.domain().num_vertices();

  SUBCASE("h_i maps to an orthonormal system orthogonal to im L") {
    const TriadicPartition& part = L.cells();
    std::vector<Vec> images;
    for (int c = 0; c < part.num_cells(); ++c) {
      Vec h = Vec::Zero(N);
      for (int v : part.cell_vertices(c)) h[v] = 1.0 / 3.0;
      images.push_back(L.apply(h));
    }
    Rng rng(35);
    for (size_t i = 0; i < images.size(); ++i) {
      CHECK(images[i].norm() == doctest::Approx(1.0).epsilon(1e-9));
      for (size_t j = 0; j < i; ++j)
        CHECK(std::abs(images[i].dot(images[j])) < 1e-9);
      // orthogonal to block images
      for (int rep = 0; rep < 5; ++rep) {
        Vec v(N);
        for (int k = 0; k < N; ++k) v[k] = rng.normal();
        const auto [block, constant] =
            project_blocks(Field(make_cube(2, 2), v), part);
        const Vec img = L.apply_block(block.values());
        CHECK(std::abs(images[i].dot(img)) < 1e-7 * img.norm());
      }
    }
  }

  SUBCASE("log determinant is finite and within the envelope") {
    const double ld = L.logdet_dense();
    CHECK(std::isfinite(ld));
    // |ln det L| <= C 3^{(2d-1)n} n at d = 2, n = 1.
    const double c_fit = std::abs(ld) / 27.0;
    CHECK(c_fit < 10.0);
    MESSAGE("fitted logdet constant: ", c_fit);
  }

  SUBCASE("norms from the dense SVD") {
    const auto [nl, nli] = L.operator_norms(200);
    CHECK(nl * nli >= 1.0);
    CHECK(nl <= 10.0 * 9.0);   // C 3^{2n} envelope with generous C
    CHECK(nli <= 10.0 * 9.0);
    MESSAGE("norms at n=1: ", nl, " ", nli);
  }

  SUBCASE("unit eigenspace from cell interiors is empty at n = 1") {
    CHECK(L.unit_eigenspace_dim() == 0);
  }

  SUBCASE("gradient contraction for block inputs") {
    Rng rng(37);
    auto qp = make_cube_plus(2, 2);
    for (int rep = 0; rep < 20; ++rep) {
      Vec v(N);
      for (int k = 0; k < N; ++k) v[k] = rng.normal();
      const auto [block, constant] =
          project_blocks(Field(make_cube(2, 2), v), L.cells());
      const Vec img = L.apply_block(block.values());
      // gradients on Q+ of the zero extension
      Vec ext = Vec::Zero(qp->num_vertices());
      for (int i = 0; i < N; ++i)
        ext[qp->index_of(L.domain().point(i))] = img[i];
      Vec gimg(qp->num_bonds());
      gradient_into(*qp, ext, gimg);
      double rhs = 0;
      for (int c = 0; c < L.cells().num_cells(); ++c)
        for (int e : L.cells().cell_bonds(c)) {
          const Bond& b = L.domain().bonds()[e];
          const double g = block.values()[b.head] - block.values()[b.tail];
          rhs += g * g;
        }
      CHECK(gimg.squaredNorm() <= rhs + 1e-9);
    }
  }

  SUBCASE("injectivity witness") {
    Rng rng(39);
    const auto [nl, nli] = L.operator_norms(200);
    for (int rep = 0; rep < 100; ++rep) {
      Vec v(N);
      for (int k = 0; k < N; ++k) v[k] = rng.normal();
      const Vec img = L.apply(v);
      CHECK(img.norm() > 0.5 * v.norm() / nli);
    }
  }
}

TEST_CASE("block adjoint is the true adjoint; Lanczos matches dense SVD") {
  PatchingOperator L(2, 1);
  const int N = L.domain().num_vertices();
  Rng rng(41);

  // adjoint identity <M x, y> = <x, M^T y> on random vectors
  for (int rep = 0; rep < 10; ++rep) {
    Vec x(N), y(N);
    for (int k = 0; k < N; ++k) {
      x[k] = rng.normal();
      y[k] = rng.normal();
    }
    const auto [xb, xc] = project_blocks(Field(make_cube(2, 2), x), L.cells());
    const double lhs = L.apply_block(xb.values()).dot(y);
    const double rhs = xb.values().dot(L.apply_block_adjoint(y));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
  }

  // dense block singular values vs the Krylov estimate
  const TriadicPartition& part = L.cells();
  const int block_dim = N - part.num_cells();
  Eigen::MatrixXd B(N, block_dim);
  int col = 0;
  for (int c = 0; c < part.num_cells(); ++c) {
    const auto verts = part.cell_vertices(c);
    const int m = static_cast<int>(verts.size());
    for (int k = 0; k + 1 < m; ++k) {
      Vec v = Vec::Zero(N);
      for (int j = 0; j < m; ++j) v[verts[j]] = (j == k ? 1.0 : 0.0) - 1.0 / m;
      for (int pass = 0; pass < 2; ++pass)
        for (int p = 0; p < col; ++p) v -= B.col(p).dot(v) * B.col(p);
      B.col(col++) = v / v.norm();
    }
  }
  Eigen::MatrixXd M(N, block_dim);
  for (int k = 0; k < block_dim; ++k) M.col(k) = L.apply_block(B.col(k));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(block_dim - 1);

  const auto [nl, nli] = L.operator_norms(200);
  CHECK(nl == doctest::Approx(std::max(1.0, smax)).epsilon(1e-6));
  CHECK(nli == doctest::Approx(std::max(1.0, 1.0 / smin)).epsilon(1e-6));
}

TEST_CASE("patched field solves the Poisson equation, checked by stencil") {
  // Delta kappa(x) = div f(x) at every vertex of Q_{2n}, with the Laplacian
  // of Q_{2n}+ (collar values zero) and f the block gradient zeroed across
  // connecting bonds; verified with raw neighbor arithmetic.
  PatchingOperator L(2, 1);
  const Region& dom = L.domain();
  auto qp = make_cube_plus(2, 2);
  Rng rng(61);
  Vec psi(dom.num_vertices());
  for (int i = 0; i < psi.size(); ++i) psi[i] = rng.normal();
  const auto [block, constant] =
      project_blocks(Field(make_cube(2, 2), psi), L.cells());
  const Vec kappa = L.apply_block(block.values());

  auto kappa_at = [&](const Point& pt) {
    const int i = dom.index_of(pt);
    return i >= 0 ? kappa[i] : 0.0;  // zero on the collar
  };
  for (int x = 0; x < dom.num_vertices(); ++x) {
    const Point& p = dom.point(x);
    double lap = -4.0 * kappa[x];
    double divf = 0;
    for (int axis = 0; axis < 2; ++axis) {
      for (int sgn : {+1, -1}) {
        Point nb = p;
        nb[axis] += sgn;
        REQUIRE(qp->contains(nb));
        lap += kappa_at(nb);
        const int j = dom.index_of(nb);
        if (j >= 0 && L.cells().cell_of_vertex(j) == L.cells().cell_of_vertex(x))
          divf += block.values()[j] - block.values()[x];
      }
    }
    CHECK(lap == doctest::Approx(divf).epsilon(1e-7).scale(1.0));
  }
}

TEST_CASE("patching at n = 2: cell-interior fields are fixed") {
  PatchingOperator L(2, 2);
  CHECK(L.unit_eigenspace_dim() == 81 * 48);

  // A few representative basis vectors, checked with full solves and the
  // exact residual witness.
  const Region& dom = L.domain();
  Rng rng(43);
  int checked = 0;
  for (int c = 0; c < L.cells().num_cells() && checked < 6; c += 17) {
    const Point z = L.cells().cell_origin(c);
    Vec u = Vec::Zero(dom.num_vertices());
    // difference of two strictly interior vertices of the cell
    const Point a{z[0], z[1], 0}, b{z[0] + 1, z[1] - 1, 0};
    u[dom.index_of(a)] = 1.0;
    u[dom.index_of(b)] = -1.0;
    const Vec img = L.apply_block(u);
    CHECK((img - u).norm() < 1e-8 * u.norm());
    CHECK(L.fixed_point_residual(u) < 1e-12);
    ++checked;
  }
  CHECK(checked > 0);
}
