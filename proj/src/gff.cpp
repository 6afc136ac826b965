#include "gradphi/gff.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace gradphi {

Vec tilt_functional(const Region& r, const Eigen::VectorXd& q) {
  Vec b = Vec::Zero(r.num_vertices());
  for (int e = 0; e < r.num_bonds(); ++e) {
    const Bond& bd = r.bonds()[e];
    // b = -div q for the constant field q.
    b[bd.tail] -= q[bd.axis];
    b[bd.head] += q[bd.axis];
  }
  return b;
}

Eigen::VectorXd axis_bond_counts(const Region& r) {
  Eigen::VectorXd per_axis = Eigen::VectorXd::Zero(r.d());
  for (int e = 0; e < r.num_bonds(); ++e)
    per_axis[r.bonds()[e].axis] += 1.0;
  return per_axis;
}

double tilt_energy(const Region& r, const Eigen::VectorXd& p) {
  const Eigen::VectorXd per_axis = axis_bond_counts(r);
  double s = 0;
  for (int i = 0; i < r.d(); ++i) s += per_axis[i] * p[i] * p[i];
  return s;
}

GaussianExact::GaussianExact(RegionPtr region, double beta, Bc bc)
    : beta_(beta), bc_(bc) {
  if (!(beta > 0)) throw std::invalid_argument("beta must be positive");
  axis_bonds_ = axis_bond_counts(*region);
  if (bc == Bc::dirichlet) {
    dir_ = std::make_shared<DirichletOperator>(std::move(region));
    // The p-cross term in nu relies on the constant field being
    // divergence-free at interior vertices; verify rather than assume.
    const Region& r = dir_->region();
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(r.d());
    for (int axis = 0; axis < r.d(); ++axis) {
      e1.setZero();
      e1[axis] = 1.0;
      const Vec b = tilt_functional(r, e1);
      for (int i : r.interior_indices())
        if (std::abs(b[i]) > 1e-12)
          throw std::logic_error("constant field not divergence-free in interior");
    }
  } else {
    neu_ = std::make_shared<NeumannOperator>(std::move(region));
  }
}

const Region& GaussianExact::region() const {
  return bc_ == Bc::dirichlet ? dir_->region() : neu_->region();
}

double GaussianExact::logdet() const {
  return bc_ == Bc::dirichlet ? dir_->logdet() : neu_->pseudo_logdet();
}

double GaussianExact::nu(const Eigen::VectorXd& p) const {
  if (bc_ != Bc::dirichlet) throw std::logic_error("nu needs the Dirichlet operator");
  const Region& r = dir_->region();
  const double vol = r.num_vertices();
  const double N = dir_->dim();
  double tilt_mass = 0;
  for (int i = 0; i < r.d(); ++i) tilt_mass += axis_bonds_[i] * p[i] * p[i];
  return beta_ / vol * tilt_mass -
         (0.5 * N * std::log(M_PI / beta_) - 0.5 * dir_->logdet()) / vol;
}

Eigen::MatrixXd GaussianExact::nustar_tilt_form() const {
  // b(q) is linear in q, so the pseudo-inverse pairing is the quadratic form
  // q^T M q with M_ij = b_i^T L^+ b_j / (4 beta |Q|).
  return slope_variance() * (region().num_vertices() / 2.0);
}

double GaussianExact::nustar(const Eigen::VectorXd& q) const {
  if (bc_ != Bc::neumann) throw std::logic_error("nustar needs the Neumann operator");
  const Region& r = neu_->region();
  const double vol = r.num_vertices();
  const Vec b = tilt_functional(r, q);
  const double quad = q.isZero() ? 0.0 : b.dot(neu_->pseudo_solve(b)) / (4 * beta_);
  return (quad + 0.5 * (vol - 1) * std::log(M_PI / beta_) -
          0.5 * neu_->pseudo_logdet()) /
         vol;
}

Eigen::VectorXd GaussianExact::grad_nustar(const Eigen::VectorXd& q) const {
  if (bc_ != Bc::neumann) throw std::logic_error("grad_nustar needs the Neumann operator");
  const Region& r = neu_->region();
  const Vec w = q.isZero() ? Vec::Zero(r.num_vertices())
                           : neu_->pseudo_solve(tilt_functional(r, q));
  Eigen::VectorXd g(r.d());
  for (int axis = 0; axis < r.d(); ++axis) {
    Eigen::VectorXd ei = Eigen::VectorXd::Zero(r.d());
    ei[axis] = 1.0;
    g[axis] = tilt_functional(r, ei).dot(w) /
              (2 * beta_ * static_cast<double>(r.num_vertices()));
  }
  return g;
}

Eigen::MatrixXd GaussianExact::slope_variance() const {
  if (bc_ != Bc::neumann) throw std::logic_error("slope_variance needs the Neumann operator");
  const Region& r = neu_->region();
  const double vol = r.num_vertices();
  const int d = r.d();
  std::vector<Vec> bs(d), ws(d);
  for (int axis = 0; axis < d; ++axis) {
    Eigen::VectorXd ei = Eigen::VectorXd::Zero(d);
    ei[axis] = 1.0;
    bs[axis] = tilt_functional(r, ei);
    ws[axis] = neu_->pseudo_solve(bs[axis]);
  }
  Eigen::MatrixXd cov(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      cov(i, j) = bs[i].dot(ws[j]) / (2 * beta_ * vol * vol);
  return 0.5 * (cov + cov.transpose());
}

double GaussianExact::l2_trace() const {
  if (bc_ != Bc::dirichlet) throw std::logic_error("l2_trace needs the Dirichlet operator");
  const int N = dir_->dim();
  const Region& r = dir_->region();

  // Centered cubes: the diagonal of A^{-1} is constant on the orbits of the
  // coordinate-permutation/sign group, so one solve per orbit representative
  // suffices.
  if (r.kind() == RegionKind::cube || r.kind() == RegionKind::cube_plus) {
    const auto interior_idx = r.interior_indices();
    std::map<std::array<int, 3>, std::pair<int, long>> orbits;  // rep, count
    for (int k = 0; k < N; ++k) {
      const Point& p = r.point(interior_idx[k]);
      std::array<int, 3> key{std::abs(p[0]), std::abs(p[1]), std::abs(p[2])};
      std::sort(key.begin(), key.begin() + r.d());
      auto [it, inserted] = orbits.try_emplace(key, k, 0);
      ++it->second.second;
    }
    if (static_cast<long>(orbits.size()) <= 16384) {
      double tr = 0;
      Vec e = Vec::Zero(N);
      for (const auto& [key, rep_count] : orbits) {
        e[rep_count.first] = 1.0;
        tr += rep_count.second * dir_->solve(e)[rep_count.first];
        e[rep_count.first] = 0.0;
      }
      return tr / (2 * beta_);
    }
  }

  if (N <= 16384) {
    double tr = 0;
    Vec e = Vec::Zero(N);
    for (int i = 0; i < N; ++i) {
      e[i] = 1.0;
      tr += dir_->solve(e)[i];
      e[i] = 0.0;
    }
    return tr / (2 * beta_);
  }
  // Hutchinson with Rademacher probes until 3 stderr < 0.5% of the estimate.
  Rng rng(20'220'101, 7);
  double sum = 0, sumsq = 0;
  int k = 0;
  Vec z(N);
  while (k < 100000) {
    for (int i = 0; i < N; ++i) z[i] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const double est = z.dot(dir_->solve(z));
    sum += est;
    sumsq += est * est;
    ++k;
    if (k >= 64) {
      const double mean = sum / k;
      const double var = (sumsq - k * mean * mean) / (k - 1);
      if (3 * std::sqrt(var / k) < 0.005 * std::abs(mean))
        return mean / (2 * beta_);
    }
  }
  throw std::runtime_error("trace estimation budget exceeded");
}

namespace {
double inv(double x) { return 1.0 / x; }
double lg(double x) { return std::log(x); }
}  // namespace

std::vector<double> dirichlet_spectrum_1d(int interior_side) {
  std::vector<double> ev(interior_side);
  for (int k = 1; k <= interior_side; ++k) {
    const double s = std::sin(0.5 * M_PI * k / (interior_side + 1));
    ev[k - 1] = 4.0 * s * s;
  }
  return ev;
}

std::vector<double> neumann_spectrum_1d(int side) {
  std::vector<double> ev(side);
  for (int k = 0; k < side; ++k) {
    const double s = std::sin(0.5 * M_PI * k / side);
    ev[k] = 4.0 * s * s;
  }
  return ev;
}

double neumann_spectral_sum(int d, int n, double (*f)(double)) {
  const int side = static_cast<int>(pow3(n));
  const auto ev = neumann_spectrum_1d(side);
  double s = 0;
  if (d == 2) {
    for (int i = 0; i < side; ++i)
      for (int j = 0; j < side; ++j) {
        if (i == 0 && j == 0) continue;
        s += f(ev[i] + ev[j]);
      }
  } else if (d == 3) {
    for (int i = 0; i < side; ++i)
      for (int j = 0; j < side; ++j)
        for (int k = 0; k < side; ++k) {
          if (i == 0 && j == 0 && k == 0) continue;
          s += f(ev[i] + ev[j] + ev[k]);
        }
  } else {
    throw std::invalid_argument("dimension must be 2 or 3");
  }
  return s;
}

double GaussianExact::field_l2_trace() const {
  if (bc_ != Bc::neumann) throw std::logic_error("field_l2_trace needs the Neumann operator");
  const Region& r = neu_->region();
  if (r.kind() != RegionKind::cube)
    throw std::invalid_argument("spectral trace only for cubes");
  return neumann_spectral_sum(r.d(), r.level(), inv) / (2 * beta_);
}

Vec GaussianExact::mean_field(const Eigen::VectorXd& tilt) const {
  if (bc_ == Bc::dirichlet)
    return Vec::Zero(dir_->region().num_vertices());
  if (tilt.isZero()) return Vec::Zero(neu_->region().num_vertices());
  return neu_->pseudo_solve(tilt_functional(neu_->region(), tilt)) / (2 * beta_);
}

double GaussianExact::mean_gradient_energy(const Eigen::VectorXd& tilt) const {
  if (bc_ == Bc::dirichlet) {
    const Region& r = dir_->region();
    // E sum_e beta (p.e + grad phi)^2; the cross term has mean zero.
    return beta_ * (tilt_energy(r, tilt) + dir_->dim() / (2 * beta_)) /
           r.num_vertices();
  }
  const Region& r = neu_->region();
  const Vec mu = mean_field(tilt);
  Vec g(r.num_bonds());
  gradient_into(r, mu, g);
  return beta_ *
         ((r.num_vertices() - 1) / (2 * beta_) + g.squaredNorm()) /
         r.num_vertices();
}

Vec GaussianExact::sample(Rng& rng, const Eigen::VectorXd& tilt) const {
  if (bc_ == Bc::dirichlet) {
    Vec xi(dir_->dim());
    for (int i = 0; i < xi.size(); ++i) xi[i] = rng.normal();
    // Precision 2 beta A; the tilt does not shift the Dirichlet field.
    return dir_->extend(dir_->sample_interior(xi) / std::sqrt(2 * beta_));
  }
  Vec xi(neu_->dim() - 1);
  for (int i = 0; i < xi.size(); ++i) xi[i] = rng.normal();
  Vec z = neu_->sample_mean_zero(xi, beta_);
  if (!tilt.isZero()) z += mean_field(tilt);
  return z;
}

double nu_exact(int d, int n, double beta, const Eigen::VectorXd& p) {
  GaussianExact g(make_cube(d, n), beta, GaussianExact::Bc::dirichlet);
  return g.nu(p);
}

double nustar_exact(int d, int n, double beta, const Eigen::VectorXd& q) {
  GaussianExact g(make_cube(d, n), beta, GaussianExact::Bc::neumann);
  return g.nustar(q);
}

Eigen::VectorXd grad_nustar_exact(int d, int n, double beta,
                                  const Eigen::VectorXd& q) {
  GaussianExact g(make_cube(d, n), beta, GaussianExact::Bc::neumann);
  return g.grad_nustar(q);
}

Eigen::MatrixXd slope_variance_exact(int d, int n, double beta) {
  GaussianExact g(make_cube(d, n), beta, GaussianExact::Bc::neumann);
  return g.slope_variance();
}

double l2_trace_exact(int d, int n, double beta) {
  GaussianExact g(make_cube(d, n), beta, GaussianExact::Bc::dirichlet);
  return g.l2_trace();
}

double block_log_integral_exact(int d, int m, int n, double lambda) {
  if (!(0 <= m && m < n)) throw std::invalid_argument("need 0 <= m < n");
  if (!(lambda > 0)) throw std::invalid_argument("lambda must be positive");
  // In coarse coordinates the form is lambda 3^{-m} mu^T L_c mu with L_c the
  // Neumann Laplacian of Q_{n-m} (the isometry carries the 3^{dm/2} scaling).
  const std::int64_t K = ipow(3, d * (n - m)) - 1;
  const double pseudo_logdet = neumann_spectral_sum(d, n - m, lg);
  return 0.5 * K * std::log(M_PI * pow3(m) / lambda) - 0.5 * pseudo_logdet;
}

ExtrapolationResult extrapolate_limit(
    const std::vector<std::pair<int, double>>& values) {
  ExtrapolationResult res;
  if (values.size() < 3)
    throw std::invalid_argument("extrapolation needs >= 3 levels");
  auto v = values;
  std::sort(v.begin(), v.end());
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i].first != v[i - 1].first + 1)
      throw std::invalid_argument("extrapolation needs consecutive levels");

  const size_t N = v.size();
  std::vector<double> dif(N - 1);
  for (size_t i = 0; i + 1 < N; ++i) dif[i] = v[i].second - v[i + 1].second;

  const double scale = std::max(1e-300, std::abs(v.back().second));
  if (std::all_of(dif.begin(), dif.end(),
                  [&](double t) { return std::abs(t) < 1e-14 * scale; })) {
    res.limit = v.back().second;
    res.identifiable = false;
    res.flag = "constant sequence: rate unidentifiable";
    return res;
  }

  // Largest suffix of constant-sign differences.
  const double last_sign = dif.back() > 0 ? 1.0 : -1.0;
  size_t k = dif.size();
  while (k > 0 && dif[k - 1] * last_sign > 0) --k;
  const size_t tail_begin = k;  // index into v of the first tail level
  res.tail_start = v[tail_begin].first;
  if (N - tail_begin < 3) {
    res.monotone_tail = false;
    res.identifiable = false;
    res.flag = "monotone tail shorter than 3 levels";
    res.limit = v.back().second;
    return res;
  }

  // Exact geometric solve through the last three levels.
  const double t1 = v[N - 3].second - v[N - 2].second;
  const double t2 = v[N - 2].second - v[N - 1].second;
  const double x = t2 / t1;
  if (!(x > 0 && x < 1)) {
    res.identifiable = false;
    res.flag = "difference ratio outside (0,1): not geometric";
    res.limit = v.back().second;
    return res;
  }
  res.rate = -std::log(x) / std::log(3.0);
  res.limit = v.back().second - t2 * x / (1 - x);
  res.coeff = t2 * x / (1 - x) / std::pow(x, static_cast<double>(v.back().first));

  double ss = 0;
  for (size_t i = tail_begin; i < N; ++i) {
    const double model =
        res.limit + res.coeff * std::pow(x, static_cast<double>(v[i].first));
    ss += (model - v[i].second) * (model - v[i].second);
  }
  res.residual = std::sqrt(ss / static_cast<double>(N - tail_begin));
  if (tail_begin > 0) res.flag = "non-monotone head dropped";
  return res;
}

}  // namespace gradphi
