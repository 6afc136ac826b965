#include "gradphi/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace gradphi {

std::string to_string(RegionKind k) {
  switch (k) {
    case RegionKind::cube: return "cube";
    case RegionKind::cube_plus: return "cube_plus";
    case RegionKind::ball: return "ball";
    case RegionKind::difference: return "difference";
    case RegionKind::custom: return "custom";
  }
  return "custom";
}

RegionKind region_kind_from_string(const std::string& s) {
  if (s == "cube") return RegionKind::cube;
  if (s == "cube_plus") return RegionKind::cube_plus;
  if (s == "ball") return RegionKind::ball;
  if (s == "difference") return RegionKind::difference;
  if (s == "custom") return RegionKind::custom;
  throw std::invalid_argument("unknown region kind: " + s);
}

namespace {

void check_dim(int d) {
  if (d < 2 || d > 3) throw std::invalid_argument("dimension must be 2 or 3");
}

// Centered cube of side s (odd): coordinates in [-(s-1)/2, (s-1)/2].
std::vector<Point> centered_box(int d, std::int64_t half) {
  std::vector<Point> pts;
  const std::int64_t side = 2 * half + 1;
  std::int64_t count = 1;
  for (int i = 0; i < d; ++i) count *= side;
  pts.reserve(static_cast<size_t>(count));
  if (d == 2) {
    for (int x = -static_cast<int>(half); x <= half; ++x)
      for (int y = -static_cast<int>(half); y <= half; ++y)
        pts.push_back({x, y, 0});
  } else {
    for (int x = -static_cast<int>(half); x <= half; ++x)
      for (int y = -static_cast<int>(half); y <= half; ++y)
        for (int z = -static_cast<int>(half); z <= half; ++z)
          pts.push_back({x, y, z});
  }
  return pts;
}

}  // namespace

Region Region::cube(int d, int n, Point origin) {
  check_dim(d);
  if (n < 0) throw std::invalid_argument("triadic level must be >= 0");
  const std::int64_t side = pow3(n);
  for (int i = 0; i < d; ++i) {
    if (origin[i] % side != 0)
      throw std::invalid_argument("cube origin must lie in 3^n Z^d");
  }
  auto pts = centered_box(d, (side - 1) / 2);
  for (auto& p : pts)
    for (int i = 0; i < d; ++i) p[i] += origin[i];
  Region r = from_points(d, std::move(pts), RegionKind::cube);
  r.level_ = n;
  return r;
}

Region Region::cube_plus(int d, int n) {
  check_dim(d);
  if (n < 0) throw std::invalid_argument("triadic level must be >= 0");
  // Q_n plus a one-layer collar: side 3^n + 2, interior is exactly Q_n.
  auto pts = centered_box(d, (pow3(n) + 1) / 2);
  Region r = from_points(d, std::move(pts), RegionKind::cube_plus);
  r.level_ = n;
  return r;
}

Region Region::ball(Point center, double radius, const Region& ambient) {
  if (radius < 1.0) throw std::invalid_argument("ball radius must be >= 1");
  if (!ambient.contains(center))
    throw std::invalid_argument("ball center not in ambient region");
  const double r2 = radius * radius;
  std::vector<Point> pts;
  for (const auto& p : ambient.points()) {
    double s = 0;
    for (int i = 0; i < ambient.d(); ++i) {
      const double dx = p[i] - center[i];
      s += dx * dx;
    }
    if (s <= r2) pts.push_back(p);
  }
  return from_points(ambient.d(), std::move(pts), RegionKind::ball);
}

Region Region::difference(const Region& a, const Region& b) {
  if (a.d() != b.d()) throw std::invalid_argument("dimension mismatch");
  std::vector<Point> pts;
  for (const auto& p : a.points())
    if (!b.contains(p)) pts.push_back(p);
  if (pts.empty()) throw std::invalid_argument("empty difference region");
  return from_points(a.d(), std::move(pts), RegionKind::difference);
}

Region Region::from_points(int d, std::vector<Point> pts, RegionKind kind) {
  check_dim(d);
  if (pts.empty()) throw std::invalid_argument("empty region");
  Region r;
  r.d_ = d;
  r.kind_ = kind;
  r.points_ = std::move(pts);
  r.build();
  return r;
}

void Region::build() {
  lo_ = {INT32_MAX, INT32_MAX, INT32_MAX};
  hi_ = {INT32_MIN, INT32_MIN, INT32_MIN};
  for (const auto& p : points_) {
    for (int i = 0; i < d_; ++i) {
      lo_[i] = std::min(lo_[i], p[i]);
      hi_[i] = std::max(hi_[i], p[i]);
    }
  }
  for (int i = d_; i < 3; ++i) lo_[i] = hi_[i] = 0;

  // Row-major order within the bounding box.
  std::array<std::int64_t, 3> ext{1, 1, 1};
  for (int i = 0; i < d_; ++i) ext[i] = hi_[i] - lo_[i] + 1;
  auto flat = [&](const Point& p) -> std::int64_t {
    std::int64_t idx = 0;
    for (int i = 0; i < d_; ++i) idx = idx * ext[i] + (p[i] - lo_[i]);
    return idx;
  };
  std::sort(points_.begin(), points_.end(),
            [&](const Point& a, const Point& b) { return flat(a) < flat(b); });
  points_.erase(std::unique(points_.begin(), points_.end()), points_.end());

  std::int64_t box = 1;
  for (int i = 0; i < d_; ++i) box *= ext[i];
  box_index_.assign(static_cast<size_t>(box), -1);
  for (int i = 0; i < static_cast<int>(points_.size()); ++i)
    box_index_[static_cast<size_t>(flat(points_[i]))] = i;

  bonds_.clear();
  boundary_.clear();
  interior_.clear();
  boundary_mask_.assign(points_.size(), 0);
  for (int i = 0; i < static_cast<int>(points_.size()); ++i) {
    const Point& p = points_[i];
    bool on_boundary = false;
    for (int axis = 0; axis < d_; ++axis) {
      for (int sgn : {+1, -1}) {
        Point q = p;
        q[axis] += sgn;
        const int j = index_of(q);
        if (j < 0) {
          on_boundary = true;
        } else if (sgn == +1) {
          bonds_.push_back({i, j, static_cast<std::int8_t>(axis)});
        }
      }
    }
    if (on_boundary) {
      boundary_.push_back(i);
      boundary_mask_[i] = 1;
    } else {
      interior_.push_back(i);
    }
  }

  incident_offsets_.assign(points_.size() + 1, 0);
  for (const auto& b : bonds_) {
    ++incident_offsets_[b.tail + 1];
    ++incident_offsets_[b.head + 1];
  }
  for (size_t i = 1; i < incident_offsets_.size(); ++i)
    incident_offsets_[i] += incident_offsets_[i - 1];
  incident_.resize(2 * bonds_.size());
  std::vector<int> cursor(incident_offsets_.begin(), incident_offsets_.end() - 1);
  for (int e = 0; e < static_cast<int>(bonds_.size()); ++e) {
    incident_[cursor[bonds_[e].tail]++] = e;
    incident_[cursor[bonds_[e].head]++] = e;
  }
}

int Region::index_of(const Point& p) const {
  std::int64_t idx = 0;
  for (int i = 0; i < d_; ++i) {
    if (p[i] < lo_[i] || p[i] > hi_[i]) return -1;
    idx = idx * (hi_[i] - lo_[i] + 1) + (p[i] - lo_[i]);
  }
  return box_index_[static_cast<size_t>(idx)];
}

std::span<const int> Region::incident_bonds(int vertex) const {
  return {incident_.data() + incident_offsets_[vertex],
          static_cast<size_t>(incident_offsets_[vertex + 1] -
                              incident_offsets_[vertex])};
}

bool Region::same_geometry(const Region& other) const {
  return d_ == other.d_ && points_ == other.points_;
}

RegionPtr make_cube(int d, int n, Point origin) {
  return std::make_shared<Region>(Region::cube(d, n, origin));
}

RegionPtr make_cube_plus(int d, int n) {
  return std::make_shared<Region>(Region::cube_plus(d, n));
}

Region boundary(const Region& r) {
  std::vector<Point> pts;
  pts.reserve(r.boundary_indices().size());
  for (int i : r.boundary_indices()) pts.push_back(r.point(i));
  return Region::from_points(r.d(), std::move(pts), RegionKind::custom);
}

Region interior(const Region& r) {
  std::vector<Point> pts;
  pts.reserve(r.interior_indices().size());
  for (int i : r.interior_indices()) pts.push_back(r.point(i));
  return Region::from_points(r.d(), std::move(pts), RegionKind::custom);
}

Field::Field(RegionPtr region, Vec values)
    : region_(std::move(region)), values_(std::move(values)) {
  if (values_.size() != region_->num_vertices())
    throw std::invalid_argument("field size does not match region");
}

Field Field::zeros(RegionPtr region) {
  Vec v = Vec::Zero(region->num_vertices());
  return Field(std::move(region), std::move(v));
}

EdgeField::EdgeField(RegionPtr region, Vec values)
    : region_(std::move(region)), values_(std::move(values)) {
  if (values_.size() != region_->num_bonds())
    throw std::invalid_argument("edge field size does not match region");
}

EdgeField EdgeField::zeros(RegionPtr region) {
  Vec v = Vec::Zero(region->num_bonds());
  return EdgeField(std::move(region), std::move(v));
}

EdgeField EdgeField::constant(RegionPtr region, const Eigen::VectorXd& p) {
  Vec v(region->num_bonds());
  const auto bonds = region->bonds();
  for (int e = 0; e < region->num_bonds(); ++e) v[e] = p[bonds[e].axis];
  return EdgeField(std::move(region), std::move(v));
}

double EdgeField::directed_value(int tail, int head) const {
  for (int e : region_->incident_bonds(tail)) {
    const Bond& b = region_->bonds()[e];
    if (b.tail == tail && b.head == head) return values_[e];
    if (b.head == tail && b.tail == head) return -values_[e];
  }
  throw std::invalid_argument("not a bond of the region");
}

EdgeField gradient(const Field& f) {
  Vec out(f.region().num_bonds());
  gradient_into(f.region(), f.values(), out);
  return EdgeField(f.region_ptr(), std::move(out));
}

void gradient_into(const Region& r, const Vec& f, Vec& out) {
  const auto bonds = r.bonds();
  out.resize(r.num_bonds());
  for (int e = 0; e < r.num_bonds(); ++e)
    out[e] = f[bonds[e].head] - f[bonds[e].tail];
}

Field divergence(const EdgeField& g) {
  Vec out(g.region().num_vertices());
  divergence_into(g.region(), g.values(), out);
  return Field(g.region_ptr(), std::move(out));
}

void divergence_into(const Region& r, const Vec& g, Vec& out) {
  out.setZero(r.num_vertices());
  const auto bonds = r.bonds();
  for (int e = 0; e < r.num_bonds(); ++e) {
    out[bonds[e].tail] += g[e];
    out[bonds[e].head] -= g[e];
  }
}

Field laplacian(const Field& f) {
  // divergence(gradient(f)) exactly, region-internal edges only.
  Vec g(f.region().num_bonds());
  gradient_into(f.region(), f.values(), g);
  Vec out;
  divergence_into(f.region(), g, out);
  return Field(f.region_ptr(), std::move(out));
}

double mean(const Field& f) { return f.values().mean(); }

double mean(const Field& f, const Region& sub) {
  if (sub.num_vertices() == 0) throw std::invalid_argument("empty sub-region");
  double s = 0;
  for (const auto& p : sub.points()) {
    const int i = f.region().index_of(p);
    if (i < 0) throw std::invalid_argument("sub-region not contained in region");
    s += f(i);
  }
  return s / sub.num_vertices();
}

Eigen::VectorXd slope(const EdgeField& g) {
  const Region& r = g.region();
  Eigen::VectorXd s = Eigen::VectorXd::Zero(r.d());
  const auto bonds = r.bonds();
  for (int e = 0; e < r.num_bonds(); ++e) s[bonds[e].axis] += g(e);
  return s / static_cast<double>(r.num_vertices());
}

Eigen::VectorXd slope(const EdgeField& g, const Region& sub) {
  const Region& r = g.region();
  Eigen::VectorXd s = Eigen::VectorXd::Zero(r.d());
  // Sum over bonds with both endpoints in sub.
  const auto bonds = r.bonds();
  for (int e = 0; e < r.num_bonds(); ++e) {
    if (sub.contains(r.point(bonds[e].tail)) &&
        sub.contains(r.point(bonds[e].head)))
      s[bonds[e].axis] += g(e);
  }
  return s / static_cast<double>(sub.num_vertices());
}

Field affine_field(RegionPtr region, const Eigen::VectorXd& p) {
  Vec v(region->num_vertices());
  for (int i = 0; i < region->num_vertices(); ++i) {
    const Point& x = region->point(i);
    double s = 0;
    for (int k = 0; k < region->d(); ++k) s += p[k] * x[k];
    v[i] = s;
  }
  return Field(std::move(region), std::move(v));
}

TriadicPartition::TriadicPartition(RegionPtr cube, int m)
    : cube_(std::move(cube)), m_(m), n_(cube_->level()) {
  if (cube_->kind() != RegionKind::cube)
    throw std::invalid_argument("partition requires a triadic cube");
  if (m < 0 || m >= n_)
    throw std::invalid_argument("partition requires 0 <= m < n");
  const Region& Q = *cube_;
  const int d = Q.d();
  const std::int64_t cm = pow3(m);
  const std::int64_t half_cell = (cm - 1) / 2;

  // Z_{m,n} = 3^m Z^d intersected with Q_n.
  std::vector<Point> zs;
  for (const auto& p : Q.points()) {
    bool is_z = true;
    for (int i = 0; i < d; ++i)
      if (p[i] % cm != 0) { is_z = false; break; }
    if (is_z) zs.push_back(p);
  }
  cell_origins_ = std::move(zs);

  cell_of_vertex_.assign(Q.num_vertices(), -1);
  cell_vertices_.assign(cell_origins_.size(), {});
  // Map a vertex to its cell via rounding to the nearest 3^m grid point.
  // Origins come out of Q.points() already in lexicographic order.
  auto cell_index = [&](const Point& p) -> int {
    Point z{0, 0, 0};
    for (int i = 0; i < d; ++i) {
      // Nearest multiple of 3^m: cells are z + [-half, half].
      const std::int64_t shifted = p[i] + half_cell;
      std::int64_t f = shifted >= 0 ? shifted / cm : -((-shifted + cm - 1) / cm);
      z[i] = static_cast<int>(f * cm);
    }
    const auto it =
        std::lower_bound(cell_origins_.begin(), cell_origins_.end(), z);
    if (it == cell_origins_.end() || *it != z) return -1;
    return static_cast<int>(it - cell_origins_.begin());
  };
  for (int v = 0; v < Q.num_vertices(); ++v) {
    const int c = cell_index(Q.point(v));
    if (c < 0) throw std::logic_error("vertex not covered by a cell");
    cell_of_vertex_[v] = c;
    cell_vertices_[c].push_back(v);
  }

  cell_bonds_.assign(cell_origins_.size(), {});
  connecting_.clear();
  const auto bonds = Q.bonds();
  for (int e = 0; e < Q.num_bonds(); ++e) {
    const int ca = cell_of_vertex_[bonds[e].tail];
    const int cb = cell_of_vertex_[bonds[e].head];
    if (ca == cb)
      cell_bonds_[ca].push_back(e);
    else
      connecting_.push_back(e);
  }
}

TriadicPartition partition(int d, int m, int n) {
  return TriadicPartition(make_cube(d, n), m);
}

void dump_field(const Field& f, std::ostream& os) {
  const Region& r = f.region();
  os << r.d() << ' ' << r.level() << ' ' << to_string(r.kind()) << '\n';
  char buf[64];
  for (int i = 0; i < r.num_vertices(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", f(i));
    os << buf << '\n';
  }
}

Field load_field(std::istream& is) {
  int d = 0, n = 0;
  std::string kind_str;
  if (!(is >> d >> n >> kind_str))
    throw std::runtime_error("field dump: bad header");
  const RegionKind kind = region_kind_from_string(kind_str);
  RegionPtr region;
  if (kind == RegionKind::cube)
    region = make_cube(d, n);
  else if (kind == RegionKind::cube_plus)
    region = make_cube_plus(d, n);
  else
    throw std::runtime_error("field dump: only cube regions round-trip");
  Vec v(region->num_vertices());
  for (int i = 0; i < region->num_vertices(); ++i) {
    if (!(is >> v[i])) throw std::runtime_error("field dump: truncated values");
  }
  return Field(std::move(region), std::move(v));
}

void dump_field_file(const Field& f, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  dump_field(f, os);
}

Field load_field_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return load_field(is);
}

}  // namespace gradphi
