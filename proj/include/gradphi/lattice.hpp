#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gradphi {

using Vec = Eigen::VectorXd;

// Lattice point of Z^d, d <= 3; unused coordinates stay 0.
using Point = std::array<int, 3>;

inline std::int64_t ipow(std::int64_t base, int exp) {
  std::int64_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

inline std::int64_t pow3(int n) { return ipow(3, n); }

enum class RegionKind { cube, cube_plus, ball, difference, custom };

std::string to_string(RegionKind k);
RegionKind region_kind_from_string(const std::string& s);

// Canonically oriented bond: head = tail + e_axis.
struct Bond {
  std::int32_t tail;
  std::int32_t head;
  std::int8_t axis;
};

// Finite vertex set of Z^d. Immutable; bonds, boundary and interior are
// computed once at construction. Vertices are indexed row-major within the
// bounding box (first coordinate slowest).
class Region {
 public:
  static Region cube(int d, int n, Point origin = {0, 0, 0});
  static Region cube_plus(int d, int n);
  static Region ball(Point center, double radius, const Region& ambient);
  static Region difference(const Region& a, const Region& b);
  static Region from_points(int d, std::vector<Point> pts, RegionKind kind);

  int d() const { return d_; }
  RegionKind kind() const { return kind_; }
  // Triadic level for cube / cube_plus regions, -1 otherwise.
  int level() const { return level_; }

  int num_vertices() const { return static_cast<int>(points_.size()); }
  int num_bonds() const { return static_cast<int>(bonds_.size()); }

  const Point& point(int i) const { return points_[i]; }
  std::span<const Point> points() const { return points_; }
  std::span<const Bond> bonds() const { return bonds_; }

  // Index of a lattice point, or -1 if not in the region.
  int index_of(const Point& p) const;
  bool contains(const Point& p) const { return index_of(p) >= 0; }

  std::span<const int> boundary_indices() const { return boundary_; }
  std::span<const int> interior_indices() const { return interior_; }
  bool is_boundary(int i) const { return boundary_mask_[i] != 0; }

  // Vertex -> incident bond indices (for force evaluations).
  std::span<const int> incident_bonds(int vertex) const;

  bool same_geometry(const Region& other) const;

 private:
  void build();

  int d_ = 2;
  int level_ = -1;
  RegionKind kind_ = RegionKind::custom;
  std::vector<Point> points_;
  Point lo_{0, 0, 0};
  Point hi_{0, 0, 0};
  std::vector<std::int32_t> box_index_;  // bounding-box cell -> vertex or -1
  std::vector<Bond> bonds_;
  std::vector<int> boundary_;
  std::vector<int> interior_;
  std::vector<std::uint8_t> boundary_mask_;
  std::vector<int> incident_offsets_;
  std::vector<int> incident_;
};

using RegionPtr = std::shared_ptr<const Region>;

RegionPtr make_cube(int d, int n, Point origin = {0, 0, 0});
RegionPtr make_cube_plus(int d, int n);

Region boundary(const Region& r);
Region interior(const Region& r);

// Vertex-valued configuration on a region.
class Field {
 public:
  Field() = default;
  Field(RegionPtr region, Vec values);
  static Field zeros(RegionPtr region);

  const Region& region() const { return *region_; }
  RegionPtr region_ptr() const { return region_; }
  const Vec& values() const { return values_; }
  Vec& values() { return values_; }
  double operator()(int i) const { return values_[i]; }

 private:
  RegionPtr region_;
  Vec values_;
};

// Antisymmetric edge field, stored once per bond in canonical orientation.
class EdgeField {
 public:
  EdgeField() = default;
  EdgeField(RegionPtr region, Vec values);
  static EdgeField zeros(RegionPtr region);
  // Constant field p: value p_axis on every canonical bond.
  static EdgeField constant(RegionPtr region, const Eigen::VectorXd& p);

  const Region& region() const { return *region_; }
  RegionPtr region_ptr() const { return region_; }
  const Vec& values() const { return values_; }
  Vec& values() { return values_; }
  double operator()(int bond) const { return values_[bond]; }

  // Value on the directed edge tail->head; negated when the orientation is
  // reversed. Throws if the pair is not a bond of the region.
  double directed_value(int tail, int head) const;

 private:
  RegionPtr region_;
  Vec values_;
};

EdgeField gradient(const Field& f);
Field divergence(const EdgeField& g);
Field laplacian(const Field& f);

// In-place kernels used by the samplers.
void gradient_into(const Region& r, const Vec& f, Vec& out);
void divergence_into(const Region& r, const Vec& g, Vec& out);

double mean(const Field& f);
// Mean over a sub-region (points looked up in f's region).
double mean(const Field& f, const Region& sub);

// Slope <F>_U: the unique vector with p . <F>_U = (1/|U|) sum_e p . F(e).
Eigen::VectorXd slope(const EdgeField& g);
Eigen::VectorXd slope(const EdgeField& g, const Region& sub);

// Affine field l_p(x) = p . x restricted to a region.
Field affine_field(RegionPtr region, const Eigen::VectorXd& p);

// Triadic decomposition of Q_n into cells z + Q_m, z in 3^m Z^d, plus the
// connecting bonds B_{m,n}.
class TriadicPartition {
 public:
  TriadicPartition(RegionPtr cube, int m);

  int m() const { return m_; }
  int n() const { return n_; }
  const Region& cube() const { return *cube_; }
  RegionPtr cube_ptr() const { return cube_; }

  int num_cells() const { return static_cast<int>(cell_origins_.size()); }
  const Point& cell_origin(int c) const { return cell_origins_[c]; }
  std::span<const int> cell_vertices(int c) const { return cell_vertices_[c]; }
  std::span<const int> cell_bonds(int c) const { return cell_bonds_[c]; }
  std::span<const int> connecting_bonds() const { return connecting_; }
  int cell_of_vertex(int v) const { return cell_of_vertex_[v]; }

 private:
  RegionPtr cube_;
  int m_;
  int n_;
  std::vector<Point> cell_origins_;
  std::vector<std::vector<int>> cell_vertices_;
  std::vector<std::vector<int>> cell_bonds_;
  std::vector<int> connecting_;
  std::vector<int> cell_of_vertex_;
};

TriadicPartition partition(int d, int m, int n);

// Text dump: header "d n kind", then one value per line, row-major vertex
// order, 17 significant digits (bit-exact round trip).
void dump_field(const Field& f, std::ostream& os);
Field load_field(std::istream& is);
void dump_field_file(const Field& f, const std::string& path);
Field load_field_file(const std::string& path);

}  // namespace gradphi
