#pragma once

// Polygonal interface curves and the discrete surface calculus on them.
//
// An InterfaceMesh is a single closed, counter-clockwise oriented loop of
// segments. The enclosed region lies to the left of every segment and the
// segment normals point outwards. All nodal fields on the curve are
// continuous piecewise linear functions indexed by vertex.

#include "surfacttrack/quadrature.hpp"
#include "surfacttrack/types.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace surfacttrack {

/// Oriented segment a -> b.
struct Segment {
  int a;
  int b;
};

class InterfaceMesh {
 public:
  InterfaceMesh() = default;

  /// Closed polygon through `loop` in traversal order; closure is implicit.
  explicit InterfaceMesh(std::vector<Vec2> loop) : vertices_(std::move(loop)) {
    const int n = static_cast<int>(vertices_.size());
    segments_.reserve(n);
    for (int k = 0; k < n; ++k) segments_.push_back({k, (k + 1) % n});
    finalize(true);
  }

  /// Explicit connectivity. Segments must form one closed loop and are
  /// stored in traversal order after construction.
  InterfaceMesh(std::vector<Vec2> vertices, std::vector<Segment> segments)
      : vertices_(std::move(vertices)), segments_(std::move(segments)) {
    finalize(true);
  }

  /// Regular K-gon inscribed in the circle of radius `radius`, first vertex at
  /// angle `phase`.
  static InterfaceMesh circle(const Vec2& center, double radius, int num_vertices,
                              double phase = 0.0) {
    std::vector<Vec2> pts(num_vertices);
    for (int k = 0; k < num_vertices; ++k) {
      const double th = phase + 2.0 * std::numbers::pi * k / num_vertices;
      pts[k] = center + radius * Vec2(std::cos(th), std::sin(th));
    }
    return InterfaceMesh(std::move(pts));
  }

  /// Same connectivity, new vertex positions (the map X^{m+1} on the old
  /// curve). Orientation is kept as is.
  [[nodiscard]] InterfaceMesh with_positions(std::vector<Vec2> positions) const {
    if (positions.size() != vertices_.size())
      throw GeometryError("with_positions: vertex count mismatch");
    InterfaceMesh out;
    out.vertices_ = std::move(positions);
    out.segments_ = segments_;
    out.finalize(false);
    return out;
  }

  [[nodiscard]] int num_vertices() const { return static_cast<int>(vertices_.size()); }
  [[nodiscard]] int num_segments() const { return static_cast<int>(segments_.size()); }
  [[nodiscard]] const std::vector<Vec2>& vertices() const { return vertices_; }
  [[nodiscard]] const std::vector<Segment>& segments() const { return segments_; }
  [[nodiscard]] const Vec2& vertex(int k) const { return vertices_[k]; }
  [[nodiscard]] const Segment& segment(int j) const { return segments_[j]; }

  [[nodiscard]] double length(int j) const {
    return (vertices_[segments_[j].b] - vertices_[segments_[j].a]).norm();
  }
  [[nodiscard]] Vec2 unit_tangent(int j) const {
    const Vec2 d = vertices_[segments_[j].b] - vertices_[segments_[j].a];
    return d / d.norm();
  }
  [[nodiscard]] Vec2 normal(int j) const { return rotate_cw(unit_tangent(j)); }

  /// Segment ending at vertex k.
  [[nodiscard]] int incoming(int k) const { return incoming_[k]; }
  /// Segment starting at vertex k.
  [[nodiscard]] int outgoing(int k) const { return outgoing_[k]; }

  /// Vertex indices in traversal order starting from the first segment.
  [[nodiscard]] std::vector<int> loop_order() const {
    std::vector<int> order;
    order.reserve(segments_.size());
    for (const auto& s : segments_) order.push_back(s.a);
    return order;
  }

 private:
  void finalize(bool normalize_orientation) {
    const int nv = num_vertices();
    const int ns = num_segments();
    if (nv < 3) throw GeometryError("interface needs at least three vertices");
    if (ns != nv) throw GeometryError("closed curve requires #segments == #vertices");
    incoming_.assign(nv, -1);
    outgoing_.assign(nv, -1);
    for (int j = 0; j < ns; ++j) {
      const auto [a, b] = segments_[j];
      if (a < 0 || b < 0 || a >= nv || b >= nv || a == b)
        throw GeometryError("invalid segment " + std::to_string(j));
      if (outgoing_[a] != -1 || incoming_[b] != -1)
        throw GeometryError("vertex with more than two incident segments");
      outgoing_[a] = j;
      incoming_[b] = j;
    }
    // Reorder segments into a single traversal.
    std::vector<Segment> ordered;
    ordered.reserve(ns);
    int j = 0;
    for (int step = 0; step < ns; ++step) {
      ordered.push_back(segments_[j]);
      j = outgoing_[segments_[j].b];
      if (j == 0 && step + 1 < ns) throw GeometryError("interface is not a single closed loop");
    }
    if (j != 0) throw GeometryError("interface is not a single closed loop");
    segments_ = std::move(ordered);

    if (normalize_orientation) {
      double twice_area = 0.0;
      for (const auto& s : segments_) twice_area += cross(vertices_[s.a], vertices_[s.b]);
      if (twice_area < 0.0) {
        std::reverse(segments_.begin(), segments_.end());
        for (auto& s : segments_) std::swap(s.a, s.b);
      }
    }
    for (int i = 0; i < ns; ++i) {
      outgoing_[segments_[i].a] = i;
      incoming_[segments_[i].b] = i;
      if (!(length(i) > 0.0)) {
        std::ostringstream msg;
        msg << "degenerate interface segment " << i << " (vertices " << segments_[i].a << ", "
            << segments_[i].b << ")";
        throw GeometryError(msg.str());
      }
    }
  }

  std::vector<Vec2> vertices_;
  std::vector<Segment> segments_;
  std::vector<int> incoming_;
  std::vector<int> outgoing_;
};

inline std::vector<Vec2> segment_normals(const InterfaceMesh& mesh) {
  std::vector<Vec2> nu(mesh.num_segments());
  for (int j = 0; j < mesh.num_segments(); ++j) nu[j] = mesh.normal(j);
  return nu;
}

inline std::vector<double> segment_lengths(const InterfaceMesh& mesh) {
  std::vector<double> h(mesh.num_segments());
  for (int j = 0; j < mesh.num_segments(); ++j) h[j] = mesh.length(j);
  return h;
}

/// Diagonal of the lumped mass matrix: half the length of the two adjacent
/// segments.
inline Vector lumped_mass(const InterfaceMesh& mesh) {
  Vector m = Vector::Zero(mesh.num_vertices());
  for (int j = 0; j < mesh.num_segments(); ++j) {
    const double h = mesh.length(j);
    m[mesh.segment(j).a] += 0.5 * h;
    m[mesh.segment(j).b] += 0.5 * h;
  }
  return m;
}

/// Lumped pairing weights <v, chi_k nu>^h = N_k . v_k, with
/// N_k = 1/2 sum_{j ni k} |sigma_j| nu_j.
inline std::vector<Vec2> vertex_normal_weights(const InterfaceMesh& mesh) {
  std::vector<Vec2> n(mesh.num_vertices(), Vec2::Zero());
  for (int j = 0; j < mesh.num_segments(); ++j) {
    const Vec2 d = mesh.vertex(mesh.segment(j).b) - mesh.vertex(mesh.segment(j).a);
    const Vec2 w = 0.5 * rotate_cw(d);  // 1/2 |sigma_j| nu_j
    n[mesh.segment(j).a] += w;
    n[mesh.segment(j).b] += w;
  }
  return n;
}

struct VertexNormals {
  SurfaceVectorField omega;
  /// True when the omega_k span the plane; the interface update needs this.
  bool spans_plane = false;
};

/// Length-weighted average of the normals of the two segments meeting at
/// each vertex.
inline VertexNormals vertex_normals(const InterfaceMesh& mesh) {
  VertexNormals out;
  const auto n = vertex_normal_weights(mesh);
  const Vector m = lumped_mass(mesh);
  out.omega.resize(n.size());
  Eigen::Matrix2d gram = Eigen::Matrix2d::Zero();
  for (std::size_t k = 0; k < n.size(); ++k) {
    out.omega[k] = n[k] / m[k];
    gram += out.omega[k] * out.omega[k].transpose();
  }
  const double tr = gram.trace();
  out.spans_plane = tr > 0.0 && gram.determinant() > 1e-12 * tr * tr;
  return out;
}

enum class InnerProductMode { lumped, full };

/// Piecewise linear data that may jump at vertices: the two endpoint values
/// on every segment.
template <class T>
struct BrokenLinear {
  std::vector<std::array<T, 2>> values;
};

inline BrokenLinear<double> from_nodal(const InterfaceMesh& mesh, const Vector& f) {
  if (f.size() != mesh.num_vertices()) throw GeometryError("nodal field size mismatch");
  BrokenLinear<double> out;
  out.values.reserve(mesh.num_segments());
  for (const auto& s : mesh.segments()) out.values.push_back({f[s.a], f[s.b]});
  return out;
}

inline BrokenLinear<Vec2> from_nodal(const InterfaceMesh& mesh, const SurfaceVectorField& f) {
  if (static_cast<int>(f.size()) != mesh.num_vertices())
    throw GeometryError("nodal field size mismatch");
  BrokenLinear<Vec2> out;
  out.values.reserve(mesh.num_segments());
  for (const auto& s : mesh.segments()) out.values.push_back({f[s.a], f[s.b]});
  return out;
}

template <class T>
BrokenLinear<T> from_segment_constant(const InterfaceMesh& mesh, const std::vector<T>& f) {
  if (static_cast<int>(f.size()) != mesh.num_segments())
    throw GeometryError("segment field size mismatch");
  BrokenLinear<T> out;
  out.values.reserve(f.size());
  for (const auto& v : f) out.values.push_back({v, v});
  return out;
}

namespace detail {
inline double dot(double a, double b) { return a * b; }
inline double dot(const Vec2& a, const Vec2& b) { return a.dot(b); }
}  // namespace detail

/// <eta, zeta> over the polygon, either mass lumped (vertex sampling from
/// within each segment) or integrated exactly.
template <class T>
double inner_product(const InterfaceMesh& mesh, const BrokenLinear<T>& eta,
                     const BrokenLinear<T>& zeta, InnerProductMode mode) {
  const int ns = mesh.num_segments();
  if (static_cast<int>(eta.values.size()) != ns || static_cast<int>(zeta.values.size()) != ns)
    throw GeometryError("inner_product: field size mismatch");
  double sum = 0.0;
  for (int j = 0; j < ns; ++j) {
    const auto& e = eta.values[j];
    const auto& z = zeta.values[j];
    const double h = mesh.length(j);
    if (mode == InnerProductMode::lumped) {
      sum += 0.5 * h * (detail::dot(e[0], z[0]) + detail::dot(e[1], z[1]));
    } else {
      sum += h / 6.0 *
             (2.0 * detail::dot(e[0], z[0]) + detail::dot(e[0], z[1]) + detail::dot(e[1], z[0]) +
              2.0 * detail::dot(e[1], z[1]));
    }
  }
  return sum;
}

inline double inner_product(const InterfaceMesh& mesh, const Vector& eta, const Vector& zeta,
                            InnerProductMode mode) {
  return inner_product(mesh, from_nodal(mesh, eta), from_nodal(mesh, zeta), mode);
}

/// P1 stiffness <grad_s eta, grad_s zeta> over vertices.
inline SparseMatrix laplace_beltrami_stiffness(const InterfaceMesh& mesh) {
  const int n = mesh.num_vertices();
  std::vector<Triplet> t;
  t.reserve(4 * mesh.num_segments());
  for (int j = 0; j < mesh.num_segments(); ++j) {
    const double c = 1.0 / mesh.length(j);
    const auto [a, b] = mesh.segment(j);
    t.emplace_back(a, a, c);
    t.emplace_back(b, b, c);
    t.emplace_back(a, b, -c);
    t.emplace_back(b, a, -c);
  }
  SparseMatrix A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

/// (A X)_k for the vector identity field X = id.
inline std::vector<Vec2> stiffness_times_positions(const InterfaceMesh& mesh) {
  std::vector<Vec2> out(mesh.num_vertices(), Vec2::Zero());
  for (int j = 0; j < mesh.num_segments(); ++j) {
    const auto [a, b] = mesh.segment(j);
    const Vec2 d = (mesh.vertex(a) - mesh.vertex(b)) / mesh.length(j);
    out[a] += d;
    out[b] -= d;
  }
  return out;
}

/// Signed shoelace area; positive for counter-clockwise loops.
inline double enclosed_area(const InterfaceMesh& mesh) {
  double s = 0.0;
  for (const auto& seg : mesh.segments()) s += cross(mesh.vertex(seg.a), mesh.vertex(seg.b));
  return 0.5 * s;
}

inline double perimeter(const InterfaceMesh& mesh) {
  double s = 0.0;
  for (int j = 0; j < mesh.num_segments(); ++j) s += mesh.length(j);
  return s;
}

/// Integral of x_2 over the enclosed region.
inline double enclosed_moment_y(const InterfaceMesh& mesh) {
  double s = 0.0;
  for (const auto& seg : mesh.segments()) {
    const Vec2& p = mesh.vertex(seg.a);
    const Vec2& q = mesh.vertex(seg.b);
    s += cross(p, q) * (p.y() + q.y());
  }
  return s / 6.0;
}

inline double edge_ratio(const InterfaceMesh& mesh) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (int j = 0; j < mesh.num_segments(); ++j) {
    const double h = mesh.length(j);
    lo = std::min(lo, h);
    hi = std::max(hi, h);
  }
  return hi / lo;
}

inline double max_segment_length(const InterfaceMesh& mesh) {
  double hi = 0.0;
  for (int j = 0; j < mesh.num_segments(); ++j) hi = std::max(hi, mesh.length(j));
  return hi;
}

namespace detail {
inline bool segments_cross(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const double d1 = cross(p2 - p1, q1 - p1);
  const double d2 = cross(p2 - p1, q2 - p1);
  const double d3 = cross(q2 - q1, p1 - q1);
  const double d4 = cross(q2 - q1, p2 - q1);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 &&
         d4 != 0;
}
}  // namespace detail

/// Standalone simplicity check: no two non-adjacent segments intersect.
/// Quadratic cost; not used during time stepping.
inline bool is_simple(const InterfaceMesh& mesh) {
  const int ns = mesh.num_segments();
  for (int i = 0; i < ns; ++i) {
    const auto si = mesh.segment(i);
    for (int j = i + 1; j < ns; ++j) {
      const auto sj = mesh.segment(j);
      if (si.a == sj.b || si.b == sj.a || si.a == sj.a || si.b == sj.b) continue;
      if (detail::segments_cross(mesh.vertex(si.a), mesh.vertex(si.b), mesh.vertex(sj.a),
                                 mesh.vertex(sj.b)))
        return false;
    }
  }
  return true;
}

/// Nodal scalar curvature from <kappa nu, eta>^h + <grad_s id, grad_s eta> = 0.
/// At each vertex the two component equations are solved in the least
/// squares sense: kappa_k = -N_k . (A X)_k / |N_k|^2.
inline SurfaceScalarField discrete_curvature(const InterfaceMesh& mesh) {
  const auto n = vertex_normal_weights(mesh);
  const auto ax = stiffness_times_positions(mesh);
  const Vector m = lumped_mass(mesh);
  SurfaceScalarField kappa(mesh.num_vertices());
  for (int k = 0; k < mesh.num_vertices(); ++k) {
    if (n[k].norm() < 1e-12 * m[k])
      throw GeometryError("vertex normal vanishes at vertex " + std::to_string(k));
    kappa[k] = -n[k].dot(ax[k]) / n[k].squaredNorm();
  }
  return kappa;
}

struct RefineResult {
  InterfaceMesh mesh;
  std::vector<SurfaceScalarField> fields;
  double edge_ratio = 1.0;
  int num_split = 0;
};

/// Splits every segment longer than threshold_factor * reference_max_length
/// at its midpoint. New vertices are appended; nodal fields receive the mean
/// of the two endpoint values.
inline RefineResult quality_and_refine(const InterfaceMesh& mesh,
                                       std::vector<SurfaceScalarField> fields,
                                       double threshold_factor, double reference_max_length) {
  const double limit = threshold_factor * reference_max_length;
  std::vector<Vec2> verts = mesh.vertices();
  std::vector<Segment> segs;
  segs.reserve(2 * mesh.num_segments());
  std::vector<std::vector<double>> extra(fields.size());
  int split = 0;
  for (int j = 0; j < mesh.num_segments(); ++j) {
    const auto [a, b] = mesh.segment(j);
    if (mesh.length(j) > limit) {
      const int mid = static_cast<int>(verts.size());
      verts.push_back(0.5 * (verts[a] + verts[b]));
      for (std::size_t f = 0; f < fields.size(); ++f)
        extra[f].push_back(0.5 * (fields[f][a] + fields[f][b]));
      segs.push_back({a, mid});
      segs.push_back({mid, b});
      ++split;
    } else {
      segs.push_back({a, b});
    }
  }
  RefineResult out;
  out.num_split = split;
  if (split == 0) {
    out.mesh = mesh;
  } else {
    out.mesh = InterfaceMesh(std::move(verts), std::move(segs));
    for (std::size_t f = 0; f < fields.size(); ++f) {
      const auto old_size = fields[f].size();
      fields[f].conservativeResize(old_size + static_cast<Eigen::Index>(extra[f].size()));
      for (std::size_t i = 0; i < extra[f].size(); ++i)
        fields[f][static_cast<Eigen::Index>(old_size + i)] = extra[f][i];
    }
  }
  out.fields = std::move(fields);
  out.edge_ratio = edge_ratio(out.mesh);
  return out;
}

}  // namespace surfacttrack
