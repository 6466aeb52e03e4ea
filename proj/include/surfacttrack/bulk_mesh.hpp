#pragma once

// Triangulations of an axis-aligned box built from a 2:1 balanced quadtree
// that is refined around the interface, plus point location, element
// classification, phase fields, transfers between meshes and the P2 basis.

#include "surfacttrack/interface_geometry.hpp"
#include "surfacttrack/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace surfacttrack::bulk {

struct Box {
  Vec2 lo{0.0, 0.0};
  Vec2 hi{1.0, 1.0};
  [[nodiscard]] double width() const { return hi.x() - lo.x(); }
  [[nodiscard]] double height() const { return hi.y() - lo.y(); }
  [[nodiscard]] double min_extent() const { return std::min(width(), height()); }
  [[nodiscard]] double area() const { return width() * height(); }
};

/// Box sides; boundary edges carry one of these.
enum Side : int { bottom = 0, right = 1, top = 2, left = 3 };
inline constexpr int kInteriorEdge = -1;

struct AdaptConfig {
  /// N_f = 2^level_k, N_c = 2^level_l.
  int level_k = 5;
  int level_l = 2;
  /// Width of the fine band around the interface in units of h_f.
  int buffer_layers = 1;
  std::size_t max_triangles = 4'000'000;

  [[nodiscard]] double h_fine(const Box& box) const {
    return box.min_extent() / static_cast<double>(1 << level_k);
  }
  [[nodiscard]] double h_coarse(const Box& box) const {
    return box.min_extent() / static_cast<double>(1 << level_l);
  }
};

enum class Phase : std::int8_t { interior, exterior, interfacial };

struct Location {
  int triangle = -1;
  std::array<double, 3> bary{0.0, 0.0, 0.0};
};

/// Barycentric coordinates of p in the triangle (a, b, c).
inline std::array<double, 3> barycentric(const Vec2& a, const Vec2& b, const Vec2& c,
                                         const Vec2& p) {
  const double det = cross(b - a, c - a);
  const double l1 = cross(p - a, c - a) / det;
  const double l2 = cross(b - a, p - a) / det;
  return {1.0 - l1 - l2, l1, l2};
}

class BulkMesh {
 public:
  BulkMesh() = default;

  BulkMesh(Box box, std::vector<Vec2> vertices, std::vector<std::array<int, 3>> triangles,
           std::vector<int> levels)
      : box_(box),
        vertices_(std::move(vertices)),
        triangles_(std::move(triangles)),
        levels_(std::move(levels)) {
    if (levels_.size() != triangles_.size()) levels_.assign(triangles_.size(), 0);
    build_edges();
    build_locator();
  }

  [[nodiscard]] const Box& box() const { return box_; }
  [[nodiscard]] int num_vertices() const { return static_cast<int>(vertices_.size()); }
  [[nodiscard]] int num_triangles() const { return static_cast<int>(triangles_.size()); }
  [[nodiscard]] int num_edges() const { return static_cast<int>(edges_.size()); }
  /// P2 nodes: vertices first, then edge midpoints.
  [[nodiscard]] int num_p2_nodes() const { return num_vertices() + num_edges(); }

  [[nodiscard]] const Vec2& vertex(int i) const { return vertices_[i]; }
  [[nodiscard]] const std::vector<Vec2>& vertices() const { return vertices_; }
  [[nodiscard]] const std::array<int, 3>& triangle(int t) const { return triangles_[t]; }
  [[nodiscard]] int level(int t) const { return levels_[t]; }
  [[nodiscard]] const std::array<int, 2>& edge(int e) const { return edges_[e]; }
  /// Box side of a boundary edge, kInteriorEdge otherwise.
  [[nodiscard]] int edge_side(int e) const { return edge_side_[e]; }
  /// Edges (0,1), (1,2), (2,0) of triangle t.
  [[nodiscard]] const std::array<int, 3>& triangle_edges(int t) const { return tri_edges_[t]; }

  [[nodiscard]] Vec2 p2_node(int n) const {
    if (n < num_vertices()) return vertices_[n];
    const auto& e = edges_[n - num_vertices()];
    return 0.5 * (vertices_[e[0]] + vertices_[e[1]]);
  }

  /// Global P2 node indices of triangle t in local order v0, v1, v2, e01, e12, e20.
  [[nodiscard]] std::array<int, 6> p2_nodes(int t) const {
    const auto& v = triangles_[t];
    const auto& e = tri_edges_[t];
    const int nv = num_vertices();
    return {v[0], v[1], v[2], nv + e[0], nv + e[1], nv + e[2]};
  }

  [[nodiscard]] double area(int t) const {
    const auto& v = triangles_[t];
    return 0.5 * cross(vertices_[v[1]] - vertices_[v[0]], vertices_[v[2]] - vertices_[v[0]]);
  }

  [[nodiscard]] double diameter(int t) const {
    const auto& v = triangles_[t];
    return std::max({(vertices_[v[0]] - vertices_[v[1]]).norm(),
                     (vertices_[v[1]] - vertices_[v[2]]).norm(),
                     (vertices_[v[2]] - vertices_[v[0]]).norm()});
  }

  /// Physical point of barycentric coordinates l in triangle t.
  [[nodiscard]] Vec2 point(int t, const std::array<double, 3>& l) const {
    const auto& v = triangles_[t];
    return l[0] * vertices_[v[0]] + l[1] * vertices_[v[1]] + l[2] * vertices_[v[2]];
  }

  /// Gradients of the three barycentric coordinates.
  [[nodiscard]] std::array<Vec2, 3> bary_gradients(int t) const {
    const auto& v = triangles_[t];
    const double two_a = 2.0 * area(t);
    std::array<Vec2, 3> g;
    for (int i = 0; i < 3; ++i) {
      const Vec2& p1 = vertices_[v[(i + 1) % 3]];
      const Vec2& p2 = vertices_[v[(i + 2) % 3]];
      g[i] = Vec2(p1.y() - p2.y(), p2.x() - p1.x()) / two_a;
    }
    return g;
  }

  [[nodiscard]] std::array<double, 3> bary_in(int t, const Vec2& p) const {
    const auto& v = triangles_[t];
    return barycentric(vertices_[v[0]], vertices_[v[1]], vertices_[v[2]], p);
  }

  /// Triangles whose bounding boxes overlap the given box.
  template <class F>
  void for_candidates(const Vec2& lo, const Vec2& hi, F&& f) const {
    const auto [i0, j0] = bucket_of(lo);
    const auto [i1, j1] = bucket_of(hi);
    if (i0 == i1 && j0 == j1) {
      for (int t : buckets_[static_cast<std::size_t>(j0) * nbx_ + i0]) f(t);
      return;
    }
    std::vector<int> seen;
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i)
        for (int t : buckets_[static_cast<std::size_t>(j) * nbx_ + i]) seen.push_back(t);
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    for (int t : seen) f(t);
  }

  /// Containing triangle; ties resolve to the lowest triangle id.
  [[nodiscard]] Location locate(const Vec2& p) const {
    const double tol_box = 1e-10 * std::max(box_.width(), box_.height());
    if (p.x() < box_.lo.x() - tol_box || p.x() > box_.hi.x() + tol_box ||
        p.y() < box_.lo.y() - tol_box || p.y() > box_.hi.y() + tol_box || !p.allFinite())
      throw GeometryError("point (" + std::to_string(p.x()) + ", " + std::to_string(p.y()) +
                          ") lies outside the computational domain");
    const auto [i, j] = bucket_of(p);
    Location best;
    double best_min = -std::numeric_limits<double>::infinity();
    for (int t : buckets_[static_cast<std::size_t>(j) * nbx_ + i]) {
      const auto l = bary_in(t, p);
      const double mn = std::min({l[0], l[1], l[2]});
      if (mn >= -1e-12) {
        if (best_min < -1e-12 || t < best.triangle) {
          best = {t, l};
          best_min = mn;
        }
      } else if (best_min < -1e-12 && mn > best_min) {
        best = {t, l};
        best_min = mn;
      }
    }
    if (best.triangle < 0 || best_min < -1e-8)
      throw GeometryError("point location failed");
    return best;
  }

 private:
  void build_edges() {
    std::map<std::pair<int, int>, int> index;
    tri_edges_.resize(triangles_.size());
    std::vector<int> count;
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      const auto& v = triangles_[t];
      if (!(area(static_cast<int>(t)) > 0.0))
        throw GeometryError("non-positive triangle area in bulk mesh");
      for (int k = 0; k < 3; ++k) {
        const int a = v[k], b = v[(k + 1) % 3];
        const auto key = std::minmax(a, b);
        auto [it, inserted] = index.try_emplace({key.first, key.second},
                                                static_cast<int>(edges_.size()));
        if (inserted) {
          edges_.push_back({key.first, key.second});
          count.push_back(0);
        }
        ++count[it->second];
        tri_edges_[t][k] = it->second;
      }
    }
    edge_side_.assign(edges_.size(), kInteriorEdge);
    const double tol = 1e-12 * std::max(box_.width(), box_.height());
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      if (count[e] != 1) continue;
      const Vec2 m = 0.5 * (vertices_[edges_[e][0]] + vertices_[edges_[e][1]]);
      if (std::abs(m.y() - box_.lo.y()) < tol) edge_side_[e] = bottom;
      else if (std::abs(m.x() - box_.hi.x()) < tol) edge_side_[e] = right;
      else if (std::abs(m.y() - box_.hi.y()) < tol) edge_side_[e] = top;
      else if (std::abs(m.x() - box_.lo.x()) < tol) edge_side_[e] = left;
      else throw GeometryError("boundary edge not on the domain boundary (hanging node?)");
    }
  }

  void build_locator() {
    const double avg = std::sqrt(box_.area() / std::max<std::size_t>(1, triangles_.size()));
    const double size = 1.5 * avg;
    nbx_ = std::max(1, static_cast<int>(std::ceil(box_.width() / size)));
    nby_ = std::max(1, static_cast<int>(std::ceil(box_.height() / size)));
    bw_ = box_.width() / nbx_;
    bh_ = box_.height() / nby_;
    buckets_.assign(static_cast<std::size_t>(nbx_) * nby_, {});
    const double pad = 1e-9 * std::max(box_.width(), box_.height());
    for (int t = 0; t < num_triangles(); ++t) {
      const auto& v = triangles_[t];
      Vec2 lo = vertices_[v[0]].cwiseMin(vertices_[v[1]]).cwiseMin(vertices_[v[2]]);
      Vec2 hi = vertices_[v[0]].cwiseMax(vertices_[v[1]]).cwiseMax(vertices_[v[2]]);
      lo.array() -= pad;
      hi.array() += pad;
      const auto [i0, j0] = bucket_of(lo);
      const auto [i1, j1] = bucket_of(hi);
      for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) buckets_[static_cast<std::size_t>(j) * nbx_ + i].push_back(t);
    }
  }

  [[nodiscard]] std::pair<int, int> bucket_of(const Vec2& p) const {
    const int i = std::clamp(static_cast<int>(std::floor((p.x() - box_.lo.x()) / bw_)), 0, nbx_ - 1);
    const int j = std::clamp(static_cast<int>(std::floor((p.y() - box_.lo.y()) / bh_)), 0, nby_ - 1);
    return {i, j};
  }

  Box box_;
  std::vector<Vec2> vertices_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<int> levels_;
  std::vector<std::array<int, 2>> edges_;
  std::vector<int> edge_side_;
  std::vector<std::array<int, 3>> tri_edges_;
  int nbx_ = 1, nby_ = 1;
  double bw_ = 1.0, bh_ = 1.0;
  std::vector<std::vector<int>> buckets_;
};

namespace detail {

inline std::uint64_t cell_key(std::int64_t i, std::int64_t j) {
  return (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint64_t>(j);
}

/// Closed segment p0 -> p1 meets the closed box [lo, hi] (Liang-Barsky).
inline bool segment_hits_box(const Vec2& p0, const Vec2& p1, const Vec2& lo, const Vec2& hi) {
  double t0 = 0.0, t1 = 1.0;
  const Vec2 d = p1 - p0;
  for (int k = 0; k < 2; ++k) {
    if (d[k] == 0.0) {
      if (p0[k] < lo[k] || p0[k] > hi[k]) return false;
      continue;
    }
    double ta = (lo[k] - p0[k]) / d[k];
    double tb = (hi[k] - p0[k]) / d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

class Quadtree {
 public:
  Quadtree(const Box& box, const AdaptConfig& cfg) : box_(box), cfg_(cfg) {
    if (cfg.level_k < cfg.level_l || cfg.level_l < 0 || cfg.level_k > 24)
      throw ConfigError("adapt levels need 0 <= level_l <= level_k <= 24");
    hc_ = cfg.h_coarse(box);
    const double nx = box.width() / hc_;
    const double ny = box.height() / hc_;
    nx0_ = static_cast<std::int64_t>(std::llround(nx));
    ny0_ = static_cast<std::int64_t>(std::llround(ny));
    if (std::abs(nx - nx0_) > 1e-9 * nx || std::abs(ny - ny0_) > 1e-9 * ny || nx0_ < 1 || ny0_ < 1)
      throw ConfigError("domain extents must be integer multiples of the coarse mesh size");
    depth_ = cfg.level_k - cfg.level_l;
    refined_.resize(depth_ + 1);
  }

  void mark_interface(const InterfaceMesh& interface) {
    if (depth_ == 0) return;
    const double hf = hc_ / static_cast<double>(std::int64_t{1} << depth_);
    const double buf = cfg_.buffer_layers * hf;
    const std::int64_t nfx = nx0_ << depth_;
    const std::int64_t nfy = ny0_ << depth_;
    std::unordered_set<std::uint64_t> fine;
    for (int s = 0; s < interface.num_segments(); ++s) {
      const Vec2& p0 = interface.vertex(interface.segment(s).a);
      const Vec2& p1 = interface.vertex(interface.segment(s).b);
      const Vec2 lo = p0.cwiseMin(p1).array() - buf;
      const Vec2 hi = p0.cwiseMax(p1).array() + buf;
      const auto ix0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor((lo.x() - box_.lo.x()) / hf)));
      const auto iy0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor((lo.y() - box_.lo.y()) / hf)));
      const auto ix1 = std::min<std::int64_t>(nfx - 1, static_cast<std::int64_t>(std::floor((hi.x() - box_.lo.x()) / hf)));
      const auto iy1 = std::min<std::int64_t>(nfy - 1, static_cast<std::int64_t>(std::floor((hi.y() - box_.lo.y()) / hf)));
      for (auto j = iy0; j <= iy1; ++j) {
        for (auto i = ix0; i <= ix1; ++i) {
          const Vec2 clo(box_.lo.x() + i * hf - buf, box_.lo.y() + j * hf - buf);
          const Vec2 chi(box_.lo.x() + (i + 1) * hf + buf, box_.lo.y() + (j + 1) * hf + buf);
          if (segment_hits_box(p0, p1, clo, chi)) fine.insert(cell_key(i, j));
        }
      }
    }
    // A fine leaf needs every ancestor refined.
    for (auto key : fine) add_refined(depth_ - 1, static_cast<std::int64_t>(key >> 32) >> 1,
                                      static_cast<std::int64_t>(key & 0xffffffffu) >> 1);
  }

  /// 2:1 balance across cell sides.
  void balance() {
    for (int lev = depth_ - 1; lev >= 1; --lev) {
      const std::int64_t nx = nx0_ << lev;
      const std::int64_t ny = ny0_ << lev;
      const std::vector<std::uint64_t> cells(refined_[lev].begin(), refined_[lev].end());
      for (auto key : cells) {
        const auto i = static_cast<std::int64_t>(key >> 32);
        const auto j = static_cast<std::int64_t>(key & 0xffffffffu);
        constexpr std::array<std::array<int, 2>, 4> nb{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
        for (const auto& d : nb) {
          const auto ni = i + d[0];
          const auto nj = j + d[1];
          if (ni < 0 || nj < 0 || ni >= nx || nj >= ny) continue;
          add_refined(lev - 1, ni >> 1, nj >> 1);
        }
      }
    }
  }

  BulkMesh triangulate() const {
    // Lattice unit: half the finest cell side.
    const std::int64_t unit_per_fine = 2;
    std::unordered_map<std::uint64_t, int> vindex;
    std::vector<Vec2> verts;
    std::vector<std::array<int, 3>> tris;
    std::vector<int> levels;
    const double unit = hc_ / static_cast<double>(std::int64_t{1} << depth_) / unit_per_fine;
    auto vid = [&](std::int64_t x, std::int64_t y) {
      const auto key = cell_key(x, y);
      auto [it, inserted] = vindex.try_emplace(key, static_cast<int>(verts.size()));
      if (inserted) verts.emplace_back(box_.lo.x() + x * unit, box_.lo.y() + y * unit);
      return it->second;
    };

    std::vector<std::array<std::int64_t, 3>> stack;
    for (std::int64_t j = 0; j < ny0_; ++j)
      for (std::int64_t i = 0; i < nx0_; ++i) {
        stack.push_back({0, i, j});
        while (!stack.empty()) {
          const auto [lev, ci, cj] = stack.back();
          stack.pop_back();
          const int L = static_cast<int>(lev);
          if (is_refined(L, ci, cj)) {
            // Push children in reverse so they are emitted in (0,0),(1,0),(0,1),(1,1) order.
            for (int c = 3; c >= 0; --c)
              stack.push_back({lev + 1, 2 * ci + (c & 1), 2 * cj + (c >> 1)});
            continue;
          }
          emit_leaf(L, ci, cj, vid, tris, levels, unit_per_fine);
          if (tris.size() > cfg_.max_triangles)
            throw Error("bulk mesh refinement budget exceeded: more than " +
                        std::to_string(cfg_.max_triangles) + " triangles (levels " +
                        std::to_string(cfg_.level_k) + "," + std::to_string(cfg_.level_l) + ")");
        }
      }
    return BulkMesh(box_, std::move(verts), std::move(tris), std::move(levels));
  }

 private:
  [[nodiscard]] bool is_refined(int lev, std::int64_t i, std::int64_t j) const {
    if (lev >= depth_ || lev < 0) return false;
    return refined_[lev].count(cell_key(i, j)) > 0;
  }

  void add_refined(int lev, std::int64_t i, std::int64_t j) {
    while (lev >= 0) {
      if (!refined_[lev].insert(cell_key(i, j)).second) return;
      --lev;
      i >>= 1;
      j >>= 1;
    }
  }

  template <class Vid>
  void emit_leaf(int lev, std::int64_t i, std::int64_t j, Vid& vid,
                 std::vector<std::array<int, 3>>& tris, std::vector<int>& levels,
                 std::int64_t unit_per_fine) const {
    const std::int64_t s = unit_per_fine << (depth_ - lev);
    const std::int64_t x0 = i * s, y0 = j * s;
    const std::int64_t h = s / 2;
    const int c = vid(x0 + h, y0 + h);
    // Corners counter-clockwise, and the same-level neighbour across each side.
    const std::array<std::array<std::int64_t, 2>, 4> corner{
        {{x0, y0}, {x0 + s, y0}, {x0 + s, y0 + s}, {x0, y0 + s}}};
    const std::array<std::array<std::int64_t, 2>, 4> across{{{i, j - 1}, {i + 1, j}, {i, j + 1}, {i - 1, j}}};
    const std::int64_t nx = nx0_ << lev, ny = ny0_ << lev;
    for (int k = 0; k < 4; ++k) {
      const auto& a = corner[k];
      const auto& b = corner[(k + 1) % 4];
      const auto ni = across[k][0], nj = across[k][1];
      const bool inside = ni >= 0 && nj >= 0 && ni < nx && nj < ny;
      const int va = vid(a[0], a[1]);
      const int vb = vid(b[0], b[1]);
      if (inside && is_refined(lev, ni, nj)) {
        const int vm = vid((a[0] + b[0]) / 2, (a[1] + b[1]) / 2);
        tris.push_back({c, va, vm});
        tris.push_back({c, vm, vb});
        levels.push_back(lev);
        levels.push_back(lev);
      } else {
        tris.push_back({c, va, vb});
        levels.push_back(lev);
      }
    }
  }

  Box box_;
  AdaptConfig cfg_;
  double hc_ = 1.0;
  std::int64_t nx0_ = 1, ny0_ = 1;
  int depth_ = 0;
  std::vector<std::unordered_set<std::uint64_t>> refined_;
};

}  // namespace detail

/// Mesh at the coarse size everywhere.
inline BulkMesh coarse_mesh(const Box& box, const AdaptConfig& cfg) {
  detail::Quadtree qt(box, cfg);
  return qt.triangulate();
}

/// Mesh with triangles of diameter <= h_f on every cell meeting the interface
/// or lying within buffer_layers * h_f of it, grading to h_c elsewhere.
inline BulkMesh adapt(const Box& box, const InterfaceMesh& interface, const AdaptConfig& cfg) {
  detail::Quadtree qt(box, cfg);
  qt.mark_interface(interface);
  qt.balance();
  return qt.triangulate();
}

namespace detail {

inline double orient(const Vec2& a, const Vec2& b, const Vec2& c) { return cross(b - a, c - a); }

inline bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
         std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

/// Closed segments intersect.
inline bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const double d1 = orient(q1, q2, p1);
  const double d2 = orient(q1, q2, p2);
  const double d3 = orient(p1, p2, q1);
  const double d4 = orient(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  if (d1 == 0 && on_segment(q1, q2, p1)) return true;
  if (d2 == 0 && on_segment(q1, q2, p2)) return true;
  if (d3 == 0 && on_segment(p1, p2, q1)) return true;
  if (d4 == 0 && on_segment(p1, p2, q2)) return true;
  return false;
}

inline bool point_in_closed_triangle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& p) {
  return orient(a, b, p) >= 0 && orient(b, c, p) >= 0 && orient(c, a, p) >= 0;
}

}  // namespace detail

/// Closed segment meets the closed triangle t.
inline bool segment_meets_triangle(const BulkMesh& mesh, int t, const Vec2& p0, const Vec2& p1) {
  const auto& v = mesh.triangle(t);
  const Vec2& a = mesh.vertex(v[0]);
  const Vec2& b = mesh.vertex(v[1]);
  const Vec2& c = mesh.vertex(v[2]);
  if (detail::point_in_closed_triangle(a, b, c, p0) || detail::point_in_closed_triangle(a, b, c, p1))
    return true;
  return detail::segments_intersect(p0, p1, a, b) || detail::segments_intersect(p0, p1, b, c) ||
         detail::segments_intersect(p0, p1, c, a);
}

/// Winding-number point in polygon test.
inline bool inside_polygon(const InterfaceMesh& interface, const Vec2& p) {
  int wn = 0;
  for (const auto& s : interface.segments()) {
    const Vec2& a = interface.vertex(s.a);
    const Vec2& b = interface.vertex(s.b);
    if (a.y() <= p.y()) {
      if (b.y() > p.y() && detail::orient(a, b, p) > 0) ++wn;
    } else if (b.y() <= p.y() && detail::orient(a, b, p) < 0) {
      --wn;
    }
  }
  return wn != 0;
}

inline std::vector<Phase> classify_elements(const BulkMesh& mesh, const InterfaceMesh& interface) {
  std::vector<Phase> label(mesh.num_triangles(), Phase::exterior);
  std::vector<char> cut(mesh.num_triangles(), 0);
  for (const auto& s : interface.segments()) {
    const Vec2& p0 = interface.vertex(s.a);
    const Vec2& p1 = interface.vertex(s.b);
    mesh.for_candidates(p0.cwiseMin(p1), p0.cwiseMax(p1), [&](int t) {
      if (!cut[t] && segment_meets_triangle(mesh, t, p0, p1)) cut[t] = 1;
    });
  }
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (cut[t]) {
      label[t] = Phase::interfacial;
    } else {
      const Vec2 c = mesh.point(t, {1.0 / 3, 1.0 / 3, 1.0 / 3});
      label[t] = inside_polygon(interface, c) ? Phase::interior : Phase::exterior;
    }
  }
  return label;
}

/// Piecewise constant coefficient: inner value, outer value, or their mean on
/// interfacial elements.
inline Vector phase_field(const std::vector<Phase>& labels, double inner, double outer) {
  Vector f(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t t = 0; t < labels.size(); ++t) {
    switch (labels[t]) {
      case Phase::interior: f[t] = inner; break;
      case Phase::exterior: f[t] = outer; break;
      case Phase::interfacial: f[t] = 0.5 * (inner + outer); break;
    }
  }
  return f;
}

struct PhaseFields {
  Vector rho;
  Vector mu;
};

inline PhaseFields phase_fields(const std::vector<Phase>& labels, double rho_minus,
                                double rho_plus, double mu_minus, double mu_plus) {
  return {phase_field(labels, rho_minus, rho_plus), phase_field(labels, mu_minus, mu_plus)};
}

// P2 Lagrange basis in barycentric coordinates; local order v0, v1, v2, e01, e12, e20.
namespace p2 {

inline std::array<double, 6> values(const std::array<double, 3>& l) {
  return {l[0] * (2 * l[0] - 1), l[1] * (2 * l[1] - 1), l[2] * (2 * l[2] - 1),
          4 * l[0] * l[1],       4 * l[1] * l[2],       4 * l[2] * l[0]};
}

inline std::array<Vec2, 6> gradients(const std::array<double, 3>& l, const std::array<Vec2, 3>& g) {
  return {(4 * l[0] - 1) * g[0],
          (4 * l[1] - 1) * g[1],
          (4 * l[2] - 1) * g[2],
          4 * (l[0] * g[1] + l[1] * g[0]),
          4 * (l[1] * g[2] + l[2] * g[1]),
          4 * (l[2] * g[0] + l[0] * g[2])};
}

}  // namespace p2

/// P2 vector field stored as (u_x, u_y) pairs per P2 node.
inline Vec2 eval_p2(const BulkMesh& mesh, const Vector& u, const Location& loc) {
  const auto nodes = mesh.p2_nodes(loc.triangle);
  const auto phi = p2::values(loc.bary);
  Vec2 v = Vec2::Zero();
  for (int i = 0; i < 6; ++i) v += phi[i] * Vec2(u[2 * nodes[i]], u[2 * nodes[i] + 1]);
  return v;
}

inline Vec2 eval_p2(const BulkMesh& mesh, const Vector& u, const Vec2& p) {
  return eval_p2(mesh, u, mesh.locate(p));
}

/// Nodal interpolation of a vector function into P2.
template <class F>
Vector interpolate_p2(const BulkMesh& mesh, F&& f) {
  Vector u(2 * mesh.num_p2_nodes());
  for (int n = 0; n < mesh.num_p2_nodes(); ++n) {
    const Vec2 v = f(mesh.p2_node(n));
    u[2 * n] = v.x();
    u[2 * n + 1] = v.y();
  }
  return u;
}

inline Vector transfer_velocity(const BulkMesh& old_mesh, const Vector& u_old,
                                const BulkMesh& new_mesh) {
  return interpolate_p2(new_mesh, [&](const Vec2& p) { return eval_p2(old_mesh, u_old, p); });
}

/// Element averages of an old piecewise constant field, sampled with the
/// 7-point rule on each new triangle.
inline Vector transfer_density(const BulkMesh& old_mesh, const Vector& rho_old,
                               const BulkMesh& new_mesh) {
  Vector out(new_mesh.num_triangles());
  for (int t = 0; t < new_mesh.num_triangles(); ++t) {
    double s = 0.0;
    for (const auto& qp : quad::tri7) s += qp.w * rho_old[old_mesh.locate(new_mesh.point(t, qp.l)).triangle];
    out[t] = s;
  }
  return out;
}

struct SubSegment {
  double t0;
  double t1;
  int triangle;
};

/// Splits the segment p0 -> p1 at crossings with bulk element edges. Each
/// piece is assigned to the triangle that contains its midpoint.
inline std::vector<SubSegment> split_segment(const BulkMesh& mesh, const Vec2& p0, const Vec2& p1) {
  std::vector<double> breaks{0.0, 1.0};
  mesh.for_candidates(p0.cwiseMin(p1), p0.cwiseMax(p1), [&](int t) {
    const auto l0 = mesh.bary_in(t, p0);
    const auto l1 = mesh.bary_in(t, p1);
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 3; ++i) {
      const double d = l1[i] - l0[i];
      if (d == 0.0) {
        if (l0[i] < 0.0) return;
        continue;
      }
      const double r = -l0[i] / d;
      if (d > 0) lo = std::max(lo, r);
      else hi = std::min(hi, r);
    }
    if (hi - lo > 1e-14) {
      breaks.push_back(lo);
      breaks.push_back(hi);
    }
  });
  std::sort(breaks.begin(), breaks.end());
  std::vector<SubSegment> out;
  double prev = 0.0;
  for (std::size_t k = 1; k < breaks.size(); ++k) {
    const double t = breaks[k];
    if (t - prev <= 1e-13 && t < 1.0) continue;
    if (t - prev <= 0.0) continue;
    const Vec2 mid = p0 + 0.5 * (prev + t) * (p1 - p0);
    out.push_back({prev, t, mesh.locate(mid).triangle});
    prev = t;
  }
  if (out.empty()) out.push_back({0.0, 1.0, mesh.locate(0.5 * (p0 + p1)).triangle});
  out.back().t1 = 1.0;
  return out;
}

/// A P2 velocity field on a bulk mesh, sampled by point location.
class P2VelocityField {
 public:
  P2VelocityField(const BulkMesh& mesh, const Vector& u) : mesh_(&mesh), u_(&u) {}

  [[nodiscard]] Vec2 at(const Vec2& p) const { return eval_p2(*mesh_, *u_, p); }

  [[nodiscard]] std::array<Vec2, 2> segment_moments(const Vec2& p0, const Vec2& p1) const {
    std::array<Vec2, 2> m{Vec2::Zero(), Vec2::Zero()};
    const double len = (p1 - p0).norm();
    for (const auto& piece : split_segment(*mesh_, p0, p1)) {
      for (const auto& qp : quad::gauss4) {
        const double t = piece.t0 + (piece.t1 - piece.t0) * qp.t;
        const Vec2 x = p0 + t * (p1 - p0);
        const Vec2 v = eval_p2(*mesh_, *u_, Location{piece.triangle, mesh_->bary_in(piece.triangle, x)});
        const double w = qp.w * (piece.t1 - piece.t0) * len;
        m[0] += w * (1.0 - t) * v;
        m[1] += w * t * v;
      }
    }
    return m;
  }

  [[nodiscard]] const BulkMesh& mesh() const { return *mesh_; }
  [[nodiscard]] const Vector& values() const { return *u_; }

 private:
  const BulkMesh* mesh_;
  const Vector* u_;
};

}  // namespace surfacttrack::bulk
