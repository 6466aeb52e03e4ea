#pragma once

#include "surfacttrack/manufactured.hpp"
#include "surfacttrack/ns_solver.hpp"

#include <cmath>
#include <vector>

namespace oracle {

using surfacttrack::InterfaceMesh;
using surfacttrack::Vec2;
using surfacttrack::Vector;

inline double divergence_at(const surfacttrack::bulk::BulkMesh& m, const Vector& u, int t,
                            const std::array<double, 3>& l) {
  const auto nodes = m.p2_nodes(t);
  const auto dphi = surfacttrack::bulk::p2::gradients(l, m.bary_gradients(t));
  double d = 0.0;
  for (int i = 0; i < 6; ++i) d += u[2 * nodes[i]] * dphi[i].x() + u[2 * nodes[i] + 1] * dphi[i].y();
  return d;
}

// Sutherland-Hodgman clip of a polygon by a convex CCW polygon.
inline std::vector<Vec2> clip(std::vector<Vec2> poly, const InterfaceMesh& g) {
  for (int j = 0; j < g.num_segments(); ++j) {
    const Vec2 a = g.vertex(g.segment(j).a);
    const Vec2 b = g.vertex(g.segment(j).b);
    auto side = [&](const Vec2& p) { return surfacttrack::cross(b - a, p - a); };
    std::vector<Vec2> out;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec2& p = poly[i];
      const Vec2& q = poly[(i + 1) % poly.size()];
      const double sp = side(p), sq = side(q);
      if (sp >= 0) out.push_back(p);
      if ((sp >= 0) != (sq >= 0)) out.push_back(p + sp / (sp - sq) * (q - p));
    }
    poly = std::move(out);
    if (poly.empty()) break;
  }
  return poly;
}

// Integral of div u over the region enclosed by a convex g, by clipping every bulk triangle.
// div u is affine on each triangle, so the centroid rule is exact on each piece.
inline double clipped_divergence(const surfacttrack::bulk::BulkMesh& m, const InterfaceMesh& g,
                                 const Vector& u) {
  double total = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) {
    const auto& v = m.triangle(t);
    const auto poly = clip({m.vertex(v[0]), m.vertex(v[1]), m.vertex(v[2])}, g);
    if (poly.size() < 3) continue;
    for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
      const double area = 0.5 * surfacttrack::cross(poly[i] - poly[0], poly[i + 1] - poly[0]);
      const Vec2 c = (poly[0] + poly[i] + poly[i + 1]) / 3.0;
      total += area * divergence_at(m, u, t, m.bary_in(t, c));
    }
  }
  return total;
}

// Parameterization of the manufactured ellipse x1^2/a(t) + x2^2 = 1.
inline Vec2 param(double theta, double t) {
  return {std::sqrt(surfacttrack::exact::a(t)) * std::cos(theta), std::sin(theta)};
}

inline double speed(double theta, double t) {
  return std::hypot(std::sqrt(surfacttrack::exact::a(t)) * std::sin(theta), std::cos(theta));
}

// Material derivative + psi div_s u - Laplace-Beltrami psi by central differences
// in the parameterization.
inline double fd_residual(double theta, double t) {
  using namespace surfacttrack::exact;
  const double h = 2e-4, k = 1e-5;
  auto g = [&](double th, double tt) { return psi(param(th, tt), tt); };
  const double material = (g(theta, t + k) - g(theta, t - k)) / (2 * k);

  const Vec2 tangent = (param(theta + h, t) - param(theta - h, t)).normalized();
  const Vec2 du = velocity(param(theta + h, t), t) - velocity(param(theta - h, t), t);
  const double div_s = du.dot(tangent) / (2 * h * speed(theta, t));

  auto dds = [&](double th) { return (g(th + h, t) - g(th - h, t)) / (2 * h * speed(th, t)); };
  const double lap = (dds(theta + h) - dds(theta - h)) / (2 * h * speed(theta, t));
  return material + g(theta, t) * div_s - lap;
}

}  // namespace oracle
