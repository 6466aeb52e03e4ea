#pragma once

// Exact solution on the moving ellipse z1^2/a(t) + z2^2 = 1 with
// a(t) = 1 + sin(pi t): surfactant psi = exp(-6t) z1 z2, the prescribed
// velocity, the matching source term, the closest point projection and the
// space-time convergence run.

#include "surfacttrack/eos.hpp"
#include "surfacttrack/interface_geometry.hpp"
#include "surfacttrack/interface_update.hpp"
#include "surfacttrack/surfactant.hpp"

#include <Eigen/LU>

#include <cmath>
#include <numbers>
#include <string>

namespace surfacttrack::exact {

inline double a(double t) { return 1.0 + std::sin(std::numbers::pi * t); }
inline double da(double t) { return std::numbers::pi * std::cos(std::numbers::pi * t); }

/// Level set phi(z, t); Gamma(t) = {phi = 1}.
inline double level_set(const Vec2& z, double t) { return z.x() * z.x() / a(t) + z.y() * z.y(); }

inline Vec2 level_set_gradient(const Vec2& z, double t) {
  return {2.0 * z.x() / a(t), 2.0 * z.y()};
}

inline double psi(const Vec2& z, double t) { return std::exp(-6.0 * t) * z.x() * z.y(); }

inline Vec2 velocity(const Vec2& z, double t) { return {0.5 * da(t) / a(t) * z.x(), 0.0}; }

inline Vec2 normal(const Vec2& z, double t) { return level_set_gradient(z, t).normalized(); }

/// Mean curvature -div(nu), negative on convex curves with outward normal.
inline double curvature(const Vec2& z, double t) {
  const double at = a(t);
  const Vec2 g = level_set_gradient(z, t);
  const double gn = g.norm();
  const double gn2 = gn * gn;
  return -2.0 / gn / at * (1.0 - 4.0 / gn2 / (at * at) * z.x() * z.x()) -
         2.0 / gn * (1.0 - 4.0 / gn2 * z.y() * z.y());
}

/// f = (material derivative of psi) + psi div_s u - Laplace-Beltrami of psi
/// on Gamma(t).
inline double forcing(const Vec2& z, double t, double surface_tol = 1e-10) {
  if (std::abs(level_set(z, t) - 1.0) > surface_tol)
    throw GeometryError("forcing evaluated off the surface");
  const double c = 0.5 * da(t) / a(t);
  const double p = psi(z, t);
  const Vec2 nu = normal(z, t);
  const double k = curvature(z, t);
  const double material = (c - 6.0) * p;
  const double stretch = c * (1.0 - nu.x() * nu.x()) * p;
  const double diffusion =
      std::exp(-6.0 * t) * (2.0 * nu.x() * nu.y() - (nu.x() * z.y() + nu.y() * z.x()) * k);
  return material + stretch + diffusion;
}

/// Closest point on Gamma(t) by Newton's method on the optimality system
///   y - p + lambda grad phi(y) = 0,  phi(y) = 1.
inline Vec2 project(const Vec2& p, double t, double tol = 1e-12, int max_iter = 50) {
  const double at = a(t);
  const double phi_p = level_set(p, t);
  if (!(phi_p > 1e-24)) throw GeometryError("projection undefined at the ellipse centre");
  Vec2 y = p / std::sqrt(phi_p);
  Vec2 g = level_set_gradient(y, t);
  double lambda = -(y - p).dot(g) / g.squaredNorm();
  const double scale = std::max(1.0, p.norm());
  for (int it = 0; it < max_iter; ++it) {
    g = level_set_gradient(y, t);
    Eigen::Vector3d F;
    F << y - p + lambda * g, level_set(y, t) - 1.0;
    if (F.head<2>().norm() <= tol * scale && std::abs(F[2]) <= tol) return y;
    Eigen::Matrix3d J;
    J << 1.0 + 2.0 * lambda / at, 0.0, g.x(),
         0.0, 1.0 + 2.0 * lambda, g.y(),
         g.x(), g.y(), 0.0;
    const Eigen::Vector3d d = J.fullPivLu().solve(-F);
    y += d.head<2>();
    lambda += d[2];
  }
  throw SolverError("closest point projection did not converge");
}

enum class Scheme { gd, hg };

struct ConvergenceResult {
  int num_vertices = 0;
  double h0 = 0.0;
  double error = 0.0;
  int steps = 0;
  double max_mass_defect = 0.0;
};

/// Transport of psi on the prescribed ellipse motion from t = 0 to
/// t = t_end with tau = h0^2 and a shortened last step.
inline ConvergenceResult run_convergence(Scheme scheme, int num_vertices, double t_end = 1.0,
                                         const EosModel& eos = EosModel{}) {
  InterfaceMesh mesh = InterfaceMesh::circle({0.0, 0.0}, 1.0, num_vertices);
  SurfaceScalarField psi_h(num_vertices);
  for (int k = 0; k < num_vertices; ++k) psi_h[k] = psi(mesh.vertex(k), 0.0);

  ConvergenceResult res;
  res.num_vertices = num_vertices;
  res.h0 = max_segment_length(mesh);
  const double tau = res.h0 * res.h0;
  const int steps = static_cast<int>(std::ceil(t_end / tau - 1e-12));
  res.steps = steps;

  double sum = 0.0;
  double t = 0.0;
  for (int m = 0; m < steps; ++m) {
    const double t_new = (m + 1 == steps) ? t_end : (m + 1) * tau;
    const double dt = t_new - t;
    const front::AnalyticVelocity u{[t_new](const Vec2& z) { return velocity(z, t_new); }};

    front::InterfaceUpdate upd = scheme == Scheme::hg ? front::step_hg(mesh, u, dt)
                                                      : front::step_gd(mesh, u, dt);
    const InterfaceMesh new_mesh = mesh.with_positions(upd.positions);

    SurfaceScalarField source(num_vertices);
    std::vector<Vec2> projected(num_vertices);
    for (int k = 0; k < num_vertices; ++k) {
      projected[k] = project(new_mesh.vertex(k), t_new);
      source[k] = forcing(projected[k], t_new);
    }
    surf::StepInputs in{mesh, new_mesh, psi_h, dt, 1.0, source};
    SurfaceScalarField next = scheme == Scheme::hg
                                  ? surf::step_hg(in, front::vertex_velocity(mesh, u), eos)
                                  : surf::step_gd(in);

    const double expected_mass = surf::total_mass(mesh, psi_h) +
                                 dt * lumped_mass(new_mesh).dot(source);
    res.max_mass_defect = std::max(
        res.max_mass_defect, std::abs(surf::total_mass(new_mesh, next) - expected_mass));

    const Vector m_new = lumped_mass(new_mesh);
    double e2 = 0.0;
    for (int k = 0; k < num_vertices; ++k) {
      const double d = next[k] - psi(projected[k], t_new);
      e2 += m_new[k] * d * d;
    }
    sum += dt * e2;

    mesh = new_mesh;
    psi_h = std::move(next);
    t = t_new;
  }
  res.error = std::sqrt(sum);
  return res;
}

inline std::string to_string(Scheme s) { return s == Scheme::hg ? "hg" : "gd"; }

}  // namespace surfacttrack::exact
