#pragma once

// One time step of the interface: the coupled position/curvature system with
// implicit tangential motion (hg), or vertex transport followed by the
// lumped vector curvature (gd).

#include "surfacttrack/interface_geometry.hpp"

#include <Eigen/SparseLU>

#include <array>
#include <concepts>
#include <functional>

namespace surfacttrack::front {

/// A velocity field that can be sampled at points and integrated against the
/// two hat functions of a straight segment.
template <class S>
concept VelocitySampler = requires(const S& s, const Vec2& p) {
  { s.at(p) } -> std::convertible_to<Vec2>;
  // (int U (1-t) ds, int U t ds) over the segment p0 -> p1.
  { s.segment_moments(p, p) } -> std::convertible_to<std::array<Vec2, 2>>;
};

/// Closed-form velocity. Segment moments use 4-point Gauss on `subdivisions`
/// equal pieces.
struct AnalyticVelocity {
  std::function<Vec2(const Vec2&)> u;
  int subdivisions = 1;

  [[nodiscard]] Vec2 at(const Vec2& p) const { return u(p); }

  [[nodiscard]] std::array<Vec2, 2> segment_moments(const Vec2& p0, const Vec2& p1) const {
    std::array<Vec2, 2> m{Vec2::Zero(), Vec2::Zero()};
    const double len = (p1 - p0).norm();
    for (int s = 0; s < subdivisions; ++s) {
      const double t0 = static_cast<double>(s) / subdivisions;
      const double t1 = static_cast<double>(s + 1) / subdivisions;
      for (const auto& qp : quad::gauss4) {
        const double t = t0 + (t1 - t0) * qp.t;
        const Vec2 v = u(p0 + t * (p1 - p0));
        const double w = qp.w * (t1 - t0) * len;
        m[0] += w * (1.0 - t) * v;
        m[1] += w * t * v;
      }
    }
    return m;
  }
};

enum class GdRhsMode { lumped, full };

struct InterfaceUpdate {
  SurfaceVectorField positions;
  /// Scalar curvature (hg); empty for gd.
  SurfaceScalarField kappa;
  /// Vector curvature (gd); empty for hg.
  SurfaceVectorField kappa_vec;
  /// Relative residual of the linear solve (hg), zero for gd.
  double residual = 0.0;
};

/// Nodal velocity values U(q_k).
template <VelocitySampler S>
SurfaceVectorField vertex_velocity(const InterfaceMesh& mesh, const S& u) {
  SurfaceVectorField v(mesh.num_vertices());
  for (int k = 0; k < mesh.num_vertices(); ++k) v[k] = u.at(mesh.vertex(k));
  return v;
}

/// b_k = <U, chi_k nu> with full quadrature.
template <VelocitySampler S>
Vector normal_velocity_moments(const InterfaceMesh& mesh, const S& u) {
  Vector b = Vector::Zero(mesh.num_vertices());
  for (int j = 0; j < mesh.num_segments(); ++j) {
    const auto [a, c] = mesh.segment(j);
    const Vec2 nu = mesh.normal(j);
    const auto m = u.segment_moments(mesh.vertex(a), mesh.vertex(c));
    b[a] += m[0].dot(nu);
    b[c] += m[1].dot(nu);
  }
  return b;
}

/// <U, chi_k> with full quadrature.
template <VelocitySampler S>
SurfaceVectorField velocity_moments(const InterfaceMesh& mesh, const S& u) {
  SurfaceVectorField b(mesh.num_vertices(), Vec2::Zero());
  for (int j = 0; j < mesh.num_segments(); ++j) {
    const auto [a, c] = mesh.segment(j);
    const auto m = u.segment_moments(mesh.vertex(a), mesh.vertex(c));
    b[a] += m[0];
    b[c] += m[1];
  }
  return b;
}

/// Monolithic solve of
///   N_k . (X_k - X^m_k) = tau b_k,          (normal motion)
///   kappa_k N_k + (A X)_k = 0,              (curvature)
/// for the 2K positions and K curvatures. `b` holds <U, chi_k nu^m>.
inline InterfaceUpdate solve_hg_system(const InterfaceMesh& mesh, const Vector& b, double tau) {
  const int K = mesh.num_vertices();
  const auto vn = vertex_normals(mesh);
  if (!vn.spans_plane)
    throw GeometryError("vertex normals do not span the plane; the interface system is singular");
  const auto n = vertex_normal_weights(mesh);
  const SparseMatrix A = laplace_beltrami_stiffness(mesh);

  std::vector<Triplet> t;
  t.reserve(2 * A.nonZeros() + 4 * K);
  for (int col = 0; col < A.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(A, col); it; ++it) {
      const int r = static_cast<int>(it.row());
      t.emplace_back(2 * r, 2 * col, it.value());
      t.emplace_back(2 * r + 1, 2 * col + 1, it.value());
    }
  }
  // Unknowns are the displacements X - X^m and the curvature.
  Vector rhs = Vector::Zero(3 * K);
  Vector qx(K), qy(K);
  for (int k = 0; k < K; ++k) {
    qx[k] = mesh.vertex(k).x();
    qy[k] = mesh.vertex(k).y();
  }
  const Vector aqx = A * qx, aqy = A * qy;
  for (int k = 0; k < K; ++k) {
    for (int d = 0; d < 2; ++d) {
      t.emplace_back(2 * k + d, 2 * K + k, n[k][d]);
      t.emplace_back(2 * K + k, 2 * k + d, n[k][d]);
    }
    rhs[2 * k] = -aqx[k];
    rhs[2 * k + 1] = -aqy[k];
    rhs[2 * K + k] = tau * b[k];
  }
  SparseMatrix M(3 * K, 3 * K);
  M.setFromTriplets(t.begin(), t.end());
  M.makeCompressed();

  Eigen::SparseLU<SparseMatrix> lu;
  lu.analyzePattern(M);
  lu.factorize(M);
  if (lu.info() != Eigen::Success) throw SolverError("interface system: factorization failed");
  Vector x = lu.solve(rhs);
  if (lu.info() != Eigen::Success) throw SolverError("interface system: solve failed");
  const Vector r = rhs - M * x;
  x += lu.solve(r);

  InterfaceUpdate out;
  out.positions.resize(K);
  out.kappa.resize(K);
  for (int k = 0; k < K; ++k) {
    out.positions[k] = mesh.vertex(k) + Vec2(x[2 * k], x[2 * k + 1]);
    out.kappa[k] = x[2 * K + k];
  }
  const double scale = std::max(rhs.norm(), 1e-300);
  out.residual = (M * x - rhs).norm() / scale;
  return out;
}

template <VelocitySampler S>
InterfaceUpdate step_hg(const InterfaceMesh& mesh, const S& u, double tau) {
  return solve_hg_system(mesh, normal_velocity_moments(mesh, u), tau);
}

/// kappa_vec_k = -(A X)_k / m_k with A and m assembled on `mesh` and X the
/// new positions.
inline SurfaceVectorField gd_curvature(const InterfaceMesh& mesh,
                                       const SurfaceVectorField& positions) {
  const Vector m = lumped_mass(mesh);
  SurfaceVectorField kv(mesh.num_vertices(), Vec2::Zero());
  for (int j = 0; j < mesh.num_segments(); ++j) {
    const auto [a, b] = mesh.segment(j);
    const Vec2 d = (positions[a] - positions[b]) / mesh.length(j);
    kv[a] -= d;
    kv[b] += d;
  }
  for (int k = 0; k < mesh.num_vertices(); ++k) kv[k] /= m[k];
  return kv;
}

template <VelocitySampler S>
InterfaceUpdate step_gd(const InterfaceMesh& mesh, const S& u, double tau,
                        GdRhsMode mode = GdRhsMode::lumped) {
  const int K = mesh.num_vertices();
  InterfaceUpdate out;
  out.positions.resize(K);
  if (mode == GdRhsMode::lumped) {
    for (int k = 0; k < K; ++k) out.positions[k] = mesh.vertex(k) + tau * u.at(mesh.vertex(k));
  } else {
    const Vector m = lumped_mass(mesh);
    const auto b = velocity_moments(mesh, u);
    for (int k = 0; k < K; ++k) out.positions[k] = mesh.vertex(k) + tau * b[k] / m[k];
  }
  out.kappa_vec = gd_curvature(mesh, out.positions);
  return out;
}

}  // namespace surfacttrack::front
