#pragma once

// Implicit surfactant transport on the moving polygon: the pure evolving
// surface step (gd) and the ALE step with the Psi* tangential flux (hg).

#include "surfacttrack/eos.hpp"
#include "surfacttrack/interface_geometry.hpp"

#include <Eigen/SparseCholesky>

#include <optional>

namespace surfacttrack::surf {

struct StepInputs {
  const InterfaceMesh& old_mesh;
  const InterfaceMesh& new_mesh;
  const SurfaceScalarField& psi;
  double tau;
  double d_gamma;
  /// Nodal source values on the new polygon.
  std::optional<SurfaceScalarField> source;
};

/// Lumped total amount <Psi, 1>^h.
inline double total_mass(const InterfaceMesh& mesh, const SurfaceScalarField& psi) {
  return lumped_mass(mesh).dot(psi);
}

namespace detail {

inline void check(const StepInputs& in) {
  const int K = in.old_mesh.num_vertices();
  if (in.new_mesh.num_vertices() != K || in.psi.size() != K)
    throw GeometryError("surfactant step: vertex count mismatch");
  if (in.source && in.source->size() != K)
    throw GeometryError("surfactant step: source size mismatch");
  if (!(in.tau > 0.0)) throw ConfigError("surfactant step: tau must be positive");
  if (!(in.d_gamma >= 0.0)) throw ConfigError("surfactant step: D_Gamma must be non-negative");
}

inline Vector base_rhs(const StepInputs& in, const Vector& m_new) {
  Vector rhs = lumped_mass(in.old_mesh).cwiseProduct(in.psi) / in.tau;
  if (in.source) rhs += m_new.cwiseProduct(*in.source);
  return rhs;
}

inline SurfaceScalarField solve(const StepInputs& in, const Vector& m_new, const Vector& rhs) {
  SparseMatrix S = in.d_gamma * laplace_beltrami_stiffness(in.new_mesh);
  for (int k = 0; k < m_new.size(); ++k) S.coeffRef(k, k) += m_new[k] / in.tau;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(S);
  if (ldlt.info() != Eigen::Success) throw SolverError("surfactant system: factorization failed");
  Vector x = ldlt.solve(rhs);
  // One step of iterative refinement keeps conservation at round-off level.
  x += ldlt.solve(rhs - S * x);
  return x;
}

}  // namespace detail

inline SurfaceScalarField step_gd(const StepInputs& in) {
  detail::check(in);
  const Vector m_new = lumped_mass(in.new_mesh);
  return detail::solve(in, m_new, detail::base_rhs(in, m_new));
}

/// `vertex_velocity` holds U^{m+1}(q^m_k); the new positions are the vertices
/// of `new_mesh`.
inline SurfaceScalarField step_hg(const StepInputs& in, const SurfaceVectorField& vertex_velocity,
                                  const EosModel& eos) {
  detail::check(in);
  const int K = in.old_mesh.num_vertices();
  if (static_cast<int>(vertex_velocity.size()) != K)
    throw GeometryError("surfactant step: velocity size mismatch");
  const Vector m_new = lumped_mass(in.new_mesh);
  Vector rhs = detail::base_rhs(in, m_new);
  const auto& old_mesh = in.old_mesh;
  for (int j = 0; j < old_mesh.num_segments(); ++j) {
    const auto [a, b] = old_mesh.segment(j);
    const Vec2 wa =
        (in.new_mesh.vertex(a) - old_mesh.vertex(a)) / in.tau - vertex_velocity[a];
    const Vec2 wb =
        (in.new_mesh.vertex(b) - old_mesh.vertex(b)) / in.tau - vertex_velocity[b];
    const double star = psi_star_edge(eos, in.psi[a], in.psi[b]);
    // Lumped pairing with the per-segment constant gradients -t/h and t/h.
    const double s = 0.5 * star * (wa + wb).dot(old_mesh.unit_tangent(j));
    rhs[a] += s;
    rhs[b] -= s;
  }
  return detail::solve(in, m_new, rhs);
}

}  // namespace surfacttrack::surf
