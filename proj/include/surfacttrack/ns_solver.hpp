#pragma once

// Taylor-Hood P2-P1 Navier-Stokes step with one extra pressure function, the
// characteristic function of the inner phase. Unknown layout: velocity
// components interleaved per P2 node, then the P1 pressure at the vertices,
// then the enrichment coefficient.

#include "surfacttrack/bulk_mesh.hpp"
#include "surfacttrack/eos.hpp"
#include "surfacttrack/interface_geometry.hpp"
#include "surfacttrack/quadrature.hpp"

#include <Eigen/SparseLU>
#ifdef SURFACTTRACK_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif

#include <array>
#include <chrono>
#include <functional>
#include <optional>

namespace surfacttrack::ns {

enum class BcKind { no_slip, free_slip, dirichlet };

struct BoundarySpec {
  /// Indexed by bulk::Side.
  std::array<BcKind, 4> side{BcKind::no_slip, BcKind::no_slip, BcKind::no_slip, BcKind::no_slip};
  /// Prescribed velocity on dirichlet sides.
  std::function<Vec2(const Vec2&)> g;
};

struct FlowState {
  /// (u_x, u_y) per P2 node.
  Vector velocity;
  /// P1 nodal pressure.
  Vector pressure;
  /// Coefficient of the inner-phase characteristic function.
  double pressure_xfem = 0.0;
};

/// Total pressure at p: P1 part plus the enrichment inside the interface.
inline double pressure_at(const bulk::BulkMesh& mesh, const FlowState& s,
                          const InterfaceMesh* interface, const Vec2& p) {
  const auto loc = mesh.locate(p);
  const auto& v = mesh.triangle(loc.triangle);
  double val = 0.0;
  for (int i = 0; i < 3; ++i) val += loc.bary[i] * s.pressure[v[i]];
  if (interface && bulk::inside_polygon(*interface, p)) val += s.pressure_xfem;
  return val;
}

/// Velocity degrees of freedom fixed by the boundary conditions, with values.
struct Constraints {
  std::vector<char> fixed;
  Vector value;
};

inline Constraints boundary_constraints(const bulk::BulkMesh& mesh, const BoundarySpec& bc) {
  const int nn = mesh.num_p2_nodes();
  // Bit s set when node lies on a boundary edge of side s.
  std::vector<unsigned char> sides(nn, 0);
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const int s = mesh.edge_side(e);
    if (s == bulk::kInteriorEdge) continue;
    const unsigned char bit = static_cast<unsigned char>(1u << s);
    sides[mesh.edge(e)[0]] |= bit;
    sides[mesh.edge(e)[1]] |= bit;
    sides[mesh.num_vertices() + e] |= bit;
  }
  Constraints c;
  c.fixed.assign(2 * nn, 0);
  c.value = Vector::Zero(2 * nn);
  for (int n = 0; n < nn; ++n) {
    if (!sides[n]) continue;
    bool strong = false;
    bool dirichlet = false;
    for (int s = 0; s < 4; ++s) {
      if (!(sides[n] & (1u << s))) continue;
      if (bc.side[s] == BcKind::no_slip) strong = true;
      if (bc.side[s] == BcKind::dirichlet) strong = dirichlet = true;
    }
    if (strong) {
      Vec2 g = Vec2::Zero();
      if (dirichlet) {
        if (!bc.g) throw ConfigError("dirichlet boundary without prescribed velocity");
        g = bc.g(mesh.p2_node(n));
      }
      c.fixed[2 * n] = c.fixed[2 * n + 1] = 1;
      c.value[2 * n] = g.x();
      c.value[2 * n + 1] = g.y();
      continue;
    }
    for (int s = 0; s < 4; ++s) {
      if (!(sides[n] & (1u << s)) || bc.side[s] != BcKind::free_slip) continue;
      const int comp = (s == bulk::bottom || s == bulk::top) ? 1 : 0;
      c.fixed[2 * n + comp] = 1;
      c.value[2 * n + comp] = 0.0;
    }
  }
  return c;
}

/// Adds w * v . xi(p) for every P2 basis function xi of the triangle at loc.
inline void add_point_load(const bulk::BulkMesh& mesh, const bulk::Location& loc, const Vec2& v,
                           Vector& load) {
  const auto nodes = mesh.p2_nodes(loc.triangle);
  const auto phi = bulk::p2::values(loc.bary);
  for (int i = 0; i < 6; ++i) {
    load[2 * nodes[i]] += phi[i] * v.x();
    load[2 * nodes[i] + 1] += phi[i] * v.y();
  }
}

/// Column of the enrichment: int_{inner phase} div xi = int_Gamma xi . nu
/// for every velocity basis function xi.
inline Vector xfem_pressure_column(const InterfaceMesh& interface, const bulk::BulkMesh& mesh) {
  Vector col = Vector::Zero(2 * mesh.num_p2_nodes());
  for (int j = 0; j < interface.num_segments(); ++j) {
    const Vec2& p0 = interface.vertex(interface.segment(j).a);
    const Vec2& p1 = interface.vertex(interface.segment(j).b);
    const Vec2 nu = interface.normal(j);
    const double len = interface.length(j);
    for (const auto& piece : bulk::split_segment(mesh, p0, p1)) {
      for (const auto& qp : quad::gauss4) {
        const double t = piece.t0 + (piece.t1 - piece.t0) * qp.t;
        const Vec2 x = p0 + t * (p1 - p0);
        const double w = qp.w * (piece.t1 - piece.t0) * len;
        add_point_load(mesh, {piece.triangle, mesh.bary_in(piece.triangle, x)}, w * nu, col);
      }
    }
  }
  return col;
}

enum class CurvatureQuadrature { full, lumped };

/// Right hand side <pi[gamma_eps(Psi) kappa] nu, xi> + <grad_s pi[gamma_eps(Psi)], xi>^h
/// for the scalar curvature scheme.
inline Vector surface_tension_load_hg(const InterfaceMesh& interface, const bulk::BulkMesh& mesh,
                                      const SurfaceScalarField& kappa,
                                      const SurfaceScalarField& psi, const EosModel& eos,
                                      CurvatureQuadrature mode = CurvatureQuadrature::full) {
  const int K = interface.num_vertices();
  if (kappa.size() != K || psi.size() != K)
    throw GeometryError("surface tension load: field size mismatch");
  Vector load = Vector::Zero(2 * mesh.num_p2_nodes());
  Vector gam(K);
  for (int k = 0; k < K; ++k) gam[k] = eos.gamma_eps(psi[k]);
  std::vector<bulk::Location> at_vertex(K);
  for (int k = 0; k < K; ++k) at_vertex[k] = mesh.locate(interface.vertex(k));

  for (int j = 0; j < interface.num_segments(); ++j) {
    const auto [a, b] = interface.segment(j);
    const Vec2& p0 = interface.vertex(a);
    const Vec2& p1 = interface.vertex(b);
    const Vec2 nu = interface.normal(j);
    const double len = interface.length(j);
    const double ga = gam[a] * kappa[a];
    const double gb = gam[b] * kappa[b];
    if (mode == CurvatureQuadrature::full) {
      for (const auto& piece : bulk::split_segment(mesh, p0, p1)) {
        for (const auto& qp : quad::gauss4) {
          const double t = piece.t0 + (piece.t1 - piece.t0) * qp.t;
          const Vec2 x = p0 + t * (p1 - p0);
          const double w = qp.w * (piece.t1 - piece.t0) * len;
          add_point_load(mesh, {piece.triangle, mesh.bary_in(piece.triangle, x)},
                         w * ((1.0 - t) * ga + t * gb) * nu, load);
        }
      }
    } else {
      add_point_load(mesh, at_vertex[a], 0.5 * len * ga * nu, load);
      add_point_load(mesh, at_vertex[b], 0.5 * len * gb * nu, load);
    }
    const Vec2 marangoni = 0.5 * (gam[b] - gam[a]) * interface.unit_tangent(j);
    add_point_load(mesh, at_vertex[a], marangoni, load);
    add_point_load(mesh, at_vertex[b], marangoni, load);
  }
  return load;
}

/// Right hand side <gamma(Psi) kappa_vec + grad_s pi[gamma(Psi)], xi>^h for the
/// vector curvature scheme.
inline Vector surface_tension_load_gd(const InterfaceMesh& interface, const bulk::BulkMesh& mesh,
                                      const SurfaceVectorField& kappa_vec,
                                      const SurfaceScalarField& psi, const EosModel& eos) {
  const int K = interface.num_vertices();
  if (static_cast<int>(kappa_vec.size()) != K || psi.size() != K)
    throw GeometryError("surface tension load: field size mismatch");
  Vector load = Vector::Zero(2 * mesh.num_p2_nodes());
  Vector gam(K);
  for (int k = 0; k < K; ++k) gam[k] = eos.is_constant() ? eos.gamma0 : eos.gamma(psi[k]);
  const Vector m = lumped_mass(interface);
  std::vector<bulk::Location> at_vertex(K);
  for (int k = 0; k < K; ++k) {
    at_vertex[k] = mesh.locate(interface.vertex(k));
    add_point_load(mesh, at_vertex[k], m[k] * gam[k] * kappa_vec[k], load);
  }
  for (int j = 0; j < interface.num_segments(); ++j) {
    const auto [a, b] = interface.segment(j);
    const Vec2 marangoni = 0.5 * (gam[b] - gam[a]) * interface.unit_tangent(j);
    add_point_load(mesh, at_vertex[a], marangoni, load);
    add_point_load(mesh, at_vertex[b], marangoni, load);
  }
  return load;
}

struct FlowInputs {
  const bulk::BulkMesh* mesh = nullptr;
  /// I_2 U^m on the current mesh.
  const Vector* u_old = nullptr;
  /// rho^m, I_0 rho^{m-1} and mu^m per triangle.
  const Vector* rho = nullptr;
  const Vector* rho_prev = nullptr;
  const Vector* mu = nullptr;
  double tau = 1e-3;
  /// Body force rho^m f1 + f2 with constant f1, f2.
  Vec2 f1 = Vec2::Zero();
  Vec2 f2 = Vec2::Zero();
  /// Surface tension load, size 2 * #P2 nodes; empty for none.
  const Vector* surface_load = nullptr;
  /// Enrichment column and |inner phase|; disabled when null.
  const Vector* xfem_column = nullptr;
  double inner_area = 0.0;
  BoundarySpec bc;
  bool advection = true;
};

struct SaddleSystem {
  SparseMatrix matrix;
  Vector rhs;
  int num_velocity = 0;
  int num_pressure = 0;
  bool xfem = false;
  /// Saddle operator before boundary elimination; used for residual checks.
  SparseMatrix full_matrix;
  Vector full_rhs;
};

struct SolveStats {
  double residual = 0.0;
  double seconds = 0.0;
};

/// Skew-symmetric advection operator for the velocity block alone.
inline SparseMatrix advection_matrix(const bulk::BulkMesh& mesh, const Vector& w,
                                     const Vector& rho) {
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(mesh.num_triangles()) * 72);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto nodes = mesh.p2_nodes(t);
    const auto g = mesh.bary_gradients(t);
    const double area = mesh.area(t);
    Eigen::Matrix<double, 6, 6> loc = Eigen::Matrix<double, 6, 6>::Zero();
    for (const auto& qp : quad::tri7) {
      const auto phi = bulk::p2::values(qp.l);
      const auto dphi = bulk::p2::gradients(qp.l, g);
      Vec2 wq = Vec2::Zero();
      for (int i = 0; i < 6; ++i) wq += phi[i] * Vec2(w[2 * nodes[i]], w[2 * nodes[i] + 1]);
      const double c = 0.5 * rho[t] * qp.w * area;
      for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b)
          loc(a, b) += c * (wq.dot(dphi[b]) * phi[a] - wq.dot(dphi[a]) * phi[b]);
    }
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b)
        for (int d = 0; d < 2; ++d) trip.emplace_back(2 * nodes[a] + d, 2 * nodes[b] + d, loc(a, b));
  }
  const int n = 2 * mesh.num_p2_nodes();
  SparseMatrix N(n, n);
  N.setFromTriplets(trip.begin(), trip.end());
  return N;
}

inline SaddleSystem assemble(const FlowInputs& in) {
  const auto& mesh = *in.mesh;
  const int nn = mesh.num_p2_nodes();
  const int nu = 2 * nn;
  const int np = mesh.num_vertices();
  const bool xfem = in.xfem_column != nullptr;
  const int n = nu + np + (xfem ? 1 : 0);

  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(mesh.num_triangles()) * (144 + 72));
  Vector rhs = Vector::Zero(n);

  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto nodes = mesh.p2_nodes(t);
    const auto& tv = mesh.triangle(t);
    const auto g = mesh.bary_gradients(t);
    const double area = mesh.area(t);
    const double rho = (*in.rho)[t];
    const double rho_prev = (*in.rho_prev)[t];
    const double mu = (*in.mu)[t];
    const double cm = 0.5 * (rho + rho_prev) / in.tau;
    const Vec2 force = rho * in.f1 + in.f2;

    Eigen::Matrix<double, 12, 12> A = Eigen::Matrix<double, 12, 12>::Zero();
    Eigen::Matrix<double, 3, 12> B = Eigen::Matrix<double, 3, 12>::Zero();
    Eigen::Matrix<double, 12, 1> f = Eigen::Matrix<double, 12, 1>::Zero();

    for (const auto& qp : quad::tri7) {
      const double w = qp.w * area;
      const auto phi = bulk::p2::values(qp.l);
      const auto dphi = bulk::p2::gradients(qp.l, g);
      Vec2 uo = Vec2::Zero();
      for (int i = 0; i < 6; ++i) uo += phi[i] * Vec2((*in.u_old)[2 * nodes[i]], (*in.u_old)[2 * nodes[i] + 1]);
      for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) {
          const double mass = cm * phi[a] * phi[b];
          const double lap = mu * dphi[a].dot(dphi[b]);
          const double adv =
              in.advection ? 0.5 * rho * (uo.dot(dphi[b]) * phi[a] - uo.dot(dphi[a]) * phi[b]) : 0.0;
          for (int c = 0; c < 2; ++c) {
            A(2 * a + c, 2 * b + c) += w * (mass + lap + adv);
            for (int d = 0; d < 2; ++d) A(2 * a + c, 2 * b + d) += w * mu * dphi[a][d] * dphi[b][c];
          }
        }
        for (int c = 0; c < 2; ++c) {
          f(2 * a + c) += w * phi[a] * (rho_prev / in.tau * uo[c] + force[c]);
          for (int i = 0; i < 3; ++i) B(i, 2 * a + c) -= w * qp.l[i] * dphi[a][c];
        }
      }
    }
    for (int r = 0; r < 12; ++r) {
      const int gr = 2 * nodes[r / 2] + r % 2;
      rhs[gr] += f(r);
      for (int c = 0; c < 12; ++c) trip.emplace_back(gr, 2 * nodes[c / 2] + c % 2, A(r, c));
      for (int i = 0; i < 3; ++i) {
        trip.emplace_back(gr, nu + tv[i], B(i, r));
        trip.emplace_back(nu + tv[i], gr, B(i, r));
      }
    }
  }
  if (xfem) {
    const Vector& x = *in.xfem_column;
    for (int r = 0; r < nu; ++r) {
      if (x[r] == 0.0) continue;
      trip.emplace_back(r, nu + np, -x[r]);
      trip.emplace_back(nu + np, r, -x[r]);
    }
  }
  if (in.surface_load) rhs.head(nu) += *in.surface_load;

  SaddleSystem sys;
  sys.num_velocity = nu;
  sys.num_pressure = np + (xfem ? 1 : 0);
  sys.xfem = xfem;
  sys.full_matrix.resize(n, n);
  sys.full_matrix.setFromTriplets(trip.begin(), trip.end());
  sys.full_rhs = rhs;

  // Eliminate constrained velocities and pin the pressure at vertex 0.
  const Constraints cons = boundary_constraints(mesh, in.bc);
  std::vector<char> fixed(n, 0);
  Vector value = Vector::Zero(n);
  for (int r = 0; r < nu; ++r) {
    fixed[r] = cons.fixed[r];
    value[r] = cons.value[r];
  }
  fixed[nu] = 1;
  std::vector<Triplet> reduced;
  reduced.reserve(trip.size());
  Vector rhs_r = rhs;
  for (int col = 0; col < sys.full_matrix.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(sys.full_matrix, col); it; ++it) {
      const int r = static_cast<int>(it.row());
      const int c = static_cast<int>(it.col());
      if (fixed[r]) continue;
      if (fixed[c]) {
        rhs_r[r] -= it.value() * value[c];
        continue;
      }
      reduced.emplace_back(r, c, it.value());
    }
  }
  for (int r = 0; r < n; ++r) {
    if (fixed[r]) {
      reduced.emplace_back(r, r, 1.0);
      rhs_r[r] = value[r];
    }
  }
  sys.matrix.resize(n, n);
  sys.matrix.setFromTriplets(reduced.begin(), reduced.end());
  sys.matrix.makeCompressed();
  sys.rhs = rhs_r;
  return sys;
}

/// Direct sparse solve followed by the zero-mean pressure shift.
inline FlowState solve_saddle(const SaddleSystem& sys, const bulk::BulkMesh& mesh,
                              double inner_area, SolveStats* stats = nullptr) {
  const auto start = std::chrono::steady_clock::now();
  Vector x;
  auto fail = [](const char* what) {
    throw SolverError(std::string("saddle point solve: factorization of the velocity-pressure "
                                  "block failed (") + what + ")");
  };
#ifdef SURFACTTRACK_HAVE_UMFPACK
  Eigen::UmfPackLU<SparseMatrix> lu;
  lu.compute(sys.matrix);
  if (lu.info() != Eigen::Success) fail("umfpack");
#else
  Eigen::SparseLU<SparseMatrix> lu;
  lu.analyzePattern(sys.matrix);
  lu.factorize(sys.matrix);
  if (lu.info() != Eigen::Success) fail(lu.lastErrorMessage().c_str());
#endif
  x = lu.solve(sys.rhs);
  const double bnorm = std::max(sys.rhs.norm(), std::numeric_limits<double>::min());
  double res = (sys.matrix * x - sys.rhs).norm() / bnorm;
  for (int it = 0; it < 3 && res > 1e-12; ++it) {
    const Vector r = sys.rhs - sys.matrix * x;
    x += lu.solve(r);
    res = (sys.matrix * x - sys.rhs).norm() / bnorm;
  }
  if (!x.allFinite() || res > 1e-8) throw SolverError("saddle point solve: residual too large");

  FlowState s;
  const int nu = sys.num_velocity;
  const int np = mesh.num_vertices();
  s.velocity = x.head(nu);
  s.pressure = x.segment(nu, np);
  s.pressure_xfem = sys.xfem ? x[nu + np] : 0.0;

  // int of P1 hat functions: area/3 per incident triangle.
  double mean = s.pressure_xfem * inner_area;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& v = mesh.triangle(t);
    mean += mesh.area(t) / 3.0 * (s.pressure[v[0]] + s.pressure[v[1]] + s.pressure[v[2]]);
  }
  s.pressure.array() -= mean / mesh.box().area();

  if (stats) {
    stats->residual = res;
    stats->seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return s;
}

/// (rho v, e_2) / (rho, 1) for a piecewise constant weight rho.
inline double weighted_mean_vertical(const bulk::BulkMesh& mesh, const Vector& u,
                                     const Vector& rho) {
  double num = 0.0, den = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (rho[t] == 0.0) continue;
    const auto nodes = mesh.p2_nodes(t);
    // Exact P2 mean over a triangle: vertices weigh 0, edge nodes 1/3.
    const double avg = (u[2 * nodes[3] + 1] + u[2 * nodes[4] + 1] + u[2 * nodes[5] + 1]) / 3.0;
    num += rho[t] * mesh.area(t) * avg;
    den += rho[t] * mesh.area(t);
  }
  return den > 0.0 ? num / den : 0.0;
}

/// 1/2 (rho u, u).
inline double kinetic_energy(const bulk::BulkMesh& mesh, const Vector& u, const Vector& rho) {
  double e = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto nodes = mesh.p2_nodes(t);
    double s = 0.0;
    for (const auto& qp : quad::tri7) {
      const auto phi = bulk::p2::values(qp.l);
      Vec2 v = Vec2::Zero();
      for (int i = 0; i < 6; ++i) v += phi[i] * Vec2(u[2 * nodes[i]], u[2 * nodes[i] + 1]);
      s += qp.w * v.squaredNorm();
    }
    e += 0.5 * rho[t] * mesh.area(t) * s;
  }
  return e;
}

/// Largest nodal speed.
inline double max_speed(const Vector& u) {
  double m = 0.0;
  for (Eigen::Index n = 0; n + 1 < u.size(); n += 2) m = std::max(m, std::hypot(u[n], u[n + 1]));
  return m;
}

}  // namespace surfacttrack::ns
