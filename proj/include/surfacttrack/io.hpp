#pragma once

// Interface snapshots (CSV) and legacy VTK output of bulk fields.

#include "surfacttrack/bulk_mesh.hpp"
#include "surfacttrack/interface_geometry.hpp"
#include "surfacttrack/ns_solver.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace surfacttrack::io {

/// One row per vertex in loop order: x,y,psi,kappa. For vector curvature the
/// signed magnitude relative to the vertex normal is written.
inline void write_interface_csv(const std::string& path, const InterfaceMesh& mesh,
                                const SurfaceScalarField& psi, const SurfaceScalarField& kappa) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << "x,y,psi,kappa\n" << std::setprecision(17);
  for (int k : mesh.loop_order()) {
    f << mesh.vertex(k).x() << ',' << mesh.vertex(k).y() << ','
      << (psi.size() > k ? psi[k] : 0.0) << ',' << (kappa.size() > k ? kappa[k] : 0.0) << '\n';
  }
}

struct InterfaceSnapshot {
  InterfaceMesh mesh;
  SurfaceScalarField psi;
  SurfaceScalarField kappa;
};

inline InterfaceSnapshot read_interface_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path);
  std::string line;
  std::vector<Vec2> pts;
  std::vector<double> psi, kappa;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || (lineno == 1 && line.rfind("x,", 0) == 0)) continue;
    std::stringstream ss(line);
    std::array<double, 4> v{};
    char comma = 0;
    ss >> v[0] >> comma >> v[1] >> comma >> v[2] >> comma >> v[3];
    if (!ss) throw Error(path + ":" + std::to_string(lineno) + ": malformed snapshot row");
    pts.emplace_back(v[0], v[1]);
    psi.push_back(v[2]);
    kappa.push_back(v[3]);
  }
  InterfaceSnapshot s{InterfaceMesh(pts), Eigen::Map<Vector>(psi.data(), static_cast<Eigen::Index>(psi.size())),
                      Eigen::Map<Vector>(kappa.data(), static_cast<Eigen::Index>(kappa.size()))};
  return s;
}

inline void write_vtk(const std::string& path, const bulk::BulkMesh& mesh, const ns::FlowState& flow,
                      const Vector& rho, const Vector& mu) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << std::setprecision(12);
  f << "# vtk DataFile Version 3.0\nsurfacttrack bulk\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  f << "POINTS " << mesh.num_vertices() << " double\n";
  for (const auto& p : mesh.vertices()) f << p.x() << ' ' << p.y() << " 0\n";
  f << "CELLS " << mesh.num_triangles() << ' ' << 4 * mesh.num_triangles() << '\n';
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& v = mesh.triangle(t);
    f << "3 " << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  }
  f << "CELL_TYPES " << mesh.num_triangles() << '\n';
  for (int t = 0; t < mesh.num_triangles(); ++t) f << "5\n";
  f << "POINT_DATA " << mesh.num_vertices() << "\nVECTORS velocity double\n";
  for (int n = 0; n < mesh.num_vertices(); ++n)
    f << flow.velocity[2 * n] << ' ' << flow.velocity[2 * n + 1] << " 0\n";
  f << "SCALARS pressure_p1 double 1\nLOOKUP_TABLE default\n";
  for (int n = 0; n < mesh.num_vertices(); ++n) f << flow.pressure[n] << '\n';
  f << "CELL_DATA " << mesh.num_triangles() << '\n';
  f << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& v = mesh.triangle(t);
    f << (flow.pressure[v[0]] + flow.pressure[v[1]] + flow.pressure[v[2]]) / 3.0 << '\n';
  }
  f << "SCALARS density double 1\nLOOKUP_TABLE default\n";
  for (int t = 0; t < mesh.num_triangles(); ++t) f << rho[t] << '\n';
  f << "SCALARS viscosity double 1\nLOOKUP_TABLE default\n";
  for (int t = 0; t < mesh.num_triangles(); ++t) f << mu[t] << '\n';
}

}  // namespace surfacttrack::io
