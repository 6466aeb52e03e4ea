#pragma once

// The coupled time loop: bulk adaptation and transfers, flow solve,
// interface step, surfactant step, optional interface refinement and
// per-step diagnostics. Also the flat key=value configuration and presets.

#include "surfacttrack/bulk_mesh.hpp"
#include "surfacttrack/eos.hpp"
#include "surfacttrack/interface_geometry.hpp"
#include "surfacttrack/interface_update.hpp"
#include "surfacttrack/io.hpp"
#include "surfacttrack/ns_solver.hpp"
#include "surfacttrack/surfactant.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace surfacttrack {

enum class SchemeKind { hg, gd, gd_full_rhs };

inline std::string to_string(SchemeKind s) {
  switch (s) {
    case SchemeKind::hg: return "hg";
    case SchemeKind::gd: return "gd";
    case SchemeKind::gd_full_rhs: return "gd_full_rhs";
  }
  return "?";
}

inline SchemeKind parse_scheme(const std::string& s) {
  if (s == "hg") return SchemeKind::hg;
  if (s == "gd") return SchemeKind::gd;
  if (s == "gd_full_rhs" || s == "gd-full-rhs") return SchemeKind::gd_full_rhs;
  throw ConfigError("unknown scheme '" + s + "'");
}

inline std::string to_string(ns::BcKind k) {
  switch (k) {
    case ns::BcKind::no_slip: return "no_slip";
    case ns::BcKind::free_slip: return "free_slip";
    case ns::BcKind::dirichlet: return "dirichlet";
  }
  return "?";
}

inline ns::BcKind parse_bc(const std::string& s) {
  if (s == "no_slip") return ns::BcKind::no_slip;
  if (s == "free_slip") return ns::BcKind::free_slip;
  if (s == "dirichlet") return ns::BcKind::dirichlet;
  throw ConfigError("unknown boundary condition '" + s + "'");
}

struct SchemeConfig {
  std::string name = "run";
  SchemeKind scheme = SchemeKind::hg;
  /// Time step; 1e-3 / nsub unless set explicitly.
  std::optional<double> tau_override;
  double T = 3.0;
  double rho_plus = 1000.0, rho_minus = 100.0;
  double mu_plus = 10.0, mu_minus = 1.0;
  double d_gamma = 0.1;
  Vec2 f1{0.0, -0.98};
  Vec2 f2{0.0, 0.0};
  EosModel eos{EosKind::linear, 24.5, 0.5};
  int level_k = 5, level_l = 2, nsub = 1;
  int buffer_layers = 1;
  bulk::Box domain{{0.0, 0.0}, {1.0, 2.0}};
  std::array<ns::BcKind, 4> bc{ns::BcKind::no_slip, ns::BcKind::free_slip, ns::BcKind::no_slip,
                               ns::BcKind::free_slip};
  /// Dirichlet data and initial velocity: "zero" or "shear" (g = (z2/2, 0)).
  std::string dirichlet = "zero";
  std::string u0 = "zero";
  Vec2 center{0.5, 0.5};
  double R0 = 0.25;
  /// Interface vertices; 0 means 2^level_k.
  int num_vertices = 0;
  double psi0 = 1.0;
  /// "circle" for -1/R0 or "discrete" for the polygon curvature (hg only).
  std::string kappa0 = "circle";
  bool interface_refine = false;
  double refine_factor = 1.75;
  bool xfem = true;
  int snapshot_every = 100;

  [[nodiscard]] double tau() const { return tau_override ? *tau_override : 1e-3 / nsub; }
  [[nodiscard]] int vertices() const { return num_vertices > 0 ? num_vertices : (1 << level_k); }
  [[nodiscard]] bulk::AdaptConfig adapt() const {
    bulk::AdaptConfig a;
    a.level_k = level_k;
    a.level_l = level_l;
    a.buffer_layers = buffer_layers;
    return a;
  }

  void validate() const {
    auto pos = [](double v, const char* k) {
      if (!(v > 0.0)) throw ConfigError(std::string(k) + " must be positive");
    };
    pos(tau(), "tau");
    pos(T, "T");
    pos(rho_plus, "rho_plus");
    pos(rho_minus, "rho_minus");
    pos(mu_plus, "mu_plus");
    pos(mu_minus, "mu_minus");
    pos(R0, "R0");
    if (!(d_gamma >= 0.0)) throw ConfigError("d_gamma must be non-negative");
    if (nsub < 1) throw ConfigError("nsub must be at least 1");
    if (level_l < 0 || level_k < level_l) throw ConfigError("need 0 <= level_l <= level_k");
    if (!(refine_factor > 1.0)) throw ConfigError("refine_factor must exceed 1");
    if (!(domain.hi.x() > domain.lo.x() && domain.hi.y() > domain.lo.y()))
      throw ConfigError("empty domain");
    if (dirichlet != "zero" && dirichlet != "shear") throw ConfigError("dirichlet must be zero|shear");
    if (u0 != "zero" && u0 != "g") throw ConfigError("u0 must be zero|g");
    if (kappa0 != "circle" && kappa0 != "discrete") throw ConfigError("kappa0 must be circle|discrete");
    if (center.x() - R0 <= domain.lo.x() || center.x() + R0 >= domain.hi.x() ||
        center.y() - R0 <= domain.lo.y() || center.y() + R0 >= domain.hi.y())
      throw ConfigError("initial interface must lie inside the domain");
    eos.validate();
  }

  [[nodiscard]] Vec2 boundary_velocity(const Vec2& z) const {
    return dirichlet == "shear" ? Vec2(0.5 * z.y(), 0.0) : Vec2::Zero();
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& v, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected a number, got '" + v + "'");
  }
}

inline int to_int(const std::string& v, const std::string& where) {
  const double d = to_double(v, where);
  if (d != std::floor(d)) throw ConfigError(where + ": expected an integer, got '" + v + "'");
  return static_cast<int>(d);
}

inline bool to_bool(const std::string& v, const std::string& where) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(where + ": expected on/off, got '" + v + "'");
}

inline std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace detail

/// Applies one key=value pair. `where` prefixes error messages.
inline void apply_setting(SchemeConfig& c, const std::string& key, const std::string& value,
                          const std::string& where) {
  using namespace detail;
  static const char* sides[4] = {"bc_bottom", "bc_right", "bc_top", "bc_left"};
  if (key == "name") c.name = value;
  else if (key == "scheme") c.scheme = parse_scheme(value);
  else if (key == "tau") c.tau_override = to_double(value, where);
  else if (key == "T") c.T = to_double(value, where);
  else if (key == "rho_plus") c.rho_plus = to_double(value, where);
  else if (key == "rho_minus") c.rho_minus = to_double(value, where);
  else if (key == "mu_plus") c.mu_plus = to_double(value, where);
  else if (key == "mu_minus") c.mu_minus = to_double(value, where);
  else if (key == "d_gamma") c.d_gamma = to_double(value, where);
  else if (key == "f1_x") c.f1.x() = to_double(value, where);
  else if (key == "f1_y") c.f1.y() = to_double(value, where);
  else if (key == "f2_x") c.f2.x() = to_double(value, where);
  else if (key == "f2_y") c.f2.y() = to_double(value, where);
  else if (key == "eos") c.eos.kind = parse_eos_kind(value);
  else if (key == "gamma0") c.eos.gamma0 = to_double(value, where);
  else if (key == "beta") c.eos.beta = to_double(value, where);
  else if (key == "psi_inf") c.eos.psi_inf = value == "inf" ? std::numeric_limits<double>::infinity() : to_double(value, where);
  else if (key == "eps") c.eos.eps = to_double(value, where);
  else if (key == "level_k") c.level_k = to_int(value, where);
  else if (key == "level_l") c.level_l = to_int(value, where);
  else if (key == "nsub") c.nsub = to_int(value, where);
  else if (key == "buffer_layers") c.buffer_layers = to_int(value, where);
  else if (key == "x0") c.domain.lo.x() = to_double(value, where);
  else if (key == "x1") c.domain.hi.x() = to_double(value, where);
  else if (key == "y0") c.domain.lo.y() = to_double(value, where);
  else if (key == "y1") c.domain.hi.y() = to_double(value, where);
  else if (key == "dirichlet") c.dirichlet = value;
  else if (key == "u0") c.u0 = value;
  else if (key == "center_x") c.center.x() = to_double(value, where);
  else if (key == "center_y") c.center.y() = to_double(value, where);
  else if (key == "R0") c.R0 = to_double(value, where);
  else if (key == "num_vertices") c.num_vertices = to_int(value, where);
  else if (key == "psi0") c.psi0 = to_double(value, where);
  else if (key == "kappa0") c.kappa0 = value;
  else if (key == "interface_refine") c.interface_refine = to_bool(value, where);
  else if (key == "refine_factor") c.refine_factor = to_double(value, where);
  else if (key == "xfem") c.xfem = to_bool(value, where);
  else if (key == "snapshot_every") c.snapshot_every = to_int(value, where);
  else {
    for (int s = 0; s < 4; ++s) {
      if (key == sides[s]) {
        c.bc[s] = parse_bc(value);
        return;
      }
    }
    throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

/// Flat key=value text; '#' starts a comment.
inline SchemeConfig parse_config_text(const std::string& text, const std::string& origin,
                                      SchemeConfig base = {}, std::ostream* warn = &std::cerr) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool saw_scheme = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError(where + ": expected key = value");
    if (key == "scheme") saw_scheme = true;
    try {
      apply_setting(base, key, value, where);
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      throw ConfigError(msg.rfind(where, 0) == 0 ? msg : where + ": " + msg);
    }
  }
  if (!saw_scheme && warn) *warn << "warning: " << origin << ": no scheme given, using hg\n";
  try {
    base.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return base;
}

inline SchemeConfig parse_config(const std::string& path, SchemeConfig base = {},
                                 std::ostream* warn = &std::cerr) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str(), path, std::move(base), warn);
}

inline std::string serialize(const SchemeConfig& c) {
  using detail::fmt;
  std::ostringstream o;
  o << "name = " << c.name << '\n';
  o << "scheme = " << to_string(c.scheme) << '\n';
  if (c.tau_override) o << "tau = " << fmt(*c.tau_override) << '\n';
  o << "T = " << fmt(c.T) << '\n';
  o << "rho_plus = " << fmt(c.rho_plus) << "\nrho_minus = " << fmt(c.rho_minus) << '\n';
  o << "mu_plus = " << fmt(c.mu_plus) << "\nmu_minus = " << fmt(c.mu_minus) << '\n';
  o << "d_gamma = " << fmt(c.d_gamma) << '\n';
  o << "f1_x = " << fmt(c.f1.x()) << "\nf1_y = " << fmt(c.f1.y()) << '\n';
  o << "f2_x = " << fmt(c.f2.x()) << "\nf2_y = " << fmt(c.f2.y()) << '\n';
  o << "eos = " << to_string(c.eos.kind) << "\ngamma0 = " << fmt(c.eos.gamma0) << '\n';
  o << "beta = " << fmt(c.eos.beta) << '\n';
  o << "psi_inf = " << (std::isfinite(c.eos.psi_inf) ? fmt(c.eos.psi_inf) : std::string("inf")) << '\n';
  o << "eps = " << fmt(c.eos.eps) << '\n';
  o << "level_k = " << c.level_k << "\nlevel_l = " << c.level_l << "\nnsub = " << c.nsub << '\n';
  o << "buffer_layers = " << c.buffer_layers << '\n';
  o << "x0 = " << fmt(c.domain.lo.x()) << "\nx1 = " << fmt(c.domain.hi.x()) << '\n';
  o << "y0 = " << fmt(c.domain.lo.y()) << "\ny1 = " << fmt(c.domain.hi.y()) << '\n';
  static const char* sides[4] = {"bc_bottom", "bc_right", "bc_top", "bc_left"};
  for (int s = 0; s < 4; ++s) o << sides[s] << " = " << to_string(c.bc[s]) << '\n';
  o << "dirichlet = " << c.dirichlet << "\nu0 = " << c.u0 << '\n';
  o << "center_x = " << fmt(c.center.x()) << "\ncenter_y = " << fmt(c.center.y()) << '\n';
  o << "R0 = " << fmt(c.R0) << '\n';
  if (c.num_vertices > 0) o << "num_vertices = " << c.num_vertices << '\n';
  o << "psi0 = " << fmt(c.psi0) << "\nkappa0 = " << c.kappa0 << '\n';
  o << "interface_refine = " << (c.interface_refine ? "on" : "off") << '\n';
  o << "refine_factor = " << fmt(c.refine_factor) << '\n';
  o << "xfem = " << (c.xfem ? "on" : "off") << '\n';
  o << "snapshot_every = " << c.snapshot_every << '\n';
  return o.str();
}

namespace presets {

/// Rising bubble, first parameter set, with surfactant.
inline SchemeConfig bench1() {
  SchemeConfig c;
  c.name = "bench1";
  return c;
}

/// Rising bubble, second parameter set, with interface refinement.
inline SchemeConfig bench2() {
  SchemeConfig c;
  c.name = "bench2";
  c.rho_minus = 1.0;
  c.mu_minus = 0.1;
  c.eos.gamma0 = 1.96;
  c.interface_refine = true;
  return c;
}

/// Drop in shear flow.
inline SchemeConfig shear() {
  SchemeConfig c;
  c.name = "shear";
  c.domain = {{-5.0, -2.0}, {5.0, 2.0}};
  c.bc = {ns::BcKind::dirichlet, ns::BcKind::dirichlet, ns::BcKind::dirichlet,
          ns::BcKind::dirichlet};
  c.dirichlet = "shear";
  c.u0 = "g";
  c.rho_plus = c.rho_minus = 1.0;
  c.mu_plus = c.mu_minus = 0.1;
  c.eos = {EosKind::linear, 0.2, 0.5};
  c.d_gamma = 0.1;
  c.f1 = Vec2::Zero();
  c.f2 = Vec2::Zero();
  c.center = Vec2::Zero();
  c.R0 = 1.0;
  c.T = 12.0;
  return c;
}

inline std::optional<SchemeConfig> by_name(const std::string& name) {
  if (name == "bench1") return bench1();
  if (name == "bench2") return bench2();
  if (name == "shear") return shear();
  if (name == "run") return SchemeConfig{};
  return std::nullopt;
}

}  // namespace presets

struct DiagnosticsRecord {
  int step = 0;
  double t = 0.0;
  double area = 0.0;
  double l_loss = 0.0;
  double y_c = 0.0;
  double circularity = 1.0;
  double v_c = 0.0;
  double surfactant_total = 0.0;
  double psi_min = 0.0;
  double psi_max = 0.0;
  double e_kin = 0.0;
  double e_surf = 0.0;
  double e_total = 0.0;
  double edge_ratio = 1.0;
  double ns_residual = 0.0;
};

inline const char* diag_header() {
  return "step,t,area,l_loss,y_c,circularity,v_c,surfactant_total,psi_min,psi_max,e_kin,e_surf,"
         "e_total,edge_ratio,ns_residual";
}

inline std::string diag_row(const DiagnosticsRecord& d) {
  std::ostringstream o;
  o << std::setprecision(17) << d.step << ',' << d.t << ',' << d.area << ',' << d.l_loss << ','
    << d.y_c << ',' << d.circularity << ',' << d.v_c << ',' << d.surfactant_total << ','
    << d.psi_min << ',' << d.psi_max << ',' << d.e_kin << ',' << d.e_surf << ',' << d.e_total
    << ',' << d.edge_ratio << ',' << d.ns_residual;
  return o.str();
}

/// Bookkeeping beyond the CSV columns.
struct StepExtra {
  /// <Psi^{m+1},1>^h on Gamma^{m+1} minus <Psi^m,1>^h on Gamma^m, before refinement.
  double mass_change = 0.0;
  /// Change of the lumped mass caused by interface refinement.
  double refine_mass_jump = 0.0;
  int num_interface_vertices = 0;
  int num_triangles = 0;
  double max_divergence = 0.0;
  double max_speed = 0.0;
  double pressure_jump = 0.0;
};

struct BenchmarkQuantities {
  double y_c;
  double circularity;
};

inline BenchmarkQuantities benchmark_quantities(const InterfaceMesh& interface) {
  const double area = enclosed_area(interface);
  return {enclosed_moment_y(interface) / area,
          2.0 * std::sqrt(std::numbers::pi * area) / perimeter(interface)};
}

/// Rise velocity (rho_- U, e_2) / (rho_-, 1) with rho_- the inner density on
/// interior elements and half of it on interfacial ones.
inline double rise_velocity(const bulk::BulkMesh& mesh, const std::vector<bulk::Phase>& labels,
                            const Vector& u, double rho_minus) {
  return ns::weighted_mean_vertical(mesh, u, bulk::phase_field(labels, rho_minus, 0.0));
}

class Simulation {
 public:
  explicit Simulation(SchemeConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int K = cfg_.vertices();
    interface_ = InterfaceMesh::circle(cfg_.center, cfg_.R0, K);
    reference_max_length_ = max_segment_length(interface_);
    psi_ = Vector::Constant(K, cfg_.psi0);
    if (cfg_.scheme == SchemeKind::hg) {
      kappa_ = cfg_.kappa0 == "discrete" ? discrete_curvature(interface_)
                                         : Vector::Constant(K, -1.0 / cfg_.R0);
    } else {
      kappa_vec_ = front::gd_curvature(interface_, interface_.vertices());
    }
    area0_ = enclosed_area(interface_);
    mass0_ = surf::total_mass(interface_, psi_);

    mesh_ = bulk::adapt(cfg_.domain, interface_, cfg_.adapt());
    labels_ = bulk::classify_elements(mesh_, interface_);
    const auto pf = bulk::phase_fields(labels_, cfg_.rho_minus, cfg_.rho_plus, cfg_.mu_minus, cfg_.mu_plus);
    rho_ = pf.rho;
    u_ = cfg_.u0 == "g" ? bulk::interpolate_p2(mesh_, [this](const Vec2& z) { return cfg_.boundary_velocity(z); })
                        : Vector::Zero(2 * mesh_.num_p2_nodes());
    bc_.side = cfg_.bc;
    bc_.g = [this](const Vec2& z) { return cfg_.boundary_velocity(z); };
    record_initial();
  }

  [[nodiscard]] const SchemeConfig& config() const { return cfg_; }
  [[nodiscard]] double time() const { return t_; }
  [[nodiscard]] int step_count() const { return step_; }
  [[nodiscard]] const InterfaceMesh& interface() const { return interface_; }
  [[nodiscard]] const SurfaceScalarField& psi() const { return psi_; }
  [[nodiscard]] const SurfaceScalarField& kappa() const { return kappa_; }
  [[nodiscard]] const SurfaceVectorField& kappa_vec() const { return kappa_vec_; }
  [[nodiscard]] const bulk::BulkMesh& mesh() const { return mesh_; }
  [[nodiscard]] const Vector& velocity() const { return u_; }
  [[nodiscard]] const ns::FlowState& flow() const { return flow_; }
  [[nodiscard]] const Vector& density() const { return rho_; }
  [[nodiscard]] const Vector& viscosity() const { return mu_; }
  [[nodiscard]] const std::vector<DiagnosticsRecord>& diagnostics() const { return diag_; }
  [[nodiscard]] const std::vector<StepExtra>& extras() const { return extra_; }
  [[nodiscard]] double initial_mass() const { return mass0_; }
  [[nodiscard]] bool finished() const { return t_ >= cfg_.T - 1e-12 * cfg_.T; }

  /// Nodal curvature for snapshots: scalar, or the vector curvature against
  /// the vertex normal.
  [[nodiscard]] SurfaceScalarField curvature_for_output() const {
    if (cfg_.scheme == SchemeKind::hg) return kappa_;
    const auto vn = vertex_normals(interface_);
    SurfaceScalarField k(interface_.num_vertices());
    for (int i = 0; i < interface_.num_vertices(); ++i)
      k[i] = kappa_vec_[i].dot(vn.omega[i].normalized());
    return k;
  }

  void time_step() {
    const double tau = std::min(cfg_.tau(), cfg_.T - t_);
    const double t_new = t_ + tau;

    // (1) Bulk mesh for Gamma^m, transfers and phase fields.
    bulk::BulkMesh mesh = bulk::adapt(cfg_.domain, interface_, cfg_.adapt());
    Vector u_old = bulk::transfer_velocity(mesh_, u_, mesh);
    Vector rho_prev = bulk::transfer_density(mesh_, rho_, mesh);
    const auto labels = bulk::classify_elements(mesh, interface_);
    const auto pf = bulk::phase_fields(labels, cfg_.rho_minus, cfg_.rho_plus, cfg_.mu_minus, cfg_.mu_plus);

    // (2) Flow solve.
    const Vector load = cfg_.scheme == SchemeKind::hg
                            ? ns::surface_tension_load_hg(interface_, mesh, kappa_, psi_, cfg_.eos)
                            : ns::surface_tension_load_gd(interface_, mesh, kappa_vec_, psi_, cfg_.eos);
    std::optional<Vector> xcol;
    if (cfg_.xfem) xcol = ns::xfem_pressure_column(interface_, mesh);
    ns::FlowInputs in;
    in.mesh = &mesh;
    in.u_old = &u_old;
    in.rho = &pf.rho;
    in.rho_prev = &rho_prev;
    in.mu = &pf.mu;
    in.tau = tau;
    in.f1 = cfg_.f1;
    in.f2 = cfg_.f2;
    in.surface_load = &load;
    in.xfem_column = xcol ? &*xcol : nullptr;
    in.bc = bc_;
    const double inner_area = enclosed_area(interface_);
    in.inner_area = inner_area;
    const auto sys = ns::assemble(in);
    ns::SolveStats stats;
    ns::FlowState flow = ns::solve_saddle(sys, mesh, inner_area, &stats);

    // (3) Interface.
    const bulk::P2VelocityField uf(mesh, flow.velocity);
    front::InterfaceUpdate upd;
    switch (cfg_.scheme) {
      case SchemeKind::hg: upd = front::step_hg(interface_, uf, tau); break;
      case SchemeKind::gd: upd = front::step_gd(interface_, uf, tau, front::GdRhsMode::lumped); break;
      case SchemeKind::gd_full_rhs: upd = front::step_gd(interface_, uf, tau, front::GdRhsMode::full); break;
    }
    InterfaceMesh new_interface = interface_.with_positions(upd.positions);

    // (4) Surfactant.
    surf::StepInputs sin{interface_, new_interface, psi_, tau, cfg_.d_gamma, std::nullopt};
    SurfaceScalarField psi_new =
        cfg_.scheme == SchemeKind::hg
            ? surf::step_hg(sin, front::vertex_velocity(interface_, uf), cfg_.eos)
            : surf::step_gd(sin);

    StepExtra ex;
    const double mass_old = surf::total_mass(interface_, psi_);
    const double mass_new = surf::total_mass(new_interface, psi_new);
    ex.mass_change = mass_new - mass_old;

    // (5) Interface refinement between steps.
    SurfaceScalarField kappa_new = upd.kappa;
    SurfaceVectorField kvec_new = upd.kappa_vec;
    if (cfg_.interface_refine) {
      std::vector<SurfaceScalarField> fields{psi_new};
      const bool hg = cfg_.scheme == SchemeKind::hg;
      if (hg) {
        fields.push_back(kappa_new);
      } else {
        Vector kx(kvec_new.size()), ky(kvec_new.size());
        for (std::size_t i = 0; i < kvec_new.size(); ++i) {
          kx[static_cast<Eigen::Index>(i)] = kvec_new[i].x();
          ky[static_cast<Eigen::Index>(i)] = kvec_new[i].y();
        }
        fields.push_back(kx);
        fields.push_back(ky);
      }
      auto r = quality_and_refine(new_interface, std::move(fields), cfg_.refine_factor,
                                  reference_max_length_);
      if (r.num_split > 0) {
        new_interface = std::move(r.mesh);
        psi_new = r.fields[0];
        if (hg) {
          kappa_new = r.fields[1];
        } else {
          kvec_new.resize(static_cast<std::size_t>(r.fields[1].size()));
          for (Eigen::Index i = 0; i < r.fields[1].size(); ++i)
            kvec_new[static_cast<std::size_t>(i)] = {r.fields[1][i], r.fields[2][i]};
        }
        ex.refine_mass_jump = surf::total_mass(new_interface, psi_new) - mass_new;
      }
    }

    // (6) Diagnostics for t_{m+1}.
    const auto labels_new = bulk::classify_elements(mesh, new_interface);
    DiagnosticsRecord d;
    d.step = step_ + 1;
    d.t = t_new;
    d.v_c = rise_velocity(mesh, labels_new, flow.velocity, cfg_.rho_minus);
    d.e_kin = ns::kinetic_energy(mesh, flow.velocity, pf.rho);
    d.ns_residual = stats.residual;
    ex.num_triangles = mesh.num_triangles();
    ex.max_speed = ns::max_speed(flow.velocity);
    ex.pressure_jump = flow.pressure_xfem;
    const Vector div = sys.full_matrix.bottomRows(sys.num_pressure) * [&] {
      Vector x = Vector::Zero(sys.full_matrix.cols());
      x.head(sys.num_velocity) = flow.velocity;
      return x;
    }();
    ex.max_divergence = div.cwiseAbs().maxCoeff();

    mesh_ = std::move(mesh);
    u_ = std::move(flow.velocity);
    flow.velocity = u_;
    flow_ = std::move(flow);
    rho_ = pf.rho;
    mu_ = pf.mu;
    labels_ = labels;
    interface_ = std::move(new_interface);
    psi_ = std::move(psi_new);
    kappa_ = std::move(kappa_new);
    kappa_vec_ = std::move(kvec_new);
    t_ = t_new;
    ++step_;
    ex.num_interface_vertices = interface_.num_vertices();
    fill_interface_diagnostics(d);
    diag_.push_back(d);
    extra_.push_back(ex);
  }

  void run(const std::function<void(const Simulation&)>& after_step = {}) {
    while (!finished()) {
      time_step();
      if (after_step) after_step(*this);
    }
  }

 private:
  void fill_interface_diagnostics(DiagnosticsRecord& d) const {
    d.area = enclosed_area(interface_);
    d.l_loss = (area0_ - d.area) / area0_;
    const auto bq = benchmark_quantities(interface_);
    d.y_c = bq.y_c;
    d.circularity = bq.circularity;
    d.surfactant_total = surf::total_mass(interface_, psi_);
    d.psi_min = psi_.minCoeff();
    d.psi_max = psi_.maxCoeff();
    const Vector m = lumped_mass(interface_);
    double es = 0.0;
    for (int k = 0; k < interface_.num_vertices(); ++k) es += m[k] * cfg_.eos.f_eps(psi_[k]);
    d.e_surf = es;
    d.e_total = d.e_kin + d.e_surf;
    d.edge_ratio = edge_ratio(interface_);
  }

  void record_initial() {
    DiagnosticsRecord d;
    d.step = 0;
    d.t = 0.0;
    d.v_c = rise_velocity(mesh_, labels_, u_, cfg_.rho_minus);
    d.e_kin = ns::kinetic_energy(mesh_, u_, rho_);
    fill_interface_diagnostics(d);
    diag_.push_back(d);
    mu_ = bulk::phase_field(labels_, cfg_.mu_minus, cfg_.mu_plus);
    flow_.velocity = u_;
    flow_.pressure = Vector::Zero(mesh_.num_vertices());
  }

  SchemeConfig cfg_;
  InterfaceMesh interface_;
  double reference_max_length_ = 0.0;
  SurfaceScalarField psi_;
  SurfaceScalarField kappa_;
  SurfaceVectorField kappa_vec_;
  bulk::BulkMesh mesh_;
  std::vector<bulk::Phase> labels_;
  Vector rho_;
  Vector mu_;
  Vector u_;
  ns::FlowState flow_;
  ns::BoundarySpec bc_;
  double t_ = 0.0;
  int step_ = 0;
  double area0_ = 0.0;
  double mass0_ = 0.0;
  std::vector<DiagnosticsRecord> diag_;
  std::vector<StepExtra> extra_;
};

struct Extremum {
  double value = 0.0;
  double t = 0.0;
};

struct RunSummary {
  Extremum circularity_min;
  Extremum v_c_max;
  /// First two local maxima of V_c in time order.
  std::vector<Extremum> v_c_local_maxima;
  double y_c_final = 0.0;
  double l_loss_final = 0.0;
  double circularity_final = 1.0;
  double max_step_mass_change = 0.0;
  double mass_drift = 0.0;
  double psi_min = 0.0;
  int final_vertices = 0;
};

// A maximum counts once the series falls delta below it; the next one is searched
// after the series rises delta above the valley. A trailing interior peak also counts.
inline std::vector<Extremum> significant_maxima(const std::vector<double>& t,
                                                const std::vector<double>& v, double delta,
                                                std::size_t limit) {
  std::vector<Extremum> out;
  if (v.empty()) return out;
  bool rising = true;
  Extremum peak{v[0], t[0]};
  double valley = v[0];
  for (std::size_t i = 1; i < v.size() && out.size() < limit; ++i) {
    if (rising) {
      if (v[i] > peak.value) peak = {v[i], t[i]};
      else if (v[i] < peak.value - delta) {
        out.push_back(peak);
        rising = false;
        valley = v[i];
      }
    } else {
      valley = std::min(valley, v[i]);
      if (v[i] > valley + delta) {
        rising = true;
        peak = {v[i], t[i]};
      }
    }
  }
  if (rising && out.size() < limit && peak.t < t.back()) out.push_back(peak);
  return out;
}

inline RunSummary summarize(const Simulation& sim) {
  RunSummary s;
  const auto& d = sim.diagnostics();
  s.circularity_min = {d.front().circularity, d.front().t};
  s.v_c_max = {d.front().v_c, d.front().t};
  s.psi_min = d.front().psi_min;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i].circularity < s.circularity_min.value) s.circularity_min = {d[i].circularity, d[i].t};
    if (d[i].v_c > s.v_c_max.value) s.v_c_max = {d[i].v_c, d[i].t};
    s.psi_min = std::min(s.psi_min, d[i].psi_min);
  }
  std::vector<double> t(d.size()), v(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    t[i] = d[i].t;
    v[i] = d[i].v_c;
  }
  s.v_c_local_maxima = significant_maxima(t, v, 0.05 * std::abs(s.v_c_max.value), 2);
  s.y_c_final = d.back().y_c;
  s.l_loss_final = d.back().l_loss;
  s.circularity_final = d.back().circularity;
  for (const auto& e : sim.extras())
    s.max_step_mass_change = std::max(s.max_step_mass_change, std::abs(e.mass_change));
  double refine = 0.0;
  for (const auto& e : sim.extras()) refine += e.refine_mass_jump;
  s.mass_drift = d.back().surfactant_total - refine - sim.initial_mass();
  s.final_vertices = sim.interface().num_vertices();
  return s;
}

inline std::string summary_text(const Simulation& sim, const RunSummary& s) {
  std::ostringstream o;
  o << std::setprecision(6) << std::fixed;
  o << "preset " << sim.config().name << " scheme " << to_string(sim.config().scheme) << " adapt "
    << sim.config().nsub << "x(" << sim.config().level_k << "," << sim.config().level_l << ")\n";
  o << "steps " << sim.step_count() << " T " << sim.time() << "\n";
  o << "circularity_min " << s.circularity_min.value << " at t " << s.circularity_min.t << "\n";
  o << "v_c_max " << s.v_c_max.value << " at t " << s.v_c_max.t << "\n";
  for (std::size_t i = 0; i < s.v_c_local_maxima.size(); ++i)
    o << "v_c_max" << i + 1 << " " << s.v_c_local_maxima[i].value << " at t "
      << s.v_c_local_maxima[i].t << "\n";
  o << "y_c_final " << s.y_c_final << "\n";
  o << "circularity_final " << s.circularity_final << "\n";
  o << std::scientific << std::setprecision(3);
  o << "l_loss " << s.l_loss_final << " (" << std::fixed << std::setprecision(4)
    << 100.0 * s.l_loss_final << "%)\n";
  o << std::scientific << std::setprecision(3);
  o << "max_step_surfactant_change " << s.max_step_mass_change << "\n";
  o << "surfactant_drift_excluding_refinement " << s.mass_drift << "\n";
  o << "psi_min " << s.psi_min << "\n";
  o << "interface_vertices " << s.final_vertices << "\n";
  return o.str();
}

/// Runs to completion writing diag.csv, interface snapshots, optional VTK
/// and summary.txt into `out_dir`. On failure a state dump is written.
inline RunSummary run_to_directory(Simulation& sim, const std::filesystem::path& out_dir,
                                   bool vtk = false, std::ostream* progress = nullptr) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "snapshots");
  {
    std::ofstream cfg(out_dir / "config.txt");
    cfg << serialize(sim.config());
  }
  std::ofstream diag(out_dir / "diag.csv");
  if (!diag) throw Error("cannot write " + (out_dir / "diag.csv").string());
  diag << diag_header() << '\n' << diag_row(sim.diagnostics().back()) << '\n';
  auto snapshot = [&](const Simulation& s) {
    char name[64];
    std::snprintf(name, sizeof name, "interface_%06d.csv", s.step_count());
    io::write_interface_csv((out_dir / "snapshots" / name).string(), s.interface(), s.psi(),
                            s.curvature_for_output());
    if (vtk) {
      std::snprintf(name, sizeof name, "bulk_%06d.vtk", s.step_count());
      io::write_vtk((out_dir / "snapshots" / name).string(), s.mesh(), s.flow(), s.density(),
                    s.viscosity());
    }
  };
  snapshot(sim);
  const int every = std::max(1, sim.config().snapshot_every);
  try {
    sim.run([&](const Simulation& s) {
      diag << diag_row(s.diagnostics().back()) << '\n';
      if (s.step_count() % every == 0 || s.finished()) snapshot(s);
      if (progress && s.step_count() % 100 == 0)
        *progress << "step " << s.step_count() << " t=" << s.time() << '\n' << std::flush;
    });
  } catch (const std::exception& e) {
    std::ofstream dump(out_dir / "state_dump.txt");
    dump << "error: " << e.what() << "\nstep " << sim.step_count() << "\nt " << sim.time() << "\n";
    dump << std::setprecision(17) << "x,y,psi\n";
    for (int k : sim.interface().loop_order())
      dump << sim.interface().vertex(k).x() << ',' << sim.interface().vertex(k).y() << ','
           << sim.psi()[k] << '\n';
    throw;
  }
  const RunSummary s = summarize(sim);
  std::ofstream sum(out_dir / "summary.txt");
  sum << summary_text(sim, s);
  return s;
}

}  // namespace surfacttrack
