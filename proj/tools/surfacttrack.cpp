#include "surfacttrack/manufactured.hpp"
#include "surfacttrack/simulation.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace surfacttrack;

namespace {

int run_convergence_table(const std::string& out_dir, const EosModel& eos) {
  std::vector<exact::ConvergenceResult> gd, hg;
  for (int K : {16, 32, 64, 128, 256}) {
    gd.push_back(exact::run_convergence(exact::Scheme::gd, K, 1.0));
    hg.push_back(exact::run_convergence(exact::Scheme::hg, K, 1.0, eos));
  }
  std::ostringstream table;
  table << "      K          h0    error_gd  order_gd    error_hg  order_hg\n";
  for (std::size_t i = 0; i < gd.size(); ++i) {
    char line[160];
    if (i == 0) {
      std::snprintf(line, sizeof line, "%7d  %.4e  %.4e  %8s  %.4e  %8s\n", gd[i].num_vertices,
                    gd[i].h0, gd[i].error, "-", hg[i].error, "-");
    } else {
      const double lh = std::log(gd[i - 1].h0 / gd[i].h0);
      std::snprintf(line, sizeof line, "%7d  %.4e  %.4e  %8.3f  %.4e  %8.3f\n", gd[i].num_vertices,
                    gd[i].h0, gd[i].error, std::log(gd[i - 1].error / gd[i].error) / lh,
                    hg[i].error, std::log(hg[i - 1].error / hg[i].error) / lh);
    }
    table << line;
  }
  std::cout << table.str();
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream(std::filesystem::path(out_dir) / "convergence.txt") << table.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Front tracking two-phase flow with insoluble surfactant"};
  app.require_subcommand(1, 1);

  std::string config_path, scheme, level, eos, out_dir;
  int nsub = 0;
  double beta = std::numeric_limits<double>::quiet_NaN();
  double psi_inf = std::numeric_limits<double>::quiet_NaN();
  bool vtk = false;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("config", config_path, "key = value configuration file");
    if (config_required) opt->required();
    sub->add_option("--scheme", scheme, "hg | gd | gd-full-rhs");
    sub->add_option("--level", level, "adaptivity levels k,l");
    sub->add_option("--nsub", nsub, "time step 1e-3/n");
    sub->add_option("--beta", beta, "equation of state parameter");
    sub->add_option("--eos", eos, "constant | linear | langmuir");
    sub->add_option("--psi-inf", psi_inf, "Langmuir saturation");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_flag("--vtk", vtk, "write bulk VTK snapshots");
  };
  auto* conv = app.add_subcommand("convergence", "manufactured solution convergence table");
  add_common(conv, false);
  for (const char* name : {"bench1", "bench2", "shear"}) add_common(app.add_subcommand(name, std::string(name) + " preset"), false);
  add_common(app.add_subcommand("run", "run a configuration file"), true);

  CLI11_PARSE(app, argc, argv);
  const std::string cmd = app.get_subcommands().front()->get_name();

  try {
    if (cmd == "convergence") {
      EosModel e{EosKind::constant};
      if (!eos.empty()) e.kind = parse_eos_kind(eos);
      if (!std::isnan(beta)) e.beta = beta;
      if (!std::isnan(psi_inf)) e.psi_inf = psi_inf;
      e.validate();
      return run_convergence_table(out_dir, e);
    }

    SchemeConfig cfg = *presets::by_name(cmd);
    if (!config_path.empty()) cfg = parse_config(config_path, cfg);
    if (!scheme.empty()) cfg.scheme = parse_scheme(scheme);
    if (!level.empty()) {
      const auto comma = level.find(',');
      if (comma == std::string::npos) throw ConfigError("--level expects k,l");
      cfg.level_k = std::stoi(level.substr(0, comma));
      cfg.level_l = std::stoi(level.substr(comma + 1));
    }
    if (nsub > 0) cfg.nsub = nsub;
    if (!std::isnan(beta)) cfg.eos.beta = beta;
    if (!eos.empty()) cfg.eos.kind = parse_eos_kind(eos);
    if (!std::isnan(psi_inf)) cfg.eos.psi_inf = psi_inf;
    cfg.validate();
    if (out_dir.empty()) out_dir = "out_" + cfg.name + "_" + to_string(cfg.scheme);

    Simulation sim(cfg);
    std::cerr << "running " << cfg.name << " (" << to_string(cfg.scheme) << ", " << cfg.nsub
              << " adapt_{" << cfg.level_k << "," << cfg.level_l << "}) into " << out_dir << '\n';
    const RunSummary s = run_to_directory(sim, out_dir, vtk, &std::cerr);
    std::cout << summary_text(sim, s);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
