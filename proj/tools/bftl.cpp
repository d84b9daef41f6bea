// Command-line front end: simulate, reproduce presets, evaluate bounds and
// stability, and run parameter sweeps.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bftl/scenario.hpp"

namespace {

namespace fs = std::filesystem;
using bftl::ConfigError;

std::optional<fs::path> resolve_out(const std::string& flag) {
  if (!flag.empty()) return fs::path(flag);
  if (const char* env = std::getenv("BFTL_OUT"); env && *env) return fs::path(env);
  return std::nullopt;
}

int report(const bftl::RunResult& r) {
  if (!r.message.empty()) std::cerr << "bftl: " << r.message << '\n';
  if (r.exit_code == bftl::kExitOk || r.exit_code == bftl::kExitAssumption) {
    bftl::ordered_json j = r.summary;
    j["files"] = bftl::ordered_json::array();
    for (const auto& f : r.files) j["files"].push_back(f.string());
    std::cout << bftl::dump_json(j);
  }
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bando-FtL platoon simulation and certification"};
  app.require_subcommand(1);

  std::string config_path, out_dir, grid_path, preset_id;
  std::optional<double> dt, t_end;
  bool strict = false;

  auto* sim = app.add_subcommand("simulate", "Simulate a scenario config and write its artifacts");
  sim->add_option("--config", config_path, "Scenario JSON")->required();
  sim->add_option("--out", out_dir, "Output directory (default: $BFTL_OUT)");
  sim->add_option("--dt", dt, "Override the step size");
  sim->add_option("--t-end", t_end, "Override the horizon");
  sim->add_flag("--strict", strict, "Exit 4 when an assumption or certificate check fails");

  auto* rep = app.add_subcommand("reproduce", "Run a figure preset");
  rep->add_option("preset", preset_id, "Preset id")->required();
  rep->add_option("--out", out_dir, "Output directory (default: $BFTL_OUT)");
  rep->add_flag("--strict", strict, "Exit 4 when an assumption or certificate check fails");

  auto* show = app.add_subcommand("preset", "Print a preset as a scenario config");
  show->add_option("preset", preset_id, "Preset id (omit to list ids)");

  auto* bnd = app.add_subcommand("bounds", "Print the bounds certificate of a config");
  bnd->add_option("--config", config_path, "Scenario JSON")->required();

  std::optional<double> vstar;
  std::vector<double> interval;
  bool observed = false;
  auto* stab = app.add_subcommand("stability", "Print the stability report of a config");
  stab->add_option("--config", config_path, "Scenario JSON")->required();
  stab->add_option("--vstar", vstar, "Equilibrium velocity")->required();
  auto* iv = stab->add_option("--interval", interval, "Headway interval LO HI")->expected(2);
  stab->add_flag("--observed", observed, "Use the simulated headway range")->excludes(iv);

  unsigned jobs = 1;
  auto* swp = app.add_subcommand("sweep", "Evaluate a parameter grid");
  swp->add_option("--config", config_path, "Scenario JSON")->required();
  swp->add_option("--grid", grid_path, "Grid JSON mapping keys to value arrays")->required();
  swp->add_option("--jobs", jobs, "Parallel rows")->check(CLI::PositiveNumber);
  swp->add_option("--out", out_dir, "Also write sweep.csv here (default: $BFTL_OUT)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      auto c = bftl::load_config(config_path);
      if (dt) c.dt = *dt;
      if (t_end) c.t_end = *t_end;
      const auto out = resolve_out(out_dir);
      if (!out) throw ConfigError("no output directory: pass --out or set BFTL_OUT");
      return report(bftl::run(c, *out, {strict}));
    }
    if (*rep) {
      const auto c = bftl::preset(preset_id);
      const auto out = resolve_out(out_dir);
      if (!out) throw ConfigError("no output directory: pass --out or set BFTL_OUT");
      return report(bftl::run(c, *out, {strict}));
    }
    if (*show) {
      if (preset_id.empty()) {
        for (const auto& id : bftl::preset_ids()) std::cout << id << '\n';
        return 0;
      }
      std::cout << bftl::dump_json(bftl::to_json(bftl::preset(preset_id)));
      return 0;
    }
    if (*bnd) {
      const auto c = bftl::load_config(config_path);
      std::cout << bftl::dump_json(bftl::to_json(bftl::make_certificate(c.params, c.headways, c.mode, c.v_bar_max)));
      return 0;
    }
    if (*stab) {
      auto c = bftl::load_config(config_path);
      c.v_star = *vstar;
      if (!interval.empty()) {
        c.interval = {bftl::StabilityInterval::Kind::Explicit, interval[0], interval[1]};
      } else if (observed) {
        c.interval.kind = bftl::StabilityInterval::Kind::Observed;
      }
      if (std::find(c.outputs.begin(), c.outputs.end(), "stability") == c.outputs.end()) {
        c.outputs.push_back("stability");
      }
      bftl::validate(c);
      std::optional<bftl::Trajectory> traj;
      if (c.interval.kind == bftl::StabilityInterval::Kind::Observed) traj.emplace(bftl::simulate(c));
      const auto [lo, hi] = bftl::stability_interval(c, traj ? &*traj : nullptr);
      std::cout << bftl::dump_json(bftl::to_json(bftl::analyze_stability(c.params, *vstar, lo, hi, c.headways.front())));
      return 0;
    }
    if (*swp) {
      const auto c = bftl::load_config(config_path);
      std::ifstream in(grid_path);
      if (!in) throw ConfigError("cannot read grid file " + grid_path);
      nlohmann::json gj;
      try {
        in >> gj;
      } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("grid is not valid JSON: ") + e.what());
      }
      const auto grid = bftl::parse_grid(gj);
      const auto rows = bftl::sweep(c, grid, jobs);
      std::ostringstream os;
      bftl::write_sweep_csv(os, grid, rows);
      std::cout << os.str();
      if (const auto out = resolve_out(out_dir)) {
        fs::create_directories(*out);
        std::ofstream f(*out / "sweep.csv", std::ios::binary | std::ios::trunc);
        f << os.str();
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "bftl: " << e.what() << '\n';
    return bftl::kExitConfig;
  } catch (const bftl::DomainError& e) {
    std::cerr << "bftl: " << e.what() << '\n';
    return bftl::kExitConfig;
  } catch (const bftl::CollisionError& e) {
    std::cerr << "bftl: " << e.what() << '\n';
    return bftl::kExitNumerical;
  } catch (const bftl::NumericalError& e) {
    std::cerr << "bftl: " << e.what() << '\n';
    return bftl::kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "bftl: " << e.what() << '\n';
    return bftl::kExitFailure;
  }
  return 0;
}
