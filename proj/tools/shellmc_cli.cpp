#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "shellmc/presets.hpp"

namespace {

int report_checks(const shellmc::PresetRun& run) {
  for (const auto& c : run.checks) {
    const char* tag = c.pass ? "[PASS]" : (c.hard ? "[FAIL]" : "[WARN]");
    std::cout << tag << ' ' << run.name << ": " << c.name;
    if (!c.detail.empty()) std::cout << " (" << c.detail << ')';
    std::cout << '\n';
  }
  if (run.ran_analog) {
    std::cout << run.name << " analog: flux=" << run.analog.flux
              << " std=" << std::sqrt(run.analog.Sigma2)
              << " p_reach=" << run.analog.p_reach << '\n';
  }
  if (run.ran_biased) {
    std::cout << run.name << " biased: flux=" << run.biased.flux
              << " std=" << std::sqrt(run.biased.Sigma2)
              << " p_reach=" << run.biased.p_reach << '\n';
  }
  return run.passed() ? 0 : 1;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw shellmc::ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_config_file(const std::string& path,
                    const std::vector<std::string>& overrides,
                    const std::string& out_dir) {
  shellmc::ProblemConfig cfg;
  shellmc::apply_config_text(cfg, read_file(path));
  for (const auto& o : overrides) shellmc::apply_config_text(cfg, o);
  cfg.output_dir = out_dir;
  cfg.validate();

  const std::string stem = std::filesystem::path(path).stem().string();
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path base(out_dir);
  nlohmann::json j;
  j["config"] = path;
  j["seed"] = cfg.seed;
  if (cfg.importance) {
    const auto r = shellmc::run_biased(cfg);
    shellmc::detail::write_run_csv(base / (stem + "_biased_run.csv"), r);
    j["biased"] = shellmc::detail::engine_json(r);
    std::cout << "biased: flux=" << r.flux << " std=" << std::sqrt(r.Sigma2)
              << " p_reach=" << r.p_reach << '\n';
  } else {
    const auto r = shellmc::run_analog(cfg);
    shellmc::detail::write_run_csv(base / (stem + "_analog_run.csv"), r);
    j["analog"] = shellmc::detail::engine_json(r);
    if (!r.shell_flux.empty()) {
      shellmc::detail::write_profile_csv(base / (stem + "_profile.csv"), r);
    }
    std::cout << "analog: flux=" << r.flux << " std=" << std::sqrt(r.Sigma2)
              << " p_reach=" << r.p_reach << '\n';
  }
  std::ofstream(base / (stem + "_summary.json")) << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "shellmc: grey transport Monte Carlo in spherical shells with "
      "adjoint importance sampling"};
  app.require_subcommand(1);

  std::string target;
  std::vector<std::string> sets;
  std::string out_dir = ".";
  long long seed = -1;
  int workers = -1;

  auto* run = app.add_subcommand("run", "run a preset or a config file");
  run->add_option("target", target, "preset name or path to a config file")
      ->required();
  run->add_option("--set", sets, "override, key=value (repeatable)");
  run->add_option("--seed", seed, "override the random seed");
  run->add_option("--workers", workers, "worker threads");
  run->add_option("--out", out_dir, "output directory");

  auto* list = app.add_subcommand("list-presets", "list available presets");

  std::string dump_config;
  auto* dump = app.add_subcommand(
      "dump-importance", "write phi.csv and importance.csv for a config");
  dump->add_option("config", dump_config, "path to a config file")->required();
  dump->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  std::vector<std::string> overrides = sets;
  if (seed >= 0) overrides.push_back("seed = " + std::to_string(seed));
  if (workers > 0) {
    overrides.push_back("workers = " + std::to_string(workers));
  }

  try {
    if (list->parsed()) {
      for (const auto& n : shellmc::preset_names()) std::cout << n << '\n';
      return 0;
    }
    if (dump->parsed()) {
      shellmc::ProblemConfig cfg;
      shellmc::apply_config_text(cfg, read_file(dump_config));
      for (const auto& o : overrides) shellmc::apply_config_text(cfg, o);
      cfg.validate();
      shellmc::dump_importance(cfg, out_dir);
      std::cout << "wrote phi.csv and importance.csv to " << out_dir << '\n';
      return 0;
    }
    // run
    const auto names = shellmc::preset_names();
    const bool is_preset =
        std::find(names.begin(), names.end(), target) != names.end();
    if (is_preset) {
      const auto result = shellmc::run_preset(target, overrides, out_dir);
      return report_checks(result);
    }
    if (std::filesystem::exists(target)) {
      return run_config_file(target, overrides, out_dir);
    }
    std::cerr << "unknown preset or missing config file: " << target
              << "\navailable presets:\n";
    for (const auto& n : names) std::cerr << "  " << n << '\n';
    return 2;
  } catch (const shellmc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const shellmc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
