#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>

#include "shellmc/errors.hpp"

namespace shellmc {

enum class Mode { stationary, unsteady };
enum class SourceKind { outer_boundary, shell };

// Full description of one run. Geometry: shell between R0(t) = alpha + beta t
// and the fixed outer radius r1; beta = 0 is the stationary geometry.
struct ProblemConfig {
  Mode mode = Mode::stationary;
  SourceKind source = SourceKind::outer_boundary;
  bool importance = false;

  double r1 = 1.0;
  double alpha = 0.1;
  double beta = 0.0;
  double r_source = 0.45;  // shell-source radius

  double kappa_s = 0.0;
  double kappa_t = 0.0;

  double t_final = 10.0;
  double dt = 1e-2;
  double source_end_time = -1.0;  // < 0: active over the whole run

  long long particles = 10000;         // stationary histories
  long long particles_per_step = 100;  // unsteady emissions per step

  int n_r = 90;
  int n_mu = 100;

  std::uint64_t seed = 1;
  double weight_cutoff = 1e-12;
  bool biased_weight_cutoff = false;  // biased weights are near-constant
  bool tally_profile = false;
  int profile_cells = 0;  // 0: reuse n_r
  int workers = 1;
  std::string output_dir = ".";

  double inner_radius(double t) const { return alpha + beta * t; }

  long long n_steps() const {
    return static_cast<long long>(std::llround(t_final / dt));
  }

  double source_end() const {
    return source_end_time < 0.0 ? t_final : source_end_time;
  }

  void validate() const {
    if (!(r1 > 0.0)) throw ConfigError("r1 must be positive");
    if (kappa_s < 0.0 || kappa_t < 0.0) {
      throw ConfigError("cross sections must be non-negative");
    }
    if (kappa_s > kappa_t) throw ConfigError("kappa_s exceeds kappa_t");
    if (alpha < 0.0 || alpha >= r1) throw ConfigError("alpha outside [0, r1)");
    if (mode == Mode::unsteady) {
      if (!(dt > 0.0)) throw ConfigError("dt must be positive");
      if (!(t_final > 0.0)) throw ConfigError("t_final must be positive");
      const double steps = t_final / dt;
      if (std::fabs(steps - std::llround(steps)) > 1e-9 * steps) {
        throw ConfigError("t_final must be an integral number of time steps");
      }
      if (!(inner_radius(t_final) > 0.0)) {
        throw ConfigError("inner radius must stay positive up to t_final");
      }
      if (inner_radius(0.0) >= r1 || inner_radius(t_final) >= r1) {
        throw ConfigError("inner radius must stay below r1");
      }
      if (particles_per_step < 1) {
        throw ConfigError("particles_per_step must be at least 1");
      }
    } else {
      if (particles < 1) throw ConfigError("particles must be at least 1");
      if (beta != 0.0) {
        throw ConfigError("stationary mode requires beta = 0");
      }
      if (!(t_final > 0.0)) {
        throw ConfigError("t_final must be positive (reporting scale)");
      }
    }
    if (source == SourceKind::shell) {
      if (r_source < alpha || r_source > r1) {
        throw ConfigError("r_source outside the shell domain");
      }
    }
    if (importance) {
      if (source != SourceKind::outer_boundary) {
        throw ConfigError("importance sampling requires the boundary source");
      }
      if (!(kappa_s > 0.0)) {
        throw ConfigError(
            "importance sampling is degenerate without scattering");
      }
      if (!(alpha > 0.0) || (mode == Mode::unsteady &&
                             !(inner_radius(t_final) > 0.0))) {
        throw ConfigError("importance sampling requires a positive R0");
      }
    }
    if (n_r < 1 || n_mu < 1) throw ConfigError("mesh sizes must be positive");
    if (workers < 1) throw ConfigError("workers must be at least 1");
    if (weight_cutoff < 0.0) throw ConfigError("weight_cutoff must be >= 0");
    if (profile_cells < 0) throw ConfigError("profile_cells must be >= 0");
  }
};

// Applies flat key=value configuration text with '#' comments to an existing
// config (so presets can be overridden). Unknown keys are rejected with the
// offending name. Does not validate; callers validate once all text is in.
inline void apply_config_text(ProblemConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& key, const std::string& why) {
    throw ConfigError("config line " + std::to_string(lineno) + ", key '" +
                      key + "': " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r\n");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r\n");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (val.empty()) fail(key, "empty value");

    auto as_double = [&]() {
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(val, &pos);
      } catch (const std::exception&) {
        fail(key, "not a number: '" + val + "'");
      }
      if (pos != val.size()) fail(key, "trailing characters in '" + val + "'");
      return v;
    };
    auto as_int = [&]() {
      const double v = as_double();
      if (std::fabs(v - std::llround(v)) > 0.0) fail(key, "not an integer");
      return static_cast<long long>(std::llround(v));
    };
    auto as_bool = [&]() {
      if (val == "on" || val == "true" || val == "1") return true;
      if (val == "off" || val == "false" || val == "0") return false;
      fail(key, "expected on/off");
      return false;
    };

    if (key == "mode") {
      if (val == "stationary") {
        cfg.mode = Mode::stationary;
      } else if (val == "unsteady") {
        cfg.mode = Mode::unsteady;
      } else {
        fail(key, "expected stationary|unsteady");
      }
    } else if (key == "source") {
      if (val == "outer_boundary") {
        cfg.source = SourceKind::outer_boundary;
      } else if (val == "shell") {
        cfg.source = SourceKind::shell;
      } else {
        fail(key, "expected outer_boundary|shell");
      }
    } else if (key == "importance") {
      cfg.importance = as_bool();
    } else if (key == "r1") {
      cfg.r1 = as_double();
    } else if (key == "r0" || key == "alpha") {
      cfg.alpha = as_double();
    } else if (key == "beta") {
      cfg.beta = as_double();
    } else if (key == "r_source") {
      cfg.r_source = as_double();
    } else if (key == "kappa_s") {
      cfg.kappa_s = as_double();
    } else if (key == "kappa_t") {
      cfg.kappa_t = as_double();
    } else if (key == "t_final") {
      cfg.t_final = as_double();
    } else if (key == "dt") {
      cfg.dt = as_double();
    } else if (key == "source_end_time") {
      cfg.source_end_time = as_double();
    } else if (key == "particles") {
      cfg.particles = as_int();
    } else if (key == "particles_per_step") {
      cfg.particles_per_step = as_int();
    } else if (key == "n_r") {
      cfg.n_r = static_cast<int>(as_int());
    } else if (key == "n_mu") {
      cfg.n_mu = static_cast<int>(as_int());
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(as_int());
    } else if (key == "weight_cutoff") {
      cfg.weight_cutoff = as_double();
    } else if (key == "biased_weight_cutoff") {
      cfg.biased_weight_cutoff = as_bool();
    } else if (key == "tally_profile") {
      cfg.tally_profile = as_bool();
    } else if (key == "profile_cells") {
      cfg.profile_cells = static_cast<int>(as_int());
    } else if (key == "workers") {
      cfg.workers = static_cast<int>(as_int());
    } else if (key == "output_dir") {
      cfg.output_dir = val;
    } else {
      fail(key, "unknown key");
    }
  }
}

inline ProblemConfig parse_config(const std::string& text) {
  ProblemConfig cfg;
  apply_config_text(cfg, text);
  cfg.validate();
  return cfg;
}

}  // namespace shellmc
