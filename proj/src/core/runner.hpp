#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/fit.hpp"
#include "core/integrate.hpp"
#include "core/model.hpp"
#include "core/stability.hpp"

namespace viraldyn {

/// Sweep axis and grid. When values are omitted in the config, the shipped
/// default grid for the axis is used (b and beta1 only).
struct SweepConfig {
  std::string axis = "b";
  std::vector<double> values;
};

/// Fit block of a config: where the data lives and what to optimize.
struct FitConfig {
  std::string data_path;  ///< CSV with header t,V[,A]
  std::vector<std::string> free;
  std::map<std::string, std::array<double, 2>> bounds;  ///< natural space
  double a_weight = 1.0;
  int n_starts = 8;
  int max_evals = 2000;
  double detection_floor = 1.0;
};

/// Fully resolved run configuration with baseline defaults applied.
struct RunConfig {
  ModelParams params;
  ModelVariant variant = ModelVariant::Basic;
  State init;
  IntegrationOptions integration;
  SweepConfig sweep;
  FitConfig fit;
  std::string out_dir = ".";
};

/// Strict parse of a JSON config document. Unknown keys, wrong types and
/// invariant violations raise ParseError naming the offending path. Omitted
/// model parameters default to the baseline calibration; the default
/// initial state is (lambda/mu, 372.11, 994.84, 1.17). Relative data paths
/// are resolved against base_dir.
RunConfig parse_config(const std::string& json_text,
                       const std::string& base_dir = "");

/// Reads and parses a config file.
RunConfig parse_config_file(const std::string& path);

/// Runs one command (simulate, equilibria, stability, fit or sweep) and
/// writes its artifacts into out_dir (cfg.out_dir when empty). Sweep runs
/// fan out over a worker pool capped by the VIRALDYN_WORKERS environment
/// variable. Throws on failure.
void execute(const std::string& command, const RunConfig& cfg,
             const std::string& out_dir, std::uint64_t seed);

/// Writes a trajectory as CSV: header `t,T,I,V,A` (plus `,L` for the latent
/// variant), one `%.17e` formatted row per sample, then one `#event,<kind>`
/// comment line per event.
void write_trajectory_csv(const Trajectory& traj, ModelVariant variant,
                          const std::string& path);

/// Stable text form of a classification value.
std::string classification_name(Classification c);

}  // namespace viraldyn
