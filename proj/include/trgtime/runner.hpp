#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trgtime/evolution.hpp"
#include "trgtime/hotrg.hpp"
#include "trgtime/states.hpp"

namespace trgtime {

enum class ExperimentKind {
  spectrum,
  lambda_scan,
  evolve_one,
  evolve_two,
  longitudinal,
  q_sweep,
  tebd_compare,
};

// Reference series the coarse run is compared against. ed_exact evolves with
// the exponentiated Hamiltonian, ed_trotter with the symmetric splitting,
// tebd with the truncated MPS walker.
enum class OracleKind { ed_exact, ed_trotter, tebd, none };

std::string to_string(ExperimentKind k);
std::string to_string(OracleKind k);
ExperimentKind experiment_kind_from(const std::string& name);
OracleKind oracle_from(const std::string& name);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::spectrum;
  ModelParams params;
  std::vector<WavePacketSpec> packets;
  int steps = 100;
  OracleKind oracle = OracleKind::none;
  std::vector<double> lambdas;  // lambda-scan grid
  int sweep_points = 32;        // q-sweep resolution over [0, pi/2]
  int q_level = 1;              // q-sweep blocking level
  double tebd_cutoff = 1e-8;    // truncation of the MPS walker
  int tebd_max_bond = 20;
  // Report the pointwise mean of |a-b|/|b| instead of the default
  // sum|a-b| / sum|b| percent normalization.
  bool pointwise_pct = false;
  std::filesystem::path out_dir = ".";
  std::filesystem::path cache_dir;  // empty: TRGTIME_CACHE_DIR or out_dir

  // Kind-specific completeness on top of ModelParams::validate(); throws
  // std::invalid_argument naming the offending field.
  void validate() const;
};

// Flat key=value configuration. Lines are `key = value`, '#' starts a
// comment, unknown keys throw naming the key. apply_setting is the same
// key space, used for command-line overrides.
ExperimentConfig parse_config(const std::filesystem::path& file);
void apply_setting(ExperimentConfig& cfg, const std::string& key,
                   const std::string& value);

struct DiffReport {
  double mean_abs_diff = 0.0;  // (1/(N_s*T)) sum_{j,t} |a - b|
  double mean_pct_diff = 0.0;  // 100 * sum|a-b| / sum|b| (or pointwise)
  double max_abs_diff = 0.0;
  std::vector<double> per_step_abs;  // site-mean |a-b| at each record
  // Mean |cbar_a - cbar_b| over records where both sides carry a center;
  // records missing one are excluded pairwise. Unset when no pair exists.
  std::optional<double> cbar_mean_abs_diff;
};

// Occupation-series difference over aligned runs; throws on shape mismatch.
// Center records missing on either side are excluded pairwise (they do not
// enter any metric).
DiffReport diff_series(const EvolutionRun& a, const EvolutionRun& b,
                       bool pointwise_pct = false);

struct RunArtifacts {
  std::vector<std::filesystem::path> csv_files;
  std::filesystem::path manifest;
  std::optional<DiffReport> diff;
  bool cache_hit = false;
  double wall_seconds = 0.0;
};

// Executes the experiment: builds or loads the cached TEO where one is
// needed, runs the requested evolution or sweep, writes the CSV artifacts
// and a manifest into cfg.out_dir. CSV bodies are deterministic functions
// of the config; wall time and cache status appear only in the manifest.
RunArtifacts run_experiment(const ExperimentConfig& cfg);

// Version string recorded in every manifest.
std::string code_version();

}  // namespace trgtime
