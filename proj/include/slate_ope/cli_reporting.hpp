#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slate_ope/sim_harness.hpp"

namespace slate_ope {

inline constexpr std::string_view kVersion = "0.1.0";

inline constexpr std::string_view kResultsHeader =
    "experiment,K,cardinalities,tensor_index,estimator,n,bias,variance,mse,nmse,delta_nmse,am,hm,"
    "predicted_improvement,p_bar,p_prime,seed";

struct ConfigEntry {
  std::string key;
  std::string value;
  std::string source;  // file:line or "flag", for error messages
};

/// Splits `key = value` lines. Blank lines and lines starting with '#' are
/// skipped; keys are normalized to snake_case ('-' becomes '_').
std::vector<ConfigEntry> parse_key_values(std::string_view text, std::string_view source);

/// Applies entries in order (later ones win) on top of the defaults, then
/// fills experiment-specific defaults for anything left unset and validates.
/// `experiment` and `seed` are required; unknown keys are rejected.
ExperimentConfig config_from_entries(std::span<const ConfigEntry> entries);

ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

/// Every field as `key = value` lines; parse_config_text reads it back
/// unchanged.
std::string format_config(const ExperimentConfig& cfg);

/// Range and consistency checks for a whole experiment (grids, sweeps).
void validate_experiment(const ExperimentConfig& cfg);

struct RunManifest {
  ExperimentConfig config;
  std::string version{kVersion};
  std::string timestamp;
  std::vector<std::string> output_paths;
};

/// Comment lines carry version, timestamp and outputs; the rest is
/// format_config, so the manifest itself is a valid config file.
std::string format_manifest(const RunManifest& manifest);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double value);

/// Header plus one row per (tensor, estimator).
std::string format_results_csv(std::span<const TensorResult> results, const ExperimentConfig& cfg);

std::string format_prior_grid_csv(std::span<const PriorGridCell> cells);
std::string format_cardinality_grid_csv(std::span<const CardinalityGridCell> cells);
std::string format_slot_sweep_csv(std::span<const SlotSweepEntry> entries);
std::string format_regression_csv(std::span<const SlotRegression> fits);
std::string format_oracle_check_csv(std::span<const OracleCheckResult> checks);

struct NamedTable {
  std::string file_name;
  std::string contents;
};

struct WrittenFiles {
  std::filesystem::path results_csv;
  std::filesystem::path manifest;
  std::vector<std::filesystem::path> extra;
};

/// Writes results.csv, any extra tables, and manifest.cfg into out_dir
/// (created if missing). Throws std::runtime_error on I/O failure.
WrittenFiles write_results(std::span<const TensorResult> results, RunManifest manifest,
                           const std::filesystem::path& out_dir, std::span<const NamedTable> extra_tables = {});

}  // namespace slate_ope
