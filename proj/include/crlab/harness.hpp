#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crlab/config.hpp"
#include "crlab/eval.hpp"
#include "crlab/train.hpp"

namespace crlab {

inline constexpr const char* kLibraryVersion = "0.1.0";

// Block R^2 at or below this value counts as "suppressed" for the variant
// latent; matches the reproduction gate on the low-R^2 latent.
inline constexpr double kSuppressionThreshold = 0.2;

struct RunRecord {
  nlohmann::json config;  // fully resolved, no hidden defaults
  std::string config_hash;
  std::string scenario;
  std::vector<IdentifiabilityReport> reports;  // one per seed
  std::vector<LossHistory> histories;          // one per seed
  nlohmann::json extra;                        // scenario-specific per-seed values
  double wall_clock_seconds = 0.0;
  std::string library_version = kLibraryVersion;
};

// Chain SCM under a nintervention: samples the shifted mean per seed,
// resamples the mixing per seed, trains the MMD-regularized autoencoder, and
// scores the selected block against every latent on pooled fresh draws.
RunRecord run_nintervention(const ExperimentConfig& cfg);

// Two partially overlapping views of independent latents, L2-aligned on the
// shared block.
RunRecord run_multiview(const ExperimentConfig& cfg);

// Risk-invariance sweep over the configured lambda grid; emits one row of
// (lambda, pooled risk, risk variance, per-direction sensitivity) per cell.
RunRecord run_vrex(const ExperimentConfig& cfg);

// Variant-latent demonstrations (independent vs dependent scenario).
RunRecord run_variant_demo(const ExperimentConfig& cfg);

struct OracleRow {
  InterventionKind kind;
  int target;  // 0-based
  IndexSet marginal;
  IndexSet score;
  bool verified;
};

// Closure-based invariant partitions plus analytic verification for each
// configured intervention (defaults: every kind on every node of the model).
std::vector<OracleRow> run_oracle(const ExperimentConfig& cfg);
std::string oracle_table_to_string(const std::vector<OracleRow>& rows);

struct AggregateSummary {
  std::string scenario;
  std::vector<std::string> metrics;
  std::vector<double> mean, sd, min, max;  // population sd

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

// Per-metric mean/sd/min/max across seed reports. Throws on empty input or
// mixed scenarios.
AggregateSummary aggregate(const std::vector<IdentifiabilityReport>& reports);

// Output layout: <outdir>/<scenario>/<config_hash>/seed_<s>/{report.json,
// losses.csv} plus summary.{json,csv} and record.json at the hash level.
// Returns the hash-level directory.
std::filesystem::path write_run_record(const RunRecord& record, const std::filesystem::path& outdir);

// Flag > config > CRLAB_OUTDIR > "out".
std::string resolve_outdir(const std::string& flag_value, const ExperimentConfig& cfg);

}  // namespace crlab
