#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crlab/mixing.hpp"
#include "crlab/scm.hpp"
#include "crlab/train.hpp"

namespace crlab {

// Document conversions. Node ids are 1-based in documents, 0-based in memory.
nlohmann::json scm_to_json(const LinearGaussianScm& scm);
LinearGaussianScm scm_from_json(const nlohmann::json& doc);
nlohmann::json spec_to_json(const InterventionSpec& spec);
InterventionSpec spec_from_json(const nlohmann::json& doc);
nlohmann::json mixing_to_json(const MixingNet& net);
MixingNet mixing_from_json(const nlohmann::json& doc);

// FNV-1a over the canonical dump (sorted keys, no whitespace); 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

// Parses JSON allowing // and /* */ comments.
nlohmann::json parse_config_text(const std::string& text);
nlohmann::json load_config_file(const std::string& path);

struct MixingOptions {
  int n_layers = 3;
  double slope = 0.2;
};

struct EvalOptions {
  int krr_max_points = 4000;
  double krr_ridge = 1e-3;
  double krr_bandwidth = 0.0;  // 0: median heuristic
};

// One experiment: scenario, data-generating model, training and evaluation
// settings, seeds, and output location. Unset fields resolve to the bundled
// defaults; to_json() always emits the fully resolved document.
struct ExperimentConfig {
  std::string scenario = "nintervention";
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string outdir;
  std::optional<LinearGaussianScm> scm;
  std::vector<InterventionSpec> interventions;
  std::pair<double, double> nint_mean_range{2.0, 5.0};
  bool nint_mean_fixed = false;  // true: use the spec's new_intercept verbatim
  MixingOptions mixing;
  TrainConfig train;
  EvalOptions eval;
  std::vector<int> selector_mask;       // over encoding coordinates
  int shared_block_size = 1;            // multiview
  std::string variant = "independent";  // variant_demo: independent | dependent
  std::vector<double> lambda_grid{0.0, 1.0, 10.0, 100.0};  // vrex sweep

  static ExperimentConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  // The model under study; the bundled chain when none was configured.
  LinearGaussianScm resolved_scm() const;
  // Scenario defaults applied on top of any explicit settings.
  void validate() const;
};

}  // namespace crlab
