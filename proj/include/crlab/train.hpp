#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "crlab/eval.hpp"
#include "crlab/losses.hpp"
#include "crlab/mixing.hpp"
#include "crlab/nn.hpp"
#include "crlab/types.hpp"

namespace crlab {

struct TrainConfig {
  std::string scenario = "nintervention";
  int batch_size = 4000;
  int n_epochs = 200;
  double learning_rate = 1e-3;
  double lambda_invariance = 1.0;
  std::uint64_t seed = 0;
  int encoding_width = 0;  // 0: same as the input width
  int n_samples = 50000;   // per environment, used by scenario builders
  int n_eval = 4000;       // fresh evaluation draws per environment
  int hidden_dim = 128;
  int depth = 3;           // number of weight layers per network
  double slope = 0.2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int mmd_batch = 256;     // per-step sub-batch for the MMD term

  void validate() const;  // throws on lambda < 0 or batch_size < 2
  std::vector<int> encoder_sizes(int in_dim) const;
  std::vector<int> decoder_sizes(int in_dim) const;
};

struct LossHistory {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;  // one per completed epoch
};

// Raised when a step produces a non-finite loss; carries whatever history
// accumulated before the abort.
class TrainDivergence : public std::runtime_error {
 public:
  TrainDivergence(const std::string& what, LossHistory history)
      : std::runtime_error(what), partial_history(std::move(history)) {}
  LossHistory partial_history;
};

struct TrainedModel {
  std::vector<Mlp> encoders;  // one entry when shared across environments
  std::vector<Mlp> decoders;
  std::vector<Selector> selectors;
  Mlp head;  // linear readout for risk scenarios; empty otherwise
  LossHistory history;
  bool shared_encoder = true;

  const Mlp& encoder_for(int env_index) const {
    return shared_encoder ? encoders.front() : encoders.at(env_index);
  }
};

// Encodings of a batch under the model's encoder for the given environment.
Matrix encode(const TrainedModel& model, const Matrix& x, int env_index = 0);

// Shared autoencoder trained on sum-of-environment reconstruction plus
// lambda * MMD between the selected encoding coordinates of every environment
// pair in each selector's group. The MMD term uses a fresh sub-batch per step
// with median-heuristic bandwidths times {0.5, 1, 2}.
TrainedModel train_marginal_invariance(const std::vector<ObservationBatch>& env_data,
                                       const std::vector<Selector>& selectors,
                                       const TrainConfig& cfg);

// Per-view autoencoders with lambda * squared-L2 alignment of the first
// shared_block_size encoding coordinates across row-paired views.
TrainedModel train_multiview(const std::vector<ObservationBatch>& views, int shared_block_size,
                             const TrainConfig& cfg);

// Shared encoder plus linear head trained on mean environment risk plus
// lambda * population variance of the per-environment risks.
TrainedModel train_vrex(const std::vector<std::pair<ObservationBatch, Vector>>& env_data,
                        const TrainConfig& cfg);

struct VariantDemoReport {
  bool independent_scenario = false;
  double complement_r2 = 0.0;  // complement encoding block against the variant latent
  double selected_r2 = 0.0;    // selected (invariant) block against the variant latent
  IdentifiabilityReport report;
};

// Trains the marginal-invariance model on a three-latent setup where the
// middle latent is the variant one, then scores the complement encoding
// block against it. independent_variant selects whether the variant latent
// is independent of the invariant pair (recoverable) or the chain setting
// (reported without a bound).
VariantDemoReport demo_variant_latents(bool independent_variant, const TrainConfig& cfg);

}  // namespace crlab
