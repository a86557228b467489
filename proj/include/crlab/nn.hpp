#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "crlab/types.hpp"

namespace crlab {

// Fully connected network with a leaky rectifier on every hidden layer and a
// linear output layer. Batches are row-major (one sample per row).
class Mlp {
 public:
  // sizes = {in, hidden..., out}; weights start uniform in [-a, a] with
  // a = sqrt(6 / (fan_in + fan_out)), biases at zero. Deterministic in seed.
  Mlp(const std::vector<int>& sizes, std::uint64_t seed, double slope = 0.2);
  Mlp() = default;

  const std::vector<int>& sizes() const { return sizes_; }
  int n_layers() const { return static_cast<int>(weights_.size()); }
  int in_dim() const { return sizes_.front(); }
  int out_dim() const { return sizes_.back(); }
  double slope() const { return slope_; }

  std::vector<Matrix>& weights() { return weights_; }
  std::vector<Vector>& biases() { return biases_; }
  const std::vector<Matrix>& weights() const { return weights_; }
  const std::vector<Vector>& biases() const { return biases_; }

 private:
  std::vector<int> sizes_;
  std::vector<Matrix> weights_;  // layer l: sizes[l+1] x sizes[l]
  std::vector<Vector> biases_;
  double slope_ = 0.2;
};

// Pre-activations per layer plus the input, as needed by backward().
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre_activations;
};

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static Gradients zeros_like(const Mlp& mlp);
  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double factor);
  bool all_finite() const;
};

// Output batch; fills `cache` for a later backward pass.
Matrix forward(const Mlp& mlp, const Matrix& batch, ForwardCache* cache = nullptr);

// Reverse-mode gradients. `output_gradient` is dLoss/dOutput for the batch
// that produced `cache`; returns dLoss/dInput and fills parameter gradients.
Matrix backward(const Mlp& mlp, const ForwardCache& cache, const Matrix& output_gradient,
                Gradients* grads);

// Bias-corrected Adam. One state per network; shapes are pinned at
// construction and each step checks them.
class AdamState {
 public:
  AdamState(const Mlp& mlp, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
            double epsilon = 1e-8);
  AdamState() = default;

  // Throws on non-finite gradients (with the offending layer in the message).
  void step(Mlp& mlp, const Gradients& grads);

  std::int64_t step_count() const { return step_count_; }
  double learning_rate() const { return learning_rate_; }

  friend void save_checkpoint(std::ostream&, const Mlp&, const AdamState*);
  friend void load_checkpoint(std::istream&, Mlp&, AdamState*);

 private:
  double learning_rate_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, epsilon_ = 1e-8;
  std::int64_t step_count_ = 0;
  std::vector<Matrix> m_w_, v_w_;
  std::vector<Vector> m_b_, v_b_;
};

// Versioned JSON checkpoint of parameters and, optionally, optimizer state.
void save_checkpoint(std::ostream& out, const Mlp& mlp, const AdamState* opt = nullptr);
void load_checkpoint(std::istream& in, Mlp& mlp, AdamState* opt = nullptr);

}  // namespace crlab
