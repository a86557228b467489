#pragma once

#include <cstdint>
#include <vector>

#include "crlab/scm.hpp"
#include "crlab/types.hpp"

namespace crlab {

struct ObservationBatch {
  Matrix values;  // n_samples x N
  int env_id = 0;
};

// Invertible multilayer perceptron on R^N: square linear layers with a leaky
// rectifier between them (none after the last). Piecewise linear and globally
// invertible; unmix() applies the exact inverse.
class MixingNet {
 public:
  // Throws if any layer is non-square, has condition number > 25, or the
  // slope is outside (0, 1).
  MixingNet(std::vector<Matrix> weights, std::vector<Vector> biases, double slope);

  int dim() const { return static_cast<int>(weights_.front().rows()); }
  int n_layers() const { return static_cast<int>(weights_.size()); }
  double slope() const { return slope_; }
  const std::vector<Matrix>& weights() const { return weights_; }
  const std::vector<Vector>& biases() const { return biases_; }

 private:
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
  std::vector<Eigen::PartialPivLU<Matrix>> inverses_;
  double slope_;

  friend LatentBatch unmix(const MixingNet&, const ObservationBatch&);
};

// Random net with well-conditioned layers: orthonormalized Gaussian draws
// rescaled per-column by log-uniform factors in [0.5, 2]. Deterministic in
// the seed.
MixingNet random_mixing(int dim, int n_layers, std::uint64_t seed, double slope = 0.2);

// Row-wise forward map. Throws on non-finite input or width mismatch.
ObservationBatch mix(const MixingNet& net, const LatentBatch& z);

// Exact inverse of mix: inverse activation, then a linear solve, per layer in
// reverse order.
LatentBatch unmix(const MixingNet& net, const ObservationBatch& x);

}  // namespace crlab
