#pragma once

#include <string>
#include <vector>

#include "crlab/types.hpp"

namespace crlab {

enum class InvarianceKind { sample_level, marginal_distribution, risk };

std::string to_string(InvarianceKind kind);
InvarianceKind invariance_kind_from_string(const std::string& name);

// One invariance property: which latents it holds on (ground truth, used for
// evaluation only), which environments share it, and its penalty weight.
struct InvarianceSpec {
  InvarianceKind kind = InvarianceKind::marginal_distribution;
  IndexSet invariant_set;          // ground-truth indices A_i
  std::vector<int> env_group;      // env ids V_i, at least two
  double weight = 1.0;             // lambda >= 0

  void validate() const;  // throws on |env_group| < 2 or negative weight
};

// Binary mask routing encoding coordinates to an invariance property.
struct Selector {
  IntVector mask;  // 0/1 over encoding coordinates
  int property_id = 0;
  std::vector<int> env_group;

  IndexSet selected_indices() const;
  int block_size() const { return mask.sum(); }
};

// Subvector of v at positions where mask = 1, order preserved.
Vector select(const IntVector& mask, const Vector& v);

// Column-wise variant for batches of encodings.
Matrix select_columns(const IntVector& mask, const Matrix& batch);

// Mean over rows of the squared L2 row difference. All alignment-style losses
// in this library use this per-row-sum, mean-over-rows convention.
double mse_reconstruction(const Matrix& x_hat, const Matrix& x);

// Gradient of mse_reconstruction with respect to x_hat.
Matrix mse_reconstruction_grad(const Matrix& x_hat, const Matrix& x);

// Median of the pooled pairwise Euclidean distances of rows(X) u rows(Y).
// Zero-distance pairs are skipped; returns 1.0 if every pair coincides.
double median_heuristic_bandwidth(const Matrix& x, const Matrix& y);

// Squared maximum mean discrepancy, biased V-statistic, summed over a RBF
// mixture: sum_s [ mean k_s(X,X) + mean k_s(Y,Y) - 2 mean k_s(X,Y) ] with
// k_s(a,b) = exp(-|a-b|^2 / (2 s^2)). Nonnegative; exactly zero for Y = X.
double mmd_rbf(const Matrix& x, const Matrix& y, const std::vector<double>& bandwidths);

// Value plus gradients with respect to both sample sets.
double mmd_rbf_with_grad(const Matrix& x, const Matrix& y, const std::vector<double>& bandwidths,
                         Matrix* grad_x, Matrix* grad_y);

// Mean squared row-wise L2 distance between paired encodings.
double l2_alignment(const Matrix& enc_a, const Matrix& enc_b);

// Gradients of l2_alignment with respect to both encodings.
void l2_alignment_grad(const Matrix& enc_a, const Matrix& enc_b, Matrix* grad_a, Matrix* grad_b);

// Mean squared error of a regression head (scalar risk of one environment).
double mean_squared_risk(const Vector& predictions, const Vector& labels);

// Mean binary cross-entropy on logits, for classification heads.
double binary_cross_entropy_risk(const Vector& logits, const Vector& labels);

// Population variance of per-environment risks; requires K >= 2.
double risk_variance(const Vector& risks);

// Mean over all ordered pairs (i, j), including i = j, of (R_i - R_j)^2.
// Satisfies risk_variance = 0.5 * pairwise_risk_gap exactly.
double pairwise_risk_gap(const Vector& risks);

}  // namespace crlab
