#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "crlab/types.hpp"

namespace crlab {

struct KrrOptions {
  double ridge = 1e-3;        // after feature standardization
  double bandwidth = 0.0;     // 0 = median heuristic on the training split
  int max_points = 4000;      // subsample cap before the 50/50 split
  std::uint64_t split_seed = 1;
};

// Held-out R^2 of a Gaussian-kernel ridge regression from `features` to
// `target`: subsample, standardize on the training half, fit on it, score
// R^2 = 1 - SSE/SST on the test half. Throws on zero-variance targets or
// fewer than 100 rows.
double krr_r2(const Matrix& features, const Vector& target, const KrrOptions& opts = {});

struct AffineFitResult {
  Vector r2;             // per ground-truth latent
  bool rank_deficient = false;
};

// Ordinary least squares (with intercept) from z_hat to each column of z,
// fitted on the training half, scored on the test half. Rank deficiency is
// flagged rather than thrown.
AffineFitResult affine_fit_r2(const Matrix& z_hat, const Matrix& z, std::uint64_t split_seed = 1);

struct MatchedCorrelation {
  Matrix spearman;            // |Z_hat cols| x |Z cols|
  std::vector<int> assignment;  // estimated coord matched to each latent
  double mean_abs_rho = 0.0;
};

// Spearman rank correlations between every (estimated, true) coordinate pair
// and the permutation maximizing total |rho|. Constant columns correlate 0.
// Requires equal widths (at most 10 for the exact matcher).
MatchedCorrelation matched_correlation(const Matrix& z_hat, const Matrix& z);

struct ReportMetadata {
  std::string scenario;
  std::uint64_t seed = 0;
  int n_samples = 0;
};

// Identifiability scores at three granularities, for one trained model.
struct IdentifiabilityReport {
  Vector block_r2;    // per latent: KRR R^2 from the evaluated block
  Vector affine_r2;   // per latent: linear-fit R^2 from the full encoding
  MatchedCorrelation element;
  ReportMetadata meta;
};

struct ConsistencyFlags {
  bool affine_premise = false;   // all affine R^2 >= 0.95
  bool element_ok = true;        // mean matched |rho| >= 0.9 when premise holds
  bool block_ok = true;          // all block KRR R^2 >= 0.9 when premise holds
  bool violated = false;
};

// Thresholded implication ladder: affine identification must entail element-
// and block-level identification; the reverse directions are not checked.
ConsistencyFlags granularity_consistency(const IdentifiabilityReport& report);

// Flat JSON document (schema_version 1) and a one-row CSV summary.
std::string report_to_json(const IdentifiabilityReport& report);
IdentifiabilityReport report_from_json(const std::string& text);
void write_report_csv_header(std::ostream& out, int n_latents);
void write_report_csv_row(std::ostream& out, const IdentifiabilityReport& report);

}  // namespace crlab
