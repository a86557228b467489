#include "crlab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "crlab/losses.hpp"
#include "crlab/random.hpp"

namespace crlab {

using nlohmann::json;

namespace {

std::vector<int> shuffled_indices(int n, std::uint64_t seed) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  CounterRng rng(seed);
  for (int i = n - 1; i > 0; --i) {
    int j = static_cast<int>(rng.uniform01() * (i + 1));
    std::swap(idx[i], idx[std::min(j, i)]);
  }
  return idx;
}

Matrix take_rows(const Matrix& m, const std::vector<int>& idx, int begin, int end) {
  Matrix out(end - begin, m.cols());
  for (int i = begin; i < end; ++i) out.row(i - begin) = m.row(idx[i]);
  return out;
}

double r_squared(const Vector& predicted, const Vector& truth) {
  const double sst = (truth.array() - truth.mean()).square().sum();
  if (sst <= 0.0) throw std::invalid_argument("R^2: zero-variance target");
  return 1.0 - (predicted - truth).squaredNorm() / sst;
}

}  // namespace

double krr_r2(const Matrix& features, const Vector& target, const KrrOptions& opts) {
  const int n_total = static_cast<int>(features.rows());
  if (target.size() != n_total) throw std::invalid_argument("krr_r2: row count mismatch");
  if (n_total < 100) throw std::invalid_argument("krr_r2: need at least 100 rows");
  if ((target.array() - target(0)).abs().maxCoeff() == 0.0)
    throw std::invalid_argument("krr_r2: zero-variance target");

  std::vector<int> idx = shuffled_indices(n_total, opts.split_seed);
  const int n = std::min(n_total, opts.max_points);
  const int n_train = n / 2;

  Matrix x_train = take_rows(features, idx, 0, n_train);
  Matrix x_test = take_rows(features, idx, n_train, n);
  Vector y_train(n_train), y_test(n - n_train);
  for (int i = 0; i < n_train; ++i) y_train(i) = target(idx[i]);
  for (int i = n_train; i < n; ++i) y_test(i - n_train) = target(idx[i]);

  // Standardize features with training statistics.
  Eigen::RowVectorXd mean = x_train.colwise().mean();
  Eigen::RowVectorXd sd =
      ((x_train.rowwise() - mean).array().square().colwise().sum() / n_train).sqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j)
    if (sd(j) <= 0.0) sd(j) = 1.0;
  x_train = (x_train.rowwise() - mean).array().rowwise() / sd.array();
  x_test = (x_test.rowwise() - mean).array().rowwise() / sd.array();

  double sigma = opts.bandwidth;
  if (sigma <= 0.0) {
    // Median heuristic on (a subsample of) the training split.
    const int cap = std::min(n_train, 1000);
    sigma = median_heuristic_bandwidth(x_train.topRows(cap), x_train.topRows(cap));
  }
  const double inv = 1.0 / (2.0 * sigma * sigma);

  auto kernel = [&](const Matrix& a, const Matrix& b) {
    Matrix d = -2.0 * a * b.transpose();
    d.colwise() += a.rowwise().squaredNorm();
    d.rowwise() += b.rowwise().squaredNorm().transpose();
    return Matrix((-inv * d.array().max(0.0)).exp());
  };

  Matrix k_train = kernel(x_train, x_train);
  k_train.diagonal().array() += opts.ridge;
  const double y_mean = y_train.mean();
  Vector alpha = k_train.llt().solve(y_train.array() - y_mean);
  Vector predicted = kernel(x_test, x_train) * alpha;
  predicted.array() += y_mean;
  return r_squared(predicted, y_test);
}

AffineFitResult affine_fit_r2(const Matrix& z_hat, const Matrix& z, std::uint64_t split_seed) {
  const int n = static_cast<int>(z_hat.rows());
  if (z.rows() != n) throw std::invalid_argument("affine_fit_r2: row count mismatch");
  if (n <= z_hat.cols()) throw std::invalid_argument("affine_fit_r2: need n > encoding width");

  std::vector<int> idx = shuffled_indices(n, split_seed);
  const int n_train = n / 2;
  Matrix design_train(n_train, z_hat.cols() + 1);
  design_train << take_rows(z_hat, idx, 0, n_train), Matrix::Ones(n_train, 1);
  Matrix design_test(n - n_train, z_hat.cols() + 1);
  design_test << take_rows(z_hat, idx, n_train, n), Matrix::Ones(n - n_train, 1);
  Matrix z_train = take_rows(z, idx, 0, n_train);
  Matrix z_test = take_rows(z, idx, n_train, n);

  Eigen::ColPivHouseholderQR<Matrix> qr(design_train);
  AffineFitResult result;
  result.rank_deficient = qr.rank() < design_train.cols();
  Matrix coef = qr.solve(z_train);
  Matrix predicted = design_test * coef;
  result.r2.resize(z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j)
    result.r2(j) = r_squared(predicted.col(j), z_test.col(j));
  return result;
}

namespace {

// Average ranks (ties share the mean rank), the classical Spearman setup.
Vector ranks_of(const Vector& v) {
  const int n = static_cast<int>(v.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return v(a) < v(b); });
  Vector ranks(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && v(order[j + 1]) == v(order[i])) ++j;
    const double shared = 0.5 * (i + j) + 1.0;
    for (int k = i; k <= j; ++k) ranks(order[k]) = shared;
    i = j + 1;
  }
  return ranks;
}

double pearson(const Vector& a, const Vector& b) {
  const Vector ca = a.array() - a.mean();
  const Vector cb = b.array() - b.mean();
  const double denom = ca.norm() * cb.norm();
  if (denom <= 0.0) return 0.0;  // constant column
  return ca.dot(cb) / denom;
}

}  // namespace

MatchedCorrelation matched_correlation(const Matrix& z_hat, const Matrix& z) {
  const int n_dims = static_cast<int>(z.cols());
  if (z_hat.cols() != n_dims)
    throw std::invalid_argument("matched_correlation: widths must agree");
  if (n_dims > 10)
    throw std::invalid_argument("matched_correlation: exact matcher supports at most 10 dims");
  if (z_hat.rows() != z.rows()) throw std::invalid_argument("matched_correlation: row mismatch");

  std::vector<Vector> ranks_hat(n_dims), ranks_true(n_dims);
  for (int j = 0; j < n_dims; ++j) {
    ranks_hat[j] = ranks_of(z_hat.col(j));
    ranks_true[j] = ranks_of(z.col(j));
  }
  MatchedCorrelation result;
  result.spearman.resize(n_dims, n_dims);
  for (int i = 0; i < n_dims; ++i)
    for (int j = 0; j < n_dims; ++j) result.spearman(i, j) = pearson(ranks_hat[i], ranks_true[j]);

  // Exact assignment: enumerate permutations, maximize total |rho|.
  std::vector<int> perm(n_dims), best(n_dims);
  std::iota(perm.begin(), perm.end(), 0);
  best = perm;
  double best_total = -1.0;
  do {
    double total = 0.0;
    for (int j = 0; j < n_dims; ++j) total += std::abs(result.spearman(perm[j], j));
    if (total > best_total) {
      best_total = total;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  result.assignment = best;
  result.mean_abs_rho = best_total / n_dims;
  return result;
}

ConsistencyFlags granularity_consistency(const IdentifiabilityReport& report) {
  constexpr double kAffineTau = 0.95, kElementTau = 0.90, kBlockTau = 0.90;
  ConsistencyFlags flags;
  flags.affine_premise = report.affine_r2.size() > 0 && report.affine_r2.minCoeff() >= kAffineTau;
  if (flags.affine_premise) {
    flags.element_ok = report.element.mean_abs_rho >= kElementTau;
    flags.block_ok = report.block_r2.size() > 0 && report.block_r2.minCoeff() >= kBlockTau;
  }
  flags.violated = flags.affine_premise && !(flags.element_ok && flags.block_ok);
  return flags;
}

std::string report_to_json(const IdentifiabilityReport& report) {
  json doc;
  doc["schema_version"] = 1;
  doc["scenario"] = report.meta.scenario;
  doc["seed"] = report.meta.seed;
  doc["n_samples"] = report.meta.n_samples;
  doc["block_r2"] = std::vector<double>(report.block_r2.begin(), report.block_r2.end());
  doc["affine_r2"] = std::vector<double>(report.affine_r2.begin(), report.affine_r2.end());
  std::vector<std::vector<double>> rho;
  for (Eigen::Index i = 0; i < report.element.spearman.rows(); ++i)
    rho.emplace_back(report.element.spearman.row(i).begin(), report.element.spearman.row(i).end());
  doc["spearman"] = rho;
  doc["assignment"] = report.element.assignment;
  doc["mean_abs_rho"] = report.element.mean_abs_rho;
  return doc.dump(2);
}

IdentifiabilityReport report_from_json(const std::string& text) {
  json doc = json::parse(text);
  if (doc.at("schema_version").get<int>() != 1)
    throw std::runtime_error("report: unsupported schema_version");
  IdentifiabilityReport report;
  report.meta.scenario = doc.at("scenario").get<std::string>();
  report.meta.seed = doc.at("seed").get<std::uint64_t>();
  report.meta.n_samples = doc.at("n_samples").get<int>();
  auto block = doc.at("block_r2").get<std::vector<double>>();
  auto affine = doc.at("affine_r2").get<std::vector<double>>();
  report.block_r2 = Eigen::Map<Vector>(block.data(), block.size());
  report.affine_r2 = Eigen::Map<Vector>(affine.data(), affine.size());
  auto rho = doc.at("spearman").get<std::vector<std::vector<double>>>();
  report.element.spearman.resize(rho.size(), rho.empty() ? 0 : rho[0].size());
  for (std::size_t i = 0; i < rho.size(); ++i)
    for (std::size_t j = 0; j < rho[i].size(); ++j) report.element.spearman(i, j) = rho[i][j];
  report.element.assignment = doc.at("assignment").get<std::vector<int>>();
  report.element.mean_abs_rho = doc.at("mean_abs_rho").get<double>();
  return report;
}

void write_report_csv_header(std::ostream& out, int n_latents) {
  out << "scenario,seed,n_samples";
  for (int j = 1; j <= n_latents; ++j) out << ",block_r2_z" << j;
  for (int j = 1; j <= n_latents; ++j) out << ",affine_r2_z" << j;
  out << ",mean_abs_rho\n";
}

void write_report_csv_row(std::ostream& out, const IdentifiabilityReport& report) {
  out << report.meta.scenario << ',' << report.meta.seed << ',' << report.meta.n_samples;
  for (Eigen::Index j = 0; j < report.block_r2.size(); ++j) out << ',' << report.block_r2(j);
  for (Eigen::Index j = 0; j < report.affine_r2.size(); ++j) out << ',' << report.affine_r2(j);
  out << ',' << report.element.mean_abs_rho << '\n';
}

}  // namespace crlab
