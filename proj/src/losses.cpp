#include "crlab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace crlab {

std::string to_string(InvarianceKind kind) {
  switch (kind) {
    case InvarianceKind::sample_level: return "sample_level";
    case InvarianceKind::marginal_distribution: return "marginal_distribution";
    case InvarianceKind::risk: return "risk";
  }
  throw std::invalid_argument("unknown InvarianceKind");
}

InvarianceKind invariance_kind_from_string(const std::string& name) {
  if (name == "sample_level") return InvarianceKind::sample_level;
  if (name == "marginal_distribution") return InvarianceKind::marginal_distribution;
  if (name == "risk") return InvarianceKind::risk;
  throw std::invalid_argument("unknown invariance kind: " + name);
}

void InvarianceSpec::validate() const {
  if (env_group.size() < 2)
    throw std::invalid_argument("InvarianceSpec: env group needs at least two environments");
  if (weight < 0.0) throw std::invalid_argument("InvarianceSpec: weight must be nonnegative");
}

IndexSet Selector::selected_indices() const {
  IndexSet out;
  for (int i = 0; i < mask.size(); ++i)
    if (mask(i) != 0) out.push_back(i);
  return out;
}

Vector select(const IntVector& mask, const Vector& v) {
  if (mask.size() != v.size()) throw std::invalid_argument("select: length mismatch");
  int n_selected = 0;
  for (int i = 0; i < mask.size(); ++i)
    if (mask(i) != 0) ++n_selected;
  Vector out(n_selected);
  int k = 0;
  for (int i = 0; i < mask.size(); ++i)
    if (mask(i) != 0) out(k++) = v(i);
  return out;
}

Matrix select_columns(const IntVector& mask, const Matrix& batch) {
  if (mask.size() != batch.cols()) throw std::invalid_argument("select_columns: width mismatch");
  int n_selected = 0;
  for (int i = 0; i < mask.size(); ++i)
    if (mask(i) != 0) ++n_selected;
  Matrix out(batch.rows(), n_selected);
  int k = 0;
  for (int i = 0; i < mask.size(); ++i)
    if (mask(i) != 0) out.col(k++) = batch.col(i);
  return out;
}

double mse_reconstruction(const Matrix& x_hat, const Matrix& x) {
  if (x_hat.rows() != x.rows() || x_hat.cols() != x.cols())
    throw std::invalid_argument("mse_reconstruction: shape mismatch");
  return (x_hat - x).squaredNorm() / static_cast<double>(x.rows());
}

Matrix mse_reconstruction_grad(const Matrix& x_hat, const Matrix& x) {
  if (x_hat.rows() != x.rows() || x_hat.cols() != x.cols())
    throw std::invalid_argument("mse_reconstruction: shape mismatch");
  return 2.0 / static_cast<double>(x.rows()) * (x_hat - x);
}

namespace {

// All squared pairwise distances between rows, |a_i - b_j|^2.
Matrix squared_distances(const Matrix& a, const Matrix& b) {
  Matrix d = -2.0 * a * b.transpose();
  d.colwise() += a.rowwise().squaredNorm();
  d.rowwise() += b.rowwise().squaredNorm().transpose();
  return d.cwiseMax(0.0);
}

}  // namespace

double median_heuristic_bandwidth(const Matrix& x, const Matrix& y) {
  if (x.cols() != y.cols()) throw std::invalid_argument("median bandwidth: width mismatch");
  Matrix pooled(x.rows() + y.rows(), x.cols());
  pooled << x, y;
  const Eigen::Index n = pooled.rows();
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  Matrix d2 = squared_distances(pooled, pooled);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (d2(i, j) > 0.0) dists.push_back(std::sqrt(d2(i, j)));
  if (dists.empty()) return 1.0;
  auto mid = dists.begin() + dists.size() / 2;
  std::nth_element(dists.begin(), mid, dists.end());
  return *mid;
}

double mmd_rbf(const Matrix& x, const Matrix& y, const std::vector<double>& bandwidths) {
  return mmd_rbf_with_grad(x, y, bandwidths, nullptr, nullptr);
}

double mmd_rbf_with_grad(const Matrix& x, const Matrix& y, const std::vector<double>& bandwidths,
                         Matrix* grad_x, Matrix* grad_y) {
  if (x.cols() != y.cols()) throw std::invalid_argument("mmd_rbf: width mismatch");
  if (x.rows() < 2 || y.rows() < 2) throw std::invalid_argument("mmd_rbf: need >= 2 samples per set");
  if (bandwidths.empty()) throw std::invalid_argument("mmd_rbf: empty bandwidth list");
  const double n = static_cast<double>(x.rows());
  const double m = static_cast<double>(y.rows());

  const Matrix dxx = squared_distances(x, x);
  const Matrix dyy = squared_distances(y, y);
  const Matrix dxy = squared_distances(x, y);

  if (grad_x) grad_x->setZero(x.rows(), x.cols());
  if (grad_y) grad_y->setZero(y.rows(), y.cols());

  double total = 0.0;
  for (double sigma : bandwidths) {
    if (!(sigma > 0.0)) throw std::invalid_argument("mmd_rbf: bandwidths must be positive");
    const double inv = 1.0 / (2.0 * sigma * sigma);
    const Matrix kxx = (-inv * dxx.array()).exp();
    const Matrix kyy = (-inv * dyy.array()).exp();
    const Matrix kxy = (-inv * dxy.array()).exp();
    total += kxx.sum() / (n * n) + kyy.sum() / (m * m) - 2.0 * kxy.sum() / (n * m);

    if (grad_x || grad_y) {
      // d k(a,b)/d a = -k(a,b) (a-b) / sigma^2; sum the pair contributions.
      const double s2 = 1.0 / (sigma * sigma);
      if (grad_x) {
        Vector row_kxx = kxx.rowwise().sum();
        grad_x->noalias() += (-2.0 * s2 / (n * n)) * (row_kxx.asDiagonal() * x - kxx * x);
        Vector row_kxy = kxy.rowwise().sum();
        grad_x->noalias() -= (-2.0 * s2 / (n * m)) * (row_kxy.asDiagonal() * x - kxy * y);
      }
      if (grad_y) {
        Vector col_kyy = kyy.colwise().sum().transpose();
        grad_y->noalias() += (-2.0 * s2 / (m * m)) * (col_kyy.asDiagonal() * y - kyy.transpose() * y);
        Vector col_kxy = kxy.colwise().sum().transpose();
        grad_y->noalias() -= (-2.0 * s2 / (n * m)) * (col_kxy.asDiagonal() * y - kxy.transpose() * x);
      }
    }
  }
  return total;
}

double l2_alignment(const Matrix& enc_a, const Matrix& enc_b) {
  if (enc_a.rows() != enc_b.rows() || enc_a.cols() != enc_b.cols())
    throw std::invalid_argument("l2_alignment: shape mismatch");
  return (enc_a - enc_b).squaredNorm() / static_cast<double>(enc_a.rows());
}

void l2_alignment_grad(const Matrix& enc_a, const Matrix& enc_b, Matrix* grad_a, Matrix* grad_b) {
  if (enc_a.rows() != enc_b.rows() || enc_a.cols() != enc_b.cols())
    throw std::invalid_argument("l2_alignment: shape mismatch");
  const Matrix diff = 2.0 / static_cast<double>(enc_a.rows()) * (enc_a - enc_b);
  if (grad_a) *grad_a = diff;
  if (grad_b) *grad_b = -diff;
}

double mean_squared_risk(const Vector& predictions, const Vector& labels) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("mean_squared_risk: length mismatch");
  return (predictions - labels).squaredNorm() / static_cast<double>(labels.size());
}

double binary_cross_entropy_risk(const Vector& logits, const Vector& labels) {
  if (logits.size() != labels.size())
    throw std::invalid_argument("binary_cross_entropy_risk: length mismatch");
  // log(1 + exp(x)) computed stably.
  auto softplus = [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); };
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    total += softplus(logits(i)) - labels(i) * logits(i);
  return total / static_cast<double>(logits.size());
}

double risk_variance(const Vector& risks) {
  if (risks.size() < 2) throw std::invalid_argument("risk_variance: need K >= 2 environments");
  const double mean = risks.mean();
  return (risks.array() - mean).square().sum() / static_cast<double>(risks.size());
}

double pairwise_risk_gap(const Vector& risks) {
  const double k = static_cast<double>(risks.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < risks.size(); ++i)
    for (Eigen::Index j = 0; j < risks.size(); ++j) {
      const double d = risks(i) - risks(j);
      total += d * d;
    }
  return total / (k * k);
}

}  // namespace crlab
