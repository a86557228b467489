#include "crlab/mixing.hpp"

#include <cmath>
#include <stdexcept>

#include "crlab/random.hpp"

namespace crlab {

namespace {

double condition_number(const Matrix& w) {
  Eigen::JacobiSVD<Matrix> svd(w);
  const auto& s = svd.singularValues();
  return s(0) / s(s.size() - 1);
}

}  // namespace

MixingNet::MixingNet(std::vector<Matrix> weights, std::vector<Vector> biases, double slope)
    : weights_(std::move(weights)), biases_(std::move(biases)), slope_(slope) {
  if (weights_.empty() || weights_.size() != biases_.size())
    throw std::invalid_argument("MixingNet: need matching, non-empty weight/bias lists");
  if (!(slope_ > 0.0 && slope_ < 1.0))
    throw std::invalid_argument("MixingNet: slope must lie in (0, 1)");
  const int n = static_cast<int>(weights_.front().rows());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l].rows() != n || weights_[l].cols() != n || biases_[l].size() != n)
      throw std::invalid_argument("MixingNet: layers must be square and uniform");
    if (condition_number(weights_[l]) > 25.0)
      throw std::invalid_argument("MixingNet: layer condition number exceeds 25");
    inverses_.emplace_back(weights_[l]);
  }
}

MixingNet random_mixing(int dim, int n_layers, std::uint64_t seed, double slope) {
  if (n_layers < 1) throw std::invalid_argument("random_mixing: n_layers must be >= 1");
  CounterRng rng(seed);
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  for (int l = 0; l < n_layers; ++l) {
    Matrix g(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) g(i, j) = rng.normal();
    Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
    Vector scales(dim);
    for (int j = 0; j < dim; ++j) scales(j) = std::exp2(rng.uniform(-1.0, 1.0));
    weights.push_back(q * scales.asDiagonal());  // condition number <= 4
    Vector b(dim);
    for (int i = 0; i < dim; ++i) b(i) = rng.uniform(-0.5, 0.5);
    biases.push_back(std::move(b));
  }
  return {std::move(weights), std::move(biases), slope};
}

ObservationBatch mix(const MixingNet& net, const LatentBatch& z) {
  if (z.values.cols() != net.dim()) throw std::invalid_argument("mix: width mismatch");
  if (!z.values.allFinite()) throw std::invalid_argument("mix: non-finite input");
  Matrix h = z.values;
  for (int l = 0; l < net.n_layers(); ++l) {
    h = (h * net.weights()[l].transpose()).rowwise() + net.biases()[l].transpose();
    if (l + 1 < net.n_layers())
      h = h.array().max(0.0) + net.slope() * h.array().min(0.0);
  }
  return {std::move(h), z.env_id};
}

LatentBatch unmix(const MixingNet& net, const ObservationBatch& x) {
  if (x.values.cols() != net.dim()) throw std::invalid_argument("unmix: width mismatch");
  if (!x.values.allFinite()) throw std::invalid_argument("unmix: non-finite input");
  Matrix h = x.values;
  for (int l = net.n_layers() - 1; l >= 0; --l) {
    if (l + 1 < net.n_layers())
      h = h.array().max(0.0) + h.array().min(0.0) / net.slope();
    h.rowwise() -= net.biases()[l].transpose();
    h = net.inverses_[l].solve(h.transpose()).transpose();
  }
  return {std::move(h), x.env_id};
}

}  // namespace crlab
