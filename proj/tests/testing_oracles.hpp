// Test-only oracles: brute-force and finite-difference references kept
// independent of the library's computation paths.
#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "crlab/nn.hpp"
#include "crlab/random.hpp"
#include "crlab/scm.hpp"
#include "crlab/types.hpp"

namespace crlab::testing {

// Every DAG on n labeled nodes (all acyclic subsets of the n(n-1) arcs).
inline std::vector<Dag> enumerate_dags(int n) {
  std::vector<std::pair<int, int>> arcs;
  for (int p = 0; p < n; ++p)
    for (int c = 0; c < n; ++c)
      if (p != c) arcs.emplace_back(p, c);
  std::vector<Dag> dags;
  const std::uint64_t subsets = 1ull << arcs.size();
  for (std::uint64_t bits = 0; bits < subsets; ++bits) {
    std::vector<std::pair<int, int>> edges;
    for (std::size_t a = 0; a < arcs.size(); ++a)
      if (bits & (1ull << a)) edges.push_back(arcs[a]);
    try {
      dags.emplace_back(n, std::move(edges));
    } catch (const std::invalid_argument&) {
      // cyclic subset
    }
  }
  return dags;
}

// Generic parameters bounded away from zero so invariance violations are
// detectable at tight tolerances.
inline LinearGaussianScm random_scm(const Dag& dag, std::uint64_t seed) {
  CounterRng rng(seed);
  const int n = dag.n_nodes();
  Matrix weights = Matrix::Zero(n, n);
  for (auto [p, c] : dag.edges()) weights(c, p) = rng.uniform(0.8, 1.2);
  Vector intercepts(n), noise_std(n);
  for (int i = 0; i < n; ++i) {
    intercepts(i) = rng.uniform(-1.0, 1.0);
    noise_std(i) = rng.uniform(0.7, 1.3);
  }
  return {dag, std::move(weights), std::move(intercepts), std::move(noise_std)};
}

// O(n^2 m d) reference MMD, plain loops.
inline double brute_force_mmd(const Matrix& x, const Matrix& y, const std::vector<double>& bws) {
  auto kernel = [](const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b, double s) {
    return std::exp(-(a - b).squaredNorm() / (2.0 * s * s));
  };
  double total = 0.0;
  for (double s : bws) {
    double kxx = 0.0, kyy = 0.0, kxy = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.rows(); ++j) kxx += kernel(x.row(i), x.row(j), s);
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      for (Eigen::Index j = 0; j < y.rows(); ++j) kyy += kernel(y.row(i), y.row(j), s);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < y.rows(); ++j) kxy += kernel(x.row(i), y.row(j), s);
    total += kxx / (x.rows() * x.rows()) + kyy / (y.rows() * y.rows()) -
             2.0 * kxy / (x.rows() * y.rows());
  }
  return total;
}

// Central finite difference of a scalar function with respect to one matrix.
inline Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, Matrix at,
                               double h = 1e-5) {
  Matrix grad(at.rows(), at.cols());
  for (Eigen::Index i = 0; i < at.rows(); ++i)
    for (Eigen::Index j = 0; j < at.cols(); ++j) {
      const double saved = at(i, j);
      at(i, j) = saved + h;
      const double up = f(at);
      at(i, j) = saved - h;
      const double down = f(at);
      at(i, j) = saved;
      grad(i, j) = (up - down) / (2.0 * h);
    }
  return grad;
}

// Central finite difference with respect to every network parameter.
inline Gradients numeric_mlp_gradient(Mlp& mlp, const std::function<double()>& loss,
                                      double h = 1e-6) {
  Gradients grad = Gradients::zeros_like(mlp);
  for (int l = 0; l < mlp.n_layers(); ++l) {
    for (Eigen::Index i = 0; i < mlp.weights()[l].rows(); ++i)
      for (Eigen::Index j = 0; j < mlp.weights()[l].cols(); ++j) {
        double& w = mlp.weights()[l](i, j);
        const double saved = w;
        w = saved + h;
        const double up = loss();
        w = saved - h;
        const double down = loss();
        w = saved;
        grad.weights[l](i, j) = (up - down) / (2.0 * h);
      }
    for (Eigen::Index i = 0; i < mlp.biases()[l].size(); ++i) {
      double& b = mlp.biases()[l](i);
      const double saved = b;
      b = saved + h;
      const double up = loss();
      b = saved - h;
      const double down = loss();
      b = saved;
      grad.biases[l](i) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

inline double max_relative_error(const Gradients& got, const Gradients& want,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t l = 0; l < got.weights.size(); ++l) {
    worst = std::max(worst, ((got.weights[l] - want.weights[l]).array().abs() /
                             (want.weights[l].array().abs() + floor))
                                .maxCoeff());
    worst = std::max(worst, ((got.biases[l] - want.biases[l]).array().abs() /
                             (want.biases[l].array().abs() + floor))
                                .maxCoeff());
  }
  return worst;
}

struct SampleStats {
  Vector mean;
  Vector variance;
};

inline SampleStats column_stats(const Matrix& values) {
  SampleStats stats;
  stats.mean = values.colwise().mean();
  stats.variance =
      (values.rowwise() - stats.mean.transpose()).array().square().colwise().sum() /
      (values.rows() - 1);
  return stats;
}

}  // namespace crlab::testing
