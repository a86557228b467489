#include "crlab/mixing.hpp"

#include <cmath>

#include <doctest.h>

#include "crlab/random.hpp"
#include "testing_oracles.hpp"

using namespace crlab;

namespace {

LatentBatch random_batch(int n, int dim, std::uint64_t seed) {
  CounterRng rng(seed);
  Matrix values(n, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) values(i, j) = rng.normal();
  return {std::move(values), 0};
}

MixingNet identity_net(int dim, int n_layers) {
  std::vector<Matrix> w(n_layers, Matrix::Identity(dim, dim));
  std::vector<Vector> b(n_layers, Vector::Zero(dim));
  return {std::move(w), std::move(b), 0.2};
}

}  // namespace

TEST_CASE("seed-7 three-layer net round-trips below 1e-8") {
  const MixingNet net = random_mixing(3, 3, 7);
  const LatentBatch z = random_batch(500, 3, 11);
  const LatentBatch back = unmix(net, mix(net, z));
  CHECK((back.values - z.values).array().abs().maxCoeff() < 1e-8);
}

TEST_CASE("single identity layer is the identity map") {
  const MixingNet net = identity_net(3, 1);
  const LatentBatch z = random_batch(50, 3, 1);
  CHECK((mix(net, z).values - z.values).norm() == 0.0);
  CHECK((unmix(net, {z.values, 0}).values - z.values).norm() == 0.0);
}

TEST_CASE("single linear layer doubles the input") {
  std::vector<Matrix> w{2.0 * Matrix::Identity(2, 2)};
  std::vector<Vector> b{Vector::Zero(2)};
  const MixingNet net{std::move(w), std::move(b), 0.2};
  const LatentBatch z = random_batch(20, 2, 3);
  CHECK((mix(net, z).values - 2.0 * z.values).norm() < 1e-14);
}

TEST_CASE("random mixing is deterministic in the seed") {
  const MixingNet a = random_mixing(4, 3, 21);
  const MixingNet b = random_mixing(4, 3, 21);
  for (int l = 0; l < a.n_layers(); ++l) {
    CHECK((a.weights()[l].array() == b.weights()[l].array()).all());
    CHECK((a.biases()[l].array() == b.biases()[l].array()).all());
  }
}

TEST_CASE("negative values survive the activation round trip exactly") {
  // Two identity layers sandwich one activation; -1 maps to -0.2 and back.
  const MixingNet net = identity_net(1, 2);
  LatentBatch z{Matrix::Constant(1, 1, -1.0), 0};
  const ObservationBatch x = mix(net, z);
  CHECK(x.values(0, 0) == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(unmix(net, x).values(0, 0) == -1.0);
}

TEST_CASE("round trip stays below 1e-6 over twenty random nets") {
  CounterRng seeder(40);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 2 + static_cast<int>(seeder.uniform01() * 7);  // up to 8
    const int layers = 1 + static_cast<int>(seeder.uniform01() * 3);
    const MixingNet net = random_mixing(dim, layers, seeder.next_u64());
    const LatentBatch z = random_batch(1000, dim, seeder.next_u64());
    const LatentBatch back = unmix(net, mix(net, z));
    CHECK((back.values - z.values).array().abs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("mixing is injective on sampled batches") {
  const MixingNet net = random_mixing(3, 3, 17);
  const LatentBatch z = random_batch(200, 3, 18);
  const ObservationBatch x = mix(net, z);
  for (int i = 0; i < 200; ++i)
    for (int j = i + 1; j < 200; ++j)
      if ((z.values.row(i) - z.values.row(j)).norm() > 1e-6)
        CHECK((x.values.row(i) - x.values.row(j)).norm() > 1e-9);
}

TEST_CASE("finite-difference jacobians are nonsingular") {
  CounterRng seeder(60);
  const double h = 1e-6;
  for (int trial = 0; trial < 5; ++trial) {
    const int dim = 3;
    const MixingNet net = random_mixing(dim, 3, seeder.next_u64());
    for (int point = 0; point < 10; ++point) {
      Vector z0(dim);
      for (int j = 0; j < dim; ++j) z0(j) = 2.0 * seeder.normal();
      Matrix jac(dim, dim);
      for (int j = 0; j < dim; ++j) {
        Matrix up = z0.transpose(), down = z0.transpose();
        up(0, j) += h;
        down(0, j) -= h;
        jac.col(j) =
            (mix(net, {up, 0}).values - mix(net, {down, 0}).values).transpose() / (2.0 * h);
      }
      Eigen::JacobiSVD<Matrix> svd(jac);
      CHECK(svd.singularValues().minCoeff() > 1e-6);
    }
  }
}

TEST_CASE("construction rejects ill-conditioned layers and bad slopes") {
  Matrix bad(2, 2);
  bad << 1.0, 0.0, 0.0, 1e-4;  // condition number 1e4
  CHECK_THROWS_AS(MixingNet({bad}, {Vector::Zero(2)}, 0.2), std::invalid_argument);
  Matrix ok = Matrix::Identity(2, 2);
  CHECK_THROWS_AS(MixingNet({ok}, {Vector::Zero(2)}, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(MixingNet({ok}, {Vector::Zero(2)}, 0.0), std::invalid_argument);
}

TEST_CASE("mix rejects non-finite input") {
  const MixingNet net = random_mixing(2, 2, 5);
  Matrix bad = Matrix::Zero(1, 2);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(mix(net, {bad, 0}), std::invalid_argument);
}
