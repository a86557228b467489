#include "crlab/losses.hpp"

#include <cmath>

#include <doctest.h>

#include "crlab/random.hpp"
#include "testing_oracles.hpp"

using namespace crlab;

namespace {

Matrix random_matrix(int rows, int cols, std::uint64_t seed, double shift = 0.0) {
  CounterRng rng(seed);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal() + shift;
  return m;
}

IntVector mask_of(std::initializer_list<int> bits) {
  IntVector mask(static_cast<int>(bits.size()));
  int i = 0;
  for (int b : bits) mask(i++) = b;
  return mask;
}

}  // namespace

TEST_CASE("select keeps masked positions in order") {
  Vector v(3);
  v << 1.0, 2.0, 3.0;
  const Vector picked = select(mask_of({1, 0, 1}), v);
  CHECK(picked.size() == 2);
  CHECK(picked(0) == 1.0);
  CHECK(picked(1) == 3.0);
  CHECK(select(mask_of({1, 1, 1}), v).size() == 3);
  CHECK(select(mask_of({0, 0, 0}), v).size() == 0);
  CHECK_THROWS_AS(select(mask_of({1, 0}), v), std::invalid_argument);
}

TEST_CASE("complementary selections partition the vector") {
  CounterRng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform01() * 6);
    IntVector mask(n);
    Vector v(n);
    for (int i = 0; i < n; ++i) {
      mask(i) = rng.uniform01() < 0.5 ? 1 : 0;
      v(i) = rng.normal();
    }
    const IntVector inverse = IntVector::Ones(n) - mask;
    const Vector a = select(mask, v);
    const Vector b = select(inverse, v);
    CHECK(a.size() + b.size() == n);
    double sum = a.sum() + b.sum();
    CHECK(sum == doctest::Approx(v.sum()).epsilon(1e-12));
  }
}

TEST_CASE("mse reconstruction basics") {
  const Matrix x = random_matrix(10, 4, 5);
  CHECK(mse_reconstruction(x, x) == 0.0);
  const Matrix shifted = x.array() + 1.0;
  CHECK(mse_reconstruction(shifted, x) == doctest::Approx(4.0).epsilon(1e-12));

  const Matrix y = random_matrix(10, 4, 6);
  double by_hand = 0.0;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 4; ++j) by_hand += (x(i, j) - y(i, j)) * (x(i, j) - y(i, j));
  by_hand /= 10.0;
  CHECK(mse_reconstruction(x, y) == doctest::Approx(by_hand).epsilon(1e-12));
}

TEST_CASE("mmd of a set against itself is exactly zero") {
  const Matrix x = random_matrix(40, 3, 7);
  CHECK(mmd_rbf(x, x, {0.7, 1.0, 2.5}) == 0.0);
}

TEST_CASE("mmd is symmetric") {
  const Matrix x = random_matrix(30, 2, 8);
  const Matrix y = random_matrix(25, 2, 9, 1.5);
  const std::vector<double> bws{0.5, 1.0};
  CHECK(std::abs(mmd_rbf(x, y, bws) - mmd_rbf(y, x, bws)) < 1e-12);
}

TEST_CASE("mmd hand computation on two-point sets") {
  Matrix x(2, 1), y(2, 1);
  x << 0.0, 0.0;
  y << 0.0, 1.0;
  // kxx: four ones. kyy: 2 + 2 e^{-1/2}. kxy: 2 + 2 e^{-1/2}.
  // mmd = 1 + (2 + 2 e^{-1/2})/4 - 2 (2 + 2 e^{-1/2})/4 = 1/2 - e^{-1/2}/2.
  const double expected = 0.5 - 0.5 * std::exp(-0.5);
  CHECK(mmd_rbf(x, y, {1.0}) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("mmd matches the brute-force double loop") {
  const Matrix x = random_matrix(25, 3, 10);
  const Matrix y = random_matrix(30, 3, 11, 0.5);
  const std::vector<double> bws{0.5, 1.0, 2.0};
  CHECK(mmd_rbf(x, y, bws) ==
        doctest::Approx(testing::brute_force_mmd(x, y, bws)).epsilon(1e-10));
}

TEST_CASE("mmd separates well-separated gaussians") {
  CounterRng seeder(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix x = random_matrix(500, 1, seeder.next_u64());
    const Matrix y = random_matrix(500, 1, seeder.next_u64(), 3.0);
    const double bw = median_heuristic_bandwidth(x, y);
    CHECK(mmd_rbf(x, y, {bw}) > 0.5);
  }
}

TEST_CASE("mmd gradients match finite differences") {
  const Matrix x = random_matrix(12, 2, 13);
  const Matrix y = random_matrix(10, 2, 14, 0.8);
  const std::vector<double> bws{0.8, 1.6};
  Matrix gx, gy;
  mmd_rbf_with_grad(x, y, bws, &gx, &gy);

  const Matrix fd_x = testing::numeric_gradient(
      [&](const Matrix& m) { return mmd_rbf(m, y, bws); }, x);
  const Matrix fd_y = testing::numeric_gradient(
      [&](const Matrix& m) { return mmd_rbf(x, m, bws); }, y);
  CHECK(((gx - fd_x).array().abs() / (fd_x.array().abs() + 1e-6)).maxCoeff() < 1e-4);
  CHECK(((gy - fd_y).array().abs() / (fd_y.array().abs() + 1e-6)).maxCoeff() < 1e-4);
}

TEST_CASE("mmd rejects degenerate inputs") {
  const Matrix x = random_matrix(5, 2, 1);
  CHECK_THROWS_AS(mmd_rbf(x, random_matrix(1, 2, 2), {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(mmd_rbf(x, random_matrix(5, 3, 2), {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(mmd_rbf(x, x, {}), std::invalid_argument);
}

TEST_CASE("l2 alignment basics and gradient") {
  const Matrix a = random_matrix(15, 3, 20);
  CHECK(l2_alignment(a, a) == 0.0);
  Matrix b = a;
  b.col(0).array() += 1.0;
  CHECK(l2_alignment(a, b) == doctest::Approx(1.0).epsilon(1e-12));

  const Matrix c = random_matrix(15, 3, 21);
  double by_hand = 0.0;
  for (int i = 0; i < 15; ++i) by_hand += (a.row(i) - c.row(i)).squaredNorm();
  CHECK(l2_alignment(a, c) == doctest::Approx(by_hand / 15.0).epsilon(1e-12));

  Matrix ga, gb;
  l2_alignment_grad(a, c, &ga, &gb);
  const Matrix fd = testing::numeric_gradient(
      [&](const Matrix& m) { return l2_alignment(m, c); }, a);
  CHECK(((ga - fd).array().abs() / (fd.array().abs() + 1e-6)).maxCoeff() < 1e-4);
  CHECK((ga + gb).norm() < 1e-12);
}

TEST_CASE("risk variance of (1,2,3) is 2/3") {
  Vector risks(3);
  risks << 1.0, 2.0, 3.0;
  CHECK(risk_variance(risks) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(risk_variance(Vector::Constant(4, 2.5)) == 0.0);
  CHECK_THROWS_AS(risk_variance(Vector::Constant(1, 1.0)), std::invalid_argument);
}

TEST_CASE("pairwise risk gap of (1,2,3) is 4/3") {
  Vector risks(3);
  risks << 1.0, 2.0, 3.0;
  CHECK(pairwise_risk_gap(risks) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(pairwise_risk_gap(Vector::Constant(5, 7.0)) == 0.0);
}

TEST_CASE("variance equals half the pairwise gap") {
  CounterRng rng(30);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform01() * 8);
    Vector risks(k);
    for (int i = 0; i < k; ++i) risks(i) = 10.0 * rng.uniform01();
    CHECK(std::abs(risk_variance(risks) - 0.5 * pairwise_risk_gap(risks)) < 1e-12);
  }
}

TEST_CASE("risk heads") {
  Vector pred(3), labels(3);
  pred << 1.0, 2.0, 3.0;
  labels << 1.0, 1.0, 1.0;
  CHECK(mean_squared_risk(pred, labels) == doctest::Approx(5.0 / 3.0));

  Vector logits(2), y(2);
  logits << 0.0, 0.0;
  y << 0.0, 1.0;
  CHECK(binary_cross_entropy_risk(logits, y) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("invariance spec validation") {
  InvarianceSpec spec;
  spec.env_group = {0};
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.env_group = {0, 1};
  spec.weight = -1.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.weight = 2.0;
  CHECK_NOTHROW(spec.validate());
}
