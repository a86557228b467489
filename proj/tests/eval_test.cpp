#include "crlab/eval.hpp"

#include <cmath>

#include <doctest.h>

#include "crlab/random.hpp"
#include "testing_oracles.hpp"

using namespace crlab;

namespace {

Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
  CounterRng rng(seed);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("krr predicts a duplicated target almost perfectly") {
  const Matrix z = random_matrix(600, 1, 1);
  Matrix features(600, 2);
  features << z, z;
  CHECK(krr_r2(features, z.col(0)) >= 0.999);
}

TEST_CASE("krr stays near zero against independent noise") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Matrix features = random_matrix(2000, 3, seed);
    const Matrix target = random_matrix(2000, 1, seed + 100);
    CHECK(krr_r2(features, target.col(0)) <= 0.05);
  }
}

TEST_CASE("krr inverts a nonlinear monotone feature") {
  const Matrix z = random_matrix(2000, 1, 9);
  const Matrix feature = z.array().tanh();
  CHECK(krr_r2(feature, z.col(0)) >= 0.99);
}

TEST_CASE("krr rejects zero-variance targets and tiny inputs") {
  const Matrix features = random_matrix(200, 2, 3);
  CHECK_THROWS_AS(krr_r2(features, Vector::Constant(200, 1.0)), std::invalid_argument);
  CHECK_THROWS_AS(krr_r2(random_matrix(50, 2, 4), random_matrix(50, 1, 5).col(0)),
                  std::invalid_argument);
}

TEST_CASE("krr is stable under invertible affine feature transforms") {
  const Matrix z = random_matrix(1500, 2, 21);
  const Vector target = (z.col(0).array() * z.col(1).array()).matrix();
  const double base = krr_r2(z, target);
  CounterRng rng(22);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix transform(2, 2);
    do {
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) transform(i, j) = rng.normal();
    } while (std::abs(transform.determinant()) < 0.3);
    Matrix shifted = z * transform.transpose();
    shifted.col(0).array() += rng.uniform(-2.0, 2.0);
    CHECK(std::abs(krr_r2(shifted, target) - base) <= 0.02);
  }
}

TEST_CASE("affine fit recovers exact affine images") {
  const Matrix z = random_matrix(800, 3, 31);
  Matrix z_hat = 2.0 * z;
  z_hat.array() += 1.0;
  const AffineFitResult fit = affine_fit_r2(z_hat, z);
  CHECK(!fit.rank_deficient);
  for (int j = 0; j < 3; ++j) CHECK(fit.r2(j) >= 1.0 - 1e-10);
}

TEST_CASE("affine fit penalizes a nonlinear relation relative to krr") {
  const Matrix z = random_matrix(2000, 1, 32);
  const Matrix z_hat = z.array().cube();
  const double affine = affine_fit_r2(z_hat, z).r2(0);
  const double kernel = krr_r2(z_hat, z.col(0));
  CHECK(affine < kernel);
  CHECK(kernel >= 0.99);
}

TEST_CASE("affine fit stays near zero on noise and flags rank deficiency") {
  const Matrix z = random_matrix(2000, 3, 33);
  const Matrix noise = random_matrix(2000, 3, 34);
  const AffineFitResult fit = affine_fit_r2(noise, z);
  for (int j = 0; j < 3; ++j) CHECK(fit.r2(j) <= 0.05);

  Matrix degenerate(2000, 3);
  degenerate << noise.col(0), noise.col(0), noise.col(0);
  const AffineFitResult flagged = affine_fit_r2(degenerate, z);
  CHECK(flagged.rank_deficient);
}

TEST_CASE("matched correlation recovers a permutation exactly") {
  const Matrix z = random_matrix(500, 3, 41);
  Matrix z_hat(500, 3);
  z_hat << z.col(2), z.col(0), z.col(1);
  const MatchedCorrelation mc = matched_correlation(z_hat, z);
  CHECK(mc.mean_abs_rho == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mc.assignment == std::vector<int>{1, 2, 0});
}

TEST_CASE("matched correlation is exactly invariant to monotone transforms") {
  const Matrix z = random_matrix(400, 3, 42);
  Matrix z_hat(400, 3);
  z_hat.col(0) = z.col(1).array().cube();
  z_hat.col(1) = z.col(2).array().exp();
  z_hat.col(2) = 3.0 * z.col(0).array() - 7.0;
  const MatchedCorrelation mc = matched_correlation(z_hat, z);
  CHECK(std::abs(mc.mean_abs_rho - 1.0) < 1e-12);
}

TEST_CASE("a 45 degree rotation caps matched correlation near 0.707") {
  // For isotropic Gaussian z, corr(z1 cos a + z2 sin a, z1) = cos a.
  const Matrix z = random_matrix(20000, 2, 43);
  const double angle = M_PI / 4.0;
  Matrix rot(2, 2);
  rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  const Matrix z_hat = z * rot.transpose();
  const MatchedCorrelation mc = matched_correlation(z_hat, z);
  CHECK(mc.mean_abs_rho == doctest::Approx(std::cos(angle)).epsilon(0.05));
  CHECK(mc.mean_abs_rho < 0.95);
}

TEST_CASE("constant columns correlate zero") {
  Matrix z = random_matrix(100, 2, 44);
  Matrix z_hat = z;
  z_hat.col(0).setConstant(3.0);
  const MatchedCorrelation mc = matched_correlation(z_hat, z);
  CHECK(mc.spearman(0, 0) == 0.0);
  CHECK(mc.spearman(0, 1) == 0.0);
}

TEST_CASE("granularity ladder flags") {
  const Matrix z = random_matrix(1200, 3, 51);

  IdentifiabilityReport affine_case;
  affine_case.meta.scenario = "test";
  Matrix z_hat = 2.0 * z;
  z_hat.array() += 1.0;
  affine_case.affine_r2 = affine_fit_r2(z_hat, z).r2;
  affine_case.element = matched_correlation(z_hat, z);
  affine_case.block_r2.resize(3);
  for (int j = 0; j < 3; ++j) affine_case.block_r2(j) = krr_r2(z_hat, z.col(j));
  ConsistencyFlags flags = granularity_consistency(affine_case);
  CHECK(flags.affine_premise);
  CHECK(!flags.violated);

  // Elementwise nonlinear map: affine premise fails, ladder is vacuous.
  IdentifiabilityReport nonlinear_case = affine_case;
  const Matrix cubed = z.array().cube();
  nonlinear_case.affine_r2 = affine_fit_r2(cubed, z).r2;
  nonlinear_case.element = matched_correlation(cubed, z);
  flags = granularity_consistency(nonlinear_case);
  CHECK(!flags.affine_premise);
  CHECK(!flags.violated);

  // Pure noise: all metrics low, vacuously consistent.
  IdentifiabilityReport noise_case = affine_case;
  const Matrix noise = random_matrix(1200, 3, 52);
  noise_case.affine_r2 = affine_fit_r2(noise, z).r2;
  noise_case.element = matched_correlation(noise, z);
  for (int j = 0; j < 3; ++j) noise_case.block_r2(j) = krr_r2(noise, z.col(j));
  flags = granularity_consistency(noise_case);
  CHECK(!flags.affine_premise);
  CHECK(!flags.violated);
}

TEST_CASE("reports round-trip through json") {
  IdentifiabilityReport report;
  report.meta.scenario = "nintervention";
  report.meta.seed = 42;
  report.meta.n_samples = 8000;
  report.block_r2 = Vector(3);
  report.block_r2 << 0.9, 0.1, 0.85;
  report.affine_r2 = Vector(3);
  report.affine_r2 << 0.5, 0.2, 0.6;
  report.element.spearman = Matrix::Identity(3, 3);
  report.element.assignment = {0, 1, 2};
  report.element.mean_abs_rho = 1.0;

  const IdentifiabilityReport back = report_from_json(report_to_json(report));
  CHECK(back.meta.scenario == report.meta.scenario);
  CHECK(back.meta.seed == report.meta.seed);
  CHECK((back.block_r2 - report.block_r2).norm() == 0.0);
  CHECK((back.affine_r2 - report.affine_r2).norm() == 0.0);
  CHECK(back.element.mean_abs_rho == 1.0);
  CHECK(back.element.assignment == report.element.assignment);
}
