#include <doctest.h>

#include <Eigen/SVD>
#include <kbsnmf/init.hpp>
#include <kbsnmf/rng.hpp>

#include <cmath>

using kbsnmf::Index;
using kbsnmf::Matrix;
using kbsnmf::Vector;

namespace {

Matrix<double> random_nonnegative(Index rows, Index cols, kbsnmf::Rng& rng) {
  Matrix<double> m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(0.0, 1.0);
  }
  return m;
}

double best_rank_r_error(const Matrix<double>& x, Index rank) {
  Eigen::BDCSVD<Matrix<double>> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Matrix<double> truncated = Matrix<double>::Zero(x.rows(), x.cols());
  for (Index k = 0; k < rank; ++k) {
    truncated += svd.singularValues()(k) * svd.matrixU().col(k) *
                 svd.matrixV().col(k).transpose();
  }
  return (x - truncated).norm();
}

}  // namespace

TEST_CASE("nndsvd recovers a rank-1 factorization") {
  Vector<double> a(6), b(9);
  a << 0.9, 0.4, 0.7, 0.2, 0.55, 0.31;
  b << 0.3, 0.8, 0.45, 0.9, 0.12, 0.6, 0.77, 0.25, 0.5;
  const Matrix<double> x = a * b.transpose();

  const auto [a0, s0] = kbsnmf::nndsvd(x, 1);
  CHECK((x - a0 * s0).norm() < 1e-10 * x.norm());
  // Column proportional to a: unit cross-correlation.
  const double cosine = a0.col(0).dot(a) / (a0.col(0).norm() * a.norm());
  CHECK(cosine == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("nndsvd output is nonnegative and strictly positive after fill") {
  kbsnmf::Rng rng(211);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix<double> x = random_nonnegative(12, 20, rng);
    const auto [a0, s0] = kbsnmf::nndsvd(x, 4);
    CHECK(a0.minCoeff() > 0.0);
    CHECK(s0.minCoeff() > 0.0);
  }
}

TEST_CASE("nndsvd is deterministic") {
  kbsnmf::Rng rng(223);
  const Matrix<double> x = random_nonnegative(15, 11, rng);
  const auto [a0, s0] = kbsnmf::nndsvd(x, 3);
  const auto [a1, s1] = kbsnmf::nndsvd(x, 3);
  CHECK(a0 == a1);
  CHECK(s0 == s1);
}

TEST_CASE("nndsvd fill policies") {
  kbsnmf::Rng rng(227);
  const Matrix<double> x = random_nonnegative(10, 8, rng);

  const auto [az, sz] = kbsnmf::nndsvd(x, 3, kbsnmf::NndsvdFill::zeros);
  CHECK(az.minCoeff() == 0.0);  // sections leave exact zeros behind

  const auto [am, sm] = kbsnmf::nndsvd(x, 3, kbsnmf::NndsvdFill::mean_div_100);
  CHECK(am.minCoeff() > 0.0);
  const double ceiling = x.mean() / 100.0;
  for (Index j = 0; j < 3; ++j) {
    for (Index i = 0; i < 10; ++i) {
      if (az(i, j) == 0.0) CHECK(am(i, j) == ceiling);
    }
  }

  const auto [ar, sr] = kbsnmf::nndsvd(x, 3, kbsnmf::NndsvdFill::random_small, 5);
  CHECK(ar.minCoeff() > 0.0);
  for (Index j = 0; j < 3; ++j) {
    for (Index i = 0; i < 10; ++i) {
      if (az(i, j) == 0.0) CHECK(ar(i, j) <= ceiling);
    }
  }
}

TEST_CASE("nndsvd reconstruction satisfies the sanity bound") {
  kbsnmf::Rng rng(229);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 6 + Index(rng.uniform(0.0, 10.0));
    const Index m = 6 + Index(rng.uniform(0.0, 10.0));
    const Index r = 1 + Index(rng.uniform(0.0, 3.0));
    const Matrix<double> x = random_nonnegative(n, m, rng);
    const auto [a0, s0] = kbsnmf::nndsvd(x, r);
    CHECK((x - a0 * s0).norm() <= best_rank_r_error(x, r) + x.norm() + 1e-12);
  }
}

TEST_CASE("nndsvd rejects out-of-range ranks and negative data") {
  kbsnmf::Rng rng(233);
  const Matrix<double> x = random_nonnegative(5, 7, rng);
  CHECK_THROWS_AS(kbsnmf::nndsvd(x, 0), kbsnmf::RankTooLarge);
  CHECK_THROWS_AS(kbsnmf::nndsvd(x, 6), kbsnmf::RankTooLarge);
  Matrix<double> bad = x;
  bad(0, 0) = -0.5;
  CHECK_THROWS_AS(kbsnmf::nndsvd(bad, 2), kbsnmf::DomainError);
}

TEST_CASE("random_init contract") {
  const auto [a0, s0] = kbsnmf::random_init<double>(7, 9, 3, 42);
  const auto [a1, s1] = kbsnmf::random_init<double>(7, 9, 3, 42);
  const auto [a2, s2] = kbsnmf::random_init<double>(7, 9, 3, 43);

  CHECK(a0 == a1);
  CHECK(s0 == s1);
  CHECK(a0 != a2);

  CHECK(a0.minCoeff() > 0.1);
  CHECK(a0.maxCoeff() < 1.0);
  CHECK(s0.minCoeff() > 0.1);
  CHECK(s0.maxCoeff() < 1.0);
}
