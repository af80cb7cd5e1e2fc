#include <doctest.h>

#include <kbsnmf/kurtosis.hpp>
#include <kbsnmf/rng.hpp>

#include <cmath>
#include <vector>

using kbsnmf::Index;
using kbsnmf::Matrix;
using kbsnmf::Vector;

namespace {

double fourth_central_moment(const Vector<double>& v) {
  const double mean = v.mean();
  double acc = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    acc += std::pow(v(i) - mean, 4);
  }
  return acc / double(v.size());
}

double second_central_moment(const Vector<double>& v) {
  const double mean = v.mean();
  double acc = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    acc += std::pow(v(i) - mean, 2);
  }
  return acc / double(v.size());
}

// Average of the fourth central moments across columns; this is the function
// whose analytic gradient the unit-variance formula computes.
double average_m4(const Matrix<double>& a) {
  double acc = 0.0;
  for (Index i = 0; i < a.cols(); ++i) {
    acc += fourth_central_moment(a.col(i));
  }
  return acc / double(a.cols());
}

double average_true_kurtosis(const Matrix<double>& a) {
  double acc = 0.0;
  for (Index i = 0; i < a.cols(); ++i) {
    const double m2 = second_central_moment(a.col(i));
    acc += fourth_central_moment(a.col(i)) / (m2 * m2);
  }
  return acc / double(a.cols());
}

template <typename Fn>
Matrix<double> central_differences(Matrix<double> a, Fn&& fn, double step) {
  Matrix<double> grad(a.rows(), a.cols());
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) {
      const double saved = a(i, j);
      a(i, j) = saved + step;
      const double up = fn(a);
      a(i, j) = saved - step;
      const double down = fn(a);
      a(i, j) = saved;
      grad(i, j) = (up - down) / (2.0 * step);
    }
  }
  return grad;
}

Matrix<double> random_unit_variance(Index rows, Index cols, kbsnmf::Rng& rng) {
  Matrix<double> a(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) a(i, j) = rng.normal();
    const double mean = a.col(j).mean();
    const double sd = std::sqrt((a.col(j).array() - mean).square().mean());
    a.col(j) = (a.col(j).array() - mean) / sd + 2.0;  // positive-ish, var 1
  }
  return a;
}

}  // namespace

TEST_CASE("kurtosis of [0,0,0,1] is 7/3") {
  Vector<double> v(4);
  v << 0, 0, 0, 1;
  // m2 = 0.1875, m4 = 0.08203125
  CHECK(second_central_moment(v) == doctest::Approx(0.1875).epsilon(1e-15));
  CHECK(fourth_central_moment(v) == doctest::Approx(0.08203125).epsilon(1e-15));
  CHECK(kbsnmf::kurtosis(v) == doctest::Approx(7.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("kurtosis rejects constant signals") {
  Vector<double> v = Vector<double>::Constant(6, 0.42);
  CHECK_THROWS_AS(kbsnmf::kurtosis(v), kbsnmf::DegenerateSignal);
  Vector<double> one(1);
  one << 1.0;
  CHECK_THROWS_AS(kbsnmf::kurtosis(one), kbsnmf::DegenerateSignal);
}

TEST_CASE("kurtosis of a large Gaussian sample is near 3") {
  kbsnmf::Rng rng(7);
  Vector<double> v(1000000);
  for (Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
  CHECK(kbsnmf::kurtosis(v) == doctest::Approx(3.0).epsilon(0.05 / 3.0));
}

TEST_CASE("average kurtosis across endmembers") {
  SUBCASE("identical columns average to the single-column value") {
    Vector<double> v(5);
    v << 0.1, 0.4, 0.2, 0.9, 0.3;
    Matrix<double> a(5, 3);
    a << v, v, v;
    const auto report = kbsnmf::average_kurtosis(a);
    CHECK(report.average == doctest::Approx(kbsnmf::kurtosis(v)).epsilon(1e-14));
  }
  SUBCASE("permutation of entries leaves moments unchanged") {
    Matrix<double> a(4, 2);
    a.col(0) << 0, 0, 0, 1;
    a.col(1) << 1, 0, 0, 0;
    const auto report = kbsnmf::average_kurtosis(a);
    CHECK(report.average == doctest::Approx(7.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("average_excess is definitionally average minus 3") {
    kbsnmf::Rng rng(3);
    const Matrix<double> a = random_unit_variance(6, 4, rng);
    const auto report = kbsnmf::average_kurtosis(a);
    CHECK(report.average_excess == report.average - 3.0);
    double mean = 0.0;
    for (double k : report.per_endmember) mean += k;
    mean /= double(report.per_endmember.size());
    CHECK(report.average == doctest::Approx(mean).epsilon(1e-15));
  }
  SUBCASE("degenerate column is identified") {
    Matrix<double> a(4, 2);
    a.col(0) << 0, 0, 0, 1;
    a.col(1).setConstant(0.5);
    CHECK_THROWS_WITH_AS(kbsnmf::average_kurtosis(a),
                         doctest::Contains("column 1"),
                         kbsnmf::DegenerateSignal);
  }
}

TEST_CASE("centering matrix properties") {
  SUBCASE("n = 1 annihilates a scalar") {
    const auto n1 = kbsnmf::centering_matrix<double>(1);
    CHECK(n1.rows() == 1);
    CHECK(n1(0, 0) == 0.0);
  }
  SUBCASE("constant vectors are annihilated") {
    const auto n = kbsnmf::centering_matrix<double>(7);
    const Vector<double> c = Vector<double>::Constant(7, 3.14);
    CHECK((n * c).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("idempotent") {
    const auto n = kbsnmf::centering_matrix<double>(9);
    CHECK(((n * n) - n).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("matches the direct column centering used internally") {
    kbsnmf::Rng rng(11);
    const Matrix<double> a = random_unit_variance(6, 3, rng);
    const auto n = kbsnmf::centering_matrix<double>(6);
    const Matrix<double> via_matrix = n * a;
    const Matrix<double> direct = kbsnmf::detail::center_columns(a);
    CHECK((via_matrix - direct).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("gradient of average kurtosis") {
  kbsnmf::Rng rng(17);

  SUBCASE("columns of the gradient sum to zero") {
    for (int trial = 0; trial < 20; ++trial) {
      Matrix<double> a(5, 3);
      for (Index j = 0; j < 3; ++j) {
        for (Index i = 0; i < 5; ++i) a(i, j) = rng.uniform(0.0, 2.0);
      }
      const auto grad = kbsnmf::grad_average_kurtosis(a);
      for (Index j = 0; j < 3; ++j) {
        CHECK(std::abs(grad.col(j).sum()) < 1e-10);
      }
    }
  }

  SUBCASE("symmetric column gives zero column sum") {
    Matrix<double> a(4, 2);
    a.col(0) << 1.0 - 0.3, 1.0 - 0.1, 1.0 + 0.1, 1.0 + 0.3;
    a.col(1) << 0.2, 0.5, 0.9, 1.4;
    const auto grad = kbsnmf::grad_average_kurtosis(a);
    CHECK(std::abs(grad.col(0).sum()) < 1e-12);
  }

  SUBCASE("matches central finite differences of the average fourth moment") {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Matrix<double> a = random_unit_variance(5, 3, rng);
      const auto analytic = kbsnmf::grad_average_kurtosis(a);
      const auto numeric = central_differences(
          a, [](const Matrix<double>& m) { return average_m4(m); }, 1e-5);
      const double scale = numeric.cwiseAbs().maxCoeff();
      const double err = (analytic - numeric).cwiseAbs().maxCoeff() / scale;
      worst = std::max(worst, err);
    }
    CHECK(worst < 1e-5);
  }

  SUBCASE("unit-variance assumption: formula deviates from true kurtosis "
          "gradient on scaled columns") {
    Matrix<double> a = random_unit_variance(5, 3, rng);
    a.col(1) *= 2.0;  // variance 4 breaks the premise
    const auto analytic = kbsnmf::grad_average_kurtosis(a);
    const auto numeric = central_differences(
        a, [](const Matrix<double>& m) { return average_true_kurtosis(m); },
        1e-5);
    const double scale = numeric.cwiseAbs().maxCoeff();
    const double err = (analytic - numeric).cwiseAbs().maxCoeff() / scale;
    CHECK(err > 1e-3);
  }

  SUBCASE("permutation equivariance") {
    const Matrix<double> a = random_unit_variance(6, 3, rng);
    Matrix<double> permuted(6, 3);
    permuted << a.col(2), a.col(0), a.col(1);
    const auto grad = kbsnmf::grad_average_kurtosis(a);
    const auto grad_permuted = kbsnmf::grad_average_kurtosis(permuted);
    CHECK((grad_permuted.col(0) - grad.col(2)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((grad_permuted.col(1) - grad.col(0)).cwiseAbs().maxCoeff() < 1e-14);
  }

  SUBCASE("translation invariance") {
    const Matrix<double> a = random_unit_variance(6, 3, rng);
    Matrix<double> shifted = a;
    shifted.col(1).array() += 5.0;
    const auto report_a = kbsnmf::average_kurtosis(a);
    const auto report_b = kbsnmf::average_kurtosis(shifted);
    CHECK(std::abs(report_a.average - report_b.average) < 1e-10);
    const auto grad_a = kbsnmf::grad_average_kurtosis(a);
    const auto grad_b = kbsnmf::grad_average_kurtosis(shifted);
    CHECK((grad_a - grad_b).cwiseAbs().maxCoeff() < 1e-10);
  }
}
