#include <doctest.h>

#include <kbsnmf/nmf.hpp>
#include <kbsnmf/rng.hpp>

#include <cmath>

using kbsnmf::Index;
using kbsnmf::Matrix;

namespace {

Matrix<double> random_positive(Index rows, Index cols, kbsnmf::Rng& rng,
                               double lo = 0.1, double hi = 1.0) {
  Matrix<double> m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(lo, hi);
  }
  return m;
}

double brute_force_frobenius_sq(const Matrix<double>& x, const Matrix<double>& a,
                                const Matrix<double>& s) {
  const Matrix<double> recon = a * s;
  double acc = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      const double d = x(i, j) - recon(i, j);
      acc += d * d;
    }
  }
  return acc;
}

double brute_force_divergence(const Matrix<double>& x, const Matrix<double>& a,
                              const Matrix<double>& s) {
  const Matrix<double> recon = a * s;
  double acc = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      if (x(i, j) > 0.0) {
        acc += x(i, j) * std::log(x(i, j) / recon(i, j));
      }
      acc += recon(i, j) - x(i, j);
    }
  }
  return acc;
}

}  // namespace

TEST_CASE("frobenius_sq") {
  kbsnmf::Rng rng(101);
  const Matrix<double> a = random_positive(4, 2, rng);
  const Matrix<double> s = random_positive(2, 6, rng);

  SUBCASE("zero on exact reconstruction") {
    const Matrix<double> x = a * s;
    CHECK(kbsnmf::frobenius_sq(x, a, s) == 0.0);
  }
  SUBCASE("single-entry residual") {
    Matrix<double> x(1, 1), one(1, 1), zero(1, 1);
    x << 1.0;
    one << 1.0;
    zero << 0.0;
    CHECK(kbsnmf::frobenius_sq(x, one, zero) == 1.0);
  }
  SUBCASE("matches the brute-force entry sum") {
    const Matrix<double> x = random_positive(4, 6, rng);
    CHECK(kbsnmf::frobenius_sq(x, a, s) ==
          doctest::Approx(brute_force_frobenius_sq(x, a, s)).epsilon(1e-13));
  }
  SUBCASE("dimension mismatch") {
    const Matrix<double> x = random_positive(5, 6, rng);
    CHECK_THROWS_AS(kbsnmf::frobenius_sq(x, a, s), kbsnmf::DimensionMismatch);
  }
}

TEST_CASE("divergence") {
  kbsnmf::Rng rng(103);
  const Matrix<double> a = random_positive(4, 2, rng);
  const Matrix<double> s = random_positive(2, 6, rng);

  SUBCASE("zero on exact reconstruction") {
    const Matrix<double> x = a * s;
    CHECK(kbsnmf::divergence(x, a, s) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("zero observation against positive reconstruction") {
    Matrix<double> x(1, 1), one(1, 1), two(1, 1);
    x << 0.0;
    one << 1.0;
    two << 2.0;
    CHECK(kbsnmf::divergence(x, one, two) == 2.0);
  }
  SUBCASE("matches the brute-force guarded sum") {
    const Matrix<double> x = random_positive(4, 6, rng);
    CHECK(kbsnmf::divergence(x, a, s) ==
          doctest::Approx(brute_force_divergence(x, a, s)).epsilon(1e-12));
  }
  SUBCASE("vanishing reconstruction under positive data is a domain error") {
    Matrix<double> x(1, 2), a1(1, 1), s1(1, 2);
    x << 1.0, 1.0;
    a1 << 1.0;
    s1 << 0.0, 1.0;
    CHECK_THROWS_AS(kbsnmf::divergence(x, a1, s1), kbsnmf::DomainError);
  }
}

TEST_CASE("step_fnorm hand-evaluated scalar case") {
  Matrix<double> x(1, 1), a(1, 1), s(1, 1);
  x << 4.0;
  a << 1.0;
  s << 1.0;
  const auto [a1, s1] = kbsnmf::step_fnorm(x, a, s);
  // A' = 1 * (4*1)/(1*1) = 4; S' = 1 * (4*4)/(4*4*1) = 1
  CHECK(a1(0, 0) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(s1(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("step_div hand-evaluated scalar case") {
  Matrix<double> x(1, 1), a(1, 1), s(1, 1);
  x << 4.0;
  a << 1.0;
  s << 1.0;
  const auto [a1, s1] = kbsnmf::step_div(x, a, s);
  // ratio = 4/1; A' = 1 * (4*1)/rowsum(S)=1 -> 4; then ratio = 4/4 = 1,
  // S' = 1 * (4*1)/colsum(A')=4 -> 1
  CHECK(a1(0, 0) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(s1(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("both steps fix exact factorizations") {
  kbsnmf::Rng rng(107);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix<double> a = random_positive(6, 3, rng);
    const Matrix<double> s = random_positive(3, 9, rng);
    const Matrix<double> x = a * s;

    const auto [af, sf] = kbsnmf::step_fnorm(x, a, s);
    CHECK(((af - a).cwiseAbs().array() / a.array()).maxCoeff() < 1e-12);
    CHECK(((sf - s).cwiseAbs().array() / s.array()).maxCoeff() < 1e-12);

    const auto [ad, sd] = kbsnmf::step_div(x, a, s);
    CHECK(((ad - a).cwiseAbs().array() / a.array()).maxCoeff() < 1e-12);
    CHECK(((sd - s).cwiseAbs().array() / s.array()).maxCoeff() < 1e-12);
  }
}

TEST_CASE("objectives are non-increasing and positivity is closed") {
  kbsnmf::Rng rng(109);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 3 + Index(rng.uniform(0.0, 12.0));
    const Index m = 4 + Index(rng.uniform(0.0, 20.0));
    const Index r = 1 + Index(rng.uniform(0.0, 4.0));
    const Matrix<double> x = random_positive(n, m, rng);
    const Matrix<double> a = random_positive(n, r, rng);
    const Matrix<double> s = random_positive(r, m, rng);

    const double f_before = kbsnmf::frobenius_sq(x, a, s);
    const auto [af, sf] = kbsnmf::step_fnorm(x, a, s);
    const double f_after = kbsnmf::frobenius_sq(x, af, sf);
    CHECK(f_after <= f_before * (1.0 + 1e-9));
    CHECK(af.minCoeff() > 0.0);
    CHECK(sf.minCoeff() > 0.0);

    const double d_before = kbsnmf::divergence(x, a, s);
    const auto [ad, sd] = kbsnmf::step_div(x, a, s);
    const double d_after = kbsnmf::divergence(x, ad, sd);
    CHECK(d_after <= d_before + 1e-9 * std::abs(d_before));
    CHECK(ad.minCoeff() > 0.0);
    CHECK(sd.minCoeff() > 0.0);
  }
}

TEST_CASE("solve_baseline drives the residual down on a low-rank instance") {
  kbsnmf::Rng rng(113);
  const Matrix<double> a_true = random_positive(10, 2, rng);
  const Matrix<double> s_true = random_positive(2, 30, rng);
  const Matrix<double> x = a_true * s_true;
  kbsnmf::SpectralCube<double> cube(x, 5, 6);

  kbsnmf::SolverConfig<double> cfg;
  cfg.t_max = 1000;
  cfg.c_min = 1e-12;
  cfg.init = kbsnmf::InitMethod::random;

  SUBCASE("fnorm variant") {
    cfg.variant = kbsnmf::Variant::fnorm;
    const auto result = kbsnmf::solve_baseline(cube, 2, cfg);
    CHECK(result.fit_trace.back() < 1e-6 * x.squaredNorm());
    CHECK(result.fit_trace.size() ==
          static_cast<std::size_t>(result.iterations_run) + 1);
  }
  SUBCASE("div variant") {
    cfg.variant = kbsnmf::Variant::div;
    const auto result = kbsnmf::solve_baseline(cube, 2, cfg);
    CHECK(result.fit_trace.back() < 1e-6 * x.sum());
  }
  SUBCASE("degenerate rank request") {
    CHECK_THROWS_AS(kbsnmf::solve_baseline(cube, 0, cfg), kbsnmf::InvalidRank);
    CHECK_THROWS_AS(kbsnmf::solve_baseline(cube, 11, cfg), kbsnmf::InvalidRank);
  }
}

TEST_CASE("solve_baseline termination bookkeeping") {
  kbsnmf::Rng rng(127);
  const Matrix<double> x = random_positive(8, 12, rng);
  kbsnmf::SpectralCube<double> cube(x, 3, 4);
  kbsnmf::SolverConfig<double> cfg;

  SUBCASE("max_iters when tolerance is unreachable") {
    cfg.t_max = 5;
    cfg.c_min = 1e-300;
    const auto result = kbsnmf::solve_baseline(cube, 2, cfg);
    CHECK(result.termination == kbsnmf::TerminationReason::max_iters);
    CHECK(result.iterations_run == 5);
  }
  SUBCASE("tolerance exit implies the change fell below c_min") {
    cfg.t_max = 2000;
    cfg.c_min = 1e-6;
    const auto result = kbsnmf::solve_baseline(cube, 2, cfg);
    REQUIRE(result.termination == kbsnmf::TerminationReason::tolerance);
    const auto& trace = result.objective_trace;
    const double last = trace[trace.size() - 1];
    const double prev = trace[trace.size() - 2];
    CHECK(std::abs(prev - last) / std::abs(prev) < cfg.c_min);
    CHECK(result.iterations_run >= 2);
  }
}
