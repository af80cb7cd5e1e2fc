#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "kbsnmf/errors.hpp"
#include "kbsnmf/init.hpp"
#include "kbsnmf/kurtosis.hpp"
#include "kbsnmf/nmf.hpp"
#include "kbsnmf/types.hpp"

namespace kbsnmf {

// Abundance smoothing matrix M = (1 - theta) I + (theta / r) ones(r, r).
// Symmetric, nonnegative for theta in [0, 1], rows sum to 1; theta = 0 gives
// the identity exactly, so M*S = S and the solver degenerates to plain NMF.
template <typename Scalar>
class SmoothingMatrix {
 public:
  SmoothingMatrix(Matrix<Scalar> data, Scalar theta)
      : data_(std::move(data)), theta_(theta) {}

  const Matrix<Scalar>& data() const { return data_; }
  Scalar theta() const { return theta_; }
  Index size() const { return data_.rows(); }

 private:
  Matrix<Scalar> data_;
  Scalar theta_;
};

template <typename Scalar>
SmoothingMatrix<Scalar> smoothing_matrix(Index r, Scalar theta) {
  if (r < 1) {
    throw DimensionMismatch("smoothing_matrix: r must be >= 1");
  }
  if (!(theta >= Scalar(0) && theta <= Scalar(1))) {
    throw InvalidTheta("smoothing_matrix: theta must be in [0, 1]");
  }
  Matrix<Scalar> m = Matrix<Scalar>::Constant(r, r, theta / Scalar(r));
  m.diagonal().array() += Scalar(1) - theta;
  return SmoothingMatrix<Scalar>(std::move(m), theta);
}

namespace detail {

// gamma' = -2 gamma / (n r); negative for gamma > 0, which is why the update
// denominators need flooring.
template <typename Scalar>
Scalar gamma_prime(Scalar gamma, Index n, Index r) {
  return Scalar(-2) * gamma / (Scalar(n) * Scalar(r));
}

template <typename Scalar>
const Matrix<Scalar>& smooth_abundances(const SmoothingMatrix<Scalar>& M,
                                        const Matrix<Scalar>& S,
                                        Matrix<Scalar>& storage) {
  if (M.theta() == Scalar(0)) return S;
  storage = M.data() * S;
  return storage;
}

template <typename Scalar>
const Matrix<Scalar>& smooth_endmembers(const SmoothingMatrix<Scalar>& M,
                                        const Matrix<Scalar>& A,
                                        Matrix<Scalar>& storage) {
  if (M.theta() == Scalar(0)) return A;
  storage = A * M.data();
  return storage;
}

// Divides each column of A by its population standard deviation (or by the
// variance itself in the literal mode); when compensating, the matching row
// of S is multiplied by the same divisor so A*S is preserved.
template <typename Scalar>
void normalize_endmembers_in_place(Matrix<Scalar>& A, Matrix<Scalar>& S,
                                   bool compensate, Scalar epsilon_guard,
                                   bool divide_by_std) {
  for (Index i = 0; i < A.cols(); ++i) {
    const Scalar mean = A.col(i).mean();
    const Scalar variance = (A.col(i).array() - mean).square().mean();
    if (!(variance > epsilon_guard)) {
      throw DegenerateSignal("normalize_endmembers: column " +
                             std::to_string(i) +
                             " has variance below epsilon_guard");
    }
    const Scalar divisor = divide_by_std ? std::sqrt(variance) : variance;
    A.col(i) /= divisor;
    if (compensate) {
      S.row(i) *= divisor;
    }
  }
}

}  // namespace detail

// KbSNMF objective: data-fit term between X and A*M*S minus gamma times the
// average kurtosis of A's columns.
template <typename Scalar>
Scalar objective(const Matrix<Scalar>& X, const Matrix<Scalar>& A,
                 const Matrix<Scalar>& S, const SmoothingMatrix<Scalar>& M,
                 Scalar gamma, Variant variant,
                 Scalar epsilon_guard = Scalar(default_epsilon_guard)) {
  detail::check_factor_dims(X, A, S);
  if (M.size() != A.cols()) {
    throw DimensionMismatch("objective: smoothing matrix size != r");
  }
  Matrix<Scalar> storage;
  const Matrix<Scalar>& Y = detail::smooth_abundances(M, S, storage);
  const Scalar fit =
      detail::fit_value(variant, X, Matrix<Scalar>(A * Y), epsilon_guard);
  if (gamma == Scalar(0)) return fit;
  return fit - gamma * average_kurtosis(A, epsilon_guard).average;
}

// One KbSNMF-fnorm iteration: A against the kurtosis-augmented denominator,
// then S against the updated A. gamma_prime is -2 gamma / (n r).
template <typename Scalar>
std::pair<Matrix<Scalar>, Matrix<Scalar>> step_kbsnmf_fnorm(
    const Matrix<Scalar>& X, const Matrix<Scalar>& A, const Matrix<Scalar>& S,
    const SmoothingMatrix<Scalar>& M, Scalar gamma_prime,
    Scalar epsilon_guard = Scalar(default_epsilon_guard),
    std::int64_t* floored = nullptr) {
  detail::check_factor_dims(X, A, S);
  Matrix<Scalar> y_storage;
  const Matrix<Scalar>& Y = detail::smooth_abundances(M, S, y_storage);
  Matrix<Scalar> kurt_term;
  const Matrix<Scalar>* extra = nullptr;
  if (gamma_prime != Scalar(0)) {
    kurt_term = gamma_prime * detail::doubly_centered_cube(A);
    extra = &kurt_term;
  }
  Matrix<Scalar> a_next =
      detail::mu_fnorm_update_A(X, A, Y, extra, epsilon_guard, floored);
  Matrix<Scalar> b_storage;
  const Matrix<Scalar>& B = detail::smooth_endmembers(M, a_next, b_storage);
  Matrix<Scalar> s_next =
      detail::mu_fnorm_update_S(X, B, S, epsilon_guard, floored);
  return {std::move(a_next), std::move(s_next)};
}

// One KbSNMF-div iteration.
template <typename Scalar>
std::pair<Matrix<Scalar>, Matrix<Scalar>> step_kbsnmf_div(
    const Matrix<Scalar>& X, const Matrix<Scalar>& A, const Matrix<Scalar>& S,
    const SmoothingMatrix<Scalar>& M, Scalar gamma_prime,
    Scalar epsilon_guard = Scalar(default_epsilon_guard),
    std::int64_t* floored = nullptr) {
  detail::check_factor_dims(X, A, S);
  Matrix<Scalar> y_storage;
  const Matrix<Scalar>& Y = detail::smooth_abundances(M, S, y_storage);
  Matrix<Scalar> kurt_term;
  const Matrix<Scalar>* extra = nullptr;
  if (gamma_prime != Scalar(0)) {
    kurt_term = gamma_prime * detail::doubly_centered_cube(A);
    extra = &kurt_term;
  }
  Matrix<Scalar> a_next =
      detail::mu_div_update_A(X, A, Y, extra, epsilon_guard, floored);
  Matrix<Scalar> b_storage;
  const Matrix<Scalar>& B = detail::smooth_endmembers(M, a_next, b_storage);
  Matrix<Scalar> s_next =
      detail::mu_div_update_S(X, B, S, epsilon_guard, floored);
  return {std::move(a_next), std::move(s_next)};
}

// Rescales A's columns to unit population variance (std divisor) or by their
// variance (literal mode). With compensate the matching S rows absorb the
// divisor so the product A*S is unchanged; with theta > 0 the smoothed
// product A*M*S is only approximately preserved because M mixes rows.
template <typename Scalar>
std::pair<Matrix<Scalar>, Matrix<Scalar>> normalize_endmembers(
    const Matrix<Scalar>& A, const Matrix<Scalar>& S, bool compensate,
    Scalar epsilon_guard = Scalar(default_epsilon_guard),
    bool divide_by_std = true) {
  if (A.cols() != S.rows()) {
    throw DimensionMismatch("normalize_endmembers: A cols != S rows");
  }
  Matrix<Scalar> a = A;
  Matrix<Scalar> s = S;
  detail::normalize_endmembers_in_place(a, s, compensate, epsilon_guard,
                                        divide_by_std);
  return {std::move(a), std::move(s)};
}

// KbSNMF solver. Follows the published iteration exactly: initialize, build
// M and gamma', normalize A, then loop { update A, normalize A, update S }
// under the dual stopping rule (t_max, relative objective change below
// c_min, never on the first iteration).
//
// When gamma == 0 the kurtosis constraint is inactive and the variance
// normalization steps are skipped entirely, which makes the run reproduce the
// baseline solver iterate-for-iterate; normalization exists only to uphold
// the unit-variance premise of the kurtosis gradient.
//
// The observer is invoked as observer(t, A, S) at the initial point (t = 0)
// and after each completed iteration.
template <typename Scalar, typename Observer>
UnmixResult<Scalar> solve(const SpectralCube<Scalar>& cube, Index rank,
                          const SolverConfig<Scalar>& cfg, Observer&& observer) {
  cfg.validate();
  const Index n = cube.bands();
  const Index m = cube.pixels();
  if (rank < 1 || rank > std::min(n, m)) {
    throw InvalidRank("solve: rank " + std::to_string(rank) +
                      " outside [1, min(n, m)]");
  }
  const Scalar eps = cfg.epsilon_guard;
  const bool constrained = cfg.gamma > Scalar(0);

  const std::int64_t clamp_count = (cube.data().array() < eps).count();
  const Matrix<Scalar> X = cube.data().cwiseMax(eps);

  auto [A, S] = cfg.init == InitMethod::nndsvd
                    ? nndsvd(X, rank, cfg.nndsvd_fill, cfg.seed)
                    : random_init<Scalar>(n, m, rank, cfg.seed);

  const SmoothingMatrix<Scalar> M = smoothing_matrix(rank, cfg.theta);
  const Scalar gp = detail::gamma_prime(cfg.gamma, n, rank);

  if (constrained) {
    detail::normalize_endmembers_in_place(A, S, cfg.compensate_normalization,
                                          eps, cfg.divide_by_std);
    A = A.cwiseMax(eps);
    S = S.cwiseMax(eps);
  }

  UnmixResult<Scalar> result{
      EndmemberMatrix<Scalar>(A), AbundanceMatrix<Scalar>(S), {}, {}, {}, 0,
      TerminationReason::max_iters, 0, clamp_count};

  Matrix<Scalar> y_storage;
  Matrix<Scalar> b_storage;

  auto record_point = [&](int t) -> Scalar {
    const Matrix<Scalar>& Y = detail::smooth_abundances(M, S, y_storage);
    const Scalar fit = detail::fit_value(cfg.variant, X, Matrix<Scalar>(A * Y), eps);
    const Scalar excess = average_excess_kurtosis_or_nan(A, eps);
    const Scalar obj =
        constrained ? fit - cfg.gamma * (excess + Scalar(3)) : fit;
    result.fit_trace.push_back(fit);
    result.objective_trace.push_back(obj);
    result.kurtosis_trace.push_back(excess);
    observer(t, A, S);
    return cfg.stop_on_fit_only ? fit : obj;
  };

  Scalar previous_stat = record_point(0);

  for (int t = 1; t <= cfg.t_max; ++t) {
    Matrix<Scalar> kurt_term;
    const Matrix<Scalar>* extra = nullptr;
    if (constrained) {
      kurt_term = gp * detail::doubly_centered_cube(A);
      extra = &kurt_term;
    }
    {
      const Matrix<Scalar>& Y = detail::smooth_abundances(M, S, y_storage);
      A = cfg.variant == Variant::fnorm
              ? detail::mu_fnorm_update_A(X, A, Y, extra, eps,
                                          &result.denominator_floor_count)
              : detail::mu_div_update_A(X, A, Y, extra, eps,
                                        &result.denominator_floor_count);
    }
    if (constrained) {
      detail::normalize_endmembers_in_place(A, S, cfg.compensate_normalization,
                                            eps, cfg.divide_by_std);
      A = A.cwiseMax(eps);
      S = S.cwiseMax(eps);
    }
    {
      const Matrix<Scalar>& B = detail::smooth_endmembers(M, A, b_storage);
      S = cfg.variant == Variant::fnorm
              ? detail::mu_fnorm_update_S(X, B, S, eps,
                                          &result.denominator_floor_count)
              : detail::mu_div_update_S(X, B, S, eps,
                                        &result.denominator_floor_count);
    }

    const Scalar stat = record_point(t);
    result.iterations_run = t;

    if (t >= 2 && detail::relative_change(previous_stat, stat) < cfg.c_min) {
      result.termination = TerminationReason::tolerance;
      break;
    }
    previous_stat = stat;
  }

  result.endmembers = EndmemberMatrix<Scalar>(std::move(A));
  result.abundances = AbundanceMatrix<Scalar>(std::move(S));
  return result;
}

template <typename Scalar>
UnmixResult<Scalar> solve(const SpectralCube<Scalar>& cube, Index rank,
                          const SolverConfig<Scalar>& cfg) {
  return solve(cube, rank, cfg, detail::NoopObserver{});
}

}  // namespace kbsnmf
