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
#include "kbsnmf/types.hpp"

namespace kbsnmf {

namespace detail {

template <typename Scalar>
void check_factor_dims(const Matrix<Scalar>& X, const Matrix<Scalar>& A,
                       const Matrix<Scalar>& S) {
  if (A.rows() != X.rows()) {
    throw DimensionMismatch("dimension mismatch on n: X has " +
                            std::to_string(X.rows()) + " rows, A has " +
                            std::to_string(A.rows()));
  }
  if (S.cols() != X.cols()) {
    throw DimensionMismatch("dimension mismatch on m: X has " +
                            std::to_string(X.cols()) + " cols, S has " +
                            std::to_string(S.cols()));
  }
  if (A.cols() != S.rows()) {
    throw DimensionMismatch("dimension mismatch on r: A has " +
                            std::to_string(A.cols()) + " cols, S has " +
                            std::to_string(S.rows()) + " rows");
  }
}

// factor o numerator / denominator with the denominator floored at eps and
// every output entry floored at eps. Floored denominator entries are counted
// into *floored when given.
template <typename Scalar>
Matrix<Scalar> multiplicative_ratio(const Matrix<Scalar>& factor,
                                    const Matrix<Scalar>& numerator,
                                    const Matrix<Scalar>& denominator,
                                    Scalar eps, std::int64_t* floored) {
  if (floored != nullptr) {
    *floored += (denominator.array() < eps).count();
  }
  return (factor.array() * numerator.array() / denominator.array().max(eps))
      .max(eps)
      .matrix();
}

// Frobenius-based A update. Y is the abundance matrix as seen by the update
// (the smoothed matrix M*S for KbSNMF, S itself for the baseline).
// extra_denominator, when non-null, is added before flooring.
template <typename Scalar>
Matrix<Scalar> mu_fnorm_update_A(const Matrix<Scalar>& X, const Matrix<Scalar>& A,
                                 const Matrix<Scalar>& Y,
                                 const Matrix<Scalar>* extra_denominator,
                                 Scalar eps, std::int64_t* floored) {
  const Matrix<Scalar> numerator = X * Y.transpose();
  const Matrix<Scalar> yyt = Y * Y.transpose();
  Matrix<Scalar> denominator = A * yyt;
  if (extra_denominator != nullptr) {
    denominator += *extra_denominator;
  }
  return multiplicative_ratio(A, numerator, denominator, eps, floored);
}

// Frobenius-based S update. B is the endmember matrix as seen by the update
// (A*M for KbSNMF, A itself for the baseline).
template <typename Scalar>
Matrix<Scalar> mu_fnorm_update_S(const Matrix<Scalar>& X, const Matrix<Scalar>& B,
                                 const Matrix<Scalar>& S, Scalar eps,
                                 std::int64_t* floored) {
  const Matrix<Scalar> numerator = B.transpose() * X;
  const Matrix<Scalar> btb = B.transpose() * B;
  const Matrix<Scalar> denominator = btb * S;
  return multiplicative_ratio(S, numerator, denominator, eps, floored);
}

// Divergence-based A update; the all-ones denominator matrix is realized as
// replicated row sums of Y rather than an explicit ones(n, m) product.
template <typename Scalar>
Matrix<Scalar> mu_div_update_A(const Matrix<Scalar>& X, const Matrix<Scalar>& A,
                               const Matrix<Scalar>& Y,
                               const Matrix<Scalar>* extra_denominator,
                               Scalar eps, std::int64_t* floored) {
  const Matrix<Scalar> recon = A * Y;
  const Matrix<Scalar> ratio =
      (X.array() / recon.array().max(eps)).matrix();
  const Matrix<Scalar> numerator = ratio * Y.transpose();
  const Vector<Scalar> y_row_sums = Y.rowwise().sum();
  Matrix<Scalar> denominator = y_row_sums.transpose().replicate(A.rows(), 1);
  if (extra_denominator != nullptr) {
    denominator += *extra_denominator;
  }
  return multiplicative_ratio(A, numerator, denominator, eps, floored);
}

template <typename Scalar>
Matrix<Scalar> mu_div_update_S(const Matrix<Scalar>& X, const Matrix<Scalar>& B,
                               const Matrix<Scalar>& S, Scalar eps,
                               std::int64_t* floored) {
  const Matrix<Scalar> recon = B * S;
  const Matrix<Scalar> ratio =
      (X.array() / recon.array().max(eps)).matrix();
  const Matrix<Scalar> numerator = B.transpose() * ratio;
  const Vector<Scalar> b_col_sums = B.colwise().sum().transpose();
  const Matrix<Scalar> denominator = b_col_sums.replicate(1, S.cols());
  return multiplicative_ratio(S, numerator, denominator, eps, floored);
}

template <typename Scalar>
Scalar frobenius_sq_residual(const Matrix<Scalar>& X, const Matrix<Scalar>& recon) {
  return (X - recon).squaredNorm();
}

template <typename Scalar>
Scalar divergence_residual(const Matrix<Scalar>& X, const Matrix<Scalar>& recon,
                           Scalar eps) {
  const auto x = X.array();
  const auto q = recon.array().max(eps);
  const Scalar log_part =
      (x > Scalar(0)).select((x * (x / q).log()).matrix(), Matrix<Scalar>::Zero(X.rows(), X.cols())).sum();
  return log_part - x.sum() + recon.sum();
}

template <typename Scalar>
Scalar fit_value(Variant variant, const Matrix<Scalar>& X,
                 const Matrix<Scalar>& recon, Scalar eps) {
  return variant == Variant::fnorm ? frobenius_sq_residual(X, recon)
                                   : divergence_residual(X, recon, eps);
}

// Relative-change stopping statistic; an exact tie counts as zero change even
// when the previous value is zero.
template <typename Scalar>
Scalar relative_change(Scalar previous, Scalar current) {
  const Scalar diff = std::abs(previous - current);
  if (diff == Scalar(0)) return Scalar(0);
  return diff / std::abs(previous);
}

struct NoopObserver {
  template <typename Scalar>
  void operator()(int, const Matrix<Scalar>&, const Matrix<Scalar>&) const {}
};

}  // namespace detail

// Squared Frobenius norm of X - A*S.
template <typename Scalar>
Scalar frobenius_sq(const Matrix<Scalar>& X, const Matrix<Scalar>& A,
                    const Matrix<Scalar>& S) {
  detail::check_factor_dims(X, A, S);
  return detail::frobenius_sq_residual<Scalar>(X, A * S);
}

template <typename Scalar>
Scalar frobenius_sq(const SpectralCube<Scalar>& cube,
                    const EndmemberMatrix<Scalar>& A,
                    const AbundanceMatrix<Scalar>& S) {
  validate_dimensions(cube, A, S);
  return detail::frobenius_sq_residual<Scalar>(cube.data(), A.data() * S.data());
}

// Generalized Kullback-Leibler divergence of X from A*S, with the convention
// 0 * log(0 / q) = 0. Throws DomainError when some X_ij > 0 has a
// reconstruction at or below epsilon_guard.
template <typename Scalar>
Scalar divergence(const Matrix<Scalar>& X, const Matrix<Scalar>& A,
                  const Matrix<Scalar>& S,
                  Scalar epsilon_guard = Scalar(default_epsilon_guard)) {
  detail::check_factor_dims(X, A, S);
  const Matrix<Scalar> recon = A * S;
  if (((X.array() > Scalar(0)) && (recon.array() <= epsilon_guard)).any()) {
    throw DomainError("divergence: reconstruction vanishes where X is positive");
  }
  return detail::divergence_residual(X, recon, epsilon_guard);
}

template <typename Scalar>
Scalar divergence(const SpectralCube<Scalar>& cube,
                  const EndmemberMatrix<Scalar>& A,
                  const AbundanceMatrix<Scalar>& S,
                  Scalar epsilon_guard = Scalar(default_epsilon_guard)) {
  validate_dimensions(cube, A, S);
  return divergence(cube.data(), A.data(), S.data(), epsilon_guard);
}

// One Lee-Seung iteration for the Frobenius objective: A is updated first,
// then S against the updated A.
template <typename Scalar>
std::pair<Matrix<Scalar>, Matrix<Scalar>> step_fnorm(
    const Matrix<Scalar>& X, const Matrix<Scalar>& A, const Matrix<Scalar>& S,
    Scalar epsilon_guard = Scalar(default_epsilon_guard)) {
  detail::check_factor_dims(X, A, S);
  const Matrix<Scalar>* no_extra = nullptr;
  Matrix<Scalar> a_next =
      detail::mu_fnorm_update_A(X, A, S, no_extra, epsilon_guard, nullptr);
  Matrix<Scalar> s_next =
      detail::mu_fnorm_update_S(X, a_next, S, epsilon_guard, nullptr);
  return {std::move(a_next), std::move(s_next)};
}

// One Lee-Seung iteration for the divergence objective.
template <typename Scalar>
std::pair<Matrix<Scalar>, Matrix<Scalar>> step_div(
    const Matrix<Scalar>& X, const Matrix<Scalar>& A, const Matrix<Scalar>& S,
    Scalar epsilon_guard = Scalar(default_epsilon_guard)) {
  detail::check_factor_dims(X, A, S);
  const Matrix<Scalar>* no_extra = nullptr;
  Matrix<Scalar> a_next =
      detail::mu_div_update_A(X, A, S, no_extra, epsilon_guard, nullptr);
  Matrix<Scalar> s_next =
      detail::mu_div_update_S(X, a_next, S, epsilon_guard, nullptr);
  return {std::move(a_next), std::move(s_next)};
}

// Baseline NMF solver: iterates the configured variant's multiplicative
// updates from the configured initialization until the relative objective
// change drops below c_min or t_max iterations elapse. gamma and theta are
// ignored. The observer is invoked as observer(t, A, S) once for the initial
// point (t = 0) and once after every completed iteration.
template <typename Scalar, typename Observer>
UnmixResult<Scalar> solve_baseline(const SpectralCube<Scalar>& cube, Index rank,
                                   const SolverConfig<Scalar>& cfg,
                                   Observer&& observer) {
  cfg.validate();
  const Index n = cube.bands();
  const Index m = cube.pixels();
  if (rank < 1 || rank > std::min(n, m)) {
    throw InvalidRank("solve_baseline: rank " + std::to_string(rank) +
                      " outside [1, min(n, m)]");
  }
  const Scalar eps = cfg.epsilon_guard;

  const std::int64_t clamp_count = (cube.data().array() < eps).count();
  const Matrix<Scalar> X = cube.data().cwiseMax(eps);

  auto [A, S] = cfg.init == InitMethod::nndsvd
                    ? nndsvd(X, rank, cfg.nndsvd_fill, cfg.seed)
                    : random_init<Scalar>(n, m, rank, cfg.seed);

  UnmixResult<Scalar> result{
      EndmemberMatrix<Scalar>(A), AbundanceMatrix<Scalar>(S), {}, {}, {}, 0,
      TerminationReason::max_iters, 0, clamp_count};

  Scalar fit = detail::fit_value(cfg.variant, X, Matrix<Scalar>(A * S), eps);
  result.fit_trace.push_back(fit);
  result.objective_trace.push_back(fit);
  result.kurtosis_trace.push_back(average_excess_kurtosis_or_nan(A, eps));
  observer(0, A, S);

  Scalar previous_stat = fit;
  const Matrix<Scalar>* no_extra = nullptr;
  for (int t = 1; t <= cfg.t_max; ++t) {
    if (cfg.variant == Variant::fnorm) {
      A = detail::mu_fnorm_update_A(X, A, S, no_extra, eps,
                                    &result.denominator_floor_count);
      S = detail::mu_fnorm_update_S(X, A, S, eps,
                                    &result.denominator_floor_count);
    } else {
      A = detail::mu_div_update_A(X, A, S, no_extra, eps,
                                  &result.denominator_floor_count);
      S = detail::mu_div_update_S(X, A, S, eps,
                                  &result.denominator_floor_count);
    }
    fit = detail::fit_value(cfg.variant, X, Matrix<Scalar>(A * S), eps);
    result.fit_trace.push_back(fit);
    result.objective_trace.push_back(fit);
    result.kurtosis_trace.push_back(average_excess_kurtosis_or_nan(A, eps));
    result.iterations_run = t;
    observer(t, A, S);

    // C(1) is defined as infinite: the loop never exits on iteration 1.
    if (t >= 2 && detail::relative_change(previous_stat, fit) < cfg.c_min) {
      result.termination = TerminationReason::tolerance;
      break;
    }
    previous_stat = fit;
  }

  result.endmembers = EndmemberMatrix<Scalar>(std::move(A));
  result.abundances = AbundanceMatrix<Scalar>(std::move(S));
  return result;
}

template <typename Scalar>
UnmixResult<Scalar> solve_baseline(const SpectralCube<Scalar>& cube, Index rank,
                                   const SolverConfig<Scalar>& cfg) {
  return solve_baseline(cube, rank, cfg, detail::NoopObserver{});
}

}  // namespace kbsnmf
