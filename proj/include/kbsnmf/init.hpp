#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include "kbsnmf/errors.hpp"
#include "kbsnmf/rng.hpp"
#include "kbsnmf/types.hpp"

namespace kbsnmf {

namespace detail {

// Replaces nonpositive entries according to the fill policy so multiplicative
// updates do not freeze on exact zeros.
template <typename Scalar>
void apply_nndsvd_fill(Matrix<Scalar>& factor, NndsvdFill fill, Scalar data_mean,
                       Rng& rng) {
  if (fill == NndsvdFill::zeros) return;
  const Scalar ceiling = data_mean / Scalar(100);
  for (Index j = 0; j < factor.cols(); ++j) {
    for (Index i = 0; i < factor.rows(); ++i) {
      if (factor(i, j) <= Scalar(0)) {
        factor(i, j) = fill == NndsvdFill::mean_div_100
                           ? ceiling
                           : Scalar(rng.uniform(0.0, double(ceiling)));
      }
    }
  }
}

}  // namespace detail

// NNDSVD initialization: rank-r SVD of X, leading pair taken from the
// nonnegative parts of the first singular triplet, remaining pairs from
// whichever positive/negative section pair of each triplet carries the larger
// product norm. The SVD sign ambiguity is resolved by forcing the
// largest-magnitude entry of each left singular vector positive, so repeated
// calls return identical factors. The seed is consumed only by the
// random_small fill policy.
template <typename Scalar>
std::pair<Matrix<Scalar>, Matrix<Scalar>> nndsvd(
    const Matrix<Scalar>& X, Index rank,
    NndsvdFill fill = NndsvdFill::mean_div_100, std::uint64_t seed = 0) {
  const Index n = X.rows();
  const Index m = X.cols();
  if (rank < 1 || rank > std::min(n, m)) {
    throw RankTooLarge("nndsvd: rank " + std::to_string(rank) +
                       " outside [1, min(n, m)]");
  }
  if ((X.array() < Scalar(0)).any()) {
    throw DomainError("nndsvd: X must be nonnegative");
  }

  Eigen::BDCSVD<Matrix<Scalar>> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw SvdFailure("nndsvd: SVD did not converge");
  }
  Matrix<Scalar> U = svd.matrixU();
  Matrix<Scalar> V = svd.matrixV();
  const Vector<Scalar> sigma = svd.singularValues();

  for (Index k = 0; k < rank; ++k) {
    Index argmax = 0;
    U.col(k).cwiseAbs().maxCoeff(&argmax);
    if (U(argmax, k) < Scalar(0)) {
      U.col(k) = -U.col(k);
      V.col(k) = -V.col(k);
    }
  }

  Matrix<Scalar> A = Matrix<Scalar>::Zero(n, rank);
  Matrix<Scalar> S = Matrix<Scalar>::Zero(rank, m);

  A.col(0) = std::sqrt(sigma(0)) * U.col(0).cwiseMax(Scalar(0));
  S.row(0) = std::sqrt(sigma(0)) * V.col(0).cwiseMax(Scalar(0)).transpose();

  for (Index k = 1; k < rank; ++k) {
    const Vector<Scalar> x_pos = U.col(k).cwiseMax(Scalar(0));
    const Vector<Scalar> x_neg = (-U.col(k)).cwiseMax(Scalar(0));
    const Vector<Scalar> y_pos = V.col(k).cwiseMax(Scalar(0));
    const Vector<Scalar> y_neg = (-V.col(k)).cwiseMax(Scalar(0));
    const Scalar xp_norm = x_pos.norm();
    const Scalar xn_norm = x_neg.norm();
    const Scalar yp_norm = y_pos.norm();
    const Scalar yn_norm = y_neg.norm();
    const Scalar pos_mass = xp_norm * yp_norm;
    const Scalar neg_mass = xn_norm * yn_norm;
    if (pos_mass >= neg_mass) {
      if (pos_mass > Scalar(0)) {
        const Scalar scale = std::sqrt(sigma(k) * pos_mass);
        A.col(k) = scale / xp_norm * x_pos;
        S.row(k) = scale / yp_norm * y_pos.transpose();
      }
    } else {
      const Scalar scale = std::sqrt(sigma(k) * neg_mass);
      A.col(k) = scale / xn_norm * x_neg;
      S.row(k) = scale / yn_norm * y_neg.transpose();
    }
  }

  Rng rng(seed);
  const Scalar data_mean = X.mean();
  detail::apply_nndsvd_fill(A, fill, data_mean, rng);
  detail::apply_nndsvd_fill(S, fill, data_mean, rng);
  return {std::move(A), std::move(S)};
}

template <typename Scalar>
std::pair<Matrix<Scalar>, Matrix<Scalar>> nndsvd(
    const SpectralCube<Scalar>& cube, Index rank,
    NndsvdFill fill = NndsvdFill::mean_div_100, std::uint64_t seed = 0) {
  return nndsvd(cube.data(), rank, fill, seed);
}

// Seeded random initialization with entries uniform on (0.1, 1.0).
template <typename Scalar>
std::pair<Matrix<Scalar>, Matrix<Scalar>> random_init(Index n, Index m,
                                                      Index rank,
                                                      std::uint64_t seed) {
  if (n < 1 || m < 1 || rank < 1) {
    throw DimensionMismatch("random_init: dimensions must be positive");
  }
  Rng rng(seed);
  Matrix<Scalar> A(n, rank);
  Matrix<Scalar> S(rank, m);
  for (Index j = 0; j < rank; ++j) {
    for (Index i = 0; i < n; ++i) A(i, j) = Scalar(rng.uniform(0.1, 1.0));
  }
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < rank; ++i) S(i, j) = Scalar(rng.uniform(0.1, 1.0));
  }
  return {std::move(A), std::move(S)};
}

}  // namespace kbsnmf
