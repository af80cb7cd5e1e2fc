#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "kbsnmf/errors.hpp"
#include "kbsnmf/types.hpp"

namespace kbsnmf {

// Per-endmember kurtosis values together with their mean and the mean's
// excess form (mean minus the Gaussian reference value 3).
template <typename Scalar>
struct KurtosisReport {
  std::vector<Scalar> per_endmember;
  Scalar average = Scalar(0);
  Scalar average_excess = Scalar(0);
};

namespace detail {

// Population central moments: divide by the signal length, not length - 1.
template <typename Derived>
typename Derived::Scalar central_moment(const Eigen::MatrixBase<Derived>& signal,
                                        int order) {
  using Scalar = typename Derived::Scalar;
  const Scalar mean = signal.mean();
  const auto centered = signal.derived().array() - mean;
  switch (order) {
    case 2: return centered.square().mean();
    case 3: return centered.cube().mean();
    case 4: return centered.square().square().mean();
    default: return Scalar(std::pow(centered.abs().mean(), order));
  }
}

// Subtracts each column's mean from its entries; same result as multiplying
// by the centering matrix on the left but without materializing it.
template <typename Scalar>
Matrix<Scalar> center_columns(const Matrix<Scalar>& m) {
  return m.rowwise() - m.colwise().mean();
}

// N * (N A)^{o3}, the core shared by the average-kurtosis gradient and the
// kurtosis term inside the KbSNMF update denominators.
template <typename Scalar>
Matrix<Scalar> doubly_centered_cube(const Matrix<Scalar>& m) {
  const Matrix<Scalar> cubed = center_columns(m).array().cube().matrix();
  return center_columns(cubed);
}

}  // namespace detail

// Kurtosis of a signal: the fourth central moment over the squared variance.
// Gaussian signals score 3; values above 3 indicate a super-Gaussian
// (leptokurtic) distribution.
template <typename Derived>
typename Derived::Scalar kurtosis(
    const Eigen::MatrixBase<Derived>& signal,
    typename Derived::Scalar epsilon_guard =
        typename Derived::Scalar(default_epsilon_guard)) {
  using Scalar = typename Derived::Scalar;
  if (signal.size() < 2) {
    throw DegenerateSignal("kurtosis: signal must have at least 2 entries");
  }
  const Scalar m2 = detail::central_moment(signal, 2);
  if (!(m2 > epsilon_guard)) {
    throw DegenerateSignal("kurtosis: variance below epsilon_guard");
  }
  const Scalar m4 = detail::central_moment(signal, 4);
  return m4 / (m2 * m2);
}

// Column-wise kurtosis of the endmember matrix and its average across
// endmembers.
template <typename Scalar>
KurtosisReport<Scalar> average_kurtosis(
    const Matrix<Scalar>& endmembers,
    Scalar epsilon_guard = Scalar(default_epsilon_guard)) {
  KurtosisReport<Scalar> report;
  const Index r = endmembers.cols();
  report.per_endmember.reserve(static_cast<std::size_t>(r));
  for (Index i = 0; i < r; ++i) {
    try {
      report.per_endmember.push_back(kurtosis(endmembers.col(i), epsilon_guard));
    } catch (const DegenerateSignal&) {
      throw DegenerateSignal("average_kurtosis: column " + std::to_string(i) +
                             " has variance below epsilon_guard");
    }
  }
  Scalar sum = Scalar(0);
  for (Scalar k : report.per_endmember) sum += k;
  report.average = sum / Scalar(r);
  report.average_excess = report.average - Scalar(3);
  return report;
}

template <typename Scalar>
KurtosisReport<Scalar> average_kurtosis(
    const EndmemberMatrix<Scalar>& endmembers,
    Scalar epsilon_guard = Scalar(default_epsilon_guard)) {
  return average_kurtosis(endmembers.data(), epsilon_guard);
}

// As average_kurtosis but mapping degenerate columns to NaN instead of
// throwing; used for per-iteration traces where a transiently flat column
// must not abort the solve.
template <typename Scalar>
Scalar average_excess_kurtosis_or_nan(
    const Matrix<Scalar>& endmembers,
    Scalar epsilon_guard = Scalar(default_epsilon_guard)) {
  const Index r = endmembers.cols();
  Scalar sum = Scalar(0);
  for (Index i = 0; i < r; ++i) {
    const Scalar m2 = detail::central_moment(endmembers.col(i), 2);
    if (!(m2 > epsilon_guard)) {
      return std::numeric_limits<Scalar>::quiet_NaN();
    }
    sum += detail::central_moment(endmembers.col(i), 4) / (m2 * m2);
  }
  return sum / Scalar(r) - Scalar(3);
}

// Centering matrix N = I - (1/n) * ones(n, n); symmetric and idempotent,
// annihilates constant vectors.
template <typename Scalar>
Matrix<Scalar> centering_matrix(Index n) {
  if (n < 1) {
    throw DimensionMismatch("centering_matrix: n must be >= 1");
  }
  Matrix<Scalar> result = Matrix<Scalar>::Constant(n, n, Scalar(-1) / Scalar(n));
  result.diagonal().array() += Scalar(1);
  return result;
}

// Gradient of the average kurtosis with respect to the endmember matrix,
// valid when every column has unit population variance:
//
//   grad = (4 / (n r)) * N * (N A)^{o3}
//
// with N the centering matrix and ^{o3} the element-wise cube. Columns of
// the result always sum to zero because the outer centering removes the
// column mean. Callers are responsible for the unit-variance premise; the
// formula itself is defined for any finite input.
template <typename Scalar>
Matrix<Scalar> grad_average_kurtosis(const Matrix<Scalar>& endmembers) {
  const Index n = endmembers.rows();
  const Index r = endmembers.cols();
  if (n < 1 || r < 1) {
    throw DimensionMismatch("grad_average_kurtosis: empty matrix");
  }
  return Scalar(4) / (Scalar(n) * Scalar(r)) *
         detail::doubly_centered_cube(endmembers);
}

template <typename Scalar>
Matrix<Scalar> grad_average_kurtosis(const EndmemberMatrix<Scalar>& endmembers) {
  return grad_average_kurtosis(endmembers.data());
}

}  // namespace kbsnmf
