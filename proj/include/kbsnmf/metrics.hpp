#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "kbsnmf/errors.hpp"
#include "kbsnmf/types.hpp"

namespace kbsnmf {

// Per-endmember SAD/RMSE under the minimum-total-SAD pairing of extracted
// endmembers with ground truth. assignment[i] is the ground-truth index
// matched to extracted endmember i; the per-endmember lists are indexed by
// ground-truth endmember.
template <typename Scalar>
struct EvaluationReport {
  std::vector<Index> assignment;
  std::vector<Scalar> sad_per_endmember;
  Scalar sad_average = Scalar(0);
  std::vector<Scalar> rmse_per_endmember;
  Scalar rmse_average = Scalar(0);
};

// Spectral angle between two spectra in radians; scale-invariant.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar sad(const Eigen::MatrixBase<DerivedA>& extracted,
                              const Eigen::MatrixBase<DerivedB>& truth) {
  using Scalar = typename DerivedA::Scalar;
  if (extracted.size() != truth.size()) {
    throw DimensionMismatch("sad: vectors have different lengths");
  }
  const Scalar norm_a = extracted.norm();
  const Scalar norm_b = truth.norm();
  if (!(norm_a > Scalar(0)) || !(norm_b > Scalar(0))) {
    throw ZeroVector("sad: zero-norm spectrum");
  }
  const Scalar cosine = std::clamp(
      Scalar(extracted.dot(truth)) / (norm_a * norm_b), Scalar(-1), Scalar(1));
  return std::acos(cosine);
}

// Root mean square error between two abundance maps.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar rmse(const Eigen::MatrixBase<DerivedA>& extracted,
                               const Eigen::MatrixBase<DerivedB>& truth) {
  using Scalar = typename DerivedA::Scalar;
  if (extracted.size() != truth.size()) {
    throw DimensionMismatch("rmse: vectors have different lengths");
  }
  if (extracted.size() < 1) {
    throw DimensionMismatch("rmse: empty vectors");
  }
  return std::sqrt((extracted.derived().template cast<Scalar>().array() -
                    truth.derived().template cast<Scalar>().array())
                       .square()
                       .mean());
}

// Minimum-total-cost assignment (Kuhn-Munkres on a square cost matrix).
// Returns row_to_col: row i is assigned column row_to_col[i].
template <typename Scalar>
std::vector<Index> min_cost_assignment(const Matrix<Scalar>& cost) {
  if (cost.rows() != cost.cols() || cost.rows() < 1) {
    throw DimensionMismatch("min_cost_assignment: cost matrix must be square");
  }
  const Index n = cost.rows();
  const Scalar infinity = std::numeric_limits<Scalar>::infinity();

  std::vector<Scalar> row_potential(n + 1, Scalar(0));
  std::vector<Scalar> col_potential(n + 1, Scalar(0));
  std::vector<Index> col_match(n + 1, 0);  // col -> row (1-based; 0 = free)
  std::vector<Index> previous_col(n + 1, 0);

  for (Index row = 1; row <= n; ++row) {
    col_match[0] = row;
    Index scan_col = 0;
    std::vector<Scalar> min_reduced(n + 1, infinity);
    std::vector<bool> visited(n + 1, false);
    do {
      visited[scan_col] = true;
      const Index scan_row = col_match[scan_col];
      Scalar delta = infinity;
      Index next_col = 0;
      for (Index col = 1; col <= n; ++col) {
        if (visited[col]) continue;
        const Scalar reduced = cost(scan_row - 1, col - 1) -
                               row_potential[scan_row] - col_potential[col];
        if (reduced < min_reduced[col]) {
          min_reduced[col] = reduced;
          previous_col[col] = scan_col;
        }
        if (min_reduced[col] < delta) {
          delta = min_reduced[col];
          next_col = col;
        }
      }
      for (Index col = 0; col <= n; ++col) {
        if (visited[col]) {
          row_potential[col_match[col]] += delta;
          col_potential[col] -= delta;
        } else {
          min_reduced[col] -= delta;
        }
      }
      scan_col = next_col;
    } while (col_match[scan_col] != 0);
    while (scan_col != 0) {
      const Index prev = previous_col[scan_col];
      col_match[scan_col] = col_match[prev];
      scan_col = prev;
    }
  }

  std::vector<Index> row_to_col(n, -1);
  for (Index col = 1; col <= n; ++col) {
    if (col_match[col] != 0) {
      row_to_col[col_match[col] - 1] = col - 1;
    }
  }
  return row_to_col;
}

// Pairs extracted endmembers with ground truth by minimizing total SAD, then
// reports per-endmember SAD and RMSE under that single pairing. When
// renormalize is set, extracted abundance columns are rescaled to sum to one
// before the RMSE comparison (the solver does not enforce sum-to-one while
// synthetic ground truth does).
template <typename Scalar>
EvaluationReport<Scalar> match_and_evaluate(
    const Matrix<Scalar>& extracted_endmembers,
    const Matrix<Scalar>& extracted_abundances,
    const EndmemberMatrix<Scalar>& truth_endmembers,
    const AbundanceMatrix<Scalar>& truth_abundances, bool renormalize = true) {
  const Index r = truth_endmembers.count();
  if (extracted_endmembers.cols() != r || extracted_abundances.rows() != r) {
    throw DimensionMismatch("match_and_evaluate: endmember count mismatch");
  }
  if (extracted_endmembers.rows() != truth_endmembers.bands()) {
    throw DimensionMismatch("match_and_evaluate: band count mismatch");
  }
  if (extracted_abundances.cols() != truth_abundances.pixels()) {
    throw DimensionMismatch("match_and_evaluate: pixel count mismatch");
  }
  if (truth_abundances.count() != r) {
    throw DimensionMismatch("match_and_evaluate: truth r mismatch");
  }

  Matrix<Scalar> cost(r, r);
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < r; ++j) {
      cost(i, j) = sad(extracted_endmembers.col(i), truth_endmembers.data().col(j));
    }
  }

  EvaluationReport<Scalar> report;
  report.assignment = min_cost_assignment(cost);

  Matrix<Scalar> abundances = extracted_abundances;
  if (renormalize) {
    for (Index j = 0; j < abundances.cols(); ++j) {
      const Scalar total = abundances.col(j).sum();
      if (total > Scalar(0)) {
        abundances.col(j) /= total;
      }
    }
  }

  report.sad_per_endmember.assign(static_cast<std::size_t>(r), Scalar(0));
  report.rmse_per_endmember.assign(static_cast<std::size_t>(r), Scalar(0));
  for (Index i = 0; i < r; ++i) {
    const Index j = report.assignment[i];
    report.sad_per_endmember[j] = cost(i, j);
    report.rmse_per_endmember[j] =
        rmse(abundances.row(i).transpose(), truth_abundances.data().row(j).transpose());
  }
  Scalar sad_sum = Scalar(0);
  Scalar rmse_sum = Scalar(0);
  for (Index j = 0; j < r; ++j) {
    sad_sum += report.sad_per_endmember[j];
    rmse_sum += report.rmse_per_endmember[j];
  }
  report.sad_average = sad_sum / Scalar(r);
  report.rmse_average = rmse_sum / Scalar(r);
  return report;
}

template <typename Scalar>
EvaluationReport<Scalar> match_and_evaluate(
    const UnmixResult<Scalar>& result,
    const EndmemberMatrix<Scalar>& truth_endmembers,
    const AbundanceMatrix<Scalar>& truth_abundances, bool renormalize = true) {
  return match_and_evaluate(result.endmembers.data(), result.abundances.data(),
                            truth_endmembers, truth_abundances, renormalize);
}

}  // namespace kbsnmf
