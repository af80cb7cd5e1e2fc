#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "kbsnmf/errors.hpp"

namespace kbsnmf {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

// Floor used for denominators and factor entries unless a config overrides it.
inline constexpr double default_epsilon_guard = 1e-12;

enum class Variant { fnorm, div };
enum class InitMethod { nndsvd, random };
enum class NndsvdFill { zeros, mean_div_100, random_small };
enum class TerminationReason { max_iters, tolerance };

inline const char* to_string(Variant v) {
  return v == Variant::fnorm ? "fnorm" : "div";
}
inline const char* to_string(InitMethod m) {
  return m == InitMethod::nndsvd ? "nndsvd" : "random";
}
inline const char* to_string(NndsvdFill f) {
  switch (f) {
    case NndsvdFill::zeros: return "zeros";
    case NndsvdFill::mean_div_100: return "mean_div_100";
    default: return "random_small";
  }
}
inline const char* to_string(TerminationReason t) {
  return t == TerminationReason::max_iters ? "max_iters" : "tolerance";
}

namespace detail {

template <typename Scalar>
bool all_finite(const Matrix<Scalar>& m) {
  return m.allFinite();
}

}  // namespace detail

// Observed HSI data matrix X (bands x pixels) plus the spatial raster shape.
// Pixel j corresponds to raster position (row_px, col_px) with
// j = row_px * cols_px + col_px. Entries must be finite; negative values are
// permitted so that noisy scenes can be represented without clamping.
template <typename Scalar>
class SpectralCube {
 public:
  SpectralCube(Matrix<Scalar> data, Index rows_px, Index cols_px,
               std::vector<Scalar> wavelengths = {},
               std::vector<std::string> band_names = {})
      : data_(std::move(data)),
        rows_px_(rows_px),
        cols_px_(cols_px),
        wavelengths_(std::move(wavelengths)),
        band_names_(std::move(band_names)) {
    if (rows_px_ <= 0 || cols_px_ <= 0) {
      throw DimensionMismatch("SpectralCube: spatial shape must be positive");
    }
    if (rows_px_ * cols_px_ != data_.cols()) {
      throw DimensionMismatch(
          "SpectralCube: rows_px * cols_px = " +
          std::to_string(rows_px_ * cols_px_) + " does not match pixel count " +
          std::to_string(data_.cols()));
    }
    if (!detail::all_finite(data_)) {
      throw NonFiniteValue("SpectralCube: data contains non-finite entries");
    }
    if (!wavelengths_.empty()) {
      if (static_cast<Index>(wavelengths_.size()) != data_.rows()) {
        throw DimensionMismatch("SpectralCube: wavelengths length != bands");
      }
      for (std::size_t i = 1; i < wavelengths_.size(); ++i) {
        if (!(wavelengths_[i] > wavelengths_[i - 1])) {
          throw DomainError("SpectralCube: wavelengths not strictly increasing");
        }
      }
    }
    if (!band_names_.empty() &&
        static_cast<Index>(band_names_.size()) != data_.rows()) {
      throw DimensionMismatch("SpectralCube: band_names length != bands");
    }
  }

  const Matrix<Scalar>& data() const { return data_; }
  Index bands() const { return data_.rows(); }
  Index pixels() const { return data_.cols(); }
  Index rows_px() const { return rows_px_; }
  Index cols_px() const { return cols_px_; }
  const std::vector<Scalar>& wavelengths() const { return wavelengths_; }
  const std::vector<std::string>& band_names() const { return band_names_; }

  // Spatial image of one band, rows_px x cols_px.
  Matrix<Scalar> band_image(Index band) const {
    if (band < 0 || band >= bands()) {
      throw DimensionMismatch("band_image: band index out of range");
    }
    Matrix<Scalar> img(rows_px_, cols_px_);
    for (Index row = 0; row < rows_px_; ++row) {
      for (Index col = 0; col < cols_px_; ++col) {
        img(row, col) = data_(band, row * cols_px_ + col);
      }
    }
    return img;
  }

  // Inverse of band_image over all bands; round-trip is bit-exact.
  static SpectralCube from_band_images(const std::vector<Matrix<Scalar>>& images,
                                       std::vector<Scalar> wavelengths = {},
                                       std::vector<std::string> band_names = {}) {
    if (images.empty()) {
      throw DimensionMismatch("from_band_images: no bands");
    }
    const Index rows = images.front().rows();
    const Index cols = images.front().cols();
    Matrix<Scalar> data(static_cast<Index>(images.size()), rows * cols);
    for (std::size_t b = 0; b < images.size(); ++b) {
      if (images[b].rows() != rows || images[b].cols() != cols) {
        throw DimensionMismatch("from_band_images: inconsistent image shapes");
      }
      for (Index row = 0; row < rows; ++row) {
        for (Index col = 0; col < cols; ++col) {
          data(static_cast<Index>(b), row * cols + col) = images[b](row, col);
        }
      }
    }
    return SpectralCube(std::move(data), rows, cols, std::move(wavelengths),
                        std::move(band_names));
  }

 private:
  Matrix<Scalar> data_;
  Index rows_px_;
  Index cols_px_;
  std::vector<Scalar> wavelengths_;
  std::vector<std::string> band_names_;
};

// Endmember matrix A (bands x r), one column per endmember spectrum.
// Entries are finite and nonnegative and no column is identically zero.
// Passing clamp_floor > 0 lifts every entry below the floor up to it before
// validation (multiplicative updates freeze at exact zeros).
template <typename Scalar>
class EndmemberMatrix {
 public:
  explicit EndmemberMatrix(Matrix<Scalar> data,
                           std::vector<std::string> names = {},
                           Scalar clamp_floor = Scalar(0))
      : data_(std::move(data)), names_(std::move(names)) {
    if (data_.rows() < 1 || data_.cols() < 1) {
      throw DimensionMismatch("EndmemberMatrix: empty matrix");
    }
    if (clamp_floor > Scalar(0)) {
      data_ = data_.cwiseMax(clamp_floor);
    }
    if (!detail::all_finite(data_)) {
      throw NonFiniteValue("EndmemberMatrix: non-finite entries");
    }
    if ((data_.array() < Scalar(0)).any()) {
      throw DomainError("EndmemberMatrix: negative entries");
    }
    for (Index i = 0; i < data_.cols(); ++i) {
      if (data_.col(i).maxCoeff() <= Scalar(0)) {
        throw DegenerateSignal("EndmemberMatrix: column " + std::to_string(i) +
                               " is identically zero");
      }
    }
    if (!names_.empty() && static_cast<Index>(names_.size()) != data_.cols()) {
      throw DimensionMismatch("EndmemberMatrix: names length != columns");
    }
  }

  const Matrix<Scalar>& data() const { return data_; }
  Index bands() const { return data_.rows(); }
  Index count() const { return data_.cols(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  Matrix<Scalar> data_;
  std::vector<std::string> names_;
};

// Abundance matrix S (r x pixels); finite, nonnegative fractions. Column sums
// are near 1 only when produced by the synth module or explicitly
// renormalized; the solvers do not enforce sum-to-one.
template <typename Scalar>
class AbundanceMatrix {
 public:
  explicit AbundanceMatrix(Matrix<Scalar> data, Scalar clamp_floor = Scalar(0))
      : data_(std::move(data)) {
    if (data_.rows() < 1 || data_.cols() < 1) {
      throw DimensionMismatch("AbundanceMatrix: empty matrix");
    }
    if (clamp_floor > Scalar(0)) {
      data_ = data_.cwiseMax(clamp_floor);
    }
    if (!detail::all_finite(data_)) {
      throw NonFiniteValue("AbundanceMatrix: non-finite entries");
    }
    if ((data_.array() < Scalar(0)).any()) {
      throw DomainError("AbundanceMatrix: negative entries");
    }
  }

  const Matrix<Scalar>& data() const { return data_; }
  Index count() const { return data_.rows(); }
  Index pixels() const { return data_.cols(); }

 private:
  Matrix<Scalar> data_;
};

// Named collection of reference spectra (bands x count), e.g. a spectral
// library or the ground-truth endmembers of a synthetic scene.
template <typename Scalar>
class SpectraCollection {
 public:
  SpectraCollection(Matrix<Scalar> data, std::vector<std::string> names)
      : data_(std::move(data)), names_(std::move(names)) {
    if (data_.rows() < 1 || data_.cols() < 1) {
      throw DimensionMismatch("SpectraCollection: empty");
    }
    if (static_cast<Index>(names_.size()) != data_.cols()) {
      throw DimensionMismatch("SpectraCollection: names length != spectra");
    }
    if (!detail::all_finite(data_)) {
      throw NonFiniteValue("SpectraCollection: non-finite entries");
    }
    if ((data_.array() < Scalar(0)).any()) {
      throw DomainError("SpectraCollection: negative entries");
    }
  }

  const Matrix<Scalar>& data() const { return data_; }
  Index bands() const { return data_.rows(); }
  Index count() const { return data_.cols(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  Matrix<Scalar> data_;
  std::vector<std::string> names_;
};

// Solver configuration shared by the baseline and KbSNMF solvers.
//
// gamma/theta defaults follow the fnorm variant; defaults_for() applies the
// div variant's published values. divide_by_std selects the normalization
// divisor (standard deviation, the unit-variance form) versus the literal
// variance wording; stop_on_fit_only makes the termination statistic use the
// data-fit term instead of the full objective.
template <typename Scalar>
struct SolverConfig {
  Variant variant = Variant::fnorm;
  Scalar gamma = Scalar(3);
  Scalar theta = Scalar(0.4);
  int t_max = 1000;
  Scalar c_min = Scalar(1e-5);
  InitMethod init = InitMethod::nndsvd;
  std::uint64_t seed = 0;
  Scalar epsilon_guard = Scalar(default_epsilon_guard);
  bool compensate_normalization = true;
  bool divide_by_std = true;
  bool stop_on_fit_only = false;
  NndsvdFill nndsvd_fill = NndsvdFill::mean_div_100;

  static SolverConfig defaults_for(Variant v) {
    SolverConfig cfg;
    cfg.variant = v;
    if (v == Variant::div) {
      cfg.gamma = Scalar(8);
      cfg.theta = Scalar(0.4);
    }
    return cfg;
  }

  void validate() const {
    if (!(theta >= Scalar(0) && theta <= Scalar(1))) {
      throw InvalidTheta("SolverConfig: theta must be in [0, 1]");
    }
    if (!(gamma >= Scalar(0))) {
      throw InvalidConfig("SolverConfig: gamma must be >= 0");
    }
    if (t_max < 1) {
      throw InvalidConfig("SolverConfig: t_max must be >= 1");
    }
    if (!(c_min > Scalar(0))) {
      throw InvalidConfig("SolverConfig: c_min must be > 0");
    }
    if (!(epsilon_guard > Scalar(0))) {
      throw InvalidConfig("SolverConfig: epsilon_guard must be > 0");
    }
  }
};

// Final factors plus per-iteration traces. Trace vectors hold
// iterations_run + 1 values; index 0 is the initial point.
// kurtosis_trace stores the average excess kurtosis of A's columns.
template <typename Scalar>
struct UnmixResult {
  EndmemberMatrix<Scalar> endmembers;
  AbundanceMatrix<Scalar> abundances;
  std::vector<Scalar> objective_trace;
  std::vector<Scalar> fit_trace;
  std::vector<Scalar> kurtosis_trace;
  int iterations_run = 0;
  TerminationReason termination = TerminationReason::max_iters;
  std::int64_t denominator_floor_count = 0;
  std::int64_t input_clamp_count = 0;
};

// Checks that X is n x m, A is n x r and S is r x m with matching n, m, r.
template <typename Scalar>
void validate_dimensions(const SpectralCube<Scalar>& cube,
                         const EndmemberMatrix<Scalar>& endmembers,
                         const AbundanceMatrix<Scalar>& abundances) {
  if (endmembers.bands() != cube.bands()) {
    throw DimensionMismatch(
        "dimension mismatch on n: cube has " + std::to_string(cube.bands()) +
        " bands, endmembers have " + std::to_string(endmembers.bands()));
  }
  if (abundances.pixels() != cube.pixels()) {
    throw DimensionMismatch(
        "dimension mismatch on m: cube has " + std::to_string(cube.pixels()) +
        " pixels, abundances have " + std::to_string(abundances.pixels()));
  }
  if (endmembers.count() != abundances.count()) {
    throw DimensionMismatch(
        "dimension mismatch on r: endmembers have " +
        std::to_string(endmembers.count()) + " columns, abundances have " +
        std::to_string(abundances.count()) + " rows");
  }
}

}  // namespace kbsnmf
