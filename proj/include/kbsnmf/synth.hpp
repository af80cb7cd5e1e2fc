#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "kbsnmf/errors.hpp"
#include "kbsnmf/rng.hpp"
#include "kbsnmf/types.hpp"

namespace kbsnmf {

// Parameters of a synthetic scene. field_scale is the Gaussian-field
// correlation length in pixels; contrast scales the log-abundance field
// (1 = unit marginal variance); purity < 1 caps the largest per-pixel share.
// band_selection, when non-empty, picks that subset of library bands;
// endmember_names, when non-empty, picks spectra by name instead of taking
// the first r.
template <typename Scalar>
struct SynthSpec {
  Index r = 3;
  Index rows_px = 64;
  Index cols_px = 64;
  Scalar field_scale = Scalar(8);
  Scalar purity = Scalar(1);
  Scalar contrast = Scalar(1);
  std::uint64_t seed = 0;
  std::vector<Index> band_selection;
  std::vector<std::string> endmember_names;

  void validate() const {
    if (r < 1) throw InvalidSpec("SynthSpec: r must be >= 1");
    if (rows_px < 1 || cols_px < 1) {
      throw InvalidSpec("SynthSpec: spatial size must be positive");
    }
    if (!(field_scale > Scalar(0))) {
      throw InvalidSpec("SynthSpec: field_scale must be > 0");
    }
    if (!(purity > Scalar(0) && purity <= Scalar(1))) {
      throw InvalidSpec("SynthSpec: purity must be in (0, 1]");
    }
    if (purity * Scalar(r) < Scalar(1)) {
      throw InvalidSpec("SynthSpec: purity below 1/r is infeasible");
    }
    if (!(contrast > Scalar(0))) {
      throw InvalidSpec("SynthSpec: contrast must be > 0");
    }
  }
};

namespace detail {

template <typename Scalar>
Vector<Scalar> gaussian_taps(Scalar sigma, Index max_radius) {
  const Index radius = std::min<Index>(
      max_radius, static_cast<Index>(std::ceil(3.0 * double(sigma))));
  Vector<Scalar> taps(2 * std::max<Index>(radius, 0) + 1);
  for (Index k = -radius; k <= radius; ++k) {
    taps(k + radius) = std::exp(-Scalar(k) * Scalar(k) /
                                (Scalar(2) * sigma * sigma));
  }
  return taps;
}

// Renormalized Gaussian blur along the row index of f (taps that fall
// outside the image are dropped and the remaining mass rescaled to 1).
template <typename Scalar>
Matrix<Scalar> blur_down_columns(const Matrix<Scalar>& f,
                                 const Vector<Scalar>& taps) {
  const Index size = f.rows();
  const Index radius = (taps.size() - 1) / 2;
  Matrix<Scalar> out(f.rows(), f.cols());
  for (Index j = 0; j < f.cols(); ++j) {
    for (Index i = 0; i < size; ++i) {
      const Index lo = std::max<Index>(0, i - radius);
      const Index hi = std::min<Index>(size - 1, i + radius);
      Scalar acc = Scalar(0);
      Scalar mass = Scalar(0);
      for (Index p = lo; p <= hi; ++p) {
        const Scalar w = taps(p - i + radius);
        acc += w * f(p, j);
        mass += w;
      }
      out(i, j) = acc / mass;
    }
  }
  return out;
}

// Variance shrink factor of the renormalized blur at the center pixel; the
// field is rescaled by its inverse square root so its marginal variance is
// scale-independent.
template <typename Scalar>
Scalar blur_center_weight_sq(Index size, const Vector<Scalar>& taps) {
  const Index radius = (taps.size() - 1) / 2;
  const Index center = (size - 1) / 2;
  const Index lo = std::max<Index>(0, center - radius);
  const Index hi = std::min<Index>(size - 1, center + radius);
  Scalar mass = Scalar(0);
  Scalar mass_sq = Scalar(0);
  for (Index p = lo; p <= hi; ++p) {
    const Scalar w = taps(p - center + radius);
    mass += w;
    mass_sq += w * w;
  }
  return mass_sq / (mass * mass);
}

}  // namespace detail

// Gaussian-random-field abundances: per endmember, white noise smoothed by an
// isotropic Gaussian kernel of width field_scale, rescaled to unit marginal
// variance times contrast, exponentiated, and normalized per pixel to sum to
// one. With purity < 1 each pixel is mixed toward the uniform share vector
// just enough to cap its largest share at purity.
template <typename Scalar>
AbundanceMatrix<Scalar> generate_abundances(const SynthSpec<Scalar>& spec) {
  spec.validate();
  const Index rows = spec.rows_px;
  const Index cols = spec.cols_px;
  const Index m = rows * cols;
  const Index r = spec.r;

  Rng rng(spec.seed);
  const Vector<Scalar> taps_v =
      detail::gaussian_taps(spec.field_scale, rows - 1);
  const Vector<Scalar> taps_h =
      detail::gaussian_taps(spec.field_scale, cols - 1);
  const Scalar shrink = detail::blur_center_weight_sq(rows, taps_v) *
                        detail::blur_center_weight_sq(cols, taps_h);
  const Scalar gain = spec.contrast / std::sqrt(shrink);

  // fields(i, j): log-share of endmember i at pixel j (row-major raster).
  Matrix<Scalar> fields(r, m);
  for (Index e = 0; e < r; ++e) {
    Matrix<Scalar> noise(rows, cols);
    for (Index row = 0; row < rows; ++row) {
      for (Index col = 0; col < cols; ++col) {
        noise(row, col) = Scalar(rng.normal());
      }
    }
    Matrix<Scalar> smooth = detail::blur_down_columns(noise, taps_v);
    smooth = Matrix<Scalar>(smooth.transpose());
    smooth = Matrix<Scalar>(detail::blur_down_columns(smooth, taps_h).transpose());
    for (Index row = 0; row < rows; ++row) {
      for (Index col = 0; col < cols; ++col) {
        fields(e, row * cols + col) = gain * smooth(row, col);
      }
    }
  }

  Matrix<Scalar> shares(r, m);
  const Scalar uniform_share = Scalar(1) / Scalar(r);
  for (Index j = 0; j < m; ++j) {
    const Scalar peak = fields.col(j).maxCoeff();
    Vector<Scalar> p = (fields.col(j).array() - peak).exp();
    p /= p.sum();
    if (spec.purity < Scalar(1)) {
      const Scalar p_max = p.maxCoeff();
      if (p_max > spec.purity) {
        const Scalar lambda =
            (spec.purity - uniform_share) / (p_max - uniform_share);
        p = lambda * p + Vector<Scalar>::Constant(r, (Scalar(1) - lambda) *
                                                         uniform_share);
      }
    }
    shares.col(j) = p / p.sum();
  }
  return AbundanceMatrix<Scalar>(std::move(shares));
}

// Noise-free synthetic scene X = A * S over library spectra, returned with
// its ground truth.
template <typename Scalar>
std::tuple<SpectralCube<Scalar>, EndmemberMatrix<Scalar>, AbundanceMatrix<Scalar>>
generate_cube(const SynthSpec<Scalar>& spec,
              const SpectraCollection<Scalar>& library) {
  spec.validate();
  if (spec.r > library.count()) {
    throw LibraryTooSmall("generate_cube: library has " +
                          std::to_string(library.count()) +
                          " spectra, scene needs " + std::to_string(spec.r));
  }

  std::vector<Index> spectra_indices;
  if (spec.endmember_names.empty()) {
    for (Index i = 0; i < spec.r; ++i) spectra_indices.push_back(i);
  } else {
    if (static_cast<Index>(spec.endmember_names.size()) != spec.r) {
      throw InvalidSpec("generate_cube: endmember_names length != r");
    }
    for (const std::string& name : spec.endmember_names) {
      const auto& names = library.names();
      const auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) {
        throw InvalidSpec("generate_cube: no library spectrum named " + name);
      }
      spectra_indices.push_back(it - names.begin());
    }
  }

  std::vector<Index> bands;
  if (spec.band_selection.empty()) {
    for (Index b = 0; b < library.bands(); ++b) bands.push_back(b);
  } else {
    for (Index b : spec.band_selection) {
      if (b < 0 || b >= library.bands()) {
        throw LibraryTooSmall("generate_cube: band index " + std::to_string(b) +
                              " outside library range");
      }
      bands.push_back(b);
    }
  }

  Matrix<Scalar> spectra(static_cast<Index>(bands.size()), spec.r);
  std::vector<std::string> names;
  for (Index c = 0; c < spec.r; ++c) {
    for (std::size_t b = 0; b < bands.size(); ++b) {
      spectra(static_cast<Index>(b), c) =
          library.data()(bands[b], spectra_indices[c]);
    }
    names.push_back(library.names()[spectra_indices[c]]);
  }

  EndmemberMatrix<Scalar> truth_endmembers(std::move(spectra), std::move(names));
  AbundanceMatrix<Scalar> truth_abundances = generate_abundances(spec);
  Matrix<Scalar> X = truth_endmembers.data() * truth_abundances.data();
  SpectralCube<Scalar> cube(std::move(X), spec.rows_px, spec.cols_px);
  return {std::move(cube), std::move(truth_endmembers),
          std::move(truth_abundances)};
}

// Adds zero-mean white Gaussian noise at the requested SNR. Signal power is
// the pixel-average of x^T x / n; noise variance is that power divided by
// 10^(snr_db / 10). snr_db = +infinity is the no-noise sentinel. Negative
// entries produced by the noise are preserved unless clamp_negatives is set.
template <typename Scalar>
SpectralCube<Scalar> add_noise(const SpectralCube<Scalar>& cube, Scalar snr_db,
                               std::uint64_t seed,
                               bool clamp_negatives = false) {
  if (std::isinf(double(snr_db)) && snr_db > Scalar(0)) {
    return cube;
  }
  const Index n = cube.bands();
  const Index m = cube.pixels();
  const Scalar signal_power =
      cube.data().squaredNorm() / (Scalar(n) * Scalar(m));
  const Scalar sigma =
      std::sqrt(signal_power / std::pow(Scalar(10), snr_db / Scalar(10)));

  Rng rng(seed);
  Matrix<Scalar> noisy = cube.data();
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < n; ++i) {
      noisy(i, j) += sigma * Scalar(rng.normal());
    }
  }
  if (clamp_negatives) {
    noisy = noisy.cwiseMax(Scalar(0));
  }
  return SpectralCube<Scalar>(std::move(noisy), cube.rows_px(), cube.cols_px(),
                              cube.wavelengths(), cube.band_names());
}

namespace detail {

struct SpectrumBump {
  double center;  // position in [0, 1] along the band axis
  double width;
  double amplitude;  // negative values carve absorption features
};

struct SpectrumRecipe {
  const char* name;
  double base_start;
  double base_end;
  std::vector<SpectrumBump> bumps;
};

// Flat continua with strong narrow features: strongly super-Gaussian value
// distributions (column kurtosis ~7-12) and mutual spectral angles well above
// 0.5 rad, the regime the kurtosis prior is designed for.
inline const std::vector<SpectrumRecipe>& bundled_recipes() {
  static const std::vector<SpectrumRecipe> recipes = {
      {"Seawater", 0.200, 0.120, {{0.07, 0.022, 0.40}, {0.13, 0.012, 0.22}}},
      {"Clintonite", 0.300, 0.380, {{0.30, 0.018, 0.42}, {0.36, 0.010, 0.24}, {0.74, 0.028, 0.34}}},
      {"Sodiumbicarbonate", 0.420, 0.330, {{0.47, 0.014, 0.46}, {0.52, 0.009, 0.26}, {0.90, 0.020, 0.38}}},
      {"Alunite", 0.330, 0.420, {{0.22, 0.015, 0.44}, {0.58, 0.022, 0.36}, {0.63, 0.011, 0.20}}},
      {"Andradite", 0.380, 0.300, {{0.16, 0.011, 0.34}, {0.40, 0.020, 0.44}, {0.82, 0.013, 0.28}}},
      {"Buddingtonite", 0.260, 0.340, {{0.27, 0.013, 0.40}, {0.68, 0.016, 0.48}, {0.95, 0.011, 0.24}}},
      {"Dumortierite", 0.350, 0.240, {{0.10, 0.016, 0.42}, {0.49, 0.011, 0.32}, {0.77, 0.022, 0.40}}},
      {"Kaolinite", 0.400, 0.480, {{0.33, 0.011, 0.44}, {0.55, 0.015, 0.28}, {0.86, 0.017, 0.38}}},
      {"Muscovite", 0.240, 0.320, {{0.19, 0.020, 0.40}, {0.44, 0.009, 0.30}, {0.71, 0.013, 0.46}}},
      {"Montmorillonite", 0.440, 0.320, {{0.24, 0.011, 0.36}, {0.61, 0.017, 0.42}, {0.93, 0.013, 0.32}}},
      {"Nontronite", 0.290, 0.390, {{0.13, 0.013, 0.38}, {0.52, 0.022, 0.46}, {0.80, 0.009, 0.26}}},
      {"Pyrope", 0.370, 0.220, {{0.37, 0.015, 0.48}, {0.65, 0.011, 0.34}, {0.88, 0.022, 0.30}}},
      {"Sphene", 0.270, 0.430, {{0.05, 0.011, 0.32}, {0.42, 0.013, 0.42}, {0.59, 0.016, 0.24}}},
      {"Chalcedony", 0.310, 0.360, {{0.29, 0.009, 0.28}, {0.46, 0.017, 0.40}, {0.98, 0.015, 0.36}}},
  };
  return recipes;
}

}  // namespace detail

// Built-in stand-in spectral library: smooth analytic reflectance curves
// (linear baseline plus Gaussian features) over 1024 bands, strictly
// positive, mutually separated in spectral angle. The first three carry the
// names used by the simulated-study scenes.
template <typename Scalar>
SpectraCollection<Scalar> bundled_library(Index bands = 1024) {
  if (bands < 2) {
    throw InvalidSpec("bundled_library: bands must be >= 2");
  }
  const auto& recipes = detail::bundled_recipes();
  Matrix<Scalar> data(bands, static_cast<Index>(recipes.size()));
  std::vector<std::string> names;
  for (std::size_t s = 0; s < recipes.size(); ++s) {
    const auto& recipe = recipes[s];
    names.push_back(recipe.name);
    for (Index b = 0; b < bands; ++b) {
      const double t = double(b) / double(bands - 1);
      double value = recipe.base_start + (recipe.base_end - recipe.base_start) * t;
      for (const auto& bump : recipe.bumps) {
        const double d = (t - bump.center) / bump.width;
        value += bump.amplitude * std::exp(-0.5 * d * d);
      }
      data(b, static_cast<Index>(s)) =
          Scalar(std::clamp(value, 0.005, 1.0));
    }
  }
  return SpectraCollection<Scalar>(std::move(data), std::move(names));
}

}  // namespace kbsnmf
