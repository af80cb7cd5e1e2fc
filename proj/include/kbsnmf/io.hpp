#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kbsnmf/errors.hpp"
#include "kbsnmf/metrics.hpp"
#include "kbsnmf/types.hpp"

namespace kbsnmf {

// Binary cube format: magic "HSB1"; three little-endian uint32 fields
// n_bands, rows_px, cols_px; n_bands * rows_px * cols_px little-endian
// float32 values in band-sequential order (band-major, raster row-major
// pixels); then an optional metadata block as uint32 byte length followed by
// UTF-8 key=value lines (wavelengths, band_names).
inline constexpr char cube_magic[4] = {'H', 'S', 'B', '1'};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t value) {
  const unsigned char bytes[4] = {
      static_cast<unsigned char>(value & 0xff),
      static_cast<unsigned char>((value >> 8) & 0xff),
      static_cast<unsigned char>((value >> 16) & 0xff),
      static_cast<unsigned char>((value >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(bytes), 4);
}

inline void put_f32(std::ostream& os, float value) {
  std::uint32_t bits;
  std::memcpy(&bits, &value, 4);
  put_u32(os, bits);
}

class ByteReader {
 public:
  ByteReader(const unsigned char* data, std::size_t size)
      : data_(data), size_(size) {}

  std::uint32_t u32() {
    require(4);
    const std::uint32_t value =
        std::uint32_t(data_[pos_]) | (std::uint32_t(data_[pos_ + 1]) << 8) |
        (std::uint32_t(data_[pos_ + 2]) << 16) |
        (std::uint32_t(data_[pos_ + 3]) << 24);
    pos_ += 4;
    return value;
  }

  float f32() {
    const std::uint32_t bits = u32();
    float value;
    std::memcpy(&value, &bits, 4);
    return value;
  }

  std::string bytes(std::size_t count) {
    require(count);
    std::string out(reinterpret_cast<const char*>(data_ + pos_), count);
    pos_ += count;
    return out;
  }

  std::size_t remaining() const { return size_ - pos_; }

 private:
  void require(std::size_t count) const {
    if (pos_ + count > size_) {
      throw TruncatedFile("cube file shorter than its header promises");
    }
  }

  const unsigned char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

inline std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw TruncatedFile("cannot open " + path.string());
  }
  std::vector<unsigned char> buffer(
      (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return buffer;
}

template <typename Scalar>
std::string format_value(Scalar value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", double(value));
  return buf;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

template <typename Scalar>
Scalar parse_number(const std::string& cell, std::size_t line_number) {
  try {
    std::size_t consumed = 0;
    const double value = std::stod(cell, &consumed);
    while (consumed < cell.size() &&
           (cell[consumed] == ' ' || cell[consumed] == '\r')) {
      ++consumed;
    }
    if (consumed != cell.size()) {
      throw std::invalid_argument(cell);
    }
    return Scalar(value);
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_number) +
                     ": cannot parse value '" + cell + "'");
  }
}

}  // namespace detail

template <typename Scalar>
void write_cube(const std::filesystem::path& path,
                const SpectralCube<Scalar>& cube) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw WriteFailure("cannot open " + path.string() + " for writing");
  }
  out.write(cube_magic, 4);
  detail::put_u32(out, static_cast<std::uint32_t>(cube.bands()));
  detail::put_u32(out, static_cast<std::uint32_t>(cube.rows_px()));
  detail::put_u32(out, static_cast<std::uint32_t>(cube.cols_px()));
  for (Index band = 0; band < cube.bands(); ++band) {
    for (Index pixel = 0; pixel < cube.pixels(); ++pixel) {
      detail::put_f32(out, static_cast<float>(cube.data()(band, pixel)));
    }
  }
  std::string metadata;
  if (!cube.wavelengths().empty()) {
    metadata += "wavelengths=";
    for (std::size_t i = 0; i < cube.wavelengths().size(); ++i) {
      if (i > 0) metadata += ',';
      metadata += detail::format_value(cube.wavelengths()[i]);
    }
    metadata += '\n';
  }
  if (!cube.band_names().empty()) {
    metadata += "band_names=";
    for (std::size_t i = 0; i < cube.band_names().size(); ++i) {
      if (i > 0) metadata += ',';
      metadata += cube.band_names()[i];
    }
    metadata += '\n';
  }
  if (!metadata.empty()) {
    detail::put_u32(out, static_cast<std::uint32_t>(metadata.size()));
    out.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  }
  if (!out) {
    throw WriteFailure("failed while writing " + path.string());
  }
}

template <typename Scalar>
SpectralCube<Scalar> read_cube(const std::filesystem::path& path) {
  const std::vector<unsigned char> buffer = detail::slurp(path);
  detail::ByteReader reader(buffer.data(), buffer.size());

  const std::string magic = reader.bytes(4);
  if (std::memcmp(magic.data(), cube_magic, 4) != 0) {
    throw BadMagic("not a cube file: bad magic in " + path.string());
  }
  const std::uint32_t bands = reader.u32();
  const std::uint32_t rows = reader.u32();
  const std::uint32_t cols = reader.u32();
  if (bands == 0 || rows == 0 || cols == 0) {
    throw TruncatedFile("cube header declares an empty cube");
  }

  Matrix<Scalar> data(static_cast<Index>(bands),
                      static_cast<Index>(rows) * static_cast<Index>(cols));
  for (Index band = 0; band < data.rows(); ++band) {
    for (Index pixel = 0; pixel < data.cols(); ++pixel) {
      const float value = reader.f32();
      if (!std::isfinite(value)) {
        throw NonFiniteValue("cube contains a non-finite value");
      }
      data(band, pixel) = Scalar(value);
    }
  }

  std::vector<Scalar> wavelengths;
  std::vector<std::string> band_names;
  if (reader.remaining() > 0) {
    const std::uint32_t metadata_size = reader.u32();
    const std::string metadata = reader.bytes(metadata_size);
    std::istringstream lines(metadata);
    std::string line;
    while (std::getline(lines, line)) {
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(0, eq);
      const std::vector<std::string> cells =
          detail::split(line.substr(eq + 1), ',');
      if (key == "wavelengths") {
        for (const std::string& cell : cells) {
          wavelengths.push_back(detail::parse_number<Scalar>(cell, 0));
        }
      } else if (key == "band_names") {
        band_names.assign(cells.begin(), cells.end());
      }
    }
  }

  return SpectralCube<Scalar>(std::move(data), static_cast<Index>(rows),
                              static_cast<Index>(cols), std::move(wavelengths),
                              std::move(band_names));
}

// Spectra text format: "band_index,Name1,Name2,..." header, then one line per
// band with values at 9 significant digits.
template <typename Scalar>
void write_spectra(const std::filesystem::path& path,
                   const SpectraCollection<Scalar>& spectra) {
  std::ofstream out(path);
  if (!out) {
    throw WriteFailure("cannot open " + path.string() + " for writing");
  }
  out << "band_index";
  for (const std::string& name : spectra.names()) {
    if (name.find(',') != std::string::npos ||
        name.find('\n') != std::string::npos) {
      throw WriteFailure("spectrum name contains a separator: " + name);
    }
    out << ',' << name;
  }
  out << '\n';
  for (Index band = 0; band < spectra.bands(); ++band) {
    out << band;
    for (Index s = 0; s < spectra.count(); ++s) {
      out << ',' << detail::format_value(spectra.data()(band, s));
    }
    out << '\n';
  }
  if (!out) {
    throw WriteFailure("failed while writing " + path.string());
  }
}

template <typename Scalar>
SpectraCollection<Scalar> read_spectra(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("line 1: empty spectra file");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = detail::split(line, ',');
  if (header.size() < 2 || header[0] != "band_index") {
    throw ParseError("line 1: expected header 'band_index,Name1,...'");
  }
  std::vector<std::string> names(header.begin() + 1, header.end());
  const std::size_t columns = header.size();

  std::vector<std::vector<Scalar>> rows;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = detail::split(line, ',');
    if (cells.size() != columns) {
      throw RaggedRows("line " + std::to_string(line_number) + ": expected " +
                       std::to_string(columns) + " columns, found " +
                       std::to_string(cells.size()));
    }
    std::vector<Scalar> values;
    values.reserve(columns - 1);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      values.push_back(detail::parse_number<Scalar>(cells[c], line_number));
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) {
    throw ParseError("line 1: spectra file has no data rows");
  }

  Matrix<Scalar> data(static_cast<Index>(rows.size()),
                      static_cast<Index>(columns - 1));
  for (std::size_t b = 0; b < rows.size(); ++b) {
    for (std::size_t s = 0; s + 1 < columns; ++s) {
      data(static_cast<Index>(b), static_cast<Index>(s)) = rows[b][s];
    }
  }
  return SpectraCollection<Scalar>(std::move(data), std::move(names));
}

template <typename Scalar>
nlohmann::json config_to_json(const SolverConfig<Scalar>& cfg) {
  return nlohmann::json{
      {"variant", to_string(cfg.variant)},
      {"gamma", double(cfg.gamma)},
      {"theta", double(cfg.theta)},
      {"t_max", cfg.t_max},
      {"c_min", double(cfg.c_min)},
      {"init", to_string(cfg.init)},
      {"seed", cfg.seed},
      {"epsilon_guard", double(cfg.epsilon_guard)},
      {"compensate_normalization", cfg.compensate_normalization},
      {"divide_by_std", cfg.divide_by_std},
      {"stop_on_fit_only", cfg.stop_on_fit_only},
      {"nndsvd_fill", to_string(cfg.nndsvd_fill)}};
}

template <typename Scalar>
SolverConfig<Scalar> config_from_json(const nlohmann::json& j) {
  SolverConfig<Scalar> cfg;
  const std::string variant = j.at("variant").get<std::string>();
  cfg.variant = variant == "div" ? Variant::div : Variant::fnorm;
  cfg.gamma = Scalar(j.at("gamma").get<double>());
  cfg.theta = Scalar(j.at("theta").get<double>());
  cfg.t_max = j.at("t_max").get<int>();
  cfg.c_min = Scalar(j.at("c_min").get<double>());
  cfg.init = j.at("init").get<std::string>() == "random" ? InitMethod::random
                                                         : InitMethod::nndsvd;
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.epsilon_guard = Scalar(j.at("epsilon_guard").get<double>());
  cfg.compensate_normalization = j.at("compensate_normalization").get<bool>();
  cfg.divide_by_std = j.at("divide_by_std").get<bool>();
  cfg.stop_on_fit_only = j.at("stop_on_fit_only").get<bool>();
  const std::string fill = j.at("nndsvd_fill").get<std::string>();
  cfg.nndsvd_fill = fill == "zeros" ? NndsvdFill::zeros
                    : fill == "random_small" ? NndsvdFill::random_small
                                             : NndsvdFill::mean_div_100;
  return cfg;
}

// Structured run report: config echo, termination info, diagnostics, and the
// evaluation block when ground truth was available.
template <typename Scalar>
void write_report(const std::filesystem::path& path,
                  const SolverConfig<Scalar>& cfg,
                  const UnmixResult<Scalar>& result,
                  const EvaluationReport<Scalar>* evaluation = nullptr) {
  nlohmann::json doc{
      {"config", config_to_json(cfg)},
      {"iterations_run", result.iterations_run},
      {"termination", to_string(result.termination)},
      {"denominator_floor_count", result.denominator_floor_count},
      {"input_clamp_count", result.input_clamp_count}};
  if (evaluation != nullptr) {
    doc["evaluation"] = {
        {"assignment", evaluation->assignment},
        {"sad_per_endmember", evaluation->sad_per_endmember},
        {"sad_average", evaluation->sad_average},
        {"rmse_per_endmember", evaluation->rmse_per_endmember},
        {"rmse_average", evaluation->rmse_average}};
  }
  std::ofstream out(path);
  if (!out) {
    throw WriteFailure("cannot open " + path.string() + " for writing");
  }
  out << doc.dump(2) << '\n';
  if (!out) {
    throw WriteFailure("failed while writing " + path.string());
  }
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open " + path.string());
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return doc;
}

// Companion trace table, one row per recorded point (iterations_run + 1
// rows): iteration, objective, fit, avg_excess_kurtosis.
template <typename Scalar>
void write_traces(const std::filesystem::path& path,
                  const UnmixResult<Scalar>& result) {
  std::ofstream out(path);
  if (!out) {
    throw WriteFailure("cannot open " + path.string() + " for writing");
  }
  out << "iteration,objective,fit,avg_excess_kurtosis\n";
  char buf[160];
  for (std::size_t t = 0; t < result.objective_trace.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", t,
                  double(result.objective_trace[t]), double(result.fit_trace[t]),
                  double(result.kurtosis_trace[t]));
    out << buf;
  }
  if (!out) {
    throw WriteFailure("failed while writing " + path.string());
  }
}

}  // namespace kbsnmf
