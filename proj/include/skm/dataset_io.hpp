#pragma once

// Dataset files.
//
// csv   : one point per line, comma-separated coordinates; a first line that
//         does not parse as numbers is taken as a header.
// f64le : "SKM1", n and d as little-endian uint64, then n*d little-endian
//         doubles in column-major order (all d coordinates of point 0 first).

#include <array>
#include <bit>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "skm/centroids.hpp"
#include "skm/error.hpp"
#include "skm/sample_access.hpp"

namespace skm {

enum class DatasetFormat { csv, f64le };

inline DatasetFormat parse_format(std::string_view name) {
  if (name == "csv") return DatasetFormat::csv;
  if (name == "f64le") return DatasetFormat::f64le;
  throw Error(ErrorCode::invalid_parameter, "unknown dataset format '" + std::string(name) + "'");
}

constexpr const char* to_string(DatasetFormat f) {
  return f == DatasetFormat::csv ? "csv" : "f64le";
}

/// Rows of a CSV file, each row one point.
struct CsvRows {
  std::size_t width = 0;
  std::vector<double> values;  // row-major, which is column-major for V
  std::size_t rows() const noexcept { return width == 0 ? 0 : values.size() / width; }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline bool parse_fields(std::string_view line, std::vector<double>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view field =
        trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                : comma - start));
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), x);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) return false;
    out.push_back(x);
    if (comma == std::string_view::npos) return true;
    start = comma + 1;
  }
}

inline void write_u64_le(std::ostream& os, std::uint64_t x) {
  std::array<unsigned char, 8> bytes{};
  for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(x >> (8 * b));
  os.write(reinterpret_cast<const char*>(bytes.data()), 8);
}

inline std::uint64_t read_u64_le(const unsigned char* p) {
  std::uint64_t x = 0;
  for (int b = 7; b >= 0; --b) x = (x << 8) | p[b];
  return x;
}

}  // namespace detail

inline CsvRows parse_csv(std::istream& in) {
  CsvRows out;
  std::string line;
  std::vector<double> fields;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = detail::trim(line);
    if (view.empty()) continue;
    if (!detail::parse_fields(view, fields)) {
      if (first) {
        first = false;
        continue;  // header
      }
      throw Error(ErrorCode::parse_error, "line " + std::to_string(line_no));
    }
    first = false;
    if (out.width == 0) {
      out.width = fields.size();
    } else if (fields.size() != out.width) {
      throw Error(ErrorCode::ragged_rows, "line " + std::to_string(line_no) + " has " +
                                              std::to_string(fields.size()) + " fields, expected " +
                                              std::to_string(out.width));
    }
    out.values.insert(out.values.end(), fields.begin(), fields.end());
  }
  return out;
}

inline CsvRows read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path);
  return parse_csv(in);
}

inline SampleAccessMatrix load_csv(std::istream& in) {
  CsvRows rows = parse_csv(in);
  const std::size_t n = rows.rows();
  return SampleAccessMatrix::build(rows.width, n, std::move(rows.values));
}

inline SampleAccessMatrix load_f64le(std::istream& in) {
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "SKM1", 4) != 0) {
    if (bytes.size() < 4) throw Error(ErrorCode::truncated_file, "missing magic");
    throw Error(ErrorCode::bad_magic, "expected SKM1");
  }
  if (bytes.size() < 20) throw Error(ErrorCode::truncated_file, "missing shape header");
  const std::uint64_t n = detail::read_u64_le(bytes.data() + 4);
  const std::uint64_t d = detail::read_u64_le(bytes.data() + 12);
  if (d != 0 && n > (UINT64_MAX / 8) / d) {
    throw Error(ErrorCode::truncated_file, "declared shape exceeds the file");
  }
  const std::uint64_t payload = n * d * 8;
  if (bytes.size() - 20 < payload) {
    throw Error(ErrorCode::truncated_file, "expected " + std::to_string(payload) +
                                               " payload bytes, found " +
                                               std::to_string(bytes.size() - 20));
  }
  if (bytes.size() - 20 > payload) {
    throw Error(ErrorCode::parse_error, "trailing bytes after payload");
  }
  std::vector<double> values(n * d);
  for (std::size_t e = 0; e < values.size(); ++e) {
    values[e] = std::bit_cast<double>(detail::read_u64_le(bytes.data() + 20 + 8 * e));
  }
  return SampleAccessMatrix::build(d, n, std::move(values));
}

inline SampleAccessMatrix load_dataset(const std::string& path, DatasetFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path);
  return format == DatasetFormat::csv ? load_csv(in) : load_f64le(in);
}

inline void write_f64le(std::ostream& os, const SampleAccessMatrix& m) {
  os.write("SKM1", 4);
  detail::write_u64_le(os, m.n());
  detail::write_u64_le(os, m.d());
  for (double x : m.values()) detail::write_u64_le(os, std::bit_cast<std::uint64_t>(x));
}

inline void write_f64le_file(const std::string& path, const SampleAccessMatrix& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::io_error, "cannot write " + path);
  write_f64le(os, m);
}

/// Centroids from a CSV file, one centroid per row.
inline CentroidSet load_centroids_csv(const std::string& path) {
  CsvRows rows = read_csv_file(path);
  const std::size_t k = rows.rows();
  return CentroidSet(k, rows.width, std::move(rows.values));
}

}  // namespace skm
