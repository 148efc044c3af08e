#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "gripsim/errors.hpp"

namespace gripsim::bin {

// Native little-endian blobs; every reader checks the stream afterwards.

template <typename T>
void write(std::ostream& os, const T& value) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read(std::istream& is) {
  static_assert(std::is_trivially_copyable_v<T>);
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw InputError("binary: unexpected end of file");
  return value;
}

inline void write_doubles(std::ostream& os, const double* data, std::size_t n) {
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void read_doubles(std::istream& is, double* data, std::size_t n) {
  is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw InputError("binary: unexpected end of file");
}

/// Row-major matrix body (dimensions are written by the caller).
inline void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  write_doubles(os, rm.data(), static_cast<std::size_t>(rm.size()));
}

inline Eigen::MatrixXd read_matrix(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  read_doubles(is, rm.data(), static_cast<std::size_t>(rm.size()));
  return rm;
}

inline void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
  write<std::uint64_t>(os, static_cast<std::uint64_t>(v.size()));
  write_doubles(os, v.data(), static_cast<std::size_t>(v.size()));
}

inline Eigen::VectorXd read_vector(std::istream& is, std::uint64_t max_size = (1ULL << 32)) {
  const auto n = read<std::uint64_t>(is);
  if (n > max_size) throw InputError("binary: vector length out of range");
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  read_doubles(is, v.data(), n);
  return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  const auto n = read<std::uint64_t>(is);
  if (n > (1ULL << 30)) throw InputError("binary: string length out of range");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw InputError("binary: unexpected end of file");
  return s;
}

inline void expect_magic(std::istream& is, std::uint32_t magic, std::uint32_t version, const char* what) {
  if (read<std::uint32_t>(is) != magic) throw InputError(std::string(what) + ": bad magic");
  const auto v = read<std::uint32_t>(is);
  if (v != version) throw InputError(std::string(what) + ": unsupported version " + std::to_string(v));
}

}  // namespace gripsim::bin
