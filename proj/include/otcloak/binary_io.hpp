#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "otcloak/matrix.hpp"

// Little-endian checkpoint framing: a magic tag, 64-bit unsigned header
// fields, then row-major 64-bit float blocks.

namespace otcloak::binio {

class Writer {
 public:
  explicit Writer(std::string_view magic);

  void u64(std::uint64_t value);
  void f64(double value);
  void block(std::span<const double> values);

  /// Writes the buffer to `path`; throws FormatError on I/O failure.
  void save(const std::filesystem::path& path) const;
  const std::vector<unsigned char>& bytes() const noexcept { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class Reader {
 public:
  /// Loads `path` and checks the magic tag; throws FormatError otherwise.
  Reader(const std::filesystem::path& path, std::string_view magic);
  Reader(std::vector<unsigned char> bytes, std::string_view magic);

  std::uint64_t u64();
  double f64();
  void block(std::span<double> out);
  Vector vector(std::size_t n);
  Matrix matrix(std::size_t rows, std::size_t cols);

  /// Throws FormatError if unread bytes remain.
  void expect_end() const;

 private:
  void need(std::size_t n) const;

  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace otcloak::binio
