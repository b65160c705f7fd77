#include "otcloak/binary_io.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>

#include "otcloak/errors.hpp"

namespace otcloak::binio {
namespace {

constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

}  // namespace

Writer::Writer(std::string_view magic) : bytes_(magic.begin(), magic.end()) {}

void Writer::u64(std::uint64_t value) {
  for (int shift = 0; shift < 64; shift += 8) {
    bytes_.push_back(static_cast<unsigned char>((value >> shift) & 0xffu));
  }
}

void Writer::f64(double value) { u64(std::bit_cast<std::uint64_t>(value)); }

void Writer::block(std::span<const double> values) {
  bytes_.reserve(bytes_.size() + values.size() * 8);
  for (double v : values) f64(v);
}

void Writer::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Reader::Reader(const std::filesystem::path& path, std::string_view magic)
    : Reader(slurp(path), magic) {}

Reader::Reader(std::vector<unsigned char> bytes, std::string_view magic) : bytes_(std::move(bytes)) {
  if (bytes_.size() < magic.size() ||
      !std::equal(magic.begin(), magic.end(), bytes_.begin(),
                  [](char a, unsigned char b) { return static_cast<unsigned char>(a) == b; })) {
    throw FormatError("bad magic: expected " + std::string(magic));
  }
  pos_ = magic.size();
}

void Reader::need(std::size_t n) const {
  if (bytes_.size() - pos_ < n) throw FormatError("truncated checkpoint");
}

std::uint64_t Reader::u64() {
  need(8);
  std::uint64_t value = 0;
  for (int k = 0; k < 8; ++k) value |= std::uint64_t{bytes_[pos_ + k]} << (8 * k);
  pos_ += 8;
  return value;
}

double Reader::f64() { return std::bit_cast<double>(u64()); }

void Reader::block(std::span<double> out) {
  need(out.size() * 8);
  for (double& v : out) v = f64();
}

Vector Reader::vector(std::size_t n) {
  if (n > kMaxElements) throw FormatError("implausible block length");
  Vector v(n);
  block(v);
  return v;
}

Matrix Reader::matrix(std::size_t rows, std::size_t cols) {
  if (rows > kMaxElements || cols > kMaxElements || rows * cols > kMaxElements) {
    throw FormatError("implausible matrix shape");
  }
  Matrix m(rows, cols);
  block(m.values());
  return m;
}

void Reader::expect_end() const {
  if (pos_ != bytes_.size()) throw FormatError("trailing bytes in checkpoint");
}

}  // namespace otcloak::binio
