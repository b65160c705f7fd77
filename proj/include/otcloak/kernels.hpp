#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Dense double-precision inner loops shared by the cost network, the
// Sinkhorn solver and the detector. Each kernel has a scalar reference
// implementation and an AVX2+FMA variant; the active table is chosen once at
// runtime from CPUID and can be pinned with OTCLOAK_SIMD=scalar|avx2.

namespace otcloak::kernels {

enum class Backend { Scalar, Avx2 };

struct KernelTable {
  Backend backend;
  std::string_view name;

  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // sum_i (x[i] - y[i])^2
  double (*sq_dist)(const double* x, const double* y, std::size_t n);
  // y = A x, A row-major rows x cols
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  // y = A^T x, A row-major rows x cols
  void (*gemv_t)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
};

const KernelTable& scalar_table();
const KernelTable& avx2_table();

/// True when the running CPU supports AVX2 and FMA.
bool avx2_supported();

/// The active kernel table.
const KernelTable& active();

/// Pins the active backend. Returns false (and leaves the table unchanged)
/// when the backend is not supported on this CPU.
bool select(Backend backend);

/// Resolves the default backend again (CPUID plus OTCLOAK_SIMD).
void reset_to_default();

// Span conveniences over the active table.

inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline double sq_dist(std::span<const double> x, std::span<const double> y) {
  return active().sq_dist(x.data(), y.data(), x.size());
}

}  // namespace otcloak::kernels
