#include "otcloak/matrix.hpp"

#include "otcloak/kernels.hpp"

namespace otcloak {

Vector multiply(const Matrix& a, std::span<const double> x) {
  Vector y(a.rows());
  kernels::active().gemv(a.data(), a.rows(), a.cols(), x.data(), y.data());
  return y;
}

Vector multiply_transposed(const Matrix& a, std::span<const double> x) {
  Vector y(a.cols());
  kernels::active().gemv_t(a.data(), a.rows(), a.cols(), x.data(), y.data());
  return y;
}

}  // namespace otcloak
