#include <atomic>
#include <cstdlib>
#include <string_view>

#include "otcloak/kernels.hpp"
#include "otcloak/log.hpp"

namespace otcloak::kernels {
namespace {

const KernelTable* resolve_default() {
  const char* env = std::getenv("OTCLOAK_SIMD");
  const std::string_view request = env ? env : "";
  if (request == "scalar") return &scalar_table();
  if (request == "avx2" && !avx2_supported()) {
    log().warn("OTCLOAK_SIMD=avx2 requested but the CPU lacks AVX2/FMA; using scalar kernels");
  }
  return avx2_supported() ? &avx2_table() : &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{resolve_default()};
  return current;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

bool select(Backend backend) {
  if (backend == Backend::Avx2) {
    if (!avx2_supported()) return false;
    slot().store(&avx2_table(), std::memory_order_release);
  } else {
    slot().store(&scalar_table(), std::memory_order_release);
  }
  return true;
}

void reset_to_default() { slot().store(resolve_default(), std::memory_order_release); }

}  // namespace otcloak::kernels
