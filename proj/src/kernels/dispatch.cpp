#include <atomic>
#include <cstdlib>
#include <string>

#include "bucketperm/error.hpp"
#include "bucketperm/kernels.hpp"

namespace bucketperm::kernels {

// Stand-ins for ISA sources left out of this build.
#if !(defined(__x86_64__) || defined(_M_X64))
const KernelTable* avx2_table() { return nullptr; }
#endif
#if !(defined(__aarch64__) || defined(_M_ARM64))
const KernelTable* neon_table() { return nullptr; }
#endif

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

Isa isa_from_string(std::string_view name) {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  if (name == "neon") return Isa::neon;
  throw Error(ErrorCode::InvalidSpec, "unknown kernel ISA: " + std::string(name));
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return avx2_table() != nullptr && __builtin_cpu_supports("avx2") &&
             __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::neon:
      // Advanced SIMD is mandatory on AArch64.
      return neon_table() != nullptr;
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!isa_available(isa)) {
    throw Error(ErrorCode::InvalidSpec, "kernel ISA not available: " + std::string(to_string(isa)));
  }
  switch (isa) {
    case Isa::avx2: return *avx2_table();
    case Isa::neon: return *neon_table();
    case Isa::scalar: break;
  }
  return scalar_table();
}

namespace {

const KernelTable* detect() {
  if (const char* forced = std::getenv("BUCKETPERM_SIMD")) {
    std::string_view v(forced);
    if (v == "scalar") return &scalar_table();
    if (v == "avx2" && isa_available(Isa::avx2)) return avx2_table();
    if (v == "neon" && isa_available(Isa::neon)) return neon_table();
  }
  if (isa_available(Isa::avx2)) return avx2_table();
  if (isa_available(Isa::neon)) return neon_table();
  return &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{detect()};
  return current;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void set_active(Isa isa) { slot().store(&table(isa), std::memory_order_release); }

}  // namespace bucketperm::kernels
