#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace bucketperm::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view to_string(Isa isa);
// InvalidSpec for unknown names.
Isa isa_from_string(std::string_view name);

// One implementation of each inner-loop primitive. Every ISA variant must agree
// with the scalar reference up to floating-point reassociation.
struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y = max(y, 0), returns nothing; used by the hidden layers.
  void (*relu)(double* y, std::size_t n);
};

const KernelTable& scalar_table();
// Tables for ISAs compiled into this build; nullptr when absent.
const KernelTable* avx2_table();
const KernelTable* neon_table();

bool isa_available(Isa isa);
const KernelTable& table(Isa isa);

// Selected once from CPU features, overridable with BUCKETPERM_SIMD=scalar|avx2|neon.
const KernelTable& active();
void set_active(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}
inline void relu(std::span<double> y) { active().relu(y.data(), y.size()); }

}  // namespace bucketperm::kernels
