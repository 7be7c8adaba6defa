#include "bucketperm/kernels.hpp"

namespace bucketperm::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void relu_scalar(double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] > 0.0 ? y[i] : 0.0;
}

constexpr KernelTable kScalar{Isa::scalar, dot_scalar, axpy_scalar, squared_distance_scalar,
                              relu_scalar};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace bucketperm::kernels
