#include <doctest.h>

#include <cmath>
#include <vector>

#include "bucketperm/kernels.hpp"
#include "bucketperm/rng.hpp"

using namespace bucketperm;
namespace k = bucketperm::kernels;

namespace {

std::vector<k::Isa> simd_isas() {
  std::vector<k::Isa> out;
  for (auto isa : {k::Isa::avx2, k::Isa::neon}) {
    if (k::isa_available(isa)) out.push_back(isa);
  }
  return out;
}

std::vector<double> random_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal() * 3.0;
  return v;
}

// Lengths straddling every vector width and unroll boundary.
const std::size_t kLengths[] = {0, 1, 2, 3, 4, 5, 7, 8, 15, 16, 17, 31, 33, 63, 64, 65, 100, 784, 1000};

}  // namespace

TEST_CASE("scalar table is always available and named") {
  CHECK(k::isa_available(k::Isa::scalar));
  CHECK(k::table(k::Isa::scalar).isa == k::Isa::scalar);
  CHECK(k::to_string(k::Isa::avx2) == "avx2");
  CHECK(k::isa_from_string("neon") == k::Isa::neon);
  CHECK_THROWS(k::isa_from_string("sse9"));
}

TEST_CASE("scalar kernels against hand-computed values") {
  const auto& s = k::scalar_table();
  const double a[] = {1, 2, 3};
  const double b[] = {4, -5, 6};
  CHECK(s.dot(a, b, 3) == 12.0);
  CHECK(s.squared_distance(a, b, 3) == 9.0 + 49.0 + 9.0);
  double y[] = {1, 1, 1};
  s.axpy(2.0, a, y, 3);
  CHECK(y[0] == 3.0);
  CHECK(y[2] == 7.0);
  double r[] = {-1.0, 0.0, 2.5, -0.0};
  s.relu(r, 4);
  CHECK(r[0] == 0.0);
  CHECK(r[2] == 2.5);
}

TEST_CASE("SIMD kernels agree with the scalar reference") {
  const auto isas = simd_isas();
  if (isas.empty()) {
    MESSAGE("no SIMD kernels on this machine; equivalence not exercised");
    return;
  }
  const auto& ref = k::scalar_table();
  Rng rng(11);
  for (auto isa : isas) {
    const auto& t = k::table(isa);
    CAPTURE(k::to_string(isa));
    for (std::size_t n : kLengths) {
      CAPTURE(n);
      const auto a = random_vector(rng, n);
      const auto b = random_vector(rng, n);
      double scale = 1.0;
      for (std::size_t i = 0; i < n; ++i) scale += std::abs(a[i] * b[i]) + b[i] * b[i];

      CHECK(std::abs(t.dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= 1e-12 * scale);
      CHECK(std::abs(t.squared_distance(a.data(), b.data(), n) -
                     ref.squared_distance(a.data(), b.data(), n)) <= 1e-12 * 4 * scale);

      auto y1 = b;
      auto y2 = b;
      ref.axpy(-0.37, a.data(), y1.data(), n);
      t.axpy(-0.37, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-15 * (1 + std::abs(y1[i])));

      auto r1 = a;
      auto r2 = a;
      ref.relu(r1.data(), n);
      t.relu(r2.data(), n);
      CHECK(r1 == r2);
    }
  }
}

TEST_CASE("set_active switches the dispatched table") {
  const auto previous = k::active().isa;
  k::set_active(k::Isa::scalar);
  CHECK(k::active().isa == k::Isa::scalar);
  const std::vector<double> a{1, 2}, b{3, 4};
  CHECK(k::dot(a, b) == 11.0);
  for (auto isa : simd_isas()) {
    k::set_active(isa);
    CHECK(k::active().isa == isa);
    CHECK(k::dot(a, b) == 11.0);
  }
  k::set_active(previous);
  if (!k::isa_available(k::Isa::neon)) CHECK_THROWS(k::set_active(k::Isa::neon));
}
