#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "specguard/kernels.hpp"

using namespace specguard;
namespace k = specguard::kernels;

TEST_CASE("every available kernel variant matches the scalar reference") {
  std::mt19937_64 rng(7);
  for (k::Isa isa : {k::Isa::Scalar, k::Isa::Avx2, k::Isa::Neon}) {
    const k::KernelTable* t = k::table_for(isa);
    if (t == nullptr) continue;
    CAPTURE(k::to_string(isa));
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 15u, 16u, 17u, 31u, 64u, 1001u}) {
      CAPTURE(n);
      const auto a = oracle::random_vector(n, rng);
      const auto b = oracle::random_vector(n, rng);
      const double tol = 1e-12 * std::max<double>(1.0, static_cast<double>(n));
      CHECK(t->dot(a.data(), b.data(), n) == doctest::Approx(k::scalar::dot(a.data(), b.data(), n)).epsilon(tol));
      CHECK(t->squared_distance(a.data(), b.data(), n) ==
            doctest::Approx(k::scalar::squared_distance(a.data(), b.data(), n)).epsilon(tol));
      auto y1 = b;
      auto y2 = b;
      t->axpy(0.37, a.data(), y1.data(), n);
      k::scalar::axpy(0.37, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("scalar kernels match naive loops") {
  std::mt19937_64 rng(8);
  const auto a = oracle::random_vector(37, rng);
  const auto b = oracle::random_vector(37, rng);
  double dot = 0.0, dist = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    dist += (a[i] - b[i]) * (a[i] - b[i]);
  }
  CHECK(k::dot(a, b) == doctest::Approx(dot).epsilon(1e-13));
  CHECK(k::squared_distance(a, b) == doctest::Approx(dist).epsilon(1e-13));
}

TEST_CASE("isa selection round-trips and scalar is always available") {
  const k::Isa before = k::active_isa();
  CHECK(k::isa_available(k::Isa::Scalar));
  CHECK(k::isa_available(before));
  k::set_active_isa(k::Isa::Scalar);
  CHECK(k::active_isa() == k::Isa::Scalar);
  k::set_active_isa(before);
  CHECK(k::active_isa() == before);
}
