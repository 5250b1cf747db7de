#pragma once

#include <cstddef>

#if defined(__x86_64__) || defined(_M_X64)
#define SPECGUARD_HAVE_AVX2 1
#endif

#if defined(__aarch64__) && defined(__ARM_NEON)
#define SPECGUARD_HAVE_NEON 1
#endif

namespace specguard::kernels {

#if defined(SPECGUARD_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace avx2
#endif

#if defined(SPECGUARD_HAVE_NEON)
namespace neon {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace neon
#endif

}  // namespace specguard::kernels
