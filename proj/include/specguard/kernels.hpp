#pragma once

// Data-parallel inner loops shared by every numeric module.
//
// Each kernel has a portable scalar reference implementation and, where the
// build supports it, an AVX2/FMA (x86-64) or NEON (AArch64) variant. The
// active variant is chosen once at first use from the running CPU's feature
// flags; setting SPECGUARD_FORCE_SCALAR=1 pins the scalar path.

#include <cstddef>
#include <span>
#include <string_view>

namespace specguard::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view to_string(Isa isa);

/// Variant selected for this process.
Isa active_isa();

/// Whether `isa` is both compiled in and supported by the running CPU.
bool isa_available(Isa isa);

/// Re-selects the active variant. Tests use this to compare paths; it is not
/// thread-safe with concurrent kernel calls.
void set_active_isa(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// Function table for one instruction-set variant.
struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  double (*squared_distance)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
};

/// Table for a specific variant; nullptr when not compiled in or the CPU lacks
/// the feature.
const KernelTable* table_for(Isa isa);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace scalar

}  // namespace specguard::kernels
