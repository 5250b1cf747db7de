#include <atomic>
#include <cassert>
#include <cstdlib>
#include <string_view>

#include "kernels_impl.hpp"
#include "specguard/kernels.hpp"

namespace specguard::kernels {

namespace {

constexpr KernelTable kScalarTable{&scalar::dot, &scalar::squared_distance, &scalar::axpy};

#if defined(SPECGUARD_HAVE_AVX2)
constexpr KernelTable kAvx2Table{&avx2::dot, &avx2::squared_distance, &avx2::axpy};
#endif

#if defined(SPECGUARD_HAVE_NEON)
constexpr KernelTable kNeonTable{&neon::dot, &neon::squared_distance, &neon::axpy};
#endif

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(SPECGUARD_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(SPECGUARD_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa detect() {
  if (const char* force = std::getenv("SPECGUARD_FORCE_SCALAR"); force && std::string_view(force) == "1") {
    return Isa::Scalar;
  }
  if (cpu_supports(Isa::Avx2)) return Isa::Avx2;
  if (cpu_supports(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

std::atomic<const KernelTable*>& active_table() {
  static std::atomic<const KernelTable*> table{table_for(detect())};
  return table;
}

std::atomic<Isa>& active_isa_slot() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
    case Isa::Neon:
      return "neon";
  }
  return "unknown";
}

const KernelTable* table_for(Isa isa) {
  if (!cpu_supports(isa)) return nullptr;
  switch (isa) {
    case Isa::Scalar:
      return &kScalarTable;
    case Isa::Avx2:
#if defined(SPECGUARD_HAVE_AVX2)
      return &kAvx2Table;
#else
      return nullptr;
#endif
    case Isa::Neon:
#if defined(SPECGUARD_HAVE_NEON)
      return &kNeonTable;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

Isa active_isa() { return active_isa_slot().load(std::memory_order_relaxed); }

bool isa_available(Isa isa) { return table_for(isa) != nullptr; }

void set_active_isa(Isa isa) {
  const KernelTable* table = table_for(isa);
  if (table == nullptr) return;
  active_table().store(table, std::memory_order_relaxed);
  active_isa_slot().store(isa, std::memory_order_relaxed);
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return active_table().load(std::memory_order_relaxed)->dot(a.data(), b.data(), a.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return active_table().load(std::memory_order_relaxed)->squared_distance(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  active_table().load(std::memory_order_relaxed)->axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace specguard::kernels
