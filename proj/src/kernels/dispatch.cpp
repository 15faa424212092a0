#include "kernels_internal.hpp"

namespace spikeforge::simd {

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "?";
}

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable& scalar_kernels() noexcept {
  static const KernelTable table{Isa::Scalar, detail::dot3_scalar, detail::sum_scalar, detail::lif_euler_scalar,
                                 detail::bernoulli_scalar};
  return table;
}

const KernelTable* avx2_kernels() noexcept {
#if defined(SPIKEFORGE_HAVE_AVX2)
  static const KernelTable table{Isa::Avx2, detail::dot3_avx2, detail::sum_avx2, detail::lif_euler_avx2,
                                 detail::bernoulli_avx2};
  return cpu_has_avx2() ? &table : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_kernels() noexcept {
#if defined(SPIKEFORGE_HAVE_NEON)
  static const KernelTable table{Isa::Neon, detail::dot3_neon, detail::sum_neon, detail::lif_euler_neon,
                                 detail::bernoulli_neon};
  return &table;
#else
  return nullptr;
#endif
}

const KernelTable& active_kernels() noexcept {
  static const KernelTable& chosen = [] () -> const KernelTable& {
    if (const auto* t = avx2_kernels()) return *t;
    if (const auto* t = neon_kernels()) return *t;
    return scalar_kernels();
  }();
  return chosen;
}

}  // namespace spikeforge::simd
