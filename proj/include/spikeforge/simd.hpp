#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Data-parallel inner loops of the simulator. Every kernel has a scalar
// reference implementation; vector variants are selected at runtime and must
// reproduce the reference bit for bit. Reductions therefore use a fixed
// 4-lane accumulation order in all variants:
//   lane[k] accumulates elements i with i % 4 == k, in increasing i,
//   result = (lane[0] + lane[1]) + (lane[2] + lane[3]).

namespace spikeforge::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa) noexcept;

struct KernelTable {
  Isa isa;
  /// sum_i a[i] * b[i] * c[i]
  double (*dot3)(const double* a, const double* b, const double* c, std::size_t n);
  /// sum_i a[i]
  double (*sum)(const double* a, std::size_t n);
  /// v[i] += dt * ((-v[i] + r_mem * current[i]) / tau)
  void (*lif_euler)(double* v, const double* current, std::size_t n, double dt, double tau, double r_mem);
  /// out[i] = u[i] < p[i] ? 1 : 0
  void (*bernoulli)(const double* u, const double* p, unsigned char* out, std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;
/// nullptr when the variant was not compiled in or the CPU lacks it.
const KernelTable* avx2_kernels() noexcept;
const KernelTable* neon_kernels() noexcept;

/// Best variant supported by the running CPU (chosen once).
const KernelTable& active_kernels() noexcept;

bool cpu_has_avx2() noexcept;

inline double dot3(std::span<const double> a, std::span<const double> b, std::span<const double> c) {
  return active_kernels().dot3(a.data(), b.data(), c.data(), a.size());
}

inline double sum(std::span<const double> a) { return active_kernels().sum(a.data(), a.size()); }

inline void lif_euler(std::span<double> v, std::span<const double> current, double dt, double tau, double r_mem) {
  active_kernels().lif_euler(v.data(), current.data(), v.size(), dt, tau, r_mem);
}

}  // namespace spikeforge::simd
