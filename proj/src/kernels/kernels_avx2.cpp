// Compiled with -mavx2 only; never called unless the CPU reports AVX2.
#include <immintrin.h>

#include "kernels_internal.hpp"

namespace spikeforge::simd::detail {

namespace {

// Folds the 4 lanes in the reference order (l0 + l1) + (l2 + l3).
inline double fold(__m256d acc) {
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

}  // namespace

double dot3_avx2(const double* a, const double* b, const double* c, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d ab = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(ab, _mm256_loadu_pd(c + i)));
  }
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  for (std::size_t k = 0; i < n; ++i, ++k) lane[k] += a[i] * b[i] * c[i];
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double sum_avx2(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  if (i == n) return fold(acc);
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  for (std::size_t k = 0; i < n; ++i, ++k) lane[k] += a[i];
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

void lif_euler_avx2(double* v, const double* current, std::size_t n, double dt, double tau, double r_mem) {
  const __m256d vdt = _mm256_set1_pd(dt);
  const __m256d vtau = _mm256_set1_pd(tau);
  const __m256d vr = _mm256_set1_pd(r_mem);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(v + i);
    // -x + r*I == r*I - x exactly in IEEE arithmetic.
    const __m256d drive = _mm256_sub_pd(_mm256_mul_pd(vr, _mm256_loadu_pd(current + i)), x);
    const __m256d step = _mm256_mul_pd(vdt, _mm256_div_pd(drive, vtau));
    _mm256_storeu_pd(v + i, _mm256_add_pd(x, step));
  }
  for (; i < n; ++i) v[i] = v[i] + dt * ((-v[i] + r_mem * current[i]) / tau);
}

void bernoulli_avx2(const double* u, const double* p, unsigned char* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d lt = _mm256_cmp_pd(_mm256_loadu_pd(u + i), _mm256_loadu_pd(p + i), _CMP_LT_OQ);
    const int bits = _mm256_movemask_pd(lt);
    out[i] = bits & 1;
    out[i + 1] = (bits >> 1) & 1;
    out[i + 2] = (bits >> 2) & 1;
    out[i + 3] = (bits >> 3) & 1;
  }
  for (; i < n; ++i) out[i] = u[i] < p[i] ? 1 : 0;
}

}  // namespace spikeforge::simd::detail
