// AArch64 Advanced SIMD variant; two 2-lane registers emulate the 4-lane
// reference accumulation order.
#include <arm_neon.h>

#include "kernels_internal.hpp"

namespace spikeforge::simd::detail {

double dot3_neon(const double* a, const double* b, const double* c, std::size_t n) {
  float64x2_t acc01 = vdupq_n_f64(0.0);
  float64x2_t acc23 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float64x2_t ab01 = vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    const float64x2_t ab23 = vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    acc01 = vaddq_f64(acc01, vmulq_f64(ab01, vld1q_f64(c + i)));
    acc23 = vaddq_f64(acc23, vmulq_f64(ab23, vld1q_f64(c + i + 2)));
  }
  double lane[4];
  vst1q_f64(lane, acc01);
  vst1q_f64(lane + 2, acc23);
  for (std::size_t k = 0; i < n; ++i, ++k) lane[k] += a[i] * b[i] * c[i];
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double sum_neon(const double* a, std::size_t n) {
  float64x2_t acc01 = vdupq_n_f64(0.0);
  float64x2_t acc23 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc01 = vaddq_f64(acc01, vld1q_f64(a + i));
    acc23 = vaddq_f64(acc23, vld1q_f64(a + i + 2));
  }
  double lane[4];
  vst1q_f64(lane, acc01);
  vst1q_f64(lane + 2, acc23);
  for (std::size_t k = 0; i < n; ++i, ++k) lane[k] += a[i];
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

void lif_euler_neon(double* v, const double* current, std::size_t n, double dt, double tau, double r_mem) {
  const float64x2_t vdt = vdupq_n_f64(dt);
  const float64x2_t vtau = vdupq_n_f64(tau);
  const float64x2_t vr = vdupq_n_f64(r_mem);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t x = vld1q_f64(v + i);
    const float64x2_t drive = vsubq_f64(vmulq_f64(vr, vld1q_f64(current + i)), x);
    vst1q_f64(v + i, vaddq_f64(x, vmulq_f64(vdt, vdivq_f64(drive, vtau))));
  }
  for (; i < n; ++i) v[i] = v[i] + dt * ((-v[i] + r_mem * current[i]) / tau);
}

void bernoulli_neon(const double* u, const double* p, unsigned char* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const uint64x2_t lt = vcltq_f64(vld1q_f64(u + i), vld1q_f64(p + i));
    out[i] = vgetq_lane_u64(lt, 0) ? 1 : 0;
    out[i + 1] = vgetq_lane_u64(lt, 1) ? 1 : 0;
  }
  for (; i < n; ++i) out[i] = u[i] < p[i] ? 1 : 0;
}

}  // namespace spikeforge::simd::detail
