#include "kernels_internal.hpp"

namespace spikeforge::simd::detail {

double dot3_scalar(const double* a, const double* b, const double* c, std::size_t n) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) lane[i % 4] += a[i] * b[i] * c[i];
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double sum_scalar(const double* a, std::size_t n) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) lane[i % 4] += a[i];
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

void lif_euler_scalar(double* v, const double* current, std::size_t n, double dt, double tau, double r_mem) {
  for (std::size_t i = 0; i < n; ++i) v[i] = v[i] + dt * ((-v[i] + r_mem * current[i]) / tau);
}

void bernoulli_scalar(const double* u, const double* p, unsigned char* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = u[i] < p[i] ? 1 : 0;
}

}  // namespace spikeforge::simd::detail
