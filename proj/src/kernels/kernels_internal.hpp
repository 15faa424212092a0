#pragma once

#include <cstddef>

#include "spikeforge/simd.hpp"

namespace spikeforge::simd::detail {

double dot3_scalar(const double* a, const double* b, const double* c, std::size_t n);
double sum_scalar(const double* a, std::size_t n);
void lif_euler_scalar(double* v, const double* current, std::size_t n, double dt, double tau, double r_mem);
void bernoulli_scalar(const double* u, const double* p, unsigned char* out, std::size_t n);

#if defined(SPIKEFORGE_HAVE_AVX2)
double dot3_avx2(const double* a, const double* b, const double* c, std::size_t n);
double sum_avx2(const double* a, std::size_t n);
void lif_euler_avx2(double* v, const double* current, std::size_t n, double dt, double tau, double r_mem);
void bernoulli_avx2(const double* u, const double* p, unsigned char* out, std::size_t n);
#endif

#if defined(SPIKEFORGE_HAVE_NEON)
double dot3_neon(const double* a, const double* b, const double* c, std::size_t n);
double sum_neon(const double* a, std::size_t n);
void lif_euler_neon(double* v, const double* current, std::size_t n, double dt, double tau, double r_mem);
void bernoulli_neon(const double* u, const double* p, unsigned char* out, std::size_t n);
#endif

}  // namespace spikeforge::simd::detail
