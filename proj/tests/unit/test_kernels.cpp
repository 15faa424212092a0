#include <doctest.h>

#include <bit>
#include <cstring>
#include <vector>

#include "spikeforge/simd.hpp"
#include "approx.hpp"
#include "testkit.hpp"

using namespace spikeforge::simd;

namespace {

std::vector<const KernelTable*> vector_variants() {
  std::vector<const KernelTable*> out;
  if (auto* t = avx2_kernels()) out.push_back(t);
  if (auto* t = neon_kernels()) out.push_back(t);
  return out;
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

}  // namespace

TEST_CASE("the active variant is one of the compiled ones") {
  const auto& active = active_kernels();
  if (cpu_has_avx2() && avx2_kernels()) {
    CHECK(active.isa == Isa::Avx2);
  }
  CHECK_FALSE(isa_name(active.isa).empty());
  MESSAGE("active kernels: " << isa_name(active.isa));
}

TEST_CASE("scalar reference kernels on small hand cases") {
  const auto& s = scalar_kernels();
  const double a[] = {1, 2, 3, 4, 5};
  const double b[] = {1, 1, 1, 1, 1};
  const double c[] = {2, 2, 2, 2, 0};
  CHECK(s.dot3(a, b, c, 5) == 20.0);
  CHECK(s.sum(a, 5) == 15.0);
  CHECK(s.sum(a, 0) == 0.0);
  double v[] = {1.0, 0.0};
  const double cur[] = {0.0, 1.0};
  s.lif_euler(v, cur, 2, 0.1, 1.0, 2.0);
  CHECK(v[0] == approx(0.9));
  CHECK(v[1] == approx(0.2));
  const double u[] = {0.1, 0.5, 0.9};
  const double p[] = {0.5, 0.5, 0.5};
  unsigned char out[3];
  s.bernoulli(u, p, out, 3);
  CHECK(out[0] == 1);
  CHECK(out[1] == 0);
  CHECK(out[2] == 0);
}

TEST_CASE("property: vector kernels reproduce the scalar reference bit for bit") {
  const auto variants = vector_variants();
  if (variants.empty()) {
    MESSAGE("no vector kernels on this machine; equivalence not exercised");
    return;
  }
  const auto& ref = scalar_kernels();
  testkit::Gen g(31);
  for (const auto* var : variants) {
    CAPTURE(isa_name(var->isa));
    for (int trial = 0; trial < 3000; ++trial) {
      // Lengths cover empty input, every tail length and larger blocks.
      const auto n = static_cast<std::size_t>(trial < 64 ? trial : g.integer(0, 300));
      const double scale = std::pow(10.0, g.uniform(-8.0, 8.0));
      auto a = g.vec(n, -scale, scale);
      auto b = g.vec(n, -1.0, 1.0);
      auto c = g.vec(n, 0.0, 1.0);
      for (auto& x : c) x = x < 0.3 ? 0.0 : 1.0;
      CHECK(same_bits(var->dot3(a.data(), b.data(), c.data(), n), ref.dot3(a.data(), b.data(), c.data(), n)));
      CHECK(same_bits(var->sum(a.data(), n), ref.sum(a.data(), n)));

      auto v1 = g.vec(n, -2.0, 2.0);
      auto v2 = v1;
      const auto cur = g.vec(n, -1e-5, 1e-5);
      const double dt = g.uniform(1e-5, 1e-3);
      const double tau = g.uniform(1e-3, 1e-1);
      const double r = g.uniform(1e3, 1e6);
      ref.lif_euler(v1.data(), cur.data(), n, dt, tau, r);
      var->lif_euler(v2.data(), cur.data(), n, dt, tau, r);
      for (std::size_t i = 0; i < n; ++i) CHECK(same_bits(v1[i], v2[i]));

      const auto u = g.vec(n, 0.0, 1.0);
      auto p = g.vec(n, 0.0, 1.0);
      if (n > 0) p[0] = u[0];  // boundary: u == p must not fire
      std::vector<unsigned char> o1(n), o2(n);
      ref.bernoulli(u.data(), p.data(), o1.data(), n);
      var->bernoulli(u.data(), p.data(), o2.data(), n);
      CHECK(o1 == o2);
    }
  }
}
