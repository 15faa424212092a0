#include <doctest.h>

#include <cmath>

#include "spikeforge/error.hpp"
#include "spikeforge/waveform.hpp"
#include "approx.hpp"
#include "testkit.hpp"

using namespace spikeforge;
using wave::Breakpoint;
using wave::Waveform;

namespace {

Waveform make(const std::vector<testkit::Point>& pts) {
  std::vector<Breakpoint> bp;
  for (const auto& p : pts) bp.push_back({p.t, p.v});
  return Waveform(bp);
}

}  // namespace

TEST_CASE("sample interpolates, jumps to the right value and vanishes outside support") {
  const Waveform ramp({{0, 0}, {1, 1}});
  CHECK(wave::sample(ramp, 0.5) == approx(0.5));
  CHECK(wave::sample(ramp, 5.0) == 0.0);
  CHECK(wave::sample(ramp, -0.1) == 0.0);
  CHECK(wave::sample(ramp, 1.0) == 1.0);

  const Waveform bipolar({{0, 0}, {1, 1}, {1, -1}, {2, 0}});
  CHECK(wave::sample(bipolar, 1.0) == -1.0);
  CHECK(wave::sample(bipolar, 1.5) == approx(-0.5));
}

TEST_CASE("duration is the last breakpoint time") {
  CHECK(wave::duration(Waveform({{0, 0}, {3, 1}})) == 3.0);
  CHECK(wave::duration(Waveform({{0, 1}})) == 0.0);
  CHECK(wave::duration(Waveform({{0, 0}, {1, 1}, {1, -1}, {2, 0}})) == 2.0);
}

TEST_CASE("active uses a half-open window") {
  const Waveform w({{0, 1}, {0.002, 1}});
  CHECK(wave::active({&w, 0.0}, 0.001));
  CHECK_FALSE(wave::active({&w, 0.0}, 0.002));
  CHECK_FALSE(wave::active({&w, 0.005}, 0.001));
  CHECK_FALSE(wave::active({nullptr, 0.0}, 0.0));
}

TEST_CASE("construction rejects malformed breakpoint lists") {
  CHECK_THROWS_AS(Waveform({}), ConfigError);
  CHECK_THROWS_AS(Waveform({{0.1, 0}}), ConfigError);
  CHECK_THROWS_AS(Waveform({{0, 0}, {2, 1}, {1, 0}}), ConfigError);
  CHECK_THROWS_AS(Waveform({{0, 0}, {1, 1}, {1, 2}, {1, 3}}), ConfigError);
  CHECK_THROWS_AS(Waveform({{0, 0}, {1, NAN}}), ConfigError);
  const double odd[] = {0, 1, 2};
  CHECK_THROWS_AS(Waveform::from_flat(odd), ConfigError);
  const double flat[] = {0, 1, 0.5, 1};
  CHECK(Waveform::from_flat(flat).duration() == 0.5);
}

TEST_CASE("property: sample agrees with the linear-search oracle") {
  testkit::Gen g(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto pts = testkit::random_breakpoints(g);
    const auto w = make(pts);
    // Every breakpoint time, interior points and a few outside.
    for (const auto& p : pts) {
      const double s = w.sample(p.t);
      REQUIRE(std::isfinite(s));
      CHECK(s == testkit::sample_oracle(pts, p.t));
    }
    for (int k = 0; k < 20; ++k) {
      const double tau = g.uniform(-1e-3, pts.back().t + 1e-3);
      CHECK(w.sample(tau) == approx(testkit::sample_oracle(pts, tau)).epsilon(1e-12));
    }
  }
}

TEST_CASE("property: exact linearity between distinct breakpoints") {
  testkit::Gen g(12);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto pts = testkit::random_breakpoints(g);
    const auto w = make(pts);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      if (pts[i].t == pts[i + 1].t) continue;
      const double a = g.uniform(0.0, 1.0);
      const double tau = (1.0 - a) * pts[i].t + a * pts[i + 1].t;
      if (tau <= pts[i].t || tau >= pts[i + 1].t) continue;
      const double alpha = (tau - pts[i].t) / (pts[i + 1].t - pts[i].t);
      const double expect = (1.0 - alpha) * pts[i].v + alpha * pts[i + 1].v;
      CHECK(w.sample(tau) == approx(expect, 1e-14));
    }
  }
}

TEST_CASE("sampled waveform lands on the right side of grid-aligned jumps") {
  const double flat[] = {0, 1.5, 0.004, 1.5, 0.004, -1.5, 0.016, -1.5};
  const auto w = Waveform::from_flat(flat);
  const wave::SampledWaveform s(w, 0.001);
  REQUIRE(s.steps() == 16);
  for (std::size_t m = 0; m < 4; ++m) CHECK(s.at(m) == 1.5);
  for (std::size_t m = 4; m < 16; ++m) CHECK(s.at(m) == -1.5);

  // An instantaneous waveform occupies no grid step.
  CHECK(wave::SampledWaveform(Waveform({{0, 1}}), 0.001).empty());

  // A grid that does not divide the duration keeps the partial step.
  const wave::SampledWaveform p(Waveform({{0, 0}, {0.0025, 2.5}}), 0.001);
  REQUIRE(p.steps() == 3);
  CHECK(p.at(2) == approx(2.0));
}
