#include "spikeforge/waveform.hpp"

#include <cmath>
#include <string>

#include "spikeforge/error.hpp"

namespace spikeforge::wave {

Waveform::Waveform(std::vector<Breakpoint> points) : points_(std::move(points)) {
  if (points_.empty()) throw ConfigError("waveform: breakpoint list is empty");
  if (points_.front().time != 0.0) throw ConfigError("waveform: first breakpoint time must be 0");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    if (!std::isfinite(p.time) || !std::isfinite(p.voltage)) {
      throw ConfigError("waveform: breakpoint " + std::to_string(i) + " is not finite");
    }
    if (i == 0) continue;
    if (p.time < points_[i - 1].time) {
      throw ConfigError("waveform: breakpoint " + std::to_string(i) + " goes back in time");
    }
    if (i >= 2 && p.time == points_[i - 1].time && p.time == points_[i - 2].time) {
      throw ConfigError("waveform: time " + std::to_string(p.time) + " repeated more than twice");
    }
  }
}

Waveform Waveform::from_flat(std::span<const double> flat) {
  if (flat.size() % 2 != 0) {
    throw ConfigError("waveform: flat array needs an even number of values (t, V pairs)");
  }
  std::vector<Breakpoint> pts;
  pts.reserve(flat.size() / 2);
  for (std::size_t i = 0; i < flat.size(); i += 2) pts.push_back({flat[i], flat[i + 1]});
  return Waveform(std::move(pts));
}

double Waveform::sample(double tau) const noexcept {
  if (!(tau >= 0.0) || tau > duration()) return 0.0;
  // Last breakpoint with time <= tau; at a jump this is the right-hand point.
  std::size_t hi = points_.size();
  std::size_t lo = 0;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (points_[mid].time <= tau) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const auto& a = points_[lo];
  if (a.time == tau || lo + 1 == points_.size()) return a.voltage;
  const auto& b = points_[lo + 1];
  const double alpha = (tau - a.time) / (b.time - a.time);
  return (1.0 - alpha) * a.voltage + alpha * b.voltage;
}

bool active(const ScheduledWaveform& s, double t) noexcept {
  return s.waveform != nullptr && s.origin <= t && t < s.origin + s.waveform->duration();
}

SampledWaveform::SampledWaveform(const Waveform& w, double dt) {
  // Grid points closer than eps to a breakpoint are treated as sitting on it,
  // so m * dt rounding cannot pick the wrong side of a jump.
  const double eps = 1e-6 * dt;
  for (std::size_t m = 0;; ++m) {
    double tau = static_cast<double>(m) * dt;
    if (tau >= w.duration() - eps) break;
    for (const auto& p : w.points()) {
      if (std::abs(p.time - tau) <= eps) {
        tau = p.time;
        break;
      }
    }
    values_.push_back(w.sample(tau));
  }
}

}  // namespace spikeforge::wave
