#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace spikeforge::wave {

struct Breakpoint {
  double time;     // seconds, relative to the trigger
  double voltage;  // volts
};

/// Piecewise-linear spike shape. Consecutive breakpoints with distinct times
/// are joined by straight lines; a repeated time encodes a jump, and the
/// value at the jump is the right-hand one. Immutable after construction.
class Waveform {
 public:
  /// Throws ConfigError unless the list is non-empty, starts at t = 0, has
  /// non-decreasing times with no time repeated three times, and all values
  /// are finite.
  explicit Waveform(std::vector<Breakpoint> points);

  /// Builds from a flat t0, V0, t1, V1, ... array as written in config files.
  static Waveform from_flat(std::span<const double> flat);

  double duration() const noexcept { return points_.back().time; }
  std::span<const Breakpoint> points() const noexcept { return points_; }

  /// Voltage at time tau after the trigger; 0 outside [0, duration].
  double sample(double tau) const noexcept;

 private:
  std::vector<Breakpoint> points_;
};

inline double duration(const Waveform& w) noexcept { return w.duration(); }
inline double sample(const Waveform& w, double tau) noexcept { return w.sample(tau); }

/// A waveform placed on the global clock at an absolute trigger time.
struct ScheduledWaveform {
  const Waveform* waveform = nullptr;
  double origin = 0.0;
};

/// True iff origin <= t < origin + duration.
bool active(const ScheduledWaveform& s, double t) noexcept;

/// A waveform pre-sampled on a fixed dt grid: values()[m] is the voltage at
/// tau = m * dt for every grid point inside the half-open support.
class SampledWaveform {
 public:
  SampledWaveform() = default;
  SampledWaveform(const Waveform& w, double dt);

  /// Number of grid steps during which the waveform is active.
  std::size_t steps() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  std::span<const double> values() const noexcept { return values_; }
  double at(std::size_t m) const noexcept { return values_[m]; }

 private:
  std::vector<double> values_;
};

}  // namespace spikeforge::wave
