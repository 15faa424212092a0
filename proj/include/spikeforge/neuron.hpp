#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spikeforge/expr.hpp"
#include "spikeforge/waveform.hpp"

namespace spikeforge::neuron {

/// Monotone (input -> output) width/amplitude conversion characteristic.
class PulseConvertTable {
 public:
  PulseConvertTable() = default;
  /// Inputs must be strictly increasing; throws ConfigError otherwise.
  explicit PulseConvertTable(std::vector<std::pair<double, double>> knots);

  static PulseConvertTable load(const std::filesystem::path& path);

  bool empty() const noexcept { return knots_.empty(); }
  std::span<const std::pair<double, double>> knots() const noexcept { return knots_; }

  /// Piecewise-linear interpolation; clamps (and warns) outside the table.
  double operator()(double in) const;

 private:
  std::vector<std::pair<double, double>> knots_;
};

struct NeuronWaveforms {
  std::optional<wave::Waveform> pre;    // input-layer spike shape
  std::optional<wave::Waveform> post1;  // fed back to incoming synapses
  std::optional<wave::Waveform> post2;  // pre-spike for the next layer
  std::optional<wave::Waveform> inhib;  // sent to inhibited peers
};

struct NeuronParams {
  double tau = 0.02;     // leak time constant, s
  double thres = 1.0;    // firing threshold, state units
  double v_reset = 0.0;  // state after a spike
  double t_refrac = 0.0; // s
  double r_mem = 1.0;    // input gain of the default LIF equation, ohms
  std::optional<std::string> state_eqs;   // dV/dt over V, I, dt, tau, thres, r_mem
  std::optional<std::string> power_expr;  // dynamic power over the same names
  NeuronWaveforms waveforms;
  PulseConvertTable pulse_convert;
};

/// Identifiers visible to state_eqs and power_expr.
std::vector<std::string> neuron_vocabulary();

class NeuronModel {
 public:
  explicit NeuronModel(NeuronParams params);

  const NeuronParams& params() const noexcept { return params_; }
  bool default_dynamics() const noexcept { return state_prog_.empty(); }
  bool has_power() const noexcept { return !power_prog_.empty(); }
  bool converts_input() const noexcept { return !params_.pulse_convert.empty(); }

  /// dV/dt at (V, I).
  double derivative(double v, double current, double dt) const;
  /// Dynamic power at (V, I).
  double power(double v, double current, double dt) const;

 private:
  std::vector<double> slots(double v, double current, double dt) const;

  NeuronParams params_;
  expr::Program state_prog_;
  expr::Program power_prog_;
};

struct NeuronState {
  double v = 0.0;
  double refractory_until = -std::numeric_limits<double>::infinity();
  std::vector<double> spike_times;
  double energy = 0.0;
};

/// Refractory windows are snapped to the dt grid: the neuron is clamped at
/// time t iff t + dt/2 < refractory_until.
constexpr bool in_refractory(double t, double dt, double refractory_until) noexcept {
  return t + 0.5 * dt < refractory_until;
}

/// One explicit Euler step. The input current passes through the
/// pulse-conversion table first when the model has one. Throws
/// SimulationError on a non-finite membrane value.
NeuronState integrate(const NeuronModel& model, NeuronState state, double current, double t, double dt);

struct SpikeEmission {
  double time = 0.0;
  wave::ScheduledWaveform post1;
  wave::ScheduledWaveform post2;
  wave::ScheduledWaveform inhib;
};

/// Fires when V >= thres: records the spike, resets V, starts the refractory
/// window and schedules the output waveforms to start at t + dt.
std::optional<SpikeEmission> fire_check(const NeuronModel& model, NeuronState& state, double t, double dt);


// ---------------------------------------------------------------------------
// Calibration from measured firing frequency vs input pulse width.

struct FrequencyPoint {
  double width;      // s
  double frequency;  // Hz
};

/// Input pulse train used during the measurement.
struct CalibrationDrive {
  double pulse_amplitude = 1.0;  // state units per second while a pulse is on
  double pulse_rate = 1.0;       // pulses per second
};

struct CalibrationResult {
  double tau;       // +inf when the data is best described without leak
  double thres;
  double residual;  // root-mean-square frequency error, Hz
  bool leaky;
};

/// Firing frequency predicted for pulse width w: the pulse train acts as a
/// mean drive mu = A * w * rate, giving 1 / (tau * ln(mu tau / (mu tau - thres)))
/// above rheobase and 0 below. tau = +inf gives the linear IF law mu / thres.
double predicted_frequency(double width, double tau, double thres, const CalibrationDrive& drive) noexcept;

/// Least-squares fit of (tau, thres). With fewer than 4 points only the
/// linear IF law is fitted (tau = +inf).
CalibrationResult calibrate_from_frequency(std::span<const FrequencyPoint> data, const CalibrationDrive& drive);

/// Reads `width_seconds,frequency_hz` lines.
std::vector<FrequencyPoint> load_frequency_data(const std::filesystem::path& path);

inline double pulse_convert(const NeuronModel& model, double value) {
  return model.params().pulse_convert(value);
}

}  // namespace spikeforge::neuron
