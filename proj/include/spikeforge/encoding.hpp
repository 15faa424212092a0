#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "spikeforge/random.hpp"

namespace spikeforge::encoding {

/// Spike times on a dt grid, stored as step indices. polarity is either empty
/// (every spike is +1) or parallel to steps.
struct SpikeTrain {
  double dt = 0.0;
  std::vector<std::int64_t> steps;
  std::vector<std::int8_t> polarity;

  std::vector<double> times() const;
  std::size_t size() const noexcept { return steps.size(); }
  bool empty() const noexcept { return steps.empty(); }
};

struct AerEvent {
  double t = 0.0;
  std::size_t address = 0;
  int polarity = 1;
};

/// One dataset entry: either a feature vector (rate encodings) or an AER
/// event stream.
struct Sample {
  std::vector<double> features;
  std::vector<AerEvent> events;
  std::optional<int> label;
};

enum class Kind { Poisson, FixedRate, Aer };

/// How AER polarity is presented to the input layer.
enum class PolarityMode {
  Separate,  // channel = 2 * address + (polarity < 0)
  Signed,    // channel = address, negative events use an inverted waveform
};

struct EncoderConfig {
  Kind kind = Kind::Poisson;
  double r_min = 0.0;
  double r_max = 100.0;
  PolarityMode polarity_mode = PolarityMode::Separate;
};

/// Number of whole dt steps in [0, T); T need not be a grid multiple.
std::int64_t grid_steps(double T, double dt);

/// Bernoulli-per-step approximation of a Poisson process with rate
/// r_min + intensity * (r_max - r_min). Warns when rate * dt > 0.1.
SpikeTrain poisson_encode(double intensity, double r_min, double r_max, double T, double dt, Rng& rng);

/// Deterministic spikes at k / rate (k = 0, 1, ...) floored onto the grid.
SpikeTrain fixed_rate_encode(double intensity, double r_min, double r_max, double T, double dt);

/// Reads `time_seconds,address,polarity` lines ('#' comments allowed).
/// address_limit == 0 disables the range check. Events are returned sorted by
/// (time, address).
std::vector<AerEvent> load_aer(const std::filesystem::path& path, std::size_t address_limit = 0);

/// Number of input channels an AER stream with `addresses` addresses needs.
std::size_t aer_channels(std::size_t addresses, PolarityMode mode) noexcept;

/// Snaps events onto the dt grid inside [0, T) and splits them per channel.
std::vector<SpikeTrain> aer_to_trains(const std::vector<AerEvent>& events, std::size_t channels, PolarityMode mode,
                                      double T, double dt);

/// Reads `label,f1,...,fn` rows with intensities in [0, 1]. An empty label
/// field leaves the sample unlabeled; a first row starting with "label" is a
/// header. Every row must have the same width.
std::vector<Sample> load_feature_dataset(const std::filesystem::path& path);

/// Reads `events_file,label` rows; event files resolve relative to the
/// manifest's directory and are loaded with load_aer.
std::vector<Sample> load_aer_manifest(const std::filesystem::path& path, std::size_t address_limit = 0);

/// Encodes one sample into one spike train per input channel.
std::vector<SpikeTrain> encode_sample(const Sample& sample, const EncoderConfig& cfg, std::size_t channels,
                                      double T, double dt, std::uint64_t seed);

}  // namespace spikeforge::encoding
