#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace spikeforge::tuner {

enum class Scale { Linear, Log };
enum class Kind { Real, Integer };

/// One tunable parameter. Genes live in scale space: identity for linear
/// ranges, natural log for log ranges.
struct ParamRange {
  std::string name;  // config key path, e.g. "neuron.lif.tau"
  double lo = 0.0;
  double hi = 1.0;
  Scale scale = Scale::Linear;
  Kind kind = Kind::Real;

  void validate() const;  // throws ConfigError
  double gene_lo() const;
  double gene_hi() const;
};

struct GAConfig {
  std::size_t population = 20;
  std::size_t generations = 15;
  double crossover_rate = 0.9;
  double mutation_rate = 0.1;
  double mutation_sigma = 0.1;  // fraction of the gene range
  std::size_t elitism = 1;
  std::size_t tournament_size = 2;
  std::uint64_t seed = 0;
  std::size_t threads = 1;  // concurrent fitness evaluations

  void validate() const;  // throws ConfigError
};

struct Individual {
  std::vector<double> genome;
  std::optional<double> fitness;
};

using Assignment = std::vector<std::pair<std::string, double>>;

/// Fitness of a decoded assignment. The seed is unique per (generation,
/// individual) and independent of evaluation order.
using FitnessFn = std::function<double(const Assignment& params, std::uint64_t seed)>;

struct GenerationStats {
  std::size_t generation = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  Assignment best_params;
};

struct GAResult {
  Individual best;
  Assignment best_params;
  double best_fitness = 0.0;
  std::vector<GenerationStats> history;  // generation 0 is the initial population
};

/// Maps a genome to parameter values. Integer kinds round half-up and are
/// clamped to [lo, hi]. Throws ConfigError on a length mismatch.
Assignment decode(const Individual& ind, std::span<const ParamRange> space);

/// Gaussian mutation of every gene with probability `rate`, clipped to the
/// gene bounds.
void mutate(Individual& ind, std::span<const ParamRange> space, double rate, double sigma, std::uint64_t seed);

/// Generational GA with tournament selection, uniform crossover, Gaussian
/// mutation and elitism. Fitness errors are rethrown as the same error
/// category with the offending parameters appended to the message.
GAResult ga_optimize(std::span<const ParamRange> space, const FitnessFn& fitness, const GAConfig& cfg);

/// `name=value;name=value` in space order.
std::string format_assignment(const Assignment& a);

/// CSV `generation,best_fitness,mean_fitness,best_params`.
void write_report(const GAResult& result, const std::filesystem::path& path);

}  // namespace spikeforge::tuner
