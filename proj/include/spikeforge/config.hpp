#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spikeforge/encoding.hpp"
#include "spikeforge/engine.hpp"
#include "spikeforge/error.hpp"
#include "spikeforge/neuron.hpp"
#include "spikeforge/synapse.hpp"
#include "spikeforge/tuner.hpp"

namespace spikeforge::config {

struct Diagnostic {
  std::string key;  // dotted path, e.g. "layers.1.conn_type"
  int line = 0;     // 1-based; 0 when unknown
  std::string message;
};

/// Every problem found while loading a config, in document order.
class ConfigErrors : public ConfigError {
 public:
  ConfigErrors(std::string source, std::vector<Diagnostic> diags);
  const std::vector<Diagnostic>& diagnostics() const noexcept { return diags_; }

 private:
  std::vector<Diagnostic> diags_;
};

struct TuneSpec {
  tuner::GAConfig ga;
  std::vector<tuner::ParamRange> params;
  double validation_fraction = 0.2;
};

struct StdpSpec {
  std::size_t layer = 1;  // synapses into this layer
  std::vector<double> g_init;
};

struct Config {
  std::filesystem::path source;
  std::filesystem::path base_dir;  // relative paths resolve against this
  std::string document;            // normalized document text

  engine::SimConfig sim;
  encoding::EncoderConfig encoder;
  std::shared_ptr<const engine::NetworkSpec> network;
  std::map<std::string, std::shared_ptr<const synapse::DeviceModel>> devices;
  std::map<std::string, std::shared_ptr<const synapse::CircuitModel>> circuits;
  std::map<std::string, std::shared_ptr<const neuron::NeuronModel>> neurons;

  engine::Dataset train;
  std::optional<engine::Dataset> test;
  std::optional<TuneSpec> tune;
  std::optional<StdpSpec> stdp;
};

/// Parses and validates a YAML config. Throws ConfigErrors with every
/// diagnostic, or IoError when the file cannot be read.
Config load_config(const std::filesystem::path& path);

/// Same as load_config for in-memory text; relative paths resolve against
/// base_dir.
Config load_config_text(const std::string& text, const std::filesystem::path& base_dir,
                        const std::string& source_name = "<memory>");

/// Returns the document with each dotted key path set to its value. The
/// parent of every key must exist; integers are written without a fraction.
std::string apply_overrides(const std::string& document, const tuner::Assignment& values);

/// Same, with values written verbatim as YAML scalars.
std::string apply_scalar_overrides(const std::string& document,
                                   const std::vector<std::pair<std::string, std::string>>& values);

/// Every key a config may contain, for documentation and error messages.
std::vector<std::string> section_keys(const std::string& section);

}  // namespace spikeforge::config
