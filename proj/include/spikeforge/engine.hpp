#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "spikeforge/encoding.hpp"
#include "spikeforge/neuron.hpp"
#include "spikeforge/synapse.hpp"
#include "spikeforge/waveform.hpp"

namespace spikeforge::engine {

enum class ConnType { AllToAll, OneToOne, Sparse };

struct LayerSpec {
  std::size_t neurons = 1;
  bool plastic = false;
  bool label = false;
  ConnType conn_type = ConnType::AllToAll;  // connections from the previous layer
  double sparse_p = 1.0;
  std::shared_ptr<const neuron::NeuronModel> neuron_model;
  std::shared_ptr<const synapse::CircuitModel> circuit_model;  // unused for layer 0
  std::shared_ptr<const synapse::DeviceModel> device_model;    // unused for layer 0
};

struct InitWeights {
  enum class Kind { Mid50, Uniform, Constant, FromFile };
  Kind kind = Kind::Mid50;
  double lo = 0.0;  // Uniform bounds, or the Constant value in lo
  double hi = 0.0;
  std::filesystem::path path;
};

/// Neurons of start_layer inhibit neurons of end_layer (all-to-all except
/// self when start == end).
struct InhibitoryLink {
  std::size_t start_layer = 0;
  std::size_t end_layer = 0;
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  std::vector<InhibitoryLink> inh_conn;
  double inh_g = 1e-6;  // fixed conductance of inhibitory synapses, siemens
  std::uint64_t seed = 0;
  InitWeights init_weights;

  /// Throws ConfigError describing the first structural problem.
  void validate() const;
  std::size_t label_layer() const;
};

struct SimConfig {
  double T = 1.0;  // total training time, s
  double dt = 1e-3;
  double T_sample = 0.1;  // presentation window, s
  bool reset_between_samples = true;
  bool shuffle = true;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_steps = 0;  // 0: only the final checkpoint
};

/// N = T / dt; T must sit on the dt grid (to 1e-9 steps).
std::int64_t num_steps(double T, double dt);

// ---------------------------------------------------------------------------

/// Synapses from layer l-1 into layer l, stored column-major by target
/// neuron: element (i, j) lives at j * n_pre + i.
struct Projection {
  std::size_t n_pre = 0;
  std::size_t n_post = 0;
  std::vector<std::uint8_t> mask;
  std::vector<double> g;
  std::vector<synapse::SynapseMode> mode;  // modes resolved at the last step
  std::vector<double> v_tb;
  std::vector<double> current;
  std::uint64_t saturations = 0;

  std::size_t at(std::size_t i, std::size_t j) const noexcept { return j * n_pre + i; }
  std::size_t synapse_count() const noexcept;
};

/// A waveform trigger on the step grid. sign = -1 plays the shape inverted.
struct Pending {
  std::int64_t origin;
  std::int8_t sign;
};

struct LayerState {
  std::vector<double> v;
  std::vector<double> refractory_until;
  std::vector<double> energy;
  std::vector<double> current;  // total input current at the last step
  std::vector<std::uint64_t> spike_count;
  std::vector<std::uint8_t> fired;  // spiked at the last step
  std::vector<std::vector<Pending>> post1;
  std::vector<std::vector<Pending>> post2;  // layer 0: input pre-spikes
  std::vector<std::vector<Pending>> inhib;
};

class Network {
 public:
  /// Builds topology and initial conductances. Throws ConfigError.
  Network(std::shared_ptr<const NetworkSpec> spec, double dt);

  const NetworkSpec& spec() const noexcept { return *spec_; }
  std::shared_ptr<const NetworkSpec> spec_ptr() const noexcept { return spec_; }
  double dt() const noexcept { return dt_; }
  std::int64_t step() const noexcept { return step_; }
  double time() const noexcept { return static_cast<double>(step_) * dt_; }

  std::size_t layer_count() const noexcept { return layers_.size(); }
  LayerState& layer(std::size_t l) { return layers_.at(l); }
  const LayerState& layer(std::size_t l) const { return layers_.at(l); }
  /// Projection into layer l (l >= 1).
  Projection& projection(std::size_t l) { return projections_.at(l); }
  const Projection& projection(std::size_t l) const { return projections_.at(l); }

  std::vector<std::optional<int>>& labels() noexcept { return labels_; }
  const std::vector<std::optional<int>>& labels() const noexcept { return labels_; }

  bool plasticity_enabled() const noexcept { return plasticity_; }
  void set_plasticity(bool on) noexcept { plasticity_ = on; }

  /// Triggers an input-layer spike at the current step.
  void inject_input(std::size_t channel, int sign = 1);

  /// Advances one dt: per layer in order, gather spikes, resolve synapse
  /// modes, sum currents, update neurons, apply plasticity.
  void run_timestep();

  /// Clears membranes, refractory windows and pending waveforms.
  void reset_state();
  void reset_counts();

  /// Everything except conductances, masks and labels.
  struct DynamicState {
    std::vector<LayerState> layers;
    std::int64_t step;
  };
  DynamicState save_state() const { return {layers_, step_}; }
  void restore_state(DynamicState s) {
    layers_ = std::move(s.layers);
    step_ = s.step;
  }

 private:
  struct Shapes {
    wave::SampledWaveform pre;  // layer 0 only
    wave::SampledWaveform post1;
    wave::SampledWaveform post2;
    wave::SampledWaveform inhib;
  };

  void build_projection(std::size_t l);
  void update_layer(std::size_t l);
  /// Sum of active triggers at the current step; false when none is active.
  bool sample(std::vector<Pending>& queue, const wave::SampledWaveform& shape, double& value) const;
  const wave::SampledWaveform& source_shape(std::size_t l) const;

  std::shared_ptr<const NetworkSpec> spec_;
  double dt_;
  std::int64_t step_ = 0;
  bool plasticity_ = true;
  std::vector<LayerState> layers_;
  std::vector<Projection> projections_;  // index 0 unused
  std::vector<Shapes> shapes_;
  std::vector<std::optional<int>> labels_;

  // Scratch buffers reused across steps.
  std::vector<double> pre_v_, post1_v_, post2_v_, inhib_v_, conduct_, slots_;
  std::vector<std::uint8_t> pre_act_, post1_act_, post2_act_;
};

inline Network build_network(const NetworkSpec& spec, double dt) {
  return Network(std::make_shared<const NetworkSpec>(spec), dt);
}

// ---------------------------------------------------------------------------
// Weights file

void save_network(const Network& net, const std::filesystem::path& path);
/// Builds from spec, then replaces masks, conductances and labels with the
/// file contents. Throws IoError on version mismatch or corruption.
Network load_network(std::shared_ptr<const NetworkSpec> spec, double dt, const std::filesystem::path& path);
/// Replaces conductances/masks/labels of an existing network.
void load_weights(Network& net, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Training and inference

using Dataset = std::vector<encoding::Sample>;
using SpikeCounts = std::vector<std::vector<std::uint64_t>>;  // [sample][label-layer neuron]

/// Encoder seed used for sample `index` during frozen evaluation.
std::uint64_t evaluation_seed(std::uint64_t sim_seed, std::size_t index) noexcept;

/// Presents every sample once with plasticity frozen and the network reset
/// before each sample; returns the label layer's spike counts. Encoder
/// seeds depend only on (sim.seed, sample index).
SpikeCounts frozen_spike_counts(Network& net, const Dataset& data, const encoding::EncoderConfig& enc,
                                const SimConfig& sim);

/// Each neuron takes the class with the highest total count (ties to the
/// lower class); silent neurons stay unlabeled.
std::vector<std::optional<int>> assign_labels(const SpikeCounts& counts, const Dataset& data);

/// Class of the most active neuron (ties to the lowest index); nullopt when
/// all are silent or the winner is unlabeled.
std::optional<int> predict(std::span<const std::uint64_t> counts, const std::vector<std::optional<int>>& labels);

struct InferenceResult {
  double accuracy = 0.0;
  std::vector<std::optional<int>> predictions;
};

InferenceResult infer(Network& net, const Dataset& data, const encoding::EncoderConfig& enc, const SimConfig& sim);

/// Label assignment on the training set with plasticity frozen; stores the
/// labels in the network.
void label_network(Network& net, const Dataset& data, const encoding::EncoderConfig& enc, const SimConfig& sim);

struct TrainResult {
  double training_accuracy = 0.0;
  std::int64_t steps = 0;
  std::int64_t presentations = 0;
};

using CheckpointSink = std::function<void(std::int64_t step, double train_accuracy)>;

/// Presents shuffled samples for T_sample each until num_steps(T, dt) steps
/// have run, then labels the network and measures frozen accuracy on the
/// training set.
TrainResult train(Network& net, const Dataset& data, const encoding::EncoderConfig& enc, const SimConfig& sim,
                  const CheckpointSink& sink = {});

// ---------------------------------------------------------------------------
// Pre/post pairing protocol behind STDP curves.

struct PairingSetup {
  const synapse::CircuitModel* circuit = nullptr;
  const synapse::DeviceModel* device = nullptr;
  const wave::Waveform* pre = nullptr;
  const wave::Waveform* post1 = nullptr;
  double dt = 1e-3;
};

/// Conductance change of one synapse after a single pre-spike at step 0 and a
/// post-spike delta_steps later (negative: post first).
double pairing_delta_g(const PairingSetup& setup, double g0, std::int64_t delta_steps);

struct CurvePoint {
  double g_init;
  double delta_t;
  double delta_g;
};

/// Sweeps delta_t over `points` values from dt_min to dt_max (snapped to the
/// grid) for every initial conductance.
std::vector<CurvePoint> stdp_curve(const PairingSetup& setup, std::span<const double> g_inits, double dt_min,
                                   double dt_max, std::size_t points);

}  // namespace spikeforge::engine
