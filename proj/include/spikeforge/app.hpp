#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "spikeforge/config.hpp"
#include "spikeforge/engine.hpp"
#include "spikeforge/tuner.hpp"

/// Command implementations behind the spikeforge executable.
namespace spikeforge::app {

/// Loads a config, replacing [sim].seed first when a seed is given.
config::Config load(const std::filesystem::path& path, std::optional<std::uint64_t> seed = std::nullopt);

struct TrainSummary {
  double training_accuracy = 0.0;
  std::optional<double> testing_accuracy;
  engine::TrainResult result;
};

/// Trains, writes the weights file and a `epoch_step,train_acc` metrics CSV.
TrainSummary run_train(const config::Config& cfg, const std::filesystem::path& weights_out,
                       const std::filesystem::path& metrics_out);

struct InferSummary {
  double accuracy = 0.0;
  engine::InferenceResult result;
};

/// Frozen inference with stored weights on the test set (or the training
/// set), writing a `true_class,predicted_class,count` confusion CSV.
InferSummary run_infer(const config::Config& cfg, const std::filesystem::path& weights,
                       bool on_training_set, const std::filesystem::path& confusion_out);

/// Validation accuracy of one configuration: trains on the training part of
/// a split seeded by split_seed and scores the held-out fraction.
double validation_fitness(const config::Config& cfg, std::uint64_t split_seed, double fraction);

struct TuneSummary {
  tuner::GAResult result;
  std::string best_config;  // document with the best parameters applied
};

TuneSummary run_tune(const config::Config& cfg, const std::filesystem::path& report_out);

/// Pairing sweep for the configured [stdp] layer; CSV
/// `g_init_siemens,delta_t_seconds,delta_g_siemens`.
std::vector<engine::CurvePoint> run_stdp_curve(const config::Config& cfg, double dt_min, double dt_max,
                                               std::size_t points, const std::filesystem::path& out);

/// Spike trains of one training sample as seen during frozen evaluation;
/// CSV `channel,spike_time_seconds,polarity`.
std::vector<encoding::SpikeTrain> run_encode(const config::Config& cfg, std::size_t sample,
                                             const std::filesystem::path& out);

}  // namespace spikeforge::app
