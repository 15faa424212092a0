#include <algorithm>
#include <numeric>
#include <set>

#include "spikeforge/engine.hpp"
#include "spikeforge/error.hpp"
#include "spikeforge/random.hpp"

namespace spikeforge::engine {

namespace {

constexpr std::uint64_t kEvalStream = 0x6576616c;     // "eval"
constexpr std::uint64_t kTrainStream = 0x747261696e;  // "train"
constexpr std::uint64_t kShuffleStream = 0x73687566;  // "shuf"

void check_dataset(const Network& net, const Dataset& data, const encoding::EncoderConfig& enc) {
  if (data.empty()) throw ConfigError("dataset is empty");
  if (enc.kind == encoding::Kind::Aer) return;
  const auto width = net.spec().layers[0].neurons;
  for (std::size_t s = 0; s < data.size(); ++s) {
    if (data[s].features.size() != width) {
      throw ConfigError("sample " + std::to_string(s) + " has " + std::to_string(data[s].features.size()) +
                        " features; the input layer has " + std::to_string(width) + " neurons");
    }
  }
}

/// Runs `steps` timesteps feeding the encoded trains from their step 0.
void present(Network& net, const std::vector<encoding::SpikeTrain>& trains, std::int64_t steps) {
  std::vector<std::size_t> cursor(trains.size(), 0);
  for (std::int64_t m = 0; m < steps; ++m) {
    for (std::size_t ch = 0; ch < trains.size(); ++ch) {
      const auto& tr = trains[ch];
      auto& c = cursor[ch];
      while (c < tr.steps.size() && tr.steps[c] == m) {
        net.inject_input(ch, tr.polarity.empty() ? 1 : tr.polarity[c]);
        ++c;
      }
    }
    net.run_timestep();
  }
}

}  // namespace

std::uint64_t evaluation_seed(std::uint64_t sim_seed, std::size_t index) noexcept {
  return derive_seed({sim_seed, kEvalStream, index});
}

SpikeCounts frozen_spike_counts(Network& net, const Dataset& data, const encoding::EncoderConfig& enc,
                                const SimConfig& sim) {
  check_dataset(net, data, enc);
  const auto steps = num_steps(sim.T_sample, sim.dt);
  const auto channels = net.spec().layers[0].neurons;
  const auto label_layer = net.spec().label_layer();
  const bool was_plastic = net.plasticity_enabled();
  net.set_plasticity(false);
  SpikeCounts counts;
  counts.reserve(data.size());
  for (std::size_t s = 0; s < data.size(); ++s) {
    const auto trains = encoding::encode_sample(data[s], enc, channels, sim.T_sample, sim.dt,
                                                evaluation_seed(sim.seed, s));
    net.reset_state();
    net.reset_counts();
    present(net, trains, steps);
    counts.push_back(net.layer(label_layer).spike_count);
  }
  net.set_plasticity(was_plastic);
  return counts;
}

std::vector<std::optional<int>> assign_labels(const SpikeCounts& counts, const Dataset& data) {
  if (counts.empty()) return {};
  int classes = 0;
  for (const auto& s : data) {
    if (!s.label) throw ConfigError("every training sample needs a label");
    if (*s.label < 0) throw ConfigError("labels must be non-negative integers");
    classes = std::max(classes, *s.label + 1);
  }
  const auto n = counts.front().size();
  std::vector<std::optional<int>> labels(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<std::uint64_t> per_class(static_cast<std::size_t>(classes), 0);
    for (std::size_t s = 0; s < counts.size(); ++s) per_class[static_cast<std::size_t>(*data[s].label)] += counts[s][j];
    std::uint64_t best = 0;
    for (int c = 0; c < classes; ++c) {
      if (per_class[static_cast<std::size_t>(c)] > best) {
        best = per_class[static_cast<std::size_t>(c)];
        labels[j] = c;
      }
    }
  }
  return labels;
}

std::optional<int> predict(std::span<const std::uint64_t> counts, const std::vector<std::optional<int>>& labels) {
  std::size_t best = 0;
  std::uint64_t best_count = 0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] > best_count) {
      best_count = counts[j];
      best = j;
    }
  }
  if (best_count == 0) return std::nullopt;
  return labels.at(best);
}

namespace {

InferenceResult score(const SpikeCounts& counts, const Dataset& data, const std::vector<std::optional<int>>& labels) {
  InferenceResult r;
  std::size_t correct = 0;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    auto p = predict(counts[s], labels);
    if (p && data[s].label && *p == *data[s].label) ++correct;
    r.predictions.push_back(p);
  }
  r.accuracy = counts.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(counts.size());
  return r;
}

}  // namespace

InferenceResult infer(Network& net, const Dataset& data, const encoding::EncoderConfig& enc, const SimConfig& sim) {
  const auto counts = frozen_spike_counts(net, data, enc, sim);
  return score(counts, data, net.labels());
}

void label_network(Network& net, const Dataset& data, const encoding::EncoderConfig& enc, const SimConfig& sim) {
  net.labels() = assign_labels(frozen_spike_counts(net, data, enc, sim), data);
}

TrainResult train(Network& net, const Dataset& data, const encoding::EncoderConfig& enc, const SimConfig& sim,
                  const CheckpointSink& sink) {
  check_dataset(net, data, enc);
  for (const auto& s : data) {
    if (!s.label) throw ConfigError("every training sample needs a label");
  }
  const auto total = num_steps(sim.T, sim.dt);
  const auto per_sample = num_steps(sim.T_sample, sim.dt);
  if (per_sample < 1) throw ConfigError("T_sample must be at least one dt");
  const auto channels = net.spec().layers[0].neurons;

  // Frozen evaluation on the training set: one pass yields both the labels
  // and the accuracy measured with them.
  auto evaluate = [&](std::int64_t at_step) {
    auto saved = net.save_state();
    const auto counts = frozen_spike_counts(net, data, enc, sim);
    net.restore_state(std::move(saved));
    auto labels = assign_labels(counts, data);
    const double acc = score(counts, data, labels).accuracy;
    if (sink) sink(at_step, acc);
    return std::pair{std::move(labels), acc};
  };

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  TrainResult result;
  net.set_plasticity(true);
  std::int64_t done = 0;
  std::int64_t next_checkpoint = sim.checkpoint_steps > 0 ? sim.checkpoint_steps : total + 1;
  std::size_t pos = order.size();
  std::uint64_t epoch = 0;
  while (done < total) {
    if (pos == order.size()) {
      std::iota(order.begin(), order.end(), 0);
      if (sim.shuffle) {
        Rng rng(derive_seed({sim.seed, kShuffleStream, epoch}));
        rng.shuffle(order.begin(), order.end());
      }
      ++epoch;
      pos = 0;
    }
    const auto s = order[pos++];
    const auto steps = std::min(per_sample, total - done);
    const auto trains = encoding::encode_sample(
        data[s], enc, channels, sim.T_sample, sim.dt,
        derive_seed({sim.seed, kTrainStream, static_cast<std::uint64_t>(result.presentations)}));
    if (sim.reset_between_samples) net.reset_state();
    present(net, trains, steps);
    done += steps;
    ++result.presentations;
    if (done >= next_checkpoint && done < total) {
      evaluate(done);
      next_checkpoint += sim.checkpoint_steps;
    }
  }
  result.steps = done;
  auto [labels, acc] = evaluate(done);
  net.labels() = std::move(labels);
  result.training_accuracy = acc;
  return result;
}

}  // namespace spikeforge::engine
