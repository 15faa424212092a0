#include "spikeforge/app.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "spikeforge/error.hpp"
#include "spikeforge/random.hpp"

namespace spikeforge::app {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSplitStream = 0x73706c6974;  // "split"

std::ofstream open_out(const fs::path& path, const char* what) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write {} {}", what, path.string()));
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path base_of(const fs::path& path) { return path.parent_path().empty() ? fs::path(".") : path.parent_path(); }

}  // namespace

config::Config load(const fs::path& path, std::optional<std::uint64_t> seed) {
  if (!seed) return config::load_config(path);
  const auto text = config::apply_scalar_overrides(read_file(path), {{"sim.seed", std::to_string(*seed)}});
  auto cfg = config::load_config_text(text, base_of(path), path.string());
  cfg.source = path;
  return cfg;
}

TrainSummary run_train(const config::Config& cfg, const fs::path& weights_out, const fs::path& metrics_out) {
  auto net = engine::Network(cfg.network, cfg.sim.dt);
  auto metrics = open_out(metrics_out, "metrics file");
  metrics << "epoch_step,train_acc\n";
  TrainSummary s;
  s.result = engine::train(net, cfg.train, cfg.encoder, cfg.sim, [&](std::int64_t step, double acc) {
    metrics << fmt::format("{},{}\n", step, acc);
    spdlog::info("step {}: training accuracy {}", step, acc);
  });
  finish(metrics, metrics_out);
  s.training_accuracy = s.result.training_accuracy;
  engine::save_network(net, weights_out);
  if (cfg.test) s.testing_accuracy = engine::infer(net, *cfg.test, cfg.encoder, cfg.sim).accuracy;
  return s;
}

InferSummary run_infer(const config::Config& cfg, const fs::path& weights, bool on_training_set,
                       const fs::path& confusion_out) {
  const engine::Dataset* data = &cfg.train;
  if (!on_training_set) {
    if (!cfg.test) throw ConfigError("data.test_path is not set; pass the training-set flag to score training data");
    data = &*cfg.test;
  }
  auto net = engine::load_network(cfg.network, cfg.sim.dt, weights);
  InferSummary s;
  s.result = engine::infer(net, *data, cfg.encoder, cfg.sim);
  s.accuracy = s.result.accuracy;

  // Unlabeled samples and missing predictions sort after every class.
  constexpr int kNone = std::numeric_limits<int>::max();
  std::map<std::pair<int, int>, std::size_t> confusion;
  for (std::size_t k = 0; k < data->size(); ++k) {
    const int truth = (*data)[k].label.value_or(kNone);
    const int pred = s.result.predictions[k].value_or(kNone);
    ++confusion[{truth, pred}];
  }
  auto name = [&](int c) { return c == kNone ? std::string("none") : std::to_string(c); };
  auto out = open_out(confusion_out, "confusion file");
  out << "true_class,predicted_class,count\n";
  for (const auto& [key, n] : confusion) out << name(key.first) << ',' << name(key.second) << ',' << n << '\n';
  finish(out, confusion_out);
  return s;
}

namespace {

std::pair<engine::Dataset, engine::Dataset> split(const engine::Dataset& data, std::uint64_t seed, double fraction) {
  if (data.size() < 2) throw ConfigError("tuning needs at least 2 training samples for a validation split");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed({seed, kSplitStream}));
  rng.shuffle(idx.begin(), idx.end());
  auto n_val = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(data.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, data.size() - 1);
  std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::sort(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::pair<engine::Dataset, engine::Dataset> out;
  for (std::size_t k = 0; k < idx.size(); ++k) (k < n_val ? out.second : out.first).push_back(data[idx[k]]);
  return out;
}

}  // namespace

double validation_fitness(const config::Config& cfg, std::uint64_t split_seed, double fraction) {
  const auto [train_part, val_part] = split(cfg.train, split_seed, fraction);
  auto net = engine::Network(cfg.network, cfg.sim.dt);
  engine::train(net, train_part, cfg.encoder, cfg.sim);
  return engine::infer(net, val_part, cfg.encoder, cfg.sim).accuracy;
}

TuneSummary run_tune(const config::Config& cfg, const fs::path& report_out) {
  if (!cfg.tune) throw ConfigError("config has no tune section");
  const auto& t = *cfg.tune;
  auto fitness = [&](const tuner::Assignment& params, std::uint64_t seed) {
    auto text = config::apply_overrides(cfg.document, params);
    text = config::apply_scalar_overrides(text, {{"sim.seed", std::to_string(seed)}});
    const auto trial = config::load_config_text(text, cfg.base_dir, cfg.source.string());
    return validation_fitness(trial, t.ga.seed, t.validation_fraction);
  };
  TuneSummary s;
  s.result = tuner::ga_optimize(t.params, fitness, t.ga);
  tuner::write_report(s.result, report_out);
  s.best_config = config::apply_overrides(cfg.document, s.result.best_params);
  return s;
}

std::vector<engine::CurvePoint> run_stdp_curve(const config::Config& cfg, double dt_min, double dt_max,
                                               std::size_t points, const fs::path& out_path) {
  const config::StdpSpec st = cfg.stdp.value_or(config::StdpSpec{});
  const auto& layers = cfg.network->layers;
  if (st.layer < 1 || st.layer >= layers.size()) throw ConfigError("stdp.layer must name a non-input layer");
  const auto& post = layers[st.layer];
  const auto& src = layers[st.layer - 1];
  const auto& pre_wave = st.layer == 1 ? src.neuron_model->params().waveforms.pre
                                       : src.neuron_model->params().waveforms.post2;
  const auto& post_wave = post.neuron_model->params().waveforms.post1;
  if (!pre_wave) throw ConfigError("stdp-curve: the source layer's neuron has no pre-spike waveform");
  if (!post_wave) throw ConfigError("stdp-curve: the target layer's neuron has no post1_volt waveform");
  engine::PairingSetup setup{post.circuit_model.get(), post.device_model.get(), &*pre_wave, &*post_wave,
                             cfg.sim.dt};
  auto g_init = st.g_init;
  if (g_init.empty()) {
    const auto& d = *post.device_model;
    for (double f : {0.25, 0.5, 0.75}) g_init.push_back(d.g_min() + f * (d.g_max() - d.g_min()));
  }
  const auto curve = engine::stdp_curve(setup, g_init, dt_min, dt_max, points);
  auto out = open_out(out_path, "stdp curve");
  out << "g_init_siemens,delta_t_seconds,delta_g_siemens\n";
  for (const auto& p : curve) out << fmt::format("{},{:.12g},{}\n", p.g_init, p.delta_t, p.delta_g);
  finish(out, out_path);
  return curve;
}

std::vector<encoding::SpikeTrain> run_encode(const config::Config& cfg, std::size_t sample, const fs::path& out_path) {
  if (sample >= cfg.train.size()) {
    throw ConfigError(fmt::format("sample {} out of range (training set has {})", sample, cfg.train.size()));
  }
  const auto trains = encoding::encode_sample(cfg.train[sample], cfg.encoder, cfg.network->layers[0].neurons,
                                              cfg.sim.T_sample, cfg.sim.dt,
                                              engine::evaluation_seed(cfg.sim.seed, sample));
  auto out = open_out(out_path, "spike-train file");
  out << "channel,spike_time_seconds,polarity\n";
  for (std::size_t ch = 0; ch < trains.size(); ++ch) {
    const auto& tr = trains[ch];
    for (std::size_t k = 0; k < tr.steps.size(); ++k) {
      const int pol = tr.polarity.empty() ? 1 : tr.polarity[k];
      out << fmt::format("{},{:.12g},{}\n", ch, static_cast<double>(tr.steps[k]) * tr.dt, pol);
    }
  }
  finish(out, out_path);
  return trains;
}

}  // namespace spikeforge::app
