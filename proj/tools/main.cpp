#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "spikeforge/app.hpp"
#include "spikeforge/error.hpp"

namespace sf = spikeforge;

namespace {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const sf::ConfigError*>(&e)) return 1;
  if (dynamic_cast<const sf::IoError*>(&e)) return 3;
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"spikeforge: clock-driven simulator for spiking networks with nanodevice synapses"};
  cli.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::string log_level = "warn";
  cli.add_option("--seed", seed, "Override sim.seed from the config");
  cli.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

  std::string cfg_path;
  auto add_config = [&](CLI::App* sub) { sub->add_option("config", cfg_path, "Config file (YAML)")->required(); };

  std::string weights_out = "weights.txt";
  std::string metrics_out = "metrics.csv";
  auto* train = cli.add_subcommand("train", "Train a network and write weights and metrics");
  add_config(train);
  train->add_option("--weights-out", weights_out, "Weights file to write")->capture_default_str();
  train->add_option("--metrics-out", metrics_out, "Checkpoint metrics CSV")->capture_default_str();

  std::string weights_in;
  std::string confusion_out = "confusion.csv";
  bool on_train = false;
  auto* infer = cli.add_subcommand("infer", "Frozen inference with stored weights");
  add_config(infer);
  infer->add_option("--weights", weights_in, "Weights file from train")->required();
  infer->add_flag("--train-set", on_train, "Score the training set instead of the test set");
  infer->add_option("--confusion-out", confusion_out, "Confusion CSV")->capture_default_str();

  std::string report_out = "tuning_report.csv";
  std::string best_out;
  auto* tune = cli.add_subcommand("tune", "Genetic-algorithm parameter search");
  add_config(tune);
  tune->add_option("--report-out", report_out, "Per-generation report CSV")->capture_default_str();
  tune->add_option("--best-config-out", best_out, "Also write the best config here");

  double dt_min = -0.05;
  double dt_max = 0.05;
  std::size_t points = 101;
  std::string curve_out = "stdp_curve.csv";
  auto* stdp = cli.add_subcommand("stdp-curve", "Pairing sweep of one synapse");
  add_config(stdp);
  stdp->add_option("--dt-min", dt_min, "First post-minus-pre delay, s")->capture_default_str();
  stdp->add_option("--dt-max", dt_max, "Last delay, s")->capture_default_str();
  stdp->add_option("--points", points, "Number of delays")->capture_default_str()->check(CLI::PositiveNumber);
  stdp->add_option("--out", curve_out, "Output CSV")->capture_default_str();

  std::size_t sample = 0;
  std::string encode_out = "spikes.csv";
  auto* encode = cli.add_subcommand("encode", "Write the spike trains of one training sample");
  add_config(encode);
  encode->add_option("--sample", sample, "Training sample index")->required();
  encode->add_option("--out", encode_out, "Output CSV")->capture_default_str();

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? 0 : 1;
  }

  spdlog::set_default_logger(spdlog::stderr_color_mt("spikeforge"));
  spdlog::set_level(spdlog::level::from_str(log_level));
  spdlog::set_pattern("[%l] %v");

  try {
    const auto cfg = sf::app::load(cfg_path, seed);
    if (train->parsed()) {
      const auto s = sf::app::run_train(cfg, weights_out, metrics_out);
      std::printf("training_accuracy: %.6f\n", s.training_accuracy);
      if (s.testing_accuracy) std::printf("testing_accuracy: %.6f\n", *s.testing_accuracy);
    } else if (infer->parsed()) {
      const auto s = sf::app::run_infer(cfg, weights_in, on_train, confusion_out);
      std::printf("%s: %.6f\n", on_train ? "training_accuracy" : "testing_accuracy", s.accuracy);
    } else if (tune->parsed()) {
      const auto s = sf::app::run_tune(cfg, report_out);
      std::printf("best_fitness: %.6f\n", s.result.best_fitness);
      std::printf("best_params: %s\n", sf::tuner::format_assignment(s.result.best_params).c_str());
      if (!best_out.empty()) {
        std::ofstream out(best_out, std::ios::binary);
        out << s.best_config;
        if (!out) throw sf::IoError("cannot write " + best_out);
      }
      std::printf("# best config\n%s\n", s.best_config.c_str());
    } else if (stdp->parsed()) {
      const auto curve = sf::app::run_stdp_curve(cfg, dt_min, dt_max, points, curve_out);
      std::printf("wrote %zu points to %s\n", curve.size(), curve_out.c_str());
    } else if (encode->parsed()) {
      const auto trains = sf::app::run_encode(cfg, sample, encode_out);
      std::size_t spikes = 0;
      for (const auto& t : trains) spikes += t.size();
      std::printf("wrote %zu spikes on %zu channels to %s\n", spikes, trains.size(), encode_out.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  }
  return 0;
}
