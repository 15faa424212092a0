#include <doctest.h>

#include <sstream>

#include "approx.hpp"
#include "spikeforge/app.hpp"
#include "testkit.hpp"

using namespace spikeforge;

namespace {

std::filesystem::path minimal() { return testkit::source_dir() / "tests" / "data" / "minimal.yaml"; }

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("train writes weights and metrics that inference reproduces") {
  testkit::TempDir dir("app_train");
  const auto cfg = app::load(minimal());
  const auto s = app::run_train(cfg, dir / "w.bin", dir / "m.csv");
  CHECK_FALSE(s.testing_accuracy.has_value());
  const auto metrics = lines(testkit::read_file(dir / "m.csv"));
  REQUIRE_FALSE(metrics.empty());
  CHECK(metrics[0] == "epoch_step,train_acc");

  const auto inf = app::run_infer(cfg, dir / "w.bin", true, dir / "c.csv");
  CHECK(inf.accuracy == s.training_accuracy);
  const auto confusion = lines(testkit::read_file(dir / "c.csv"));
  REQUIRE(confusion.size() >= 2);
  CHECK(confusion[0] == "true_class,predicted_class,count");
  std::size_t total = 0;
  for (std::size_t k = 1; k < confusion.size(); ++k) total += std::stoul(confusion[k].substr(confusion[k].rfind(',') + 1));
  CHECK(total == cfg.train.size());

  CHECK_THROWS_AS(app::run_infer(cfg, dir / "w.bin", false, dir / "c2.csv"), ConfigError);
  CHECK_THROWS_AS(app::run_infer(cfg, dir / "absent.bin", true, dir / "c3.csv"), IoError);
}

TEST_CASE("a seed override replaces the sim seed") {
  const auto cfg = app::load(minimal(), 99);
  CHECK(cfg.sim.seed == 99);
  CHECK(cfg.network->seed == 99);
}

TEST_CASE("encode writes the frozen-evaluation spike trains") {
  testkit::TempDir dir("app_encode");
  const auto text = config::apply_scalar_overrides(testkit::read_file(minimal()), {{"encoding.type", "fixed"}, {"encoding.r_max", "10"}, {"sim.T_sample", "0.5"}});
  const auto cfg = config::load_config_text(text, minimal().parent_path());
  const auto trains = app::run_encode(cfg, 0, dir / "e.csv");
  REQUIRE(trains.size() == 4);
  const auto out = lines(testkit::read_file(dir / "e.csv"));
  CHECK(out[0] == "channel,spike_time_seconds,polarity");
  // Row 0 of minimal_train.csv has feature 1 on channel 0, so 10 Hz.
  std::vector<std::string> ch0;
  for (std::size_t k = 1; k < out.size(); ++k)
    if (out[k].rfind("0,", 0) == 0) ch0.push_back(out[k]);
  REQUIRE(ch0.size() == 5);
  CHECK(ch0[0] == "0,0,1");
  CHECK(ch0[1] == "0,0.1,1");
  CHECK(ch0[4] == "0,0.4,1");
  CHECK_THROWS_AS(app::run_encode(cfg, 4, dir / "x.csv"), ConfigError);
}

TEST_CASE("stdp-curve writes one row per g_init and delta") {
  testkit::TempDir dir("app_stdp");
  const auto cfg = app::load(minimal());
  const auto curve = app::run_stdp_curve(cfg, -0.01, 0.01, 5, dir / "s.csv");
  CHECK(curve.size() == 15);
  const auto out = lines(testkit::read_file(dir / "s.csv"));
  REQUIRE(out.size() == 16);
  CHECK(out[0] == "g_init_siemens,delta_t_seconds,delta_g_siemens");
  CHECK(out[1].find(",-0.01,") != std::string::npos);
}
