#include <doctest.h>

#include <algorithm>

#include "approx.hpp"
#include "spikeforge/config.hpp"
#include "testkit.hpp"

using namespace spikeforge;
using namespace spikeforge::config;

namespace {

std::filesystem::path data_dir() { return testkit::source_dir() / "tests" / "data"; }

std::string minimal_text() { return testkit::read_file(data_dir() / "minimal.yaml"); }

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  REQUIRE_MESSAGE(at != std::string::npos, from);
  return text.replace(at, from.size(), to);
}

/// Loads text expected to fail and returns its diagnostics.
std::vector<Diagnostic> diagnostics_of(const std::string& text) {
  try {
    load_config_text(text, data_dir(), "test.yaml");
  } catch (const ConfigErrors& e) {
    return e.diagnostics();
  }
  FAIL("config unexpectedly loaded");
  return {};
}

bool has_diag(const std::vector<Diagnostic>& d, const std::string& key, const std::string& needle) {
  return std::any_of(d.begin(), d.end(), [&](const Diagnostic& x) {
    return x.key == key && x.message.find(needle) != std::string::npos;
  });
}

}  // namespace

TEST_CASE("the minimal golden config loads and builds") {
  const auto cfg = load_config(data_dir() / "minimal.yaml");
  CHECK(cfg.sim.T == 0.4);
  CHECK(cfg.sim.seed == 3);
  CHECK(cfg.network->seed == 3);  // defaults to the sim seed
  CHECK(cfg.train.size() == 4);
  CHECK_FALSE(cfg.test.has_value());
  CHECK(cfg.network->layers.size() == 2);
  CHECK(cfg.network->init_weights.kind == engine::InitWeights::Kind::Mid50);
  const auto net = engine::build_network(*cfg.network, cfg.sim.dt);
  CHECK(net.projection(1).synapse_count() == 8);
}

TEST_CASE("the shipped learning config loads") {
  const auto cfg = load_config(testkit::source_dir() / "configs" / "two_patterns.yaml");
  CHECK(cfg.encoder.kind == encoding::Kind::Aer);
  CHECK(cfg.train.size() == 10);
  REQUIRE(cfg.test.has_value());
  CHECK(cfg.test->size() == 20);
  const auto& dev = *cfg.devices.at("rram");
  CHECK(dev.g_min() == 1e-6);
  CHECK(dev.g_max() == 100e-6);
  REQUIRE(cfg.stdp.has_value());
  CHECK(cfg.stdp->g_init.size() == 3);
}

TEST_CASE("sparse connectivity without sparse_p names the key") {
  const auto d = diagnostics_of(replace(minimal_text(), "    device: dev\n", "    device: dev\n    conn_type: sparse\n"));
  CHECK(has_diag(d, "layers.1.sparse_p", "required"));
}

TEST_CASE("unknown circuit variables list the vocabulary") {
  const auto d = diagnostics_of(replace(minimal_text(), "v_app: V_post1 - V_pre", "v_app: V_post1 - V_bogus"));
  REQUIRE(d.size() == 1);
  CHECK(d[0].message.find("V_bogus") != std::string::npos);
  CHECK(d[0].message.find("allowed: V_pre, V_post1, V_post2, V_node1, V_node2, G, dt, t") != std::string::npos);
  CHECK(d[0].line > 0);
}

TEST_CASE("every problem is reported with its line, not just the first") {
  auto text = minimal_text();
  text = replace(text, "  seed: 3\n", "  seed: 3\n  bogus: 1\n");
  text = replace(text, "  T: 0.4\n", "  T: 0.4005\n");
  text = replace(text, "    circuit: ckt\n", "    circuit: nope\n");
  text = replace(text, "    thres: 0.2\n", "    thres: 0.2\n    thresh: 0.3\n");
  const auto d = diagnostics_of(text);
  CHECK(d.size() >= 4);
  CHECK(has_diag(d, "sim.bogus", "unknown key"));
  CHECK(has_diag(d, "sim.T", "multiple"));
  CHECK(has_diag(d, "layers.1.circuit", "unknown circuit 'nope'"));
  CHECK(has_diag(d, "neuron.lif.thresh", "unknown key"));
  for (std::size_t k = 1; k < d.size(); ++k) CHECK(d[k - 1].line <= d[k].line);
  try {
    load_config_text(text, data_dir(), "test.yaml");
  } catch (const ConfigErrors& e) {
    const std::string what = e.what();
    CHECK(what.find("test.yaml") != std::string::npos);
    CHECK(what.find("configuration error") != std::string::npos);
  }
}

TEST_CASE("missing files and bad syntax") {
  CHECK(has_diag(diagnostics_of(replace(minimal_text(), "minimal_train.csv", "nowhere.csv")), "data.train_path",
                 "not found"));
  CHECK_THROWS_AS(load_config_text("sim: [1, 2\n", data_dir()), ConfigError);
  CHECK_THROWS_AS(load_config(data_dir() / "absent.yaml"), IoError);
  const auto d = diagnostics_of(replace(minimal_text(), "type: poisson", "type: morse"));
  CHECK(has_diag(d, "encoding.type", "poisson"));
}

TEST_CASE("input layer keys and label layer rules") {
  const auto d = diagnostics_of(replace(minimal_text(), "    neuron: input\n", "    neuron: input\n    plastic: true\n"));
  CHECK(has_diag(d, "layers.0.plastic", ""));
  const auto e = diagnostics_of(replace(minimal_text(), "    label: true\n", ""));
  CHECK_FALSE(e.empty());
}

TEST_CASE("device variants: generated levels and pulse families") {
  auto text = replace(minimal_text(),
                      "    kind: identical\n    levels_ltp: [1.0e-6, 2.0e-6, 3.0e-6, 4.0e-6, 5.0e-6]\n"
                      "    levels_ltd: [5.0e-6, 4.0e-6, 3.0e-6, 2.0e-6, 1.0e-6]\n",
                      "    kind: family\n    table_path: family.csv\n    family_axis: amplitude\n");
  const auto cfg = load_config_text(text, data_dir());
  const auto& dev = *cfg.devices.at("dev");
  CHECK_FALSE(dev.identical());
  CHECK(dev.g_min() == 1e-6);
  CHECK(dev.g_max() == 7e-6);

  auto gen = replace(minimal_text(),
                     "    levels_ltp: [1.0e-6, 2.0e-6, 3.0e-6, 4.0e-6, 5.0e-6]\n"
                     "    levels_ltd: [5.0e-6, 4.0e-6, 3.0e-6, 2.0e-6, 1.0e-6]\n",
                     "    levels_count: 11\n    g_min: 0\n    g_max: 1.0e-5\n");
  const auto c2 = load_config_text(gen, data_dir());
  const auto& id = std::get<synapse::IdenticalPulseDevice>(c2.devices.at("dev")->variant());
  CHECK(id.levels_ltp.size() == 11);
  CHECK(id.levels_ltp[5] == approx(5e-6));
  CHECK(id.levels_ltd.front() == approx(1e-5));
}

TEST_CASE("neuron calibration from a width-frequency table") {
  auto text = replace(minimal_text(), "    tau: 0.02\n    thres: 0.2\n",
                      "    calib_path: calib.csv\n    calib_pulse_amplitude: 200\n    calib_pulse_rate: 100\n");
  const auto cfg = load_config_text(text, data_dir());
  const auto& p = cfg.neurons.at("lif")->params();
  CHECK(p.tau == approx(0.03, 0.05));
  CHECK(p.thres == approx(0.8, 0.05));

  auto conflict = replace(minimal_text(), "    tau: 0.02\n", "    tau: 0.02\n    calib_path: calib.csv\n");
  CHECK(has_diag(diagnostics_of(conflict), "neuron.lif.calib_path", "remove them"));
}

TEST_CASE("overrides rewrite dotted keys") {
  const auto base = minimal_text();
  const auto doc = apply_overrides(base, {{"sim.seed", 12.0}, {"neuron.lif.tau", 0.015}, {"layers.1.neurons", 3.0}});
  const auto cfg = load_config_text(doc, data_dir());
  CHECK(cfg.sim.seed == 12);
  CHECK(cfg.neurons.at("lif")->params().tau == 0.015);
  CHECK(cfg.network->layers[1].neurons == 3);
  CHECK_THROWS_AS(apply_overrides(base, {{"nothing.here.x", 1.0}}), ConfigError);
  const auto s = apply_scalar_overrides(base, {{"encoding.type", "fixed"}});
  CHECK(load_config_text(s, data_dir()).encoder.kind == encoding::Kind::FixedRate);
}

TEST_CASE("tune and stdp sections") {
  auto text = minimal_text() +
              "tune:\n  population: 6\n  generations: 2\n  threads: 2\n  params:\n"
              "    - {key: neuron.lif.tau, lo: 0.005, hi: 0.05, scale: log}\n"
              "    - {key: layers.1.neurons, lo: 1, hi: 4, kind: integer}\n"
              "stdp:\n  layer: 1\n  g_init: [2.0e-6, 4.0e-6]\n";
  const auto cfg = load_config_text(text, data_dir());
  REQUIRE(cfg.tune.has_value());
  CHECK(cfg.tune->ga.population == 6);
  CHECK(cfg.tune->ga.seed == 3);
  CHECK(cfg.tune->ga.mutation_rate == 0.1);
  REQUIRE(cfg.tune->params.size() == 2);
  CHECK(cfg.tune->params[0].scale == tuner::Scale::Log);
  CHECK(cfg.tune->params[1].kind == tuner::Kind::Integer);
  CHECK(cfg.tune->validation_fraction == 0.2);
  CHECK(cfg.stdp->g_init == std::vector<double>{2e-6, 4e-6});

  auto bad = minimal_text() + "tune:\n  population: 1\n  elitism: 1\n  params:\n    - {key: sim.nope.x, lo: 0, hi: 1}\n";
  const auto d = diagnostics_of(bad);
  CHECK(d.size() >= 2);
}

TEST_CASE("section keys are documented") {
  const auto keys = section_keys("circuit");
  CHECK(std::find(keys.begin(), keys.end(), "conduct_during_plasticity") != keys.end());
  CHECK(section_keys("nonexistent").empty());
}

TEST_CASE("seeds keep all 64 bits") {
  const auto text = apply_scalar_overrides(minimal_text(), {{"sim.seed", "18446744073709551557"}});
  const auto cfg = load_config_text(text, data_dir());
  CHECK(cfg.sim.seed == 18446744073709551557ULL);
  CHECK(has_diag(diagnostics_of(replace(minimal_text(), "seed: 3", "seed: -3")), "sim.seed", "non-negative"));
  CHECK(has_diag(diagnostics_of(replace(minimal_text(), "seed: 3", "seed: 2.5")), "sim.seed", "non-negative"));
}
