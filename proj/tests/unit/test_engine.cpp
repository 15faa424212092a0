#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "nets.hpp"
#include "spikeforge/engine.hpp"
#include "spikeforge/error.hpp"
#include "approx.hpp"
#include "testkit.hpp"

using namespace spikeforge;
using namespace spikeforge::engine;

namespace {

std::shared_ptr<const synapse::CircuitModel> ohmic_circuit() {
  synapse::CircuitParams cp;
  cp.v_app = "V_pre - V_post1";
  cp.v_th_pos = 10.0;
  cp.v_th_neg = 10.0;
  return std::make_shared<const synapse::CircuitModel>(cp);
}

std::shared_ptr<const neuron::NeuronModel> plain_lif(double thres = 1.0) {
  neuron::NeuronParams p;
  p.tau = 0.02;
  p.thres = thres;
  p.r_mem = 1e5;
  const double post[] = {0, 1.5, 0.002, 1.5, 0.002, -1.5, 0.006, -1.5};
  p.waveforms.post1 = wave::Waveform::from_flat(post);
  p.waveforms.post2 = wave::Waveform::from_flat(std::vector<double>{0, 1.0, 0.001, 1.0});
  p.waveforms.inhib = wave::Waveform::from_flat(std::vector<double>{0, 1.0, 0.005, 1.0});
  return std::make_shared<const neuron::NeuronModel>(p);
}

LayerSpec hidden(std::size_t n, ConnType ct, bool label = false, bool plastic = false) {
  LayerSpec L;
  L.neurons = n;
  L.conn_type = ct;
  L.label = label;
  L.plastic = plastic;
  L.neuron_model = plain_lif();
  L.circuit_model = ohmic_circuit();
  L.device_model = nets::linear_device(11, 1e-6, 11e-6);
  return L;
}

NetworkSpec two_layer(std::size_t n_in, std::size_t n_out, ConnType ct = ConnType::AllToAll) {
  NetworkSpec s;
  s.layers.push_back(nets::input_layer(n_in));
  s.layers.push_back(hidden(n_out, ct, true, true));
  return s;
}

}  // namespace

TEST_CASE("num_steps") {
  CHECK(num_steps(1.0, 1e-3) == 1000);
  CHECK(num_steps(0.5, 0.5) == 1);
  CHECK(num_steps(20.0, 1e-3) == 20000);
  CHECK_THROWS_AS(num_steps(1.0, 0.3), ConfigError);
  CHECK_THROWS_AS(num_steps(1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(num_steps(-1.0, 0.1), ConfigError);
}

TEST_CASE("topology per connection type") {
  const auto a = build_network(two_layer(4, 2), 1e-3);
  CHECK(a.projection(1).synapse_count() == 8);

  const auto b = build_network(two_layer(3, 3, ConnType::OneToOne), 1e-3);
  const auto& P = b.projection(1);
  CHECK(P.synapse_count() == 3);
  for (std::size_t j = 0; j < 3; ++j) CHECK(P.mask[P.at(j, j)] == 1);

  auto sparse = two_layer(10, 10, ConnType::Sparse);
  sparse.layers[1].sparse_p = 0.5;
  sparse.seed = 77;
  const auto s1 = build_network(sparse, 1e-3);
  const auto s2 = build_network(sparse, 1e-3);
  CHECK(s1.projection(1).mask == s2.projection(1).mask);
  const auto count = s1.projection(1).synapse_count();
  CHECK(count > 20);
  CHECK(count < 80);

  // Very sparse draws still give every neuron an input.
  sparse.layers[1].sparse_p = 0.01;
  const auto thin = build_network(sparse, 1e-3);
  for (std::size_t j = 0; j < 10; ++j) {
    std::size_t in = 0;
    for (std::size_t i = 0; i < 10; ++i) in += thin.projection(1).mask[thin.projection(1).at(i, j)];
    CHECK(in >= 1);
  }
}

TEST_CASE("structural validation") {
  CHECK_THROWS_AS(build_network(two_layer(3, 2, ConnType::OneToOne), 1e-3), ConfigError);
  auto nolabel = two_layer(2, 2);
  nolabel.layers[1].label = false;
  CHECK_THROWS_WITH_AS(build_network(nolabel, 1e-3), doctest::Contains("label"), ConfigError);
  auto twolabels = two_layer(2, 2);
  twolabels.layers.push_back(hidden(2, ConnType::AllToAll, true));
  CHECK_THROWS_AS(build_network(twolabels, 1e-3), ConfigError);
  auto badinh = two_layer(2, 2);
  badinh.inh_conn.push_back({1, 5});
  CHECK_THROWS_AS(build_network(badinh, 1e-3), ConfigError);
}

TEST_CASE("initial conductances respect the device range") {
  auto spec = two_layer(8, 4);
  spec.init_weights.kind = InitWeights::Kind::Constant;
  spec.init_weights.lo = 1.0;  // far above g_max
  const auto hi = build_network(spec, 1e-3);
  for (double g : hi.projection(1).g) CHECK(g == 11e-6);
  spec.init_weights.kind = InitWeights::Kind::Mid50;
  const auto mid = build_network(spec, 1e-3);
  for (double g : mid.projection(1).g) {
    CHECK(g >= 3.5e-6);
    CHECK(g <= 8.5e-6);
  }
}

TEST_CASE("no spikes: everything idle and the membrane decays") {
  auto net = build_network(two_layer(3, 2), 1e-3);
  net.layer(1).v = {0.5, 0.25};
  for (int k = 0; k < 5; ++k) net.run_timestep();
  for (auto m : net.projection(1).mode) CHECK(m == synapse::SynapseMode::Idle);
  CHECK(net.layer(1).current == std::vector<double>{0.0, 0.0});
  CHECK(net.layer(1).v[0] == approx(0.5 * std::pow(1 - 0.05, 5)));
  CHECK(net.layer(1).v[1] < 0.25);
}

TEST_CASE("a single pre-spike delivers g * V for the pulse duration") {
  auto spec = two_layer(1, 1);
  spec.layers[0] = nets::input_layer(1, {0, 0.2, 0.003, 0.2});
  spec.init_weights.kind = InitWeights::Kind::Constant;
  spec.init_weights.lo = 4e-6;
  spec.layers[1].neuron_model = plain_lif(1e9);
  auto net = build_network(spec, 1e-3);
  net.inject_input(0);
  std::vector<double> seen;
  for (int k = 0; k < 6; ++k) {
    net.run_timestep();
    seen.push_back(net.layer(1).current[0]);
  }
  CHECK(seen == std::vector<double>{4e-6 * 0.2, 4e-6 * 0.2, 4e-6 * 0.2, 0.0, 0.0, 0.0});
}

TEST_CASE("lateral inhibition subtracts peer currents but not the neuron's own") {
  auto spec = two_layer(1, 3);
  spec.inh_conn.push_back({1, 1});
  spec.inh_g = 2e-6;
  auto net = build_network(spec, 1e-3);
  // Neuron 0 fires at step 0 through a forced membrane value.
  net.layer(1).v = {5.0, 0.0, 0.0};
  net.run_timestep();
  CHECK(net.layer(1).fired[0] == 1);
  net.run_timestep();
  CHECK(net.layer(1).current[0] == 0.0);
  CHECK(net.layer(1).current[1] == approx(-2e-6));
  CHECK(net.layer(1).current[2] == approx(-2e-6));
}

TEST_CASE("labels, prediction and tie rules") {
  Dataset data(3);
  data[0].label = 0;
  data[1].label = 1;
  data[2].label = 1;
  const SpikeCounts counts{{0, 5, 0, 2}, {4, 0, 0, 2}, {1, 0, 0, 0}};
  const auto labels = assign_labels(counts, data);
  CHECK(labels[0] == 1);
  CHECK(labels[1] == 0);
  CHECK_FALSE(labels[2].has_value());
  CHECK(labels[3] == 0);  // 2 vs 2: lower class

  const std::vector<std::uint64_t> c1{0, 3, 3, 0};
  CHECK(predict(c1, labels) == 0);  // tie between neurons 1 and 2: neuron 1
  const std::vector<std::uint64_t> silent{0, 0, 0, 0};
  CHECK_FALSE(predict(silent, labels).has_value());
  const std::vector<std::uint64_t> unlabeled{0, 0, 7, 0};
  CHECK_FALSE(predict(unlabeled, labels).has_value());
}

TEST_CASE("a hard-wired separable network scores 1.0") {
  auto spec = two_layer(2, 2, ConnType::OneToOne);
  spec.layers[1].plastic = false;
  spec.init_weights.kind = InitWeights::Kind::Constant;
  spec.init_weights.lo = 11e-6;
  spec.layers[0] = nets::input_layer(2, {0, 1.0, 0.002, 1.0});
  spec.layers[1].neuron_model = plain_lif(0.05);
  auto net = build_network(spec, 1e-3);
  Dataset data(4);
  data[0] = {{1.0, 0.0}, {}, 0};
  data[1] = {{0.0, 1.0}, {}, 1};
  data[2] = {{0.9, 0.0}, {}, 0};
  data[3] = {{0.0, 0.8}, {}, 1};
  encoding::EncoderConfig enc;
  enc.kind = encoding::Kind::FixedRate;
  enc.r_max = 100.0;
  SimConfig sim;
  sim.T_sample = 0.1;
  label_network(net, data, enc, sim);
  CHECK(net.labels()[0] == 0);
  CHECK(net.labels()[1] == 1);
  CHECK(infer(net, data, enc, sim).accuracy == 1.0);

  // Silencing the inputs makes every prediction wrong.
  Dataset quiet{{{0.0, 0.0}, {}, 0}};
  const auto r = infer(net, quiet, enc, sim);
  CHECK(r.accuracy == 0.0);
  CHECK_FALSE(r.predictions[0].has_value());
}

namespace {

Dataset two_class_rates() {
  Dataset d;
  for (int k = 0; k < 6; ++k) {
    encoding::Sample s;
    s.label = k % 2;
    for (int i = 0; i < 8; ++i) s.features.push_back((i < 4) == (k % 2 == 0) ? 0.9 : 0.05);
    d.push_back(s);
  }
  return d;
}

}  // namespace

TEST_CASE("frozen layers keep their conductances bit for bit") {
  auto spec = two_layer(8, 2);
  spec.layers[1].plastic = false;
  auto net = build_network(spec, 1e-3);
  const auto before = net.projection(1).g;
  encoding::EncoderConfig enc;
  enc.r_max = 80.0;
  SimConfig sim;
  sim.T = 1.0;
  train(net, two_class_rates(), enc, sim);
  CHECK(net.projection(1).g == before);
}

TEST_CASE("training is deterministic and keeps sparse masks") {
  auto spec = two_layer(8, 2, ConnType::Sparse);
  spec.layers[1].sparse_p = 0.6;
  spec.seed = 5;
  spec.inh_conn.push_back({1, 1});
  encoding::EncoderConfig enc;
  enc.r_max = 80.0;
  SimConfig sim;
  sim.T = 1.0;
  sim.seed = 9;
  std::vector<std::pair<std::int64_t, double>> checkpoints;
  sim.checkpoint_steps = 300;
  auto a = build_network(spec, 1e-3);
  const auto mask = a.projection(1).mask;
  const auto ra = train(a, two_class_rates(), enc, sim,
                        [&](std::int64_t step, double acc) { checkpoints.emplace_back(step, acc); });
  auto b = build_network(spec, 1e-3);
  const auto rb = train(b, two_class_rates(), enc, sim);
  CHECK(ra.training_accuracy == rb.training_accuracy);
  CHECK(a.projection(1).g == b.projection(1).g);
  CHECK(a.labels() == b.labels());
  CHECK(a.projection(1).mask == mask);
  for (std::size_t k = 0; k < mask.size(); ++k) {
    if (!mask[k]) CHECK(a.projection(1).g[k] == 0.0);
  }
  CHECK(ra.steps == 1000);
  CHECK(ra.presentations == 10);
  REQUIRE(checkpoints.size() == 4);
  CHECK(checkpoints.back().first == 1000);
  CHECK(checkpoints.back().second == ra.training_accuracy);
  // Frozen inference on the training set reproduces the reported accuracy.
  CHECK(infer(a, two_class_rates(), enc, sim).accuracy == ra.training_accuracy);
}

TEST_CASE("dimension mismatch is rejected") {
  auto net = build_network(two_layer(3, 2), 1e-3);
  encoding::EncoderConfig enc;
  CHECK_THROWS_AS(train(net, two_class_rates(), enc, SimConfig{}), ConfigError);
  CHECK_THROWS_AS(train(net, Dataset{}, enc, SimConfig{}), ConfigError);
}

TEST_CASE("weights files round trip and reject damage") {
  auto spec = two_layer(5, 3, ConnType::Sparse);
  spec.layers[1].sparse_p = 0.5;
  spec.seed = 3;
  auto shared = std::make_shared<const NetworkSpec>(spec);
  Network net(shared, 1e-3);
  testkit::Gen g(71);
  for (auto& x : net.projection(1).g) {
    if (x != 0.0) x = g.uniform(1e-6, 11e-6);
  }
  net.labels() = {1, std::nullopt, 0};
  testkit::TempDir dir("w");
  save_network(net, dir / "w.txt");
  const auto back = load_network(shared, 1e-3, dir / "w.txt");
  CHECK(back.projection(1).g == net.projection(1).g);
  CHECK(back.projection(1).mask == net.projection(1).mask);
  CHECK(back.labels() == net.labels());

  const auto text = testkit::read_file(dir / "w.txt");
  testkit::write_file(dir / "trunc.txt", text.substr(0, text.size() / 2));
  CHECK_THROWS_WITH_AS(load_network(shared, 1e-3, dir / "trunc.txt"), doctest::Contains("corrupt"), IoError);
  auto future = text;
  future.replace(future.find("v1"), 2, "v2");
  testkit::write_file(dir / "future.txt", future);
  CHECK_THROWS_WITH_AS(load_network(shared, 1e-3, dir / "future.txt"), doctest::Contains("version 2"), IoError);
  CHECK_THROWS_WITH_AS(load_network(shared, 1e-3, dir / "future.txt"), doctest::Contains("version 1"), IoError);
  auto other = text;
  other.replace(other.find("sizes,5,3"), 9, "sizes,5,4");
  testkit::write_file(dir / "shape.txt", other);
  CHECK_THROWS_AS(load_network(shared, 1e-3, dir / "shape.txt"), IoError);
  CHECK_THROWS_AS(load_network(shared, 1e-3, dir / "missing.txt"), IoError);
  // A failed load leaves the target untouched.
  auto keep = net.projection(1).g;
  CHECK_THROWS_AS(load_weights(net, dir / "trunc.txt"), IoError);
  CHECK(net.projection(1).g == keep);
}

TEST_CASE("saved dynamic state resumes a run exactly") {
  auto spec = two_layer(4, 2);
  spec.layers[1].neuron_model = plain_lif(0.2);
  spec.inh_conn.push_back({1, 1});
  auto a = build_network(spec, 1e-3);
  auto b = build_network(spec, 1e-3);
  testkit::Gen g(72);
  std::vector<std::vector<int>> inputs(200);
  for (auto& step : inputs) {
    for (int ch = 0; ch < 4; ++ch) {
      if (g.coin(0.2)) step.push_back(ch);
    }
  }
  auto run = [&](Network& n, std::size_t from, std::size_t to) {
    for (std::size_t k = from; k < to; ++k) {
      for (int ch : inputs[k]) n.inject_input(static_cast<std::size_t>(ch));
      n.run_timestep();
    }
  };
  run(a, 0, 200);
  run(b, 0, 90);
  const auto saved = b.save_state();
  const auto g_saved = b.projection(1).g;
  run(b, 90, 140);
  b.restore_state(saved);
  b.projection(1).g = g_saved;
  run(b, 90, 200);
  CHECK(b.layer(1).v == a.layer(1).v);
  CHECK(b.layer(1).spike_count == a.layer(1).spike_count);
  CHECK(b.projection(1).g == a.projection(1).g);
  CHECK(a.layer(1).spike_count != std::vector<std::uint64_t>{0, 0});
}

TEST_CASE("pairing protocol against the overlap oracle on a two-terminal circuit") {
  // V_TB = V_post1 - V_pre; plasticity needs both spikes, so only the
  // overlap of the pre pulse with the V+ or V- phase programs the device.
  synapse::CircuitParams cp;
  cp.v_app = "V_post1 - V_pre";
  cp.v_th_pos = 1.0;
  cp.v_th_neg = 1.0;
  cp.plasticity_policy = {synapse::SpikePresence::Both};
  const synapse::CircuitModel circuit(cp);
  const auto dev = nets::linear_device(101, 1e-6, 101e-6);
  const testkit::PairingShape shape{5, 0.4, 3, 1.5, 7, -0.7};
  const wave::Waveform pre = wave::Waveform::from_flat(std::vector<double>{0, 0.4, 0.005, 0.4});
  const wave::Waveform post =
      wave::Waveform::from_flat(std::vector<double>{0, 1.5, 0.003, 1.5, 0.003, -0.7, 0.010, -0.7});
  PairingSetup setup{&circuit, dev.get(), &pre, &post, 1e-3};
  int pos = 0;
  int neg = 0;
  for (std::int64_t d = -20; d <= 20; ++d) {
    const auto c = testkit::overlap_oracle(shape, d, 1.0, 1.0, [](double vp, double vq) { return vq - vp; });
    const double dg = pairing_delta_g(setup, 50e-6, d);
    CHECK_MESSAGE(testkit::sign_of(dg) == testkit::sign_of(c.potentiating - c.depressing), "delta steps " << d);
    CHECK(dg == approx((c.potentiating - c.depressing) * 1e-6, 1e-9));
    pos += dg > 0;
    neg += dg < 0;
  }
  CHECK(pos > 0);
  CHECK(neg > 0);
}

TEST_CASE("stdp_curve snaps delays to the grid and sweeps every initial conductance") {
  synapse::CircuitParams cp;
  cp.v_app = "V_post1 - V_pre";
  const synapse::CircuitModel circuit(cp);
  const auto dev = nets::linear_device(11, 1e-6, 11e-6);
  const wave::Waveform pre = wave::Waveform::from_flat(std::vector<double>{0, -0.5, 0.002, -0.5});
  const wave::Waveform post = wave::Waveform::from_flat(std::vector<double>{0, 0.8, 0.002, 0.8});
  PairingSetup setup{&circuit, dev.get(), &pre, &post, 1e-3};
  const double g0[] = {2e-6, 5e-6};
  const auto curve = stdp_curve(setup, g0, -0.003, 0.003, 7);
  REQUIRE(curve.size() == 14);
  CHECK(curve[0].delta_t == approx(-0.003));
  CHECK(curve[3].delta_t == 0.0);
  CHECK(curve[3].delta_g == approx(2e-6, 1e-9));
  CHECK(curve[7].g_init == 5e-6);
  CHECK_THROWS_AS(stdp_curve(setup, g0, 0.01, -0.01, 3), ConfigError);
}

TEST_CASE("halving dt converges on the micro-net with a pulse-width device") {
  // Width-axis family whose per-pulse increment scales with the pulse
  // width, so a fixed programming time moves g by a dt-independent amount.
  synapse::PulseFamilyDevice fam;
  fam.axis = synapse::FamilyAxis::Width;
  for (double w : {0.25e-3, 0.5e-3, 1e-3}) {
    std::vector<double> up, down;
    const double inc = 0.05e-6 * (w / 1e-3);
    const auto n = std::llround(4e-6 / inc);
    for (long long k = 0; k <= n; ++k) up.push_back(std::min(5e-6, 1e-6 + static_cast<double>(k) * inc));
    down.assign(up.rbegin(), up.rend());
    fam.potentiation.amplitudes.push_back(w);
    fam.potentiation.rows.push_back(up);
    fam.depression.amplitudes.push_back(w);
    fam.depression.rows.push_back(down);
  }
  auto spec = std::make_shared<NetworkSpec>(*nets::micro_net());
  spec->layers[1].device_model = std::make_shared<const synapse::DeviceModel>(fam, 1e-6, 5e-6);

  auto final_g = [&](double dt) {
    auto net = Network(spec, dt);
    const auto second = static_cast<std::int64_t>(std::llround(1e-3 / dt));
    const auto steps = static_cast<std::int64_t>(std::llround(10e-3 / dt));
    for (std::int64_t k = 0; k < steps; ++k) {
      if (k == 0) net.inject_input(0);
      if (k == second) net.inject_input(1);
      net.run_timestep();
    }
    return net.projection(1).g;
  };
  const auto g1 = final_g(1e-3);
  const auto g2 = final_g(0.5e-3);
  const auto g4 = final_g(0.25e-3);
  for (std::size_t i = 0; i < 2; ++i) {
    const double d1 = std::abs(g1[i] - g2[i]);
    const double d2 = std::abs(g2[i] - g4[i]);
    MESSAGE("synapse ", i, ": g = ", g1[i], ", ", g2[i], ", ", g4[i]);
    CHECK(d2 <= d1);
    CHECK(d1 < 1e-6);
  }
}
