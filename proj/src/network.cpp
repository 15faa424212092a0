#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "spikeforge/engine.hpp"
#include "spikeforge/error.hpp"
#include "spikeforge/random.hpp"
#include "spikeforge/simd.hpp"

namespace spikeforge::engine {

namespace {

constexpr std::uint64_t kMaskStream = 0x6d61736b;  // "mask"
constexpr std::uint64_t kInitStream = 0x696e6974;  // "init"

std::string coords(std::size_t layer, std::size_t i, std::size_t j, double t) {
  return "(layer " + std::to_string(layer) + ", i " + std::to_string(i) + ", j " + std::to_string(j) + ", t " +
         std::to_string(t) + " s)";
}

}  // namespace

std::int64_t num_steps(double T, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
  if (!(T >= 0.0) || !std::isfinite(T)) throw ConfigError("T must be non-negative");
  const double ratio = T / dt;
  const double n = std::round(ratio);
  if (std::abs(ratio - n) > 1e-9) {
    throw ConfigError("T = " + std::to_string(T) + " s is not a multiple of dt = " + std::to_string(dt) + " s");
  }
  return static_cast<std::int64_t>(n);
}

void NetworkSpec::validate() const {
  if (layers.size() < 2) throw ConfigError("network needs at least an input layer and one more layer");
  std::size_t label_count = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    const auto where = "layer " + std::to_string(l) + ": ";
    if (L.neurons < 1) throw ConfigError(where + "needs at least one neuron");
    if (L.label) ++label_count;
    if (!L.neuron_model) throw ConfigError(where + "no neuron model");
    if (l == 0) {
      if (!L.neuron_model->params().waveforms.pre) throw ConfigError(where + "input neuron model needs pre_volt");
      continue;
    }
    if (!L.circuit_model) throw ConfigError(where + "no circuit model");
    if (!L.device_model) throw ConfigError(where + "no device model");
    if (L.conn_type == ConnType::Sparse && !(L.sparse_p > 0.0 && L.sparse_p <= 1.0)) {
      throw ConfigError(where + "sparse_p must lie in (0, 1]");
    }
    if (L.conn_type == ConnType::OneToOne && layers[l - 1].neurons != L.neurons) {
      throw ConfigError(where + "one_to_one needs equal layer sizes (" + std::to_string(layers[l - 1].neurons) +
                        " vs " + std::to_string(L.neurons) + ")");
    }
    if (l + 1 < layers.size() && !L.neuron_model->params().waveforms.post2) {
      throw ConfigError(where + "neuron model needs post2_volt to drive the next layer");
    }
  }
  if (label_count != 1) {
    throw ConfigError("exactly one layer must have label = true (found " + std::to_string(label_count) + ")");
  }
  for (const auto& link : inh_conn) {
    if (link.start_layer >= layers.size() || link.end_layer >= layers.size()) {
      throw ConfigError("inh_conn: layer index out of range");
    }
    if (link.start_layer == 0) throw ConfigError("inh_conn: the input layer cannot inhibit");
    if (!layers[link.start_layer].neuron_model->params().waveforms.inhib) {
      throw ConfigError("inh_conn: layer " + std::to_string(link.start_layer) + " neuron model has no inhib_volt");
    }
  }
  if (!(inh_g >= 0.0) || !std::isfinite(inh_g)) throw ConfigError("inh_g must be non-negative");
}

std::size_t NetworkSpec::label_layer() const {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].label) return l;
  }
  throw ConfigError("no label layer");
}

std::size_t Projection::synapse_count() const noexcept {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

Network::Network(std::shared_ptr<const NetworkSpec> spec, double dt) : spec_(std::move(spec)), dt_(dt) {
  if (!(dt_ > 0.0)) throw ConfigError("dt must be positive");
  spec_->validate();
  const auto& layers = spec_->layers;
  layers_.resize(layers.size());
  shapes_.resize(layers.size());
  projections_.resize(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto n = layers[l].neurons;
    auto& L = layers_[l];
    L.v.assign(n, layers[l].neuron_model->params().v_reset);
    L.refractory_until.assign(n, -std::numeric_limits<double>::infinity());
    L.energy.assign(n, 0.0);
    L.current.assign(n, 0.0);
    L.spike_count.assign(n, 0);
    L.fired.assign(n, 0);
    L.post1.resize(n);
    L.post2.resize(n);
    L.inhib.resize(n);
    const auto& w = layers[l].neuron_model->params().waveforms;
    auto& S = shapes_[l];
    if (w.pre) S.pre = wave::SampledWaveform(*w.pre, dt_);
    if (w.post1) S.post1 = wave::SampledWaveform(*w.post1, dt_);
    if (w.post2) S.post2 = wave::SampledWaveform(*w.post2, dt_);
    if (w.inhib) S.inhib = wave::SampledWaveform(*w.inhib, dt_);
  }
  for (std::size_t l = 1; l < layers.size(); ++l) build_projection(l);
  labels_.assign(layers[spec_->label_layer()].neurons, std::nullopt);
  if (spec_->init_weights.kind == InitWeights::Kind::FromFile) load_weights(*this, spec_->init_weights.path);
}

void Network::build_projection(std::size_t l) {
  const auto& spec = spec_->layers[l];
  auto& P = projections_[l];
  P.n_pre = spec_->layers[l - 1].neurons;
  P.n_post = spec.neurons;
  const auto total = P.n_pre * P.n_post;
  P.mask.assign(total, 0);
  P.g.assign(total, 0.0);
  P.mode.assign(total, synapse::SynapseMode::Idle);
  P.v_tb.assign(total, 0.0);
  P.current.assign(total, 0.0);

  switch (spec.conn_type) {
    case ConnType::AllToAll: std::fill(P.mask.begin(), P.mask.end(), std::uint8_t{1}); break;
    case ConnType::OneToOne:
      for (std::size_t j = 0; j < P.n_post; ++j) P.mask[P.at(j, j)] = 1;
      break;
    case ConnType::Sparse: {
      Rng rng(derive_seed({spec_->seed, kMaskStream, l}));
      std::size_t redraws = 0;
      for (std::size_t j = 0; j < P.n_post; ++j) {
        for (;;) {
          bool any = false;
          for (std::size_t i = 0; i < P.n_pre; ++i) {
            const bool on = rng.uniform() < spec.sparse_p;
            P.mask[P.at(i, j)] = on ? 1 : 0;
            any = any || on;
          }
          if (any) break;
          ++redraws;
        }
      }
      if (redraws > 0) {
        spdlog::info("layer {}: redrew {} sparse column(s) that had no incoming synapse", l, redraws);
      }
      break;
    }
  }

  const auto& dev = *spec.device_model;
  const auto& init = spec_->init_weights;
  Rng rng(derive_seed({spec_->seed, kInitStream, l}));
  const double span = dev.g_max() - dev.g_min();
  for (std::size_t k = 0; k < total; ++k) {
    double g = 0.0;
    switch (init.kind) {
      case InitWeights::Kind::Mid50: g = rng.uniform(dev.g_min() + 0.25 * span, dev.g_max() - 0.25 * span); break;
      case InitWeights::Kind::Uniform: g = rng.uniform(init.lo, init.hi); break;
      case InitWeights::Kind::Constant: g = init.lo; break;
      case InitWeights::Kind::FromFile: g = dev.g_min(); break;
    }
    P.g[k] = P.mask[k] ? dev.clamp(g) : 0.0;
  }
}

void Network::inject_input(std::size_t channel, int sign) {
  auto& q = layers_.at(0).post2.at(channel);
  q.push_back({step_, static_cast<std::int8_t>(sign < 0 ? -1 : 1)});
}

void Network::reset_state() {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto& L = layers_[l];
    std::fill(L.v.begin(), L.v.end(), spec_->layers[l].neuron_model->params().v_reset);
    std::fill(L.refractory_until.begin(), L.refractory_until.end(), -std::numeric_limits<double>::infinity());
    std::fill(L.current.begin(), L.current.end(), 0.0);
    std::fill(L.fired.begin(), L.fired.end(), std::uint8_t{0});
    for (auto& q : L.post1) q.clear();
    for (auto& q : L.post2) q.clear();
    for (auto& q : L.inhib) q.clear();
  }
  for (std::size_t l = 1; l < projections_.size(); ++l) {
    auto& P = projections_[l];
    std::fill(P.mode.begin(), P.mode.end(), synapse::SynapseMode::Idle);
    std::fill(P.v_tb.begin(), P.v_tb.end(), 0.0);
    std::fill(P.current.begin(), P.current.end(), 0.0);
  }
}

void Network::reset_counts() {
  for (auto& L : layers_) std::fill(L.spike_count.begin(), L.spike_count.end(), 0);
}

bool Network::sample(std::vector<Pending>& queue, const wave::SampledWaveform& shape, double& value) const {
  value = 0.0;
  bool any = false;
  std::size_t keep = 0;
  for (std::size_t q = 0; q < queue.size(); ++q) {
    const auto m = step_ - queue[q].origin;
    if (m >= static_cast<std::int64_t>(shape.steps())) continue;  // expired
    queue[keep++] = queue[q];
    if (m < 0) continue;  // not started yet
    value += queue[q].sign * shape.at(static_cast<std::size_t>(m));
    any = true;
  }
  queue.resize(keep);
  return any;
}

const wave::SampledWaveform& Network::source_shape(std::size_t l) const {
  return l == 1 ? shapes_[0].pre : shapes_[l - 1].post2;
}

void Network::run_timestep() {
  for (std::size_t l = 1; l < layers_.size(); ++l) update_layer(l);
  ++step_;
}

void Network::update_layer(std::size_t l) {
  using synapse::SynapseMode;
  const auto& spec = spec_->layers[l];
  const auto& circuit = *spec.circuit_model;
  const auto& cp = circuit.params();
  const auto& model = *spec.neuron_model;
  const auto& mp = model.params();
  auto& src = layers_[l - 1];
  auto& dst = layers_[l];
  auto& P = projections_[l];
  const double t = time();
  const auto n_pre = P.n_pre;
  const auto n_post = P.n_post;

  // (1) spike activity visible at this step
  pre_v_.assign(n_pre, 0.0);
  pre_act_.assign(n_pre, 0);
  const auto& pre_shape = source_shape(l);
  for (std::size_t i = 0; i < n_pre; ++i) pre_act_[i] = sample(src.post2[i], pre_shape, pre_v_[i]);
  post1_v_.assign(n_post, 0.0);
  post1_act_.assign(n_post, 0);
  post2_v_.assign(n_post, 0.0);
  post2_act_.assign(n_post, 0);
  for (std::size_t j = 0; j < n_post; ++j) {
    post1_act_[j] = sample(dst.post1[j], shapes_[l].post1, post1_v_[j]);
    // The forward copy doubles as V_post2 for circuits that read it; layer
    // l+1 consumes the same queue, so sample on a copy.
    auto q = dst.post2[j];
    post2_act_[j] = sample(q, shapes_[l].post2, post2_v_[j]);
  }

  // (2) synapse modes and (3) total current
  slots_ = circuit.make_slots(dt_);
  slots_[synapse::kTime] = t;
  conduct_.assign(P.g.size(), 0.0);
  for (std::size_t j = 0; j < n_post; ++j) {
    slots_[synapse::kVPost1] = post1_act_[j] ? post1_v_[j] : cp.rest_post1;
    slots_[synapse::kVPost2] = post2_act_[j] ? post2_v_[j] : cp.rest_post2;
    for (std::size_t i = 0; i < n_pre; ++i) {
      const auto k = P.at(i, j);
      if (!P.mask[k]) continue;
      const auto presence = synapse::classify_presence(pre_act_[i], post1_act_[j]);
      slots_[synapse::kVPre] = pre_act_[i] ? pre_v_[i] : cp.rest_pre;
      slots_[synapse::kG] = P.g[k];
      synapse::Outcome out;
      try {
        out = circuit.evaluate(presence, slots_);
      } catch (const Error& e) {
        throw SimulationError(std::string(e.what()) + " at " + coords(l, i, j, t));
      }
      P.mode[k] = out.mode;
      P.v_tb[k] = out.v_tb;
      P.current[k] = out.current;
      const bool conducts = out.mode == SynapseMode::Transmit ||
                            ((out.mode == SynapseMode::Potentiate || out.mode == SynapseMode::Depress) &&
                             cp.conduct_during_plasticity);
      conduct_[k] = conducts ? 1.0 : 0.0;
    }
  }
  const bool ohmic = !circuit.ex_eqs().has_value();
  for (std::size_t j = 0; j < n_post; ++j) {
    const auto col = j * n_pre;
    if (ohmic) {
      dst.current[j] = simd::dot3(std::span(P.g).subspan(col, n_pre), std::span(P.v_tb).subspan(col, n_pre),
                                  std::span(conduct_).subspan(col, n_pre));
    } else {
      dst.current[j] = simd::sum(std::span(P.current).subspan(col, n_pre));
    }
  }
  for (const auto& link : spec_->inh_conn) {
    if (link.end_layer != l) continue;
    auto& from = layers_[link.start_layer];
    const auto& shape = shapes_[link.start_layer].inhib;
    inhib_v_.assign(from.inhib.size(), 0.0);
    for (std::size_t k = 0; k < from.inhib.size(); ++k) sample(from.inhib[k], shape, inhib_v_[k]);
    for (std::size_t j = 0; j < n_post; ++j) {
      double v = 0.0;
      for (std::size_t k = 0; k < inhib_v_.size(); ++k) {
        if (link.start_layer == l && k == j) continue;
        v += inhib_v_[k];
      }
      dst.current[j] -= spec_->inh_g * v;
    }
  }

  // (4) neuron update
  if (model.default_dynamics() && !model.converts_input()) {
    simd::lif_euler(dst.v, dst.current, dt_, mp.tau, mp.r_mem);
    for (std::size_t j = 0; j < n_post; ++j) {
      if (neuron::in_refractory(t, dt_, dst.refractory_until[j])) dst.v[j] = mp.v_reset;
      if (!std::isfinite(dst.v[j])) {
        throw SimulationError("membrane of neuron " + std::to_string(j) + " in layer " + std::to_string(l) +
                              " became non-finite at t = " + std::to_string(t) + " s");
      }
      if (model.has_power()) dst.energy[j] += dt_ * model.power(dst.v[j], dst.current[j], dt_);
    }
  } else {
    for (std::size_t j = 0; j < n_post; ++j) {
      neuron::NeuronState s;
      s.v = dst.v[j];
      s.refractory_until = dst.refractory_until[j];
      s.energy = dst.energy[j];
      try {
        s = neuron::integrate(model, std::move(s), dst.current[j], t, dt_);
      } catch (const Error& e) {
        throw SimulationError(std::string(e.what()) + " (neuron " + std::to_string(j) + " in layer " +
                              std::to_string(l) + ")");
      }
      dst.v[j] = s.v;
      dst.energy[j] = s.energy;
    }
  }
  for (std::size_t j = 0; j < n_post; ++j) {
    dst.fired[j] = 0;
    if (!(dst.v[j] >= mp.thres)) continue;
    dst.fired[j] = 1;
    ++dst.spike_count[j];
    dst.v[j] = mp.v_reset;
    dst.refractory_until[j] = t + mp.t_refrac;
    const Pending next{step_ + 1, 1};
    if (!shapes_[l].post1.empty()) dst.post1[j].push_back(next);
    if (!shapes_[l].post2.empty()) dst.post2[j].push_back(next);
    if (!shapes_[l].inhib.empty()) dst.inhib[j].push_back(next);
  }

  // (5) plasticity
  if (!spec.plastic || !plasticity_) return;
  const auto& dev = *spec.device_model;
  for (std::size_t k = 0; k < P.g.size(); ++k) {
    const auto m = P.mode[k];
    if (m != SynapseMode::Potentiate && m != SynapseMode::Depress) continue;
    const auto r = synapse::apply_plasticity(dev, P.g[k], m, P.v_tb[k], dt_);
    P.g[k] = r.g;
    if (r.saturated) ++P.saturations;
  }
}

}  // namespace spikeforge::engine
