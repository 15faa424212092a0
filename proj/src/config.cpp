#include "spikeforge/config.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace spikeforge::config {

namespace fs = std::filesystem;

ConfigErrors::ConfigErrors(std::string source, std::vector<Diagnostic> diags)
    : ConfigError([&] {
        std::string msg = fmt::format("{}: {} configuration error(s)", source, diags.size());
        for (const auto& d : diags) {
          msg += "\n  ";
          if (d.line > 0) msg += fmt::format("line {}: ", d.line);
          if (!d.key.empty()) msg += d.key + ": ";
          msg += d.message;
        }
        return msg;
      }()),
      diags_(std::move(diags)) {}

namespace {

const std::map<std::string, std::vector<std::string>>& schema() {
  static const std::map<std::string, std::vector<std::string>> s{
      {"", {"sim", "encoding", "data", "network", "layers", "device", "circuit", "neuron", "tune", "stdp"}},
      {"sim", {"T", "dt", "T_sample", "seed", "reset_between_samples", "shuffle", "checkpoint_steps"}},
      {"encoding", {"type", "r_min", "r_max", "aer_path", "aer_polarity_mode"}},
      {"data", {"train_path", "test_path"}},
      {"network", {"inh_conn", "inh_g", "init_weights", "init_path", "seed"}},
      {"layers", {"neurons", "plastic", "label", "conn_type", "sparse_p", "device", "circuit", "neuron"}},
      {"device",
       {"kind", "levels_ltp", "levels_ltd", "levels_ltp_path", "levels_ltd_path", "levels_count", "table_path",
        "family_axis", "g_min", "g_max"}},
      {"circuit",
       {"v_app", "ex_eqs", "v_th_pos", "v_th_neg", "plasticity_policy", "transmit_policy",
        "conduct_during_plasticity", "rest_pre", "rest_post1", "rest_post2", "v_node", "constants"}},
      {"neuron",
       {"tau", "thres", "v_reset", "t_refrac", "r_mem", "state_eqs", "power_expr", "pre_volt", "post1_volt",
        "post2_volt", "inhib_volt", "calib_path", "calib_pulse_amplitude", "calib_pulse_rate",
        "pulse_convert_path"}},
      {"tune",
       {"population", "generations", "crossover_rate", "mutation_rate", "mutation_sigma", "elitism",
        "tournament_size", "seed", "threads", "validation_fraction", "params"}},
      {"tune.params", {"key", "lo", "hi", "scale", "kind"}},
      {"stdp", {"layer", "g_init"}},
  };
  return s;
}

int line_of(const YAML::Node& n) {
  if (!n.IsDefined()) return 0;
  const auto m = n.Mark();
  return m.line >= 0 ? m.line + 1 : 0;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ", ") + s;
  return out;
}

struct Ctx {
  std::vector<Diagnostic> diags;
  fs::path base_dir;

  void error(std::string key, const YAML::Node& at, std::string msg) {
    diags.push_back({std::move(key), line_of(at), std::move(msg)});
  }
  void error(std::string key, int line, std::string msg) { diags.push_back({std::move(key), line, std::move(msg)}); }
};

/// Typed access to one mapping; reports unknown keys and type errors.
class Section {
 public:
  Section(Ctx& ctx, const YAML::Node& node, std::string path, const std::string& schema_name)
      : ctx_(ctx), node_(node.IsDefined() && node.IsMap() ? node : YAML::Node(YAML::NodeType::Map)),
        path_(std::move(path)) {
    if (!node.IsDefined() || node.IsNull()) return;
    if (!node.IsMap()) {
      ctx_.error(path_, node, "expected a mapping");
      return;
    }
    const auto& allowed = schema().at(schema_name);
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        ctx_.error(sub(key), kv.first, "unknown key (allowed: " + join(allowed) + ")");
      }
    }
  }

  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return static_cast<bool>(node()[key]); }
  YAML::Node get(const std::string& key) const { return node()[key]; }
  int line() const { return line_of(node_); }
  int line(const std::string& key) const { return has(key) ? line_of(get(key)) : line(); }
  void error(const std::string& key, const std::string& msg) { ctx_.error(sub(key), line(key), msg); }

  std::optional<double> real(const std::string& key) {
    const auto n = get(key);
    if (!n) return std::nullopt;
    double x = 0.0;
    if (!n.IsScalar() || !YAML::convert<double>::decode(n, x) || !std::isfinite(x)) {
      error(key, "expected a finite number");
      return std::nullopt;
    }
    return x;
  }
  double real(const std::string& key, double fallback) { return real(key).value_or(fallback); }

  std::optional<std::uint64_t> count(const std::string& key) {
    // Integers go through an exact decode so full 64-bit seeds survive.
    if (const auto n = get(key); n && n.IsScalar()) {
      std::uint64_t v = 0;
      const auto& text = n.Scalar();
      if (!text.empty() && text.find_first_not_of("0123456789") == std::string::npos &&
          YAML::convert<std::uint64_t>::decode(n, v)) {
        return v;
      }
    }
    const auto x = real(key);
    if (!x) return std::nullopt;
    if (*x < 0.0 || std::floor(*x) != *x || *x > 9.0e15) {
      error(key, "expected a non-negative integer");
      return std::nullopt;
    }
    return static_cast<std::uint64_t>(*x);
  }
  std::uint64_t count(const std::string& key, std::uint64_t fallback) { return count(key).value_or(fallback); }

  std::optional<bool> boolean(const std::string& key) {
    const auto n = get(key);
    if (!n) return std::nullopt;
    bool b = false;
    if (!n.IsScalar() || !YAML::convert<bool>::decode(n, b)) {
      error(key, "expected true or false");
      return std::nullopt;
    }
    return b;
  }
  bool boolean(const std::string& key, bool fallback) { return boolean(key).value_or(fallback); }

  std::optional<std::string> str(const std::string& key) {
    const auto n = get(key);
    if (!n) return std::nullopt;
    if (!n.IsScalar()) {
      error(key, "expected a string");
      return std::nullopt;
    }
    return n.Scalar();
  }

  std::optional<std::string> choice(const std::string& key, const std::vector<std::string>& options) {
    auto s = str(key);
    if (s && std::find(options.begin(), options.end(), *s) == options.end()) {
      error(key, "'" + *s + "' is not one of: " + join(options));
      return std::nullopt;
    }
    return s;
  }

  std::optional<std::vector<double>> reals(const std::string& key) {
    const auto n = get(key);
    if (!n) return std::nullopt;
    if (!n.IsSequence()) {
      error(key, "expected an array of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    for (const auto& e : n) {
      double x = 0.0;
      if (!e.IsScalar() || !YAML::convert<double>::decode(e, x) || !std::isfinite(x)) {
        ctx_.error(sub(key), e, "array element is not a finite number");
        return std::nullopt;
      }
      out.push_back(x);
    }
    return out;
  }

  /// Resolves a path relative to the config directory and checks it exists.
  std::optional<fs::path> path(const std::string& key) {
    auto s = str(key);
    if (!s) return std::nullopt;
    fs::path p(*s);
    if (p.is_relative()) p = ctx_.base_dir / p;
    if (!fs::exists(p)) {
      error(key, "file not found: " + p.string());
      return std::nullopt;
    }
    return p;
  }

  /// Runs a builder and turns its ConfigError into a diagnostic on key.
  template <typename F>
  auto guard(const std::string& key, F&& f) -> std::optional<decltype(f())> {
    try {
      return f();
    } catch (const ConfigError& e) {
      error(key, e.what());
    } catch (const IoError& e) {
      error(key, e.what());
    }
    return std::nullopt;
  }

 private:
  const YAML::Node node() const { return node_; }

  Ctx& ctx_;
  YAML::Node node_;
  std::string path_;
};

/// Named subsections such as device.<name>.
std::vector<std::pair<std::string, YAML::Node>> named(Ctx& ctx, const YAML::Node& parent, const std::string& path) {
  std::vector<std::pair<std::string, YAML::Node>> out;
  if (!parent || parent.IsNull()) return out;
  if (!parent.IsMap()) {
    ctx.error(path, parent, "expected a mapping of named entries");
    return out;
  }
  for (const auto& kv : parent) out.emplace_back(kv.first.as<std::string>(), kv.second);
  return out;
}

// ---------------------------------------------------------------------------

void read_sim(Ctx& ctx, const YAML::Node& node, engine::SimConfig& sim) {
  Section s(ctx, node, "sim", "sim");
  if (!node) ctx.error("sim", 0, "missing section");
  const auto T = s.real("T");
  const auto dt = s.real("dt");
  if (!T && node) s.error("T", "required");
  if (!dt && node) s.error("dt", "required");
  sim.T = T.value_or(sim.T);
  sim.dt = dt.value_or(sim.dt);
  sim.T_sample = s.real("T_sample", sim.T_sample);
  sim.seed = s.count("seed", sim.seed);
  sim.reset_between_samples = s.boolean("reset_between_samples", sim.reset_between_samples);
  sim.shuffle = s.boolean("shuffle", sim.shuffle);
  sim.checkpoint_steps = static_cast<std::int64_t>(s.count("checkpoint_steps", 0));
  if (!(sim.dt > 0.0)) {
    s.error("dt", "must be positive");
    return;
  }
  if (!(sim.T > 0.0)) s.error("T", "must be positive");
  else s.guard("T", [&] { return engine::num_steps(sim.T, sim.dt); });
  if (!(sim.T_sample > 0.0)) s.error("T_sample", "must be positive");
  else s.guard("T_sample", [&] { return engine::num_steps(sim.T_sample, sim.dt); });
}

void read_encoding(Ctx& ctx, const YAML::Node& node, encoding::EncoderConfig& enc, std::optional<fs::path>& aer) {
  Section s(ctx, node, "encoding", "encoding");
  const auto type = s.choice("type", {"poisson", "fixed", "aer"}).value_or("poisson");
  enc.kind = type == "aer" ? encoding::Kind::Aer
             : type == "fixed" ? encoding::Kind::FixedRate
                               : encoding::Kind::Poisson;
  enc.r_min = s.real("r_min", enc.r_min);
  enc.r_max = s.real("r_max", enc.r_max);
  if (!(enc.r_min >= 0.0)) s.error("r_min", "must be non-negative");
  if (!(enc.r_max >= enc.r_min)) s.error("r_max", "must be at least r_min");
  const auto mode = s.choice("aer_polarity_mode", {"separate", "signed"}).value_or("separate");
  enc.polarity_mode = mode == "signed" ? encoding::PolarityMode::Signed : encoding::PolarityMode::Separate;
  if (enc.kind == encoding::Kind::Aer) {
    if (!s.has("aer_path")) s.error("aer_path", "required when type = aer");
    aer = s.path("aer_path");
  } else if (s.has("aer_path")) {
    s.error("aer_path", "only valid when type = aer");
  }
}

std::optional<synapse::DeviceModel> read_device(Ctx& ctx, const std::string& name, const YAML::Node& node) {
  Section s(ctx, node, "device." + name, "device");
  const auto kind = s.choice("kind", {"identical", "family"});
  if (!kind) {
    if (!s.has("kind")) s.error("kind", "required (identical or family)");
    return std::nullopt;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto g_min = s.real("g_min");
  const auto g_max = s.real("g_max");
  if (*kind == "identical") {
    for (const auto* k : {"table_path", "family_axis"}) {
      if (s.has(k)) s.error(k, "only valid for kind = family");
    }
    std::optional<std::vector<double>> ltp;
    std::optional<std::vector<double>> ltd;
    auto levels = [&](const std::string& key, std::optional<std::vector<double>>& out) {
      if (s.has(key) && s.has(key + "_path")) s.error(key, "give either " + key + " or " + key + "_path, not both");
      if (s.has(key)) out = s.reals(key);
      else if (auto p = s.path(key + "_path")) out = s.guard(key + "_path", [&] { return synapse::load_levels(*p); });
    };
    levels("levels_ltp", ltp);
    levels("levels_ltd", ltd);
    if (const auto n = s.count("levels_count")) {
      if (ltp || ltd) s.error("levels_count", "cannot be combined with explicit level arrays");
      else if (*n < 2) s.error("levels_count", "must be at least 2");
      else if (!g_min || !g_max) s.error("levels_count", "needs g_min and g_max");
      else {
        ltp.emplace();
        for (std::uint64_t k = 0; k < *n; ++k) {
          ltp->push_back(*g_min + (*g_max - *g_min) * static_cast<double>(k) / static_cast<double>(*n - 1));
        }
        ltd.emplace(ltp->rbegin(), ltp->rend());
      }
    }
    if (!ltp && !s.has("levels_ltp") && !s.has("levels_ltp_path") && !s.has("levels_count")) {
      s.error("levels_ltp", "required (or levels_ltp_path / levels_count)");
    }
    if (!ltd && !s.has("levels_ltd") && !s.has("levels_ltd_path") && !s.has("levels_count")) {
      s.error("levels_ltd", "required (or levels_ltd_path / levels_count)");
    }
    if (!ltp || !ltd) return std::nullopt;
    return s.guard("kind", [&] {
      return synapse::DeviceModel(synapse::IdenticalPulseDevice{*ltp, *ltd}, g_min.value_or(nan),
                                  g_max.value_or(nan));
    });
  }
  for (const auto* k : {"levels_ltp", "levels_ltd", "levels_ltp_path", "levels_ltd_path", "levels_count"}) {
    if (s.has(k)) s.error(k, "only valid for kind = identical");
  }
  const auto axis_s = s.choice("family_axis", {"amplitude", "width"}).value_or("amplitude");
  const auto axis = axis_s == "width" ? synapse::FamilyAxis::Width : synapse::FamilyAxis::Amplitude;
  if (!s.has("table_path")) {
    s.error("table_path", "required for kind = family");
    return std::nullopt;
  }
  const auto p = s.path("table_path");
  if (!p) return std::nullopt;
  return s.guard("table_path", [&] {
    return synapse::DeviceModel(synapse::load_family(*p, axis), g_min.value_or(nan), g_max.value_or(nan));
  });
}

std::optional<synapse::PresenceSet> read_policy(Section& s, const std::string& key) {
  const auto n = s.get(key);
  if (!n) return std::nullopt;
  if (!n.IsSequence()) {
    s.error(key, "expected an array of None, PreOnly, PostOnly, Both");
    return std::nullopt;
  }
  synapse::PresenceSet set;
  for (const auto& e : n) {
    const auto p = e.IsScalar() ? synapse::presence_from_string(e.Scalar()) : std::nullopt;
    if (!p) {
      s.error(key, "'" + (e.IsScalar() ? e.Scalar() : std::string("?")) +
                       "' is not one of: None, PreOnly, PostOnly, Both");
      return std::nullopt;
    }
    set.insert(*p);
  }
  return set;
}

std::optional<synapse::CircuitModel> read_circuit(Ctx& ctx, const std::string& name, const YAML::Node& node) {
  Section s(ctx, node, "circuit." + name, "circuit");
  synapse::CircuitParams p;
  p.v_app = s.str("v_app").value_or(p.v_app);
  p.ex_eqs = s.str("ex_eqs");
  p.v_th_pos = s.real("v_th_pos", p.v_th_pos);
  p.v_th_neg = s.real("v_th_neg", p.v_th_neg);
  if (auto pol = read_policy(s, "plasticity_policy")) p.plasticity_policy = *pol;
  if (auto pol = read_policy(s, "transmit_policy")) p.transmit_policy = *pol;
  p.conduct_during_plasticity = s.boolean("conduct_during_plasticity", p.conduct_during_plasticity);
  p.rest_pre = s.real("rest_pre", p.rest_pre);
  p.rest_post1 = s.real("rest_post1", p.rest_post1);
  p.rest_post2 = s.real("rest_post2", p.rest_post2);
  p.v_node = s.real("v_node", p.v_node);
  if (s.has("constants")) {
    const auto c = s.get("constants");
    if (!c.IsMap()) {
      s.error("constants", "expected a mapping of name: value");
    } else {
      for (const auto& kv : c) {
        double x = 0.0;
        const auto key = kv.first.as<std::string>();
        if (!kv.second.IsScalar() || !YAML::convert<double>::decode(kv.second, x) || !std::isfinite(x)) {
          ctx.error(s.sub("constants." + key), kv.second, "expected a finite number");
        } else {
          p.constants[key] = x;
        }
      }
    }
  }
  return s.guard("v_app", [&] { return synapse::CircuitModel(std::move(p)); });
}

std::optional<neuron::NeuronModel> read_neuron(Ctx& ctx, const std::string& name, const YAML::Node& node) {
  Section s(ctx, node, "neuron." + name, "neuron");
  neuron::NeuronParams p;
  p.tau = s.real("tau", p.tau);
  p.thres = s.real("thres", p.thres);
  p.v_reset = s.real("v_reset", p.v_reset);
  p.t_refrac = s.real("t_refrac", p.t_refrac);
  p.r_mem = s.real("r_mem", p.r_mem);
  p.state_eqs = s.str("state_eqs");
  p.power_expr = s.str("power_expr");
  auto wave = [&](const char* key) -> std::optional<wave::Waveform> {
    const auto flat = s.reals(key);
    if (!flat) return std::nullopt;
    return s.guard(key, [&] { return wave::Waveform::from_flat(*flat); });
  };
  p.waveforms.pre = wave("pre_volt");
  p.waveforms.post1 = wave("post1_volt");
  p.waveforms.post2 = wave("post2_volt");
  p.waveforms.inhib = wave("inhib_volt");
  if (auto path = s.path("pulse_convert_path")) {
    if (auto t = s.guard("pulse_convert_path", [&] { return neuron::PulseConvertTable::load(*path); })) {
      p.pulse_convert = std::move(*t);
    }
  }
  if (s.has("calib_path")) {
    if (s.has("tau") || s.has("thres")) s.error("calib_path", "tau and thres come from calibration; remove them");
    neuron::CalibrationDrive drive;
    drive.pulse_amplitude = s.real("calib_pulse_amplitude", drive.pulse_amplitude);
    drive.pulse_rate = s.real("calib_pulse_rate", drive.pulse_rate);
    if (auto path = s.path("calib_path")) {
      auto fit = s.guard("calib_path", [&] {
        return neuron::calibrate_from_frequency(neuron::load_frequency_data(*path), drive);
      });
      if (fit) {
        p.thres = fit->thres;
        if (fit->leaky) {
          p.tau = fit->tau;
        } else if (!p.state_eqs) {
          s.error("calib_path", "calibration found no leak; give state_eqs for a non-leaky neuron");
        }
        spdlog::info("neuron {}: calibrated tau = {} s, thres = {} (rms residual {} Hz)", name, fit->tau, fit->thres,
                     fit->residual);
      }
    }
  } else {
    for (const auto* k : {"calib_pulse_amplitude", "calib_pulse_rate"}) {
      if (s.has(k)) s.error(k, "only valid with calib_path");
    }
  }
  return s.guard("tau", [&] { return neuron::NeuronModel(std::move(p)); });
}

template <typename Map>
auto lookup(Section& s, const std::string& key, const Map& m, const char* what) -> typename Map::mapped_type {
  const auto name = s.str(key);
  if (!name) return nullptr;
  const auto it = m.find(*name);
  if (it != m.end()) return it->second;
  std::vector<std::string> names;
  for (const auto& [n, model] : m) {
    if (model) names.push_back(n);
  }
  s.error(key, fmt::format("unknown {} '{}' (defined: {})", what, *name, names.empty() ? "none" : join(names)));
  return nullptr;
}

std::optional<engine::InitWeights> parse_init(Section& s) {
  engine::InitWeights w;
  const auto text = s.str("init_weights").value_or("mid50");
  auto args = [&](std::string_view prefix, std::size_t n) -> std::optional<std::vector<double>> {
    if (text.rfind(prefix, 0) != 0 || text.back() != ')') return std::nullopt;
    std::vector<double> out;
    std::stringstream ss(text.substr(prefix.size(), text.size() - prefix.size() - 1));
    std::string field;
    while (std::getline(ss, field, ',')) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(field, &used));
        if (field.find_first_not_of(" \t", used) != std::string::npos) return std::nullopt;
      } catch (const std::exception&) {
        return std::nullopt;
      }
    }
    if (out.size() != n) return std::nullopt;
    return out;
  };
  if (text == "mid50") {
    w.kind = engine::InitWeights::Kind::Mid50;
  } else if (text == "file") {
    w.kind = engine::InitWeights::Kind::FromFile;
    if (!s.has("init_path")) {
      s.error("init_path", "required when init_weights = file");
      return std::nullopt;
    }
    auto p = s.path("init_path");
    if (!p) return std::nullopt;
    w.path = *p;
  } else if (auto u = args("uniform(", 2)) {
    w.kind = engine::InitWeights::Kind::Uniform;
    w.lo = (*u)[0];
    w.hi = (*u)[1];
    if (!(w.lo <= w.hi)) s.error("init_weights", "uniform(lo, hi) needs lo <= hi");
  } else if (auto c = args("constant(", 1)) {
    w.kind = engine::InitWeights::Kind::Constant;
    w.lo = w.hi = (*c)[0];
  } else {
    s.error("init_weights", "'" + text + "' is not one of: mid50, uniform(lo, hi), constant(g), file");
    return std::nullopt;
  }
  if (w.kind != engine::InitWeights::Kind::FromFile && s.has("init_path")) {
    s.error("init_path", "only valid when init_weights = file");
  }
  return w;
}

void read_network(Ctx& ctx, const YAML::Node& root, Config& cfg) {
  auto spec = std::make_shared<engine::NetworkSpec>();
  Section net(ctx, root["network"], "network", "network");
  spec->seed = net.count("seed", cfg.sim.seed);
  spec->inh_g = net.real("inh_g", spec->inh_g);
  if (auto w = parse_init(net)) spec->init_weights = *w;
  if (net.has("inh_conn")) {
    const auto n = net.get("inh_conn");
    bool ok = n.IsSequence();
    if (ok) {
      for (const auto& pair : n) {
        std::uint64_t a = 0;
        std::uint64_t b = 0;
        if (!pair.IsSequence() || pair.size() != 2 || !YAML::convert<std::uint64_t>::decode(pair[0], a) ||
            !YAML::convert<std::uint64_t>::decode(pair[1], b)) {
          ok = false;
          break;
        }
        spec->inh_conn.push_back({a, b});
      }
    }
    if (!ok) net.error("inh_conn", "expected an array of [start_layer, end_layer] pairs");
  }

  const auto layers = root["layers"];
  if (!layers) {
    ctx.error("layers", 0, "missing section");
  } else if (!layers.IsSequence()) {
    ctx.error("layers", layers, "expected an array of layer tables (index 0 is the input layer)");
  } else {
    bool ok = true;
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto before = ctx.diags.size();
      Section s(ctx, layers[k], "layers." + std::to_string(k), "layers");
      engine::LayerSpec L;
      if (!s.has("neurons")) s.error("neurons", "required");
      L.neurons = s.count("neurons", 1);
      if (L.neurons == 0) s.error("neurons", "must be at least 1");
      L.plastic = s.boolean("plastic", false);
      L.label = s.boolean("label", false);
      if (!s.has("neuron")) s.error("neuron", "required");
      L.neuron_model = lookup(s, "neuron", cfg.neurons, "neuron");
      if (k == 0) {
        for (const auto* key : {"device", "circuit", "conn_type", "sparse_p", "plastic"}) {
          if (s.has(key)) s.error(key, "not valid on the input layer");
        }
      } else {
        const auto ct = s.choice("conn_type", {"all_to_all", "one_to_one", "sparse"}).value_or("all_to_all");
        L.conn_type = ct == "sparse"       ? engine::ConnType::Sparse
                      : ct == "one_to_one" ? engine::ConnType::OneToOne
                                           : engine::ConnType::AllToAll;
        if (L.conn_type == engine::ConnType::Sparse) {
          if (!s.has("sparse_p")) s.error("sparse_p", "required when conn_type = sparse");
          L.sparse_p = s.real("sparse_p", 1.0);
        } else if (s.has("sparse_p")) {
          s.error("sparse_p", "only valid when conn_type = sparse");
        }
        if (!s.has("device")) s.error("device", "required");
        if (!s.has("circuit")) s.error("circuit", "required");
        L.device_model = lookup(s, "device", cfg.devices, "device");
        L.circuit_model = lookup(s, "circuit", cfg.circuits, "circuit");
      }
      ok = ok && ctx.diags.size() == before && L.neuron_model &&
           (k == 0 || (L.device_model && L.circuit_model));
      spec->layers.push_back(std::move(L));
    }
    // Structural checks only make sense once every layer resolved.
    if (ok) {
      try {
        spec->validate();
      } catch (const ConfigError& e) {
        ctx.error("layers", layers, e.what());
      }
    }
  }
  cfg.network = std::move(spec);
}

void read_data(Ctx& ctx, const YAML::Node& node, const std::optional<fs::path>& aer_manifest, Config& cfg) {
  Section s(ctx, node, "data", "data");
  const auto& layers = cfg.network->layers;
  const std::size_t inputs = layers.empty() ? 0 : layers[0].neurons;
  auto load = [&](const std::string& key) -> std::optional<engine::Dataset> {
    const auto p = s.path(key);
    if (!p) return std::nullopt;
    auto data = s.guard(key, [&]() -> engine::Dataset {
      if (cfg.encoder.kind != encoding::Kind::Aer) return encoding::load_feature_dataset(*p);
      std::size_t limit = inputs;
      if (cfg.encoder.polarity_mode == encoding::PolarityMode::Separate) {
        if (inputs % 2 != 0) throw ConfigError("separate AER polarity needs an even input layer size");
        limit = inputs / 2;
      }
      return encoding::load_aer_manifest(*p, limit);
    });
    if (!data) return std::nullopt;
    if (data->empty()) {
      s.error(key, "dataset is empty");
      return std::nullopt;
    }
    if (cfg.encoder.kind != encoding::Kind::Aer && inputs != 0 && data->front().features.size() != inputs) {
      s.error(key, fmt::format("samples have {} features but the input layer has {} neurons",
                               data->front().features.size(), inputs));
      return std::nullopt;
    }
    return data;
  };
  if (cfg.encoder.kind == encoding::Kind::Aer && aer_manifest) {
    if (s.has("train_path")) s.error("train_path", "AER data comes from encoding.aer_path");
    const auto before = ctx.diags.size();
    try {
      std::size_t limit = cfg.encoder.polarity_mode == encoding::PolarityMode::Separate ? inputs / 2 : inputs;
      cfg.train = encoding::load_aer_manifest(*aer_manifest, limit);
      if (cfg.train.empty()) ctx.error("encoding.aer_path", 0, "manifest lists no samples");
    } catch (const Error& e) {
      ctx.error("encoding.aer_path", 0, e.what());
    }
    (void)before;
  } else if (cfg.encoder.kind != encoding::Kind::Aer) {
    if (!s.has("train_path")) s.error("train_path", "required");
    if (auto d = load("train_path")) cfg.train = std::move(*d);
  }
  if (s.has("test_path")) cfg.test = load("test_path");
}

void read_tune(Ctx& ctx, const YAML::Node& node, const std::string& document, Config& cfg) {
  if (!node) return;
  Section s(ctx, node, "tune", "tune");
  TuneSpec t;
  t.ga.population = s.count("population", t.ga.population);
  t.ga.generations = s.count("generations", t.ga.generations);
  t.ga.crossover_rate = s.real("crossover_rate", t.ga.crossover_rate);
  t.ga.mutation_rate = s.real("mutation_rate", t.ga.mutation_rate);
  t.ga.mutation_sigma = s.real("mutation_sigma", t.ga.mutation_sigma);
  t.ga.elitism = s.count("elitism", t.ga.elitism);
  t.ga.tournament_size = s.count("tournament_size", t.ga.tournament_size);
  t.ga.seed = s.count("seed", cfg.sim.seed);
  t.ga.threads = s.count("threads", t.ga.threads);
  t.validation_fraction = s.real("validation_fraction", t.validation_fraction);
  if (!(t.validation_fraction > 0.0 && t.validation_fraction < 1.0)) {
    s.error("validation_fraction", "must lie in (0, 1)");
  }
  s.guard("population", [&] {
    t.ga.validate();
    return 0;
  });
  const auto params = s.get("params");
  if (!params || !params.IsSequence() || params.size() == 0) {
    s.error("params", "expected a non-empty array of {key, lo, hi, scale, kind} tables");
  } else {
    for (std::size_t k = 0; k < params.size(); ++k) {
      Section p(ctx, params[k], "tune.params." + std::to_string(k), "tune.params");
      tuner::ParamRange r;
      const auto key = p.str("key");
      if (!key) {
        p.error("key", "required");
        continue;
      }
      r.name = *key;
      const auto lo = p.real("lo");
      const auto hi = p.real("hi");
      if (!lo) p.error("lo", "required");
      if (!hi) p.error("hi", "required");
      r.lo = lo.value_or(0.0);
      r.hi = hi.value_or(1.0);
      r.scale = p.choice("scale", {"linear", "log"}).value_or("linear") == "log" ? tuner::Scale::Log
                                                                                 : tuner::Scale::Linear;
      r.kind = p.choice("kind", {"real", "integer"}).value_or("real") == "integer" ? tuner::Kind::Integer
                                                                                    : tuner::Kind::Real;
      if (!lo || !hi) continue;
      p.guard("lo", [&] {
        r.validate();
        return 0;
      });
      p.guard("key", [&] { return apply_overrides(document, {{r.name, r.lo}}); });
      t.params.push_back(std::move(r));
    }
  }
  cfg.tune = std::move(t);
}

void read_stdp(Ctx& ctx, const YAML::Node& node, Config& cfg) {
  if (!node) return;
  Section s(ctx, node, "stdp", "stdp");
  StdpSpec st;
  st.layer = s.count("layer", 1);
  const auto& layers = cfg.network->layers;
  if (st.layer < 1 || st.layer >= layers.size()) {
    s.error("layer", "must name a non-input layer");
    return;
  }
  if (auto g = s.reals("g_init")) {
    st.g_init = *g;
  } else if (const auto& dev = layers[st.layer].device_model) {
    for (double f : {0.25, 0.5, 0.75}) st.g_init.push_back(dev->g_min() + f * (dev->g_max() - dev->g_min()));
  }
  if (s.has("g_init") && st.g_init.empty()) s.error("g_init", "must not be empty");
  cfg.stdp = std::move(st);
}

}  // namespace

std::vector<std::string> section_keys(const std::string& section) {
  const auto it = schema().find(section);
  return it == schema().end() ? std::vector<std::string>{} : it->second;
}

Config load_config_text(const std::string& text, const fs::path& base_dir, const std::string& source_name) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigErrors(source_name, {{"", e.mark.line + 1, e.msg}});
  }
  Ctx ctx;
  ctx.base_dir = base_dir;
  Config cfg;
  cfg.base_dir = base_dir;
  cfg.source = source_name;
  if (!root.IsMap()) throw ConfigErrors(source_name, {{"", line_of(root), "top level must be a mapping"}});
  Section top(ctx, root, "", "");
  cfg.document = YAML::Dump(root);

  read_sim(ctx, root["sim"], cfg.sim);
  std::optional<fs::path> aer_manifest;
  read_encoding(ctx, root["encoding"], cfg.encoder, aer_manifest);
  for (const auto& [name, node] : named(ctx, root["device"], "device")) {
    // Failed definitions stay as null entries so layers naming them do not
    // report a second, misleading error.
    auto d = read_device(ctx, name, node);
    cfg.devices[name] = d ? std::make_shared<const synapse::DeviceModel>(*d) : nullptr;
  }
  for (const auto& [name, node] : named(ctx, root["circuit"], "circuit")) {
    auto c = read_circuit(ctx, name, node);
    cfg.circuits[name] = c ? std::make_shared<const synapse::CircuitModel>(std::move(*c)) : nullptr;
  }
  for (const auto& [name, node] : named(ctx, root["neuron"], "neuron")) {
    auto n = read_neuron(ctx, name, node);
    cfg.neurons[name] = n ? std::make_shared<const neuron::NeuronModel>(std::move(*n)) : nullptr;
  }
  read_network(ctx, root, cfg);
  read_data(ctx, root["data"], aer_manifest, cfg);
  read_tune(ctx, root["tune"], cfg.document, cfg);
  read_stdp(ctx, root["stdp"], cfg);

  if (!ctx.diags.empty()) {
    std::stable_sort(ctx.diags.begin(), ctx.diags.end(),
                     [](const Diagnostic& a, const Diagnostic& b) { return a.line < b.line; });
    throw ConfigErrors(source_name, std::move(ctx.diags));
  }
  return cfg;
}

Config load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto cfg = load_config_text(ss.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path(),
                              path.string());
  cfg.source = path;
  return cfg;
}

std::string apply_overrides(const std::string& document, const tuner::Assignment& values) {
  std::vector<std::pair<std::string, std::string>> raw;
  for (const auto& [key, value] : values) {
    const bool integral = std::floor(value) == value && std::fabs(value) < 1e15;
    raw.emplace_back(key, integral ? fmt::format("{}", static_cast<long long>(value)) : fmt::format("{}", value));
  }
  return apply_scalar_overrides(document, raw);
}

std::string apply_scalar_overrides(const std::string& document,
                                   const std::vector<std::pair<std::string, std::string>>& values) {
  YAML::Node root;
  try {
    root = YAML::Load(document);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("cannot parse document: " + e.msg);
  }
  for (const auto& [key, value] : values) {
    std::vector<std::string> parts;
    std::stringstream ss(key);
    std::string part;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty() || std::any_of(parts.begin(), parts.end(), [](const auto& p) { return p.empty(); })) {
      throw ConfigError("bad key path '" + key + "'");
    }
    // yaml-cpp nodes are handles, so reassigning `node` walks without copying.
    std::vector<YAML::Node> chain{root};
    for (std::size_t k = 0; k + 1 < parts.size(); ++k) {
      const auto& cur = chain.back();
      YAML::Node next;
      if (cur.IsSequence()) {
        std::size_t idx = 0;
        try {
          idx = std::stoul(parts[k]);
        } catch (const std::exception&) {
          throw ConfigError("key path '" + key + "': '" + parts[k] + "' is not an array index");
        }
        if (idx >= cur.size()) throw ConfigError("key path '" + key + "': index " + parts[k] + " out of range");
        next = cur[idx];
      } else if (cur.IsMap() && cur[parts[k]]) {
        next = cur[parts[k]];
      } else {
        throw ConfigError("key path '" + key + "': '" + parts[k] + "' does not exist");
      }
      chain.push_back(next);
    }
    auto parent = chain.back();
    if (!parent.IsMap()) throw ConfigError("key path '" + key + "' does not end in a mapping");
    parent[parts.back()] = value;
  }
  return YAML::Dump(root);
}

}  // namespace spikeforge::config
