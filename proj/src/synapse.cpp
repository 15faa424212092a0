#include "spikeforge/synapse.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "spikeforge/error.hpp"

namespace spikeforge::synapse {

std::string_view to_string(SynapseMode m) noexcept {
  switch (m) {
    case SynapseMode::Idle: return "Idle";
    case SynapseMode::Transmit: return "Transmit";
    case SynapseMode::Potentiate: return "Potentiate";
    case SynapseMode::Depress: return "Depress";
  }
  return "?";
}

std::string_view to_string(SpikePresence p) noexcept {
  switch (p) {
    case SpikePresence::None: return "None";
    case SpikePresence::PreOnly: return "PreOnly";
    case SpikePresence::PostOnly: return "PostOnly";
    case SpikePresence::Both: return "Both";
  }
  return "?";
}

std::optional<SpikePresence> presence_from_string(std::string_view s) noexcept {
  for (auto p : {SpikePresence::None, SpikePresence::PreOnly, SpikePresence::PostOnly, SpikePresence::Both}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace {

void check_finite(std::span<const double> xs, const char* what) {
  for (double x : xs) {
    if (!std::isfinite(x)) throw ConfigError(std::string(what) + ": non-finite conductance");
  }
}

void check_table(PulseTable& table, bool ascending_rows, const char* what) {
  if (table.amplitudes.size() != table.rows.size()) {
    throw ConfigError(std::string(what) + ": " + std::to_string(table.rows.size()) + " rows for " +
                      std::to_string(table.amplitudes.size()) + " amplitudes");
  }
  // Sort rows by amplitude so nearest-row ties resolve toward the lower one.
  std::vector<std::size_t> order(table.amplitudes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return table.amplitudes[a] < table.amplitudes[b]; });
  PulseTable sorted;
  for (auto k : order) {
    sorted.amplitudes.push_back(table.amplitudes[k]);
    sorted.rows.push_back(std::move(table.rows[k]));
  }
  table = std::move(sorted);
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const auto& row = table.rows[k];
    if (!std::isfinite(table.amplitudes[k]) || table.amplitudes[k] < 0.0) {
      throw ConfigError(std::string(what) + ": bad pulse amplitude");
    }
    if (k > 0 && table.amplitudes[k] == table.amplitudes[k - 1]) {
      throw ConfigError(std::string(what) + ": duplicate pulse amplitude " + std::to_string(table.amplitudes[k]));
    }
    if (row.empty()) throw ConfigError(std::string(what) + ": empty row");
    check_finite(row, what);
    for (std::size_t i = 1; i < row.size(); ++i) {
      const bool ok = ascending_rows ? row[i] >= row[i - 1] : row[i] <= row[i - 1];
      if (!ok) {
        throw ConfigError(std::string(what) + ": row for amplitude " + std::to_string(table.amplitudes[k]) +
                          (ascending_rows ? " is not non-decreasing" : " is not non-increasing"));
      }
    }
  }
}

void extend(double& lo, double& hi, std::span<const double> xs) {
  for (double x : xs) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
}

}  // namespace

DeviceModel::DeviceModel(Variant v, double g_min, double g_max) : variant_(std::move(v)) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  if (auto* id = std::get_if<IdenticalPulseDevice>(&variant_)) {
    if (id->levels_ltp.empty() || id->levels_ltd.empty()) {
      throw ConfigError("device: levels_ltp and levels_ltd must both be non-empty");
    }
    check_finite(id->levels_ltp, "device levels_ltp");
    check_finite(id->levels_ltd, "device levels_ltd");
    for (std::size_t i = 1; i < id->levels_ltp.size(); ++i) {
      if (!(id->levels_ltp[i] > id->levels_ltp[i - 1])) throw ConfigError("device: levels_ltp must be strictly ascending");
    }
    for (std::size_t i = 1; i < id->levels_ltd.size(); ++i) {
      if (!(id->levels_ltd[i] < id->levels_ltd[i - 1])) {
        throw ConfigError("device: levels_ltd must be strictly descending");
      }
    }
    extend(lo, hi, id->levels_ltp);
    extend(lo, hi, id->levels_ltd);
  } else {
    auto& fam = std::get<PulseFamilyDevice>(variant_);
    if (fam.potentiation.rows.empty() || fam.depression.rows.empty()) {
      throw ConfigError("device: a pulse family needs both potentiation and depression rows");
    }
    check_table(fam.potentiation, true, "device potentiation table");
    check_table(fam.depression, false, "device depression table");
    for (const auto& r : fam.potentiation.rows) extend(lo, hi, r);
    for (const auto& r : fam.depression.rows) extend(lo, hi, r);
  }
  g_min_ = std::isnan(g_min) ? lo : g_min;
  g_max_ = std::isnan(g_max) ? hi : g_max;
  if (!(g_min_ >= 0.0) || !(g_max_ > g_min_)) throw ConfigError("device: need 0 <= g_min < g_max");
  if (lo < g_min_ || hi > g_max_) throw ConfigError("device: conductance table leaves [g_min, g_max]");
}

std::size_t nearest_index(std::span<const double> levels, double g) noexcept {
  std::size_t best = 0;
  double best_d = std::abs(levels[0] - g);
  for (std::size_t i = 1; i < levels.size(); ++i) {
    const double d = std::abs(levels[i] - g);
    if (d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

namespace {

StepResult advance(std::span<const double> levels, double g, Direction dir) noexcept {
  const auto idx = nearest_index(levels, g);
  const bool saturated = idx + 1 >= levels.size();
  const double next = levels[saturated ? idx : idx + 1];
  // Snapping can land on the far side of g; never move against the direction.
  return {dir == Direction::Potentiate ? std::max(g, next) : std::min(g, next), saturated};
}

}  // namespace

StepResult step_identical(const IdenticalPulseDevice& device, double g, Direction dir) noexcept {
  return advance(dir == Direction::Potentiate ? device.levels_ltp : device.levels_ltd, g, dir);
}

StepResult step_family(const PulseFamilyDevice& device, double g, Direction dir, double pulse) noexcept {
  const auto& table = dir == Direction::Potentiate ? device.potentiation : device.depression;
  const double mag = std::abs(pulse);
  std::size_t row = 0;
  double best = std::abs(table.amplitudes[0] - mag);
  for (std::size_t k = 1; k < table.amplitudes.size(); ++k) {
    const double d = std::abs(table.amplitudes[k] - mag);
    if (d < best) {
      row = k;
      best = d;
    }
  }
  return advance(table.rows[row], g, dir);
}

namespace {

std::vector<double> parse_numbers(const std::string& line, const std::filesystem::path& path, std::size_t lineno) {
  std::vector<double> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    std::string field = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    field = b == std::string::npos ? std::string() : field.substr(b, e - b + 1);
    double x = 0.0;
    auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), x);
    if (field.empty() || ec != std::errc() || p != field.data() + field.size() || !std::isfinite(x)) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + field + "'");
    }
    out.push_back(x);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

bool blank_or_comment(const std::string& line) {
  const auto b = line.find_first_not_of(" \t\r");
  return b == std::string::npos || line[b] == '#';
}

}  // namespace

std::vector<double> load_levels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open level table " + path.string());
  std::vector<double> levels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank_or_comment(line)) continue;
    auto xs = parse_numbers(line, path, lineno);
    if (xs.size() != 1) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": one value per line");
    levels.push_back(xs[0]);
  }
  return levels;
}

PulseFamilyDevice load_family(const std::filesystem::path& path, FamilyAxis axis) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pulse-family table " + path.string());
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> header;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank_or_comment(line)) continue;
    auto xs = parse_numbers(line, path, lineno);
    if (header.empty()) {
      header = std::move(xs);
    } else {
      rows.push_back(std::move(xs));
    }
  }
  if (header.empty()) throw ConfigError(path.string() + ": missing amplitude header");
  if (rows.size() != header.size()) {
    throw ConfigError(path.string() + ": header lists " + std::to_string(header.size()) + " amplitudes but " +
                      std::to_string(rows.size()) + " rows follow");
  }
  PulseFamilyDevice dev;
  dev.axis = axis;
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == 0.0) throw ConfigError(path.string() + ": amplitude 0 is neither potentiating nor depressing");
    auto& table = header[k] > 0.0 ? dev.potentiation : dev.depression;
    table.amplitudes.push_back(std::abs(header[k]));
    table.rows.push_back(std::move(rows[k]));
  }
  return dev;
}

// ---------------------------------------------------------------------------

std::vector<std::string> circuit_vocabulary(bool include_vtb) {
  std::vector<std::string> v{"V_pre", "V_post1", "V_post2", "V_node1", "V_node2"};
  if (include_vtb) v.push_back("V_TB");
  v.insert(v.end(), {"G", "dt", "t"});
  return v;
}

namespace {

std::string join(const std::vector<std::string>& xs) {
  std::string out;
  for (const auto& x : xs) {
    if (!out.empty()) out += ", ";
    out += x;
  }
  return out;
}

expr::Expression parse_checked(const std::string& src, const char* key, const expr::SlotTable& allowed,
                               bool allow_vtb) {
  expr::Expression e;
  try {
    e = expr::parse(src);
  } catch (const expr::ExprError& err) {
    throw ConfigError(std::string(key) + ": " + err.what());
  }
  std::vector<std::string> names;
  for (const auto& n : allowed.names()) {
    if (allow_vtb || n != "V_TB") names.push_back(n);
  }
  for (const auto& v : expr::free_vars(e)) {
    if (std::find(names.begin(), names.end(), v) == names.end()) {
      throw ConfigError(std::string(key) + ": unknown variable '" + v + "'; allowed: " + join(names));
    }
  }
  return e;
}

}  // namespace

CircuitModel::CircuitModel(CircuitParams params) : params_(std::move(params)) {
  if (!(params_.v_th_pos > 0.0) || !(params_.v_th_neg > 0.0)) {
    throw ConfigError("circuit: v_th_pos and v_th_neg must be positive");
  }
  for (const auto& name : circuit_vocabulary(true)) slots_.add(name);
  for (const auto& [name, value] : params_.constants) {
    if (slots_.find(name) != expr::SlotTable::npos) {
      throw ConfigError("circuit: constant '" + name + "' shadows a circuit variable");
    }
    if (!std::isfinite(value)) throw ConfigError("circuit: constant '" + name + "' is not finite");
    slots_.add(name);
  }
  v_app_ = parse_checked(params_.v_app, "v_app", slots_, false);
  v_app_prog_ = expr::Program(v_app_, slots_);
  if (params_.ex_eqs) {
    ex_eqs_ = parse_checked(*params_.ex_eqs, "ex_eqs", slots_, true);
    ex_eqs_prog_ = expr::Program(*ex_eqs_, slots_);
  }
}

std::vector<double> CircuitModel::make_slots(double dt) const {
  std::vector<double> s(slots_.size(), 0.0);
  s[kVPre] = params_.rest_pre;
  s[kVPost1] = params_.rest_post1;
  s[kVPost2] = params_.rest_post2;
  s[kVNode1] = params_.v_node;
  s[kVNode2] = params_.v_node;
  s[kDt] = dt;
  std::size_t k = kFirstConstant;
  for (const auto& [name, value] : params_.constants) s[k++] = value;
  return s;
}

SynapseMode CircuitModel::mode_for(SpikePresence presence, double v_tb) const noexcept {
  if (params_.plasticity_policy.contains(presence)) {
    if (v_tb >= params_.v_th_pos) return SynapseMode::Potentiate;
    if (v_tb <= -params_.v_th_neg) return SynapseMode::Depress;
  }
  return params_.transmit_policy.contains(presence) ? SynapseMode::Transmit : SynapseMode::Idle;
}

double CircuitModel::current_for(SynapseMode mode, std::span<const double> slots) const {
  if (mode == SynapseMode::Idle) return 0.0;
  if (mode != SynapseMode::Transmit && !params_.conduct_during_plasticity) return 0.0;
  if (ex_eqs_) return ex_eqs_prog_.run(slots);
  return slots[kG] * slots[kVTB];
}

double CircuitModel::applied_voltage(std::span<const double> slots) const { return v_app_prog_.run(slots); }

Outcome CircuitModel::evaluate(SpikePresence presence, std::span<double> slots) const {
  Outcome out;
  if (!params_.plasticity_policy.contains(presence) && !params_.transmit_policy.contains(presence)) {
    slots[kVTB] = 0.0;
    return out;
  }
  out.v_tb = v_app_prog_.run(slots);
  slots[kVTB] = out.v_tb;
  out.mode = mode_for(presence, out.v_tb);
  out.current = current_for(out.mode, slots);
  return out;
}

std::vector<double> slots_from_env(const CircuitModel& c, const expr::Environment& env, bool need_vtb) {
  auto slots = c.make_slots(0.0);
  const auto vocab = circuit_vocabulary(true);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (const double* v = env.find(vocab[i])) slots[i] = *v;
  }
  // V_node1 = V_node2 unless the environment sets them separately.
  if (env.find("V_node1") && !env.find("V_node2")) slots[kVNode2] = slots[kVNode1];
  std::size_t k = kFirstConstant;
  for (const auto& [name, value] : c.params().constants) {
    if (const double* v = env.find(name)) slots[k] = *v;
    ++k;
  }
  if (need_vtb && !env.find("V_TB")) slots[kVTB] = c.applied_voltage(slots);
  return slots;
}

SynapseMode resolve_mode(const CircuitModel& circuit, SpikePresence presence, const expr::Environment& env) {
  auto slots = slots_from_env(circuit, env, false);
  return circuit.evaluate(presence, slots).mode;
}

double transmit_current(const CircuitModel& circuit, const SynapseState& state, const expr::Environment& env) {
  if (state.last_mode == SynapseMode::Idle) return 0.0;
  auto slots = slots_from_env(circuit, env, true);
  slots[kG] = state.g;
  return circuit.current_for(state.last_mode, slots);
}

std::optional<PlasticityPulse> effective_pulse_voltage(const CircuitModel& circuit, double v_tb) noexcept {
  if (v_tb >= circuit.params().v_th_pos) return PlasticityPulse{Direction::Potentiate, std::abs(v_tb)};
  if (v_tb <= -circuit.params().v_th_neg) return PlasticityPulse{Direction::Depress, std::abs(v_tb)};
  return std::nullopt;
}

StepResult apply_plasticity(const DeviceModel& device, double g, SynapseMode mode, double v_tb, double dt) noexcept {
  if (mode != SynapseMode::Potentiate && mode != SynapseMode::Depress) return {g, false};
  const auto dir = mode == SynapseMode::Potentiate ? Direction::Potentiate : Direction::Depress;
  StepResult r;
  if (const auto* id = std::get_if<IdenticalPulseDevice>(&device.variant())) {
    r = step_identical(*id, g, dir);
  } else {
    const auto& fam = std::get<PulseFamilyDevice>(device.variant());
    r = step_family(fam, g, dir, fam.axis == FamilyAxis::Width ? dt : v_tb);
  }
  r.g = device.clamp(r.g);
  return r;
}

}  // namespace spikeforge::synapse
