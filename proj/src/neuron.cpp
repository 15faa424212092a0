#include "spikeforge/neuron.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <charconv>
#include <cmath>
#include <fstream>

#include "spikeforge/error.hpp"

namespace spikeforge::neuron {

PulseConvertTable::PulseConvertTable(std::vector<std::pair<double, double>> knots) : knots_(std::move(knots)) {
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    if (!std::isfinite(knots_[i].first) || !std::isfinite(knots_[i].second)) {
      throw ConfigError("pulse_convert: non-finite table entry");
    }
    if (i > 0 && !(knots_[i].first > knots_[i - 1].first)) {
      throw ConfigError("pulse_convert: input column must be strictly increasing");
    }
  }
}

PulseConvertTable PulseConvertTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pulse-convert table " + path.string());
  std::vector<std::pair<double, double>> knots;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto comma = line.find(',');
    double a = 0.0;
    double c = 0.0;
    bool ok = comma != std::string::npos;
    if (ok) {
      auto trim = [](std::string s) {
        const auto x = s.find_first_not_of(" \t\r");
        const auto y = s.find_last_not_of(" \t\r");
        return x == std::string::npos ? std::string() : s.substr(x, y - x + 1);
      };
      const auto f0 = trim(line.substr(0, comma));
      const auto f1 = trim(line.substr(comma + 1));
      auto r0 = std::from_chars(f0.data(), f0.data() + f0.size(), a);
      auto r1 = std::from_chars(f1.data(), f1.data() + f1.size(), c);
      ok = r0.ec == std::errc() && r0.ptr == f0.data() + f0.size() && r1.ec == std::errc() &&
           r1.ptr == f1.data() + f1.size();
    }
    // A non-numeric first line is a header.
    if (!ok && knots.empty() && lineno == 1) continue;
    if (!ok) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected in,out");
    knots.emplace_back(a, c);
  }
  if (knots.empty()) throw ConfigError(path.string() + ": pulse-convert table is empty");
  return PulseConvertTable(std::move(knots));
}

double PulseConvertTable::operator()(double in) const {
  if (knots_.empty()) throw ConfigError("pulse_convert: the neuron model has no conversion table");
  if (in <= knots_.front().first) {
    if (in < knots_.front().first) spdlog::warn("pulse_convert: input {} below table range, clamped", in);
    return knots_.front().second;
  }
  if (in >= knots_.back().first) {
    if (in > knots_.back().first) spdlog::warn("pulse_convert: input {} above table range, clamped", in);
    return knots_.back().second;
  }
  auto it = std::upper_bound(knots_.begin(), knots_.end(), in,
                             [](double x, const std::pair<double, double>& k) { return x < k.first; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double alpha = (in - lo.first) / (hi.first - lo.first);
  return (1.0 - alpha) * lo.second + alpha * hi.second;
}

// ---------------------------------------------------------------------------

std::vector<std::string> neuron_vocabulary() { return {"V", "I", "dt", "tau", "thres", "r_mem"}; }

namespace {

expr::Program compile(const std::optional<std::string>& src, const char* key) {
  if (!src) return {};
  expr::SlotTable slots;
  for (const auto& n : neuron_vocabulary()) slots.add(n);
  expr::Expression e;
  try {
    e = expr::parse(*src);
  } catch (const expr::ExprError& err) {
    throw ConfigError(std::string(key) + ": " + err.what());
  }
  for (const auto& v : expr::free_vars(e)) {
    if (slots.find(v) == expr::SlotTable::npos) {
      throw ConfigError(std::string(key) + ": unknown variable '" + v + "'; allowed: V, I, dt, tau, thres, r_mem");
    }
  }
  return expr::Program(e, slots);
}

}  // namespace

NeuronModel::NeuronModel(NeuronParams params) : params_(std::move(params)) {
  if (!(params_.tau > 0.0)) throw ConfigError("neuron: tau must be positive");
  if (!std::isfinite(params_.thres) || !std::isfinite(params_.v_reset) || !(params_.thres > params_.v_reset)) {
    throw ConfigError("neuron: thres must exceed v_reset");
  }
  if (!(params_.t_refrac >= 0.0)) throw ConfigError("neuron: t_refrac must be non-negative");
  if (!std::isfinite(params_.r_mem)) throw ConfigError("neuron: r_mem must be finite");
  state_prog_ = compile(params_.state_eqs, "state_eqs");
  power_prog_ = compile(params_.power_expr, "power_expr");
}

std::vector<double> NeuronModel::slots(double v, double current, double dt) const {
  return {v, current, dt, params_.tau, params_.thres, params_.r_mem};
}

double NeuronModel::derivative(double v, double current, double dt) const {
  if (state_prog_.empty()) return (-v + params_.r_mem * current) / params_.tau;
  return state_prog_.run(slots(v, current, dt));
}

double NeuronModel::power(double v, double current, double dt) const {
  if (power_prog_.empty()) return 0.0;
  return power_prog_.run(slots(v, current, dt));
}

NeuronState integrate(const NeuronModel& model, NeuronState state, double current, double t, double dt) {
  const auto& p = model.params();
  if (model.converts_input()) current = p.pulse_convert(current);
  if (in_refractory(t, dt, state.refractory_until)) {
    state.v = p.v_reset;
  } else if (model.default_dynamics()) {
    // Same expression and operation order as the lif_euler kernels.
    state.v = state.v + dt * ((-state.v + p.r_mem * current) / p.tau);
  } else {
    try {
      state.v = state.v + dt * model.derivative(state.v, current, dt);
    } catch (const expr::ExprError& e) {
      throw SimulationError(std::string("state_eqs: ") + e.what() + " at t = " + std::to_string(t));
    }
  }
  if (!std::isfinite(state.v)) {
    throw SimulationError("neuron membrane became non-finite at t = " + std::to_string(t));
  }
  if (model.has_power()) {
    try {
      state.energy += dt * model.power(state.v, current, dt);
    } catch (const expr::ExprError& e) {
      throw SimulationError(std::string("power_expr: ") + e.what() + " at t = " + std::to_string(t));
    }
  }
  return state;
}

std::optional<SpikeEmission> fire_check(const NeuronModel& model, NeuronState& state, double t, double dt) {
  const auto& p = model.params();
  if (!(state.v >= p.thres)) return std::nullopt;
  state.spike_times.push_back(t);
  state.v = p.v_reset;
  state.refractory_until = t + p.t_refrac;
  SpikeEmission e;
  e.time = t;
  const auto& w = p.waveforms;
  const double origin = t + dt;
  if (w.post1) e.post1 = {&*w.post1, origin};
  if (w.post2) e.post2 = {&*w.post2, origin};
  if (w.inhib) e.inhib = {&*w.inhib, origin};
  return e;
}

// ---------------------------------------------------------------------------

double predicted_frequency(double width, double tau, double thres, const CalibrationDrive& drive) noexcept {
  const double mu = drive.pulse_amplitude * width * drive.pulse_rate;
  if (std::isinf(tau)) return mu / thres;
  const double x = mu * tau;
  if (!(x > thres)) return 0.0;
  return 1.0 / (tau * std::log(x / (x - thres)));
}

namespace {

double sse(std::span<const FrequencyPoint> data, double tau, double thres, const CalibrationDrive& drive) {
  double s = 0.0;
  for (const auto& p : data) {
    const double e = predicted_frequency(p.width, tau, thres, drive) - p.frequency;
    s += e * e;
  }
  return s;
}

// Grid search on [lo, hi] in log space followed by Brent refinement around
// the best grid cell. Returns (argmin, min).
template <typename F>
std::pair<double, double> minimize_log(F f, double lo, double hi, int grid) {
  const double a = std::log(lo);
  const double b = std::log(hi);
  int best = 0;
  double best_v = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= grid; ++k) {
    const double v = f(a + (b - a) * k / grid);
    if (v < best_v) {
      best_v = v;
      best = k;
    }
  }
  const double left = a + (b - a) * std::max(0, best - 1) / grid;
  const double right = a + (b - a) * std::min(grid, best + 1) / grid;
  auto r = boost::math::tools::brent_find_minima(f, left, right, 52);
  if (r.second < best_v) return {r.first, r.second};
  return {a + (b - a) * best / grid, best_v};
}

}  // namespace

CalibrationResult calibrate_from_frequency(std::span<const FrequencyPoint> data_in, const CalibrationDrive& drive) {
  if (data_in.size() < 2) throw ConfigError("calibration: need at least 2 (width, frequency) points");
  if (!(drive.pulse_amplitude > 0.0) || !(drive.pulse_rate > 0.0)) {
    throw ConfigError("calibration: pulse amplitude and rate must be positive");
  }
  std::vector<FrequencyPoint> data(data_in.begin(), data_in.end());
  for (const auto& p : data) {
    if (!(p.width > 0.0) || !std::isfinite(p.width)) throw ConfigError("calibration: widths must be positive");
    if (!(p.frequency >= 0.0) || !std::isfinite(p.frequency)) {
      throw ConfigError("calibration: frequencies must be non-negative");
    }
  }
  std::stable_sort(data.begin(), data.end(), [](const auto& a, const auto& b) { return a.width < b.width; });
  if (data.front().width == data.back().width) throw ConfigError("calibration: all widths are equal");
  for (std::size_t i = 1; i < data.size(); ++i) {
    if (data[i].frequency < data[i - 1].frequency) {
      throw ConfigError("calibration: frequency decreases with width at w = " + std::to_string(data[i].width));
    }
  }
  if (data.back().frequency <= 0.0) throw ConfigError("calibration: the device never fires");

  // Linear IF law f = k w through the origin.
  double sfw = 0.0;
  double sww = 0.0;
  for (const auto& p : data) {
    sfw += p.frequency * p.width;
    sww += p.width * p.width;
  }
  const double k = sfw / sww;
  const double thres_if = drive.pulse_rate * drive.pulse_amplitude / k;
  const double sse_if = sse(data, std::numeric_limits<double>::infinity(), thres_if, drive);
  const auto n = static_cast<double>(data.size());
  CalibrationResult best{std::numeric_limits<double>::infinity(), thres_if, std::sqrt(sse_if / n), false};
  if (data.size() < 4) return best;

  // Characteristic time: interval between spikes at the widest pulse.
  const double t_char = 1.0 / data.back().frequency;
  auto inner = [&](double log_tau) {
    const double tau = std::exp(log_tau);
    auto f = [&](double log_th) { return sse(data, tau, std::exp(log_th), drive); };
    return minimize_log(f, thres_if * 1e-2, thres_if * 1e2, 160);
  };
  auto outer = [&](double log_tau) { return inner(log_tau).second; };
  const double tau_lo = t_char * 1e-3;
  const double tau_hi = t_char * 1e4;
  const auto [log_tau, sse_lif] = minimize_log(outer, tau_lo, tau_hi, 160);
  const double tau = std::exp(log_tau);
  // A leak fitted at the edge of the search box means the data shows none.
  if (sse_lif < sse_if && tau < tau_hi * 0.5) {
    const double thres = std::exp(inner(log_tau).first);
    best = {tau, thres, std::sqrt(sse_lif / n), true};
  }
  return best;
}

std::vector<FrequencyPoint> load_frequency_data(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open calibration data " + path.string());
  std::vector<FrequencyPoint> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto comma = line.find(',');
    FrequencyPoint p{};
    bool ok = comma != std::string::npos;
    if (ok) {
      const std::string w = line.substr(b, comma - b);
      std::string f = line.substr(comma + 1);
      f.erase(f.find_last_not_of(" \t\r") + 1);
      f.erase(0, f.find_first_not_of(" \t"));
      auto r0 = std::from_chars(w.data(), w.data() + w.size(), p.width);
      auto r1 = std::from_chars(f.data(), f.data() + f.size(), p.frequency);
      ok = r0.ec == std::errc() && r0.ptr == w.data() + w.size() && r1.ec == std::errc() &&
           r1.ptr == f.data() + f.size();
    }
    if (!ok && out.empty() && lineno == 1) continue;  // header row
    if (!ok) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected width_seconds,frequency_hz");
    out.push_back(p);
  }
  return out;
}

}  // namespace spikeforge::neuron
