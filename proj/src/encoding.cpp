#include "spikeforge/encoding.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <string>

#include "spikeforge/error.hpp"
#include "spikeforge/simd.hpp"

namespace spikeforge::encoding {

namespace {

void check_args(double intensity, double r_min, double r_max, double T, double dt) {
  if (!(dt > 0.0)) throw ConfigError("encoding: dt must be positive");
  if (!(T >= dt)) throw ConfigError("encoding: T must be at least dt");
  if (!(r_min >= 0.0) || !(r_max >= r_min)) throw ConfigError("encoding: need 0 <= r_min <= r_max");
  if (!(intensity >= 0.0 && intensity <= 1.0)) throw ConfigError("encoding: intensity must lie in [0, 1]");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::vector<double> SpikeTrain::times() const {
  std::vector<double> out;
  out.reserve(steps.size());
  for (auto s : steps) out.push_back(static_cast<double>(s) * dt);
  return out;
}

std::int64_t grid_steps(double T, double dt) {
  return static_cast<std::int64_t>(std::ceil(T / dt - 1e-9));
}

SpikeTrain poisson_encode(double intensity, double r_min, double r_max, double T, double dt, Rng& rng) {
  check_args(intensity, r_min, r_max, T, dt);
  const double rate = r_min + intensity * (r_max - r_min);
  const double p = rate * dt;
  if (p > 0.1) {
    spdlog::warn("poisson encoding: rate {} Hz at dt {} s gives p = {} per step (> 0.1); dt is too coarse", rate, dt,
                 p);
  }
  SpikeTrain train{dt, {}, {}};
  const auto n = grid_steps(T, dt);
  if (p <= 0.0) return train;
  std::vector<double> u(static_cast<std::size_t>(n));
  for (auto& x : u) x = rng.uniform();
  const std::vector<double> prob(u.size(), p);
  std::vector<unsigned char> hit(u.size());
  simd::active_kernels().bernoulli(u.data(), prob.data(), hit.data(), u.size());
  for (std::size_t k = 0; k < hit.size(); ++k) {
    if (hit[k]) train.steps.push_back(static_cast<std::int64_t>(k));
  }
  return train;
}

SpikeTrain fixed_rate_encode(double intensity, double r_min, double r_max, double T, double dt) {
  check_args(intensity, r_min, r_max, T, dt);
  const double rate = r_min + intensity * (r_max - r_min);
  SpikeTrain train{dt, {}, {}};
  if (rate <= 0.0) return train;
  const auto n = grid_steps(T, dt);
  for (std::int64_t k = 0;; ++k) {
    const double t = static_cast<double>(k) / rate;
    const auto step = static_cast<std::int64_t>(std::floor(t / dt + 1e-9));
    if (step >= n) break;
    if (train.steps.empty() || step > train.steps.back()) train.steps.push_back(step);
  }
  return train;
}

std::vector<AerEvent> load_aer(const std::filesystem::path& path, std::size_t address_limit) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open AER file " + path.string());
  std::vector<AerEvent> events;
  std::string line;
  std::size_t lineno = 0;
  auto bad = [&](const std::string& why) {
    return ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto comma = text.find(',', start);
      fields.push_back(trim(std::string_view(text).substr(start, comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 3) throw bad("expected time_seconds,address,polarity");
    AerEvent ev;
    long long addr = 0;
    int pol = 0;
    auto parse_ok = [](const std::string& f, auto& out) {
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), out);
      return ec == std::errc() && p == f.data() + f.size();
    };
    if (!parse_ok(fields[0], ev.t) || !std::isfinite(ev.t)) throw bad("bad time '" + fields[0] + "'");
    if (!parse_ok(fields[1], addr)) throw bad("bad address '" + fields[1] + "'");
    if (!parse_ok(fields[2], pol)) throw bad("bad polarity '" + fields[2] + "'");
    if (ev.t < 0.0) throw bad("negative time");
    if (addr < 0) throw bad("negative address");
    if (pol != 1 && pol != -1) throw bad("polarity must be 1 or -1");
    ev.address = static_cast<std::size_t>(addr);
    ev.polarity = pol;
    if (address_limit != 0 && ev.address >= address_limit) {
      throw bad("address " + std::to_string(addr) + " out of range (limit " + std::to_string(address_limit) + ")");
    }
    events.push_back(ev);
  }
  std::stable_sort(events.begin(), events.end(), [](const AerEvent& a, const AerEvent& b) {
    return a.t < b.t || (a.t == b.t && a.address < b.address);
  });
  return events;
}

namespace {

std::vector<std::string> split_fields(const std::string& text) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = text.find(',', start);
    fields.push_back(trim(std::string_view(text).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::optional<int> parse_label(const std::string& f, const std::function<ConfigError(const std::string&)>& bad) {
  if (f.empty()) return std::nullopt;
  int label = 0;
  auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), label);
  if (ec != std::errc() || p != f.data() + f.size() || label < 0) throw bad("bad label '" + f + "'");
  return label;
}

}  // namespace

std::vector<Sample> load_feature_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::vector<Sample> out;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  const std::function<ConfigError(const std::string&)> bad = [&](const std::string& why) {
    return ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto fields = split_fields(text);
    if (out.empty() && width == 0 && fields[0] == "label") continue;
    if (fields.size() < 2) throw bad("expected label followed by at least one feature");
    if (width != 0 && fields.size() - 1 != width) {
      throw bad("row has " + std::to_string(fields.size() - 1) + " features, expected " + std::to_string(width));
    }
    width = fields.size() - 1;
    Sample s;
    s.label = parse_label(fields[0], bad);
    s.features.reserve(width);
    for (std::size_t k = 1; k < fields.size(); ++k) {
      const auto& f = fields[k];
      double x = 0.0;
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), x);
      if (ec != std::errc() || p != f.data() + f.size()) throw bad("bad feature '" + f + "'");
      if (!(x >= 0.0 && x <= 1.0)) throw bad("feature " + f + " outside [0, 1]");
      s.features.push_back(x);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> load_aer_manifest(const std::filesystem::path& path, std::size_t address_limit) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open AER manifest " + path.string());
  std::vector<Sample> out;
  std::string line;
  std::size_t lineno = 0;
  const std::function<ConfigError(const std::string&)> bad = [&](const std::string& why) {
    return ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto fields = split_fields(text);
    if (fields.size() != 2 || fields[0].empty()) throw bad("expected events_file,label");
    Sample s;
    s.label = parse_label(fields[1], bad);
    s.events = load_aer(path.parent_path() / fields[0], address_limit);
    out.push_back(std::move(s));
  }
  return out;
}

std::size_t aer_channels(std::size_t addresses, PolarityMode mode) noexcept {
  return mode == PolarityMode::Separate ? 2 * addresses : addresses;
}

std::vector<SpikeTrain> aer_to_trains(const std::vector<AerEvent>& events, std::size_t channels, PolarityMode mode,
                                      double T, double dt) {
  std::vector<SpikeTrain> trains(channels, SpikeTrain{dt, {}, {}});
  const auto n = grid_steps(T, dt);
  for (const auto& ev : events) {
    const auto step = static_cast<std::int64_t>(std::floor(ev.t / dt + 1e-9));
    if (step >= n) continue;
    const std::size_t ch = mode == PolarityMode::Separate ? 2 * ev.address + (ev.polarity < 0 ? 1 : 0) : ev.address;
    if (ch >= channels) {
      throw ConfigError("AER address " + std::to_string(ev.address) + " does not fit " + std::to_string(channels) +
                        " input channels");
    }
    auto& tr = trains[ch];
    // Events are time-sorted; several in one step collapse into one spike.
    if (!tr.steps.empty() && tr.steps.back() == step) continue;
    tr.steps.push_back(step);
    if (mode == PolarityMode::Signed) tr.polarity.push_back(static_cast<std::int8_t>(ev.polarity));
  }
  return trains;
}

std::vector<SpikeTrain> encode_sample(const Sample& sample, const EncoderConfig& cfg, std::size_t channels,
                                      double T, double dt, std::uint64_t seed) {
  if (cfg.kind == Kind::Aer) return aer_to_trains(sample.events, channels, cfg.polarity_mode, T, dt);
  if (sample.features.size() != channels) {
    throw ConfigError("sample has " + std::to_string(sample.features.size()) + " features but the input layer has " +
                      std::to_string(channels) + " neurons");
  }
  std::vector<SpikeTrain> trains;
  trains.reserve(channels);
  Rng rng(seed);
  for (double x : sample.features) {
    if (cfg.kind == Kind::Poisson) {
      trains.push_back(poisson_encode(x, cfg.r_min, cfg.r_max, T, dt, rng));
    } else {
      trains.push_back(fixed_rate_encode(x, cfg.r_min, cfg.r_max, T, dt));
    }
  }
  return trains;
}

}  // namespace spikeforge::encoding
