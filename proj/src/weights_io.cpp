#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <sstream>

#include "spikeforge/engine.hpp"
#include "spikeforge/error.hpp"

namespace spikeforge::engine {

namespace {

constexpr int kFormatVersion = 1;
constexpr std::string_view kMagic = "spikeforge-net v";

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
bool parse(const std::string& s, T& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace

void save_network(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write weights file " + path.string());
  std::size_t records = 0;
  out << kMagic << kFormatVersion << '\n';
  out << "sizes";
  for (const auto& L : net.spec().layers) out << ',' << L.neurons;
  out << '\n';
  for (std::size_t l = 1; l < net.layer_count(); ++l) {
    const auto& P = net.projection(l);
    for (std::size_t i = 0; i < P.n_pre; ++i) {
      for (std::size_t j = 0; j < P.n_post; ++j) {
        const auto k = P.at(i, j);
        if (!P.mask[k]) continue;
        out << fmt::format("{},{},{},{}\n", l, i, j, P.g[k]);
        ++records;
      }
    }
  }
  const auto& labels = net.labels();
  for (std::size_t j = 0; j < labels.size(); ++j) {
    out << "label," << j << ',' << (labels[j] ? std::to_string(*labels[j]) : std::string("none")) << '\n';
    ++records;
  }
  out << "end," << records << '\n';
  if (!out) throw IoError("failed writing weights file " + path.string());
}

void load_weights(Network& net, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weights file " + path.string());
  auto corrupt = [&](std::size_t lineno, const std::string& why) {
    return IoError("corrupt weights file " + path.string() + ":" + std::to_string(lineno) + ": " + why);
  };
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw corrupt(1, "empty file");
  if (line.rfind(kMagic, 0) != 0) throw corrupt(1, "missing 'spikeforge-net' header");
  int version = 0;
  if (!parse(line.substr(kMagic.size()), version)) throw corrupt(1, "bad version field");
  if (version != kFormatVersion) {
    throw IoError("weights file " + path.string() + " has format version " + std::to_string(version) +
                  "; this build reads version " + std::to_string(kFormatVersion));
  }
  ++lineno;
  if (!std::getline(in, line)) throw corrupt(lineno, "missing sizes line");
  {
    const auto f = split(line);
    const auto& layers = net.spec().layers;
    if (f.empty() || f[0] != "sizes" || f.size() != layers.size() + 1) throw corrupt(lineno, "bad sizes line");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      std::size_t n = 0;
      if (!parse(f[l + 1], n) || n != layers[l].neurons) {
        throw corrupt(lineno, "layer " + std::to_string(l) + " size does not match the configuration");
      }
    }
  }
  // Parse everything before touching the network so a bad file leaves it intact.
  struct Syn {
    std::size_t l, i, j;
    double g;
  };
  std::vector<Syn> syns;
  std::vector<std::pair<std::size_t, std::optional<int>>> labels;
  bool ended = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (ended) throw corrupt(lineno, "data after end marker");
    const auto f = split(line);
    if (f.size() == 2 && f[0] == "end") {
      std::size_t n = 0;
      if (!parse(f[1], n) || n != syns.size() + labels.size()) throw corrupt(lineno, "record count mismatch");
      ended = true;
    } else if (f.size() == 3 && f[0] == "label") {
      std::size_t j = 0;
      if (!parse(f[1], j) || j >= net.labels().size()) throw corrupt(lineno, "bad label neuron");
      std::optional<int> cls;
      if (f[2] != "none") {
        int c = 0;
        if (!parse(f[2], c) || c < 0) throw corrupt(lineno, "bad label class");
        cls = c;
      }
      labels.emplace_back(j, cls);
    } else if (f.size() == 4) {
      Syn s{};
      if (!parse(f[0], s.l) || !parse(f[1], s.i) || !parse(f[2], s.j) || !parse(f[3], s.g)) {
        throw corrupt(lineno, "bad synapse record");
      }
      if (s.l < 1 || s.l >= net.layer_count()) throw corrupt(lineno, "bad layer index");
      const auto& P = net.projection(s.l);
      if (s.i >= P.n_pre || s.j >= P.n_post) throw corrupt(lineno, "synapse index out of range");
      syns.push_back(s);
    } else {
      throw corrupt(lineno, "unrecognized record");
    }
  }
  if (!ended) throw corrupt(lineno, "truncated (no end marker)");

  for (std::size_t l = 1; l < net.layer_count(); ++l) {
    auto& P = net.projection(l);
    std::fill(P.mask.begin(), P.mask.end(), std::uint8_t{0});
    std::fill(P.g.begin(), P.g.end(), 0.0);
  }
  for (const auto& s : syns) {
    auto& P = net.projection(s.l);
    const auto k = P.at(s.i, s.j);
    P.mask[k] = 1;
    P.g[k] = s.g;
  }
  auto& out = net.labels();
  std::fill(out.begin(), out.end(), std::nullopt);
  for (const auto& [j, c] : labels) out[j] = c;
}

Network load_network(std::shared_ptr<const NetworkSpec> spec, double dt, const std::filesystem::path& path) {
  Network net(std::move(spec), dt);
  load_weights(net, path);
  return net;
}

}  // namespace spikeforge::engine
