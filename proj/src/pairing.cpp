#include <algorithm>
#include <cmath>

#include "spikeforge/engine.hpp"
#include "spikeforge/error.hpp"

namespace spikeforge::engine {

double pairing_delta_g(const PairingSetup& setup, double g0, std::int64_t delta_steps) {
  if (!setup.circuit || !setup.device || !setup.pre || !setup.post1) {
    throw ConfigError("pairing protocol needs a circuit, a device, a pre waveform and a post1 waveform");
  }
  const auto& circuit = *setup.circuit;
  const auto& cp = circuit.params();
  const wave::SampledWaveform pre(*setup.pre, setup.dt);
  const wave::SampledWaveform post(*setup.post1, setup.dt);
  const std::int64_t pre_origin = std::max<std::int64_t>(0, -delta_steps);
  const std::int64_t post_origin = pre_origin + delta_steps;
  const std::int64_t end = std::max(pre_origin + static_cast<std::int64_t>(pre.steps()),
                                    post_origin + static_cast<std::int64_t>(post.steps()));
  auto slots = circuit.make_slots(setup.dt);
  double g = setup.device->clamp(g0);
  for (std::int64_t k = 0; k < end; ++k) {
    const auto mp = k - pre_origin;
    const auto mq = k - post_origin;
    const bool pre_on = mp >= 0 && mp < static_cast<std::int64_t>(pre.steps());
    const bool post_on = mq >= 0 && mq < static_cast<std::int64_t>(post.steps());
    slots[synapse::kVPre] = pre_on ? pre.at(static_cast<std::size_t>(mp)) : cp.rest_pre;
    slots[synapse::kVPost1] = post_on ? post.at(static_cast<std::size_t>(mq)) : cp.rest_post1;
    slots[synapse::kVPost2] = cp.rest_post2;
    slots[synapse::kG] = g;
    slots[synapse::kTime] = static_cast<double>(k) * setup.dt;
    const auto out = circuit.evaluate(synapse::classify_presence(pre_on, post_on), slots);
    g = synapse::apply_plasticity(*setup.device, g, out.mode, out.v_tb, setup.dt).g;
  }
  return g - setup.device->clamp(g0);
}

std::vector<CurvePoint> stdp_curve(const PairingSetup& setup, std::span<const double> g_inits, double dt_min,
                                   double dt_max, std::size_t points) {
  if (points < 1) throw ConfigError("stdp curve needs at least one point");
  if (!(dt_max >= dt_min)) throw ConfigError("stdp curve needs dt_min <= dt_max");
  if (g_inits.empty()) throw ConfigError("stdp curve needs at least one initial conductance");
  std::vector<CurvePoint> out;
  for (double g0 : g_inits) {
    for (std::size_t p = 0; p < points; ++p) {
      const double target =
          points == 1 ? dt_min : dt_min + (dt_max - dt_min) * static_cast<double>(p) / static_cast<double>(points - 1);
      const auto steps = static_cast<std::int64_t>(std::llround(target / setup.dt));
      out.push_back({g0, static_cast<double>(steps) * setup.dt, pairing_delta_g(setup, g0, steps)});
    }
  }
  return out;
}

}  // namespace spikeforge::engine
