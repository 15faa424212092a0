#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "spikeforge/expr.hpp"

namespace spikeforge::synapse {

enum class SynapseMode : std::uint8_t { Idle, Transmit, Potentiate, Depress };
enum class SpikePresence : std::uint8_t { None, PreOnly, PostOnly, Both };

std::string_view to_string(SynapseMode m) noexcept;
std::string_view to_string(SpikePresence p) noexcept;
std::optional<SpikePresence> presence_from_string(std::string_view s) noexcept;

/// Small set of SpikePresence values.
class PresenceSet {
 public:
  constexpr PresenceSet() = default;
  constexpr PresenceSet(std::initializer_list<SpikePresence> items) {
    for (auto p : items) insert(p);
  }
  constexpr void insert(SpikePresence p) noexcept { bits_ |= bit(p); }
  constexpr bool contains(SpikePresence p) const noexcept { return (bits_ & bit(p)) != 0; }
  constexpr bool empty() const noexcept { return bits_ == 0; }

 private:
  static constexpr std::uint8_t bit(SpikePresence p) noexcept { return std::uint8_t(1u << static_cast<unsigned>(p)); }
  std::uint8_t bits_ = 0;
};

constexpr SpikePresence classify_presence(bool pre_active, bool post_active) noexcept {
  if (pre_active) return post_active ? SpikePresence::Both : SpikePresence::PreOnly;
  return post_active ? SpikePresence::PostOnly : SpikePresence::None;
}

// ---------------------------------------------------------------------------
// Devices

struct IdenticalPulseDevice {
  std::vector<double> levels_ltp;  // strictly ascending, siemens
  std::vector<double> levels_ltd;  // strictly descending, siemens
};

/// Conductance-vs-pulse-number curves, one row per pulse amplitude (or width).
struct PulseTable {
  std::vector<double> amplitudes;         // ascending after validation
  std::vector<std::vector<double>> rows;  // rows[k] belongs to amplitudes[k]
};

enum class FamilyAxis { Amplitude, Width };

struct PulseFamilyDevice {
  PulseTable potentiation;  // rows non-decreasing
  PulseTable depression;    // rows non-increasing
  FamilyAxis axis = FamilyAxis::Amplitude;
};

class DeviceModel {
 public:
  using Variant = std::variant<IdenticalPulseDevice, PulseFamilyDevice>;

  /// Validates monotonicity and bounds; NaN bounds default to the table
  /// extremes. Throws ConfigError.
  DeviceModel(Variant v, double g_min = std::numeric_limits<double>::quiet_NaN(),
              double g_max = std::numeric_limits<double>::quiet_NaN());

  const Variant& variant() const noexcept { return variant_; }
  bool identical() const noexcept { return std::holds_alternative<IdenticalPulseDevice>(variant_); }
  double g_min() const noexcept { return g_min_; }
  double g_max() const noexcept { return g_max_; }
  double clamp(double g) const noexcept { return g < g_min_ ? g_min_ : (g > g_max_ ? g_max_ : g); }

 private:
  Variant variant_;
  double g_min_;
  double g_max_;
};

enum class Direction { Potentiate, Depress };

struct StepResult {
  double g;
  bool saturated;  // the nearest level was already the last one
};

/// Index of the entry nearest to g; ties go to the lower index.
std::size_t nearest_index(std::span<const double> levels, double g) noexcept;

/// Snap to the nearest level of the direction's array and advance one level.
/// The result never moves against the direction.
StepResult step_identical(const IdenticalPulseDevice& device, double g, Direction dir) noexcept;

/// Pick the row nearest |pulse| (ties to the lower amplitude), snap g to the
/// nearest column of that row and advance one column.
StepResult step_family(const PulseFamilyDevice& device, double g, Direction dir, double pulse) noexcept;

/// Reads one conductance per line ('#' comments allowed).
std::vector<double> load_levels(const std::filesystem::path& path);

/// Reads a header line of signed amplitudes followed by one row per
/// amplitude. Positive amplitudes form the potentiation table, negative ones
/// the depression table (stored by magnitude).
PulseFamilyDevice load_family(const std::filesystem::path& path, FamilyAxis axis);

// ---------------------------------------------------------------------------
// Circuits

/// Fixed slots every circuit program reads. User constants follow kFirstConstant.
enum Slot : std::size_t {
  kVPre = 0,
  kVPost1,
  kVPost2,
  kVNode1,
  kVNode2,
  kVTB,
  kG,
  kDt,
  kTime,
  kFirstConstant,
};

/// Identifiers available to v_app (ex_eqs additionally sees V_TB).
std::vector<std::string> circuit_vocabulary(bool include_vtb);

struct CircuitParams {
  std::string v_app = "V_post1 - V_pre";
  std::optional<std::string> ex_eqs;
  double v_th_pos = 1.0;
  double v_th_neg = 1.0;
  PresenceSet plasticity_policy{SpikePresence::Both};
  PresenceSet transmit_policy{SpikePresence::PreOnly, SpikePresence::Both};
  bool conduct_during_plasticity = true;
  double rest_pre = 0.0;    // V_pre when no pre-spike is active
  double rest_post1 = 0.0;  // V_post1 DC bias when no post-spike is active
  double rest_post2 = 0.0;
  double v_node = 0.0;  // bound to both V_node1 and V_node2
  std::map<std::string, double> constants;
};

struct Outcome {
  SynapseMode mode = SynapseMode::Idle;
  double v_tb = 0.0;
  double current = 0.0;
};

class CircuitModel {
 public:
  /// Parses and checks every expression against the vocabulary; throws
  /// ConfigError listing the allowed names on failure.
  explicit CircuitModel(CircuitParams params);

  const CircuitParams& params() const noexcept { return params_; }
  std::size_t slot_count() const noexcept { return slots_.size(); }
  const expr::Expression& v_app() const noexcept { return v_app_; }
  const std::optional<expr::Expression>& ex_eqs() const noexcept { return ex_eqs_; }

  /// Slot array with constants, V_node and the given dt filled in.
  std::vector<double> make_slots(double dt) const;

  /// Mode resolution plus transmit current on a slot array whose V_pre,
  /// V_post1, V_post2, G and t entries are set. Writes V_TB into the array.
  Outcome evaluate(SpikePresence presence, std::span<double> slots) const;

  /// v_app on a slot array, regardless of spike presence.
  double applied_voltage(std::span<const double> slots) const;

  /// Mode for a given V_TB (no expression evaluation).
  SynapseMode mode_for(SpikePresence presence, double v_tb) const noexcept;

  /// Current for a resolved mode; slots must hold V_TB and G.
  double current_for(SynapseMode mode, std::span<const double> slots) const;

 private:
  CircuitParams params_;
  expr::SlotTable slots_;
  expr::Expression v_app_;
  std::optional<expr::Expression> ex_eqs_;
  expr::Program v_app_prog_;
  expr::Program ex_eqs_prog_;
};

/// Binds the environment-style API onto a slot array.
std::vector<double> slots_from_env(const CircuitModel& c, const expr::Environment& env, bool need_vtb);

/// V_TB = v_app(env); Potentiate/Depress when the presence allows plasticity
/// and V_TB crosses +v_th_pos / -v_th_neg, else Transmit when the presence
/// allows transmission, else Idle.
SynapseMode resolve_mode(const CircuitModel& circuit, SpikePresence presence, const expr::Environment& env);

struct SynapseState {
  double g = 0.0;
  SynapseMode last_mode = SynapseMode::Idle;
};

/// Current through the device in state.last_mode: 0 when Idle (or when
/// programming pulses do not conduct), else ex_eqs or G * V_TB. V_TB is taken
/// from env if bound, otherwise computed from v_app.
double transmit_current(const CircuitModel& circuit, const SynapseState& state, const expr::Environment& env);

struct PlasticityPulse {
  Direction direction;
  double amplitude;  // |V_TB|, forwarded in full
};

/// The programming pulse seen this timestep, if V_TB is beyond a threshold.
std::optional<PlasticityPulse> effective_pulse_voltage(const CircuitModel& circuit, double v_tb) noexcept;

/// Applies one plasticity event of the resolved mode. Non-plastic modes
/// leave g unchanged. For pulse families on the width axis the row is
/// chosen by dt (each over-threshold timestep is one pulse of width dt).
StepResult apply_plasticity(const DeviceModel& device, double g, SynapseMode mode, double v_tb, double dt) noexcept;

}  // namespace spikeforge::synapse
