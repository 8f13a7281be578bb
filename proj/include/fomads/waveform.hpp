#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fomads {

inline constexpr int kNumInverters = 4;
inline constexpr int kSwitchesPerInverter = 6;
inline constexpr int kNumClasses = 1 + kNumInverters * kSwitchesPerInverter;  // 25
inline constexpr std::size_t kDefaultWindowLen = 400;
inline constexpr double kDefaultSampleRate = 2000.0;

/// One of the 25 operating states. class_id 0 is normal; fault classes
/// encode (inverter, switch) as (inverter - 1) * 6 + switch.
struct ClassLabel {
  int class_id = 0;
  std::optional<int> inverter;
  std::optional<int> switch_index;

  bool is_normal() const { return class_id == 0; }
  friend bool operator==(const ClassLabel&, const ClassLabel&) = default;
};

/// Throws std::domain_error when inverter is outside [1, n_inverters] or
/// switch_index outside [1, 6].
int encode_label(int inverter, int switch_index, int n_inverters = kNumInverters);
ClassLabel decode_label(int class_id, int n_inverters = kNumInverters);
ClassLabel normal_label();

/// Stage-1 target: 0 for normal, otherwise the inverter number.
inline int inverter_of(int class_id) {
  return class_id == 0 ? 0 : (class_id - 1) / kSwitchesPerInverter + 1;
}
/// 1-based switch within its inverter; 0 for normal.
inline int switch_of(int class_id) {
  return class_id == 0 ? 0 : (class_id - 1) % kSwitchesPerInverter + 1;
}

enum class AttackKind { None, Bias, Noise, Replacement, Replay };

std::string_view to_string(AttackKind kind);
/// Parses "none", "bias", "noise", "replacement", "replay".
/// Throws std::domain_error on anything else.
AttackKind parse_attack_kind(std::string_view name);

enum class ReplacementMode { Zero, HoldFirst, Constant };

struct BiasParams {
  double dv = 0.1;   // volts
  double dp = 50.0;  // watts
  double dq = 30.0;  // vars
};

struct NoiseParams {
  double sigma_rel = 0.05;
  std::size_t start = 150;
  std::size_t len = 200;
};

struct ReplacementParams {
  ReplacementMode mode = ReplacementMode::Zero;
  double constant = 0.0;  // used by ReplacementMode::Constant
  std::size_t start = 200;
  std::size_t len = 100;
};

struct ReplayParams {
  std::size_t source_start = 100;
  std::size_t target_start = 200;
  std::size_t len = 100;
};

using AttackParams = std::variant<BiasParams, NoiseParams, ReplacementParams, ReplayParams>;

struct AttackSpec {
  AttackParams params;
  double difficulty = 0.0;
  std::uint64_t seed = 0;

  AttackKind kind() const;
};

/// Fixed-length window of (V, P, Q) samples with its ground truth.
struct Waveform {
  std::uint64_t window_id = 0;
  std::vector<double> v;
  std::vector<double> p;
  std::vector<double> q;
  ClassLabel label;
  std::optional<AttackSpec> attack;
  std::uint64_t seed = 0;
  double sample_rate = kDefaultSampleRate;

  std::size_t size() const { return v.size(); }
  AttackKind attack_kind() const { return attack ? attack->kind() : AttackKind::None; }

  std::span<const double> channel(int c) const;
  std::vector<double>& channel(int c);
};

}  // namespace fomads
