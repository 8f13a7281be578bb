#include "fomads/waveform.hpp"

#include <stdexcept>

namespace fomads {

int encode_label(int inverter, int switch_index, int n_inverters) {
  if (inverter < 1 || inverter > n_inverters) {
    throw std::domain_error("inverter index out of range: " + std::to_string(inverter));
  }
  if (switch_index < 1 || switch_index > kSwitchesPerInverter) {
    throw std::domain_error("switch index out of range: " + std::to_string(switch_index));
  }
  return (inverter - 1) * kSwitchesPerInverter + switch_index;
}

ClassLabel decode_label(int class_id, int n_inverters) {
  if (class_id < 0 || class_id > n_inverters * kSwitchesPerInverter) {
    throw std::domain_error("class id out of range: " + std::to_string(class_id));
  }
  if (class_id == 0) return normal_label();
  return ClassLabel{class_id, inverter_of(class_id), switch_of(class_id)};
}

ClassLabel normal_label() { return ClassLabel{0, std::nullopt, std::nullopt}; }

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::None: return "none";
    case AttackKind::Bias: return "bias";
    case AttackKind::Noise: return "noise";
    case AttackKind::Replacement: return "replacement";
    case AttackKind::Replay: return "replay";
  }
  return "none";
}

AttackKind parse_attack_kind(std::string_view name) {
  if (name == "none") return AttackKind::None;
  if (name == "bias") return AttackKind::Bias;
  if (name == "noise") return AttackKind::Noise;
  if (name == "replacement") return AttackKind::Replacement;
  if (name == "replay") return AttackKind::Replay;
  throw std::domain_error("unknown attack kind: " + std::string(name));
}

AttackKind AttackSpec::kind() const {
  switch (params.index()) {
    case 0: return AttackKind::Bias;
    case 1: return AttackKind::Noise;
    case 2: return AttackKind::Replacement;
    default: return AttackKind::Replay;
  }
}

std::span<const double> Waveform::channel(int c) const {
  switch (c) {
    case 0: return v;
    case 1: return p;
    case 2: return q;
  }
  throw std::out_of_range("channel index must be 0 (V), 1 (P) or 2 (Q)");
}

std::vector<double>& Waveform::channel(int c) {
  switch (c) {
    case 0: return v;
    case 1: return p;
    case 2: return q;
  }
  throw std::out_of_range("channel index must be 0 (V), 1 (P) or 2 (Q)");
}

}  // namespace fomads
