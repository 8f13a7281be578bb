#pragma once

#include <span>
#include <vector>

#include "fomads/config.hpp"
#include "fomads/sigsim.hpp"
#include "fomads/waveform.hpp"

// Cyber-attack injectors on raw VPQ windows. Every injector preserves the
// ground-truth label and records the applied spec on the output.

namespace fomads::attacks {

/// Channel scales the noise injector multiplies sigma_rel by.
struct ChannelScales {
  double v = 311.0;
  double p = 5000.0;
  double q = 2000.0;
};

/// Default spec per kind, with the default difficulty scores
/// (bias 0.3, noise 0.6, replacement 0.9, replay 0.8).
AttackSpec default_spec(AttackKind kind);

/// Per-kind templates used by the CLI and the training curriculum.
struct AttackSettings {
  AttackSpec bias = default_spec(AttackKind::Bias);
  AttackSpec noise = default_spec(AttackKind::Noise);
  AttackSpec replacement = default_spec(AttackKind::Replacement);
  AttackSpec replay = default_spec(AttackKind::Replay);
  ChannelScales scales;

  /// Throws std::domain_error for AttackKind::None.
  const AttackSpec& spec(AttackKind kind) const;
};

/// Reads `attack.*` keys; noise scales follow the scenario base values.
AttackSettings attack_settings_from(const KeyValues& kv, const sigsim::ScenarioConfig& scenario);

// Each injector throws std::domain_error when the spec kind does not match
// or a segment falls outside the window.
Waveform apply_bias(const Waveform& w, const AttackSpec& spec);
Waveform apply_noise(const Waveform& w, const AttackSpec& spec, const ChannelScales& scales = {});
Waveform apply_replacement(const Waveform& w, const AttackSpec& spec);
/// Additionally requires the source segment to end at or before the window
/// midpoint (pre-fault data only).
Waveform apply_replay(const Waveform& w, const AttackSpec& spec);

/// Dispatch on spec.kind().
Waveform apply(const Waveform& w, const AttackSpec& spec, const ChannelScales& scales = {});

/// Applies `spec` to every window, deriving each window's noise seed from
/// (spec.seed, window_id) so the result does not depend on dataset order.
std::vector<Waveform> apply_to_dataset(std::span<const Waveform> windows, const AttackSpec& spec,
                                       const ChannelScales& scales = {});

}  // namespace fomads::attacks
