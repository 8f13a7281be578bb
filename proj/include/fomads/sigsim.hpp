#pragma once

#include <cstdint>
#include <vector>

#include "fomads/config.hpp"
#include "fomads/waveform.hpp"

// Parametric stand-in for a four-inverter microgrid observed through one
// VPQ sensor at the point of common coupling.
//
// Normal operation: a per-window load level, a slow random-walk drift
// (load and solar variation), a small 50 Hz flicker on the V envelope and a
// white measurement floor. An open-circuit fault on (inverter, switch) adds,
// from the window midpoint on, a decaying switch-specific kick and ripple on
// V and an inverter-specific droop step on P and Q. The load/solar
// statistics are invented and configurable.

namespace fomads::sigsim {

struct FaultSignature {
  double ripple_hz = 0.0;
  double ripple_amp = 0.0;  // relative to base_voltage
  double phase = 0.0;       // radians at fault onset
  double droop_p = 0.0;     // relative to base_p, subtracted after onset
  double droop_q = 0.0;     // relative to base_q, subtracted after onset
  double transient = 0.0;   // relative V kick at onset, decaying with kTransientTau
};

/// Time constant of the onset transient, seconds.
inline constexpr double kTransientTau = 0.005;

struct ScenarioConfig {
  double base_voltage = 311.0;
  double base_p = 5000.0;
  double base_q = 2000.0;
  double load_jitter = 0.02;     // per-window relative load level std
  double drift_rel = 0.0006;     // per-sample random-walk increment std (relative)
  double flicker_rel = 0.001;    // 50 Hz flicker on the V envelope (relative)
  double noise_floor = 0.001;    // white measurement noise std (relative)
  double signature_jitter = 0.1; // per-window relative spread of ripple amplitude and droop
  // Ripple envelope after onset: settles from 1 to ripple_floor with time
  // constant ripple_tau (seconds) as the inverter's current loop compensates.
  double ripple_floor = 0.5;
  double ripple_tau = 0.02;
  std::size_t window_len = kDefaultWindowLen;
  double sample_rate = kDefaultSampleRate;
  std::vector<FaultSignature> signatures = default_signatures();  // index class_id - 1

  std::size_t fault_onset() const { return window_len / 2; }

  static std::vector<FaultSignature> default_signatures();
};

/// Throws ConfigError on non-positive scales, a window shorter than 4
/// samples, a signature count other than 24, or two identical signatures.
void validate(const ScenarioConfig& config);

/// Reads `sim.*` keys (and `sig.<inv>.<sw>.<field>` overrides) on top of
/// the defaults.
ScenarioConfig scenario_from(const KeyValues& kv);

Waveform generate_normal(const ScenarioConfig& config, std::uint64_t seed);

/// Throws std::domain_error for inverter outside [1, 4] or switch outside
/// [1, 6].
Waveform generate_fault(const ScenarioConfig& config, int inverter, int switch_index,
                        std::uint64_t seed);

/// n_normal normal windows followed by n_per_fault windows of each fault
/// class in class-id order. Window i uses seed derive_seed(seed, i).
std::vector<Waveform> generate_dataset(const ScenarioConfig& config, std::size_t n_normal,
                                       std::size_t n_per_fault, std::uint64_t seed);

}  // namespace fomads::sigsim
