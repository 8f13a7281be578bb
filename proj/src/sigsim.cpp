#include "fomads/sigsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "fomads/errors.hpp"
#include "fomads/rng.hpp"

namespace fomads::sigsim {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kGridHz = 50.0;
constexpr std::uint64_t kSignatureStream = 0xFA;

}  // namespace

std::vector<FaultSignature> ScenarioConfig::default_signatures() {
  // Switch index sets ripple frequency and onset phase (one bridge leg per
  // 120 degrees, upper/lower half-cycle offset) plus the onset kick: upper
  // switches kick up, lower ones down, growing by leg. Inverter index sets
  // ripple amplitude and the P/Q droop.
  constexpr double droop_q[kNumInverters] = {0.12, 0.04, 0.16, 0.08};
  std::vector<FaultSignature> sigs;
  sigs.reserve(kNumInverters * kSwitchesPerInverter);
  for (int inv = 1; inv <= kNumInverters; ++inv) {
    for (int sw = 1; sw <= kSwitchesPerInverter; ++sw) {
      FaultSignature s;
      s.ripple_hz = kGridHz * (sw + 1);
      s.ripple_amp = 0.12 + 0.02 * (inv - 1);
      s.phase = (sw - 1) * std::numbers::pi / 3.0;
      s.droop_p = 0.02 + 0.04 * inv;
      s.droop_q = droop_q[inv - 1];
      s.transient = (sw % 2 == 1 ? 1.0 : -1.0) * (0.15 + 0.05 * ((sw - 1) / 2));
      sigs.push_back(s);
    }
  }
  return sigs;
}

void validate(const ScenarioConfig& c) {
  if (!(c.base_voltage > 0 && c.base_p > 0 && c.base_q > 0)) {
    throw ConfigError("base_voltage, base_p and base_q must be positive");
  }
  if (c.load_jitter < 0 || c.drift_rel < 0 || c.flicker_rel < 0 || c.noise_floor < 0 ||
      c.signature_jitter < 0 || c.ripple_floor < 0 || c.ripple_floor > 1 || !(c.ripple_tau > 0)) {
    throw ConfigError("jitter, drift, flicker and noise parameters must be non-negative, ripple_floor in [0, 1] and ripple_tau positive");
  }
  if (c.window_len < 4) throw ConfigError("window_len must be at least 4 samples");
  if (!(c.sample_rate > 0)) throw ConfigError("sample_rate must be positive");
  if (c.signatures.size() != static_cast<std::size_t>(kNumInverters * kSwitchesPerInverter)) {
    throw ConfigError("expected 24 fault signatures");
  }
  for (std::size_t a = 0; a < c.signatures.size(); ++a) {
    const auto& s = c.signatures[a];
    if (!(s.ripple_hz >= 0 && s.ripple_hz < c.sample_rate / 2)) {
      throw ConfigError("signature ripple frequency must lie in [0, Nyquist)");
    }
    for (std::size_t b = a + 1; b < c.signatures.size(); ++b) {
      const auto& t = c.signatures[b];
      if (s.ripple_hz == t.ripple_hz && s.ripple_amp == t.ripple_amp && s.phase == t.phase &&
          s.droop_p == t.droop_p && s.droop_q == t.droop_q && s.transient == t.transient) {
        throw ConfigError("fault signatures for classes " + std::to_string(a + 1) + " and " +
                          std::to_string(b + 1) + " are identical");
      }
    }
  }
}

ScenarioConfig scenario_from(const KeyValues& kv) {
  ScenarioConfig c;
  c.base_voltage = kv.get_double("sim.base_voltage", c.base_voltage);
  c.base_p = kv.get_double("sim.base_p", c.base_p);
  c.base_q = kv.get_double("sim.base_q", c.base_q);
  c.load_jitter = kv.get_double("sim.load_jitter", c.load_jitter);
  c.drift_rel = kv.get_double("sim.drift_rel", c.drift_rel);
  c.flicker_rel = kv.get_double("sim.flicker_rel", c.flicker_rel);
  c.noise_floor = kv.get_double("sim.noise_floor", c.noise_floor);
  c.signature_jitter = kv.get_double("sim.signature_jitter", c.signature_jitter);
  c.ripple_floor = kv.get_double("sim.ripple_floor", c.ripple_floor);
  c.ripple_tau = kv.get_double("sim.ripple_tau", c.ripple_tau);
  const auto len = kv.get_int("sim.window_len", static_cast<long long>(c.window_len));
  if (len < 4) throw ConfigError("sim.window_len must be at least 4");
  c.window_len = static_cast<std::size_t>(len);
  c.sample_rate = kv.get_double("sim.sample_rate", c.sample_rate);
  for (int inv = 1; inv <= kNumInverters; ++inv) {
    for (int sw = 1; sw <= kSwitchesPerInverter; ++sw) {
      auto& s = c.signatures[static_cast<std::size_t>(encode_label(inv, sw) - 1)];
      const std::string prefix = "sig." + std::to_string(inv) + "." + std::to_string(sw) + ".";
      s.ripple_hz = kv.get_double(prefix + "ripple_hz", s.ripple_hz);
      s.ripple_amp = kv.get_double(prefix + "ripple_amp", s.ripple_amp);
      s.phase = kv.get_double(prefix + "phase", s.phase);
      s.droop_p = kv.get_double(prefix + "droop_p", s.droop_p);
      s.droop_q = kv.get_double(prefix + "droop_q", s.droop_q);
      s.transient = kv.get_double(prefix + "transient", s.transient);
    }
  }
  validate(c);
  return c;
}

Waveform generate_normal(const ScenarioConfig& c, std::uint64_t seed) {
  const std::size_t L = c.window_len;
  Rng rng(seed);
  Waveform w;
  w.seed = seed;
  w.sample_rate = c.sample_rate;
  w.label = normal_label();
  w.v.resize(L);
  w.p.resize(L);
  w.q.resize(L);

  const double load = rng.normal(0.0, c.load_jitter);
  const double load_q = 0.6 * load + rng.normal(0.0, 0.8 * c.load_jitter);
  const double flicker_phase = rng.uniform(0.0, kTwoPi);
  double walk_v = 0.0;
  double walk_p = 0.0;
  double walk_q = 0.0;
  for (std::size_t n = 0; n < L; ++n) {
    const double t = static_cast<double>(n) / c.sample_rate;
    walk_v += rng.normal(0.0, 0.2 * c.drift_rel);
    walk_p += rng.normal(0.0, c.drift_rel);
    walk_q += rng.normal(0.0, c.drift_rel);
    const double flicker = c.flicker_rel * std::sin(kTwoPi * kGridHz * t + flicker_phase);
    // Heavier load sags the bus voltage slightly.
    w.v[n] = c.base_voltage * (1.0 - 0.1 * load + walk_v + flicker + rng.normal(0.0, c.noise_floor));
    w.p[n] = c.base_p * (1.0 + load + walk_p + rng.normal(0.0, c.noise_floor));
    w.q[n] = c.base_q * (1.0 + load_q + walk_q + rng.normal(0.0, c.noise_floor));
  }
  return w;
}

Waveform generate_fault(const ScenarioConfig& c, int inverter, int switch_index,
                        std::uint64_t seed) {
  const int class_id = encode_label(inverter, switch_index);
  Waveform w = generate_normal(c, seed);
  w.label = decode_label(class_id);

  const FaultSignature& sig = c.signatures[static_cast<std::size_t>(class_id - 1)];
  Rng sig_rng(derive_seed(seed, kSignatureStream));
  const double amp_scale = std::max(0.0, 1.0 + sig_rng.normal(0.0, c.signature_jitter));
  const double droop_scale = std::max(0.0, 1.0 + sig_rng.normal(0.0, c.signature_jitter));

  const double amp = c.base_voltage * sig.ripple_amp * amp_scale;
  const double dp = c.base_p * sig.droop_p * droop_scale;
  const double dq = c.base_q * sig.droop_q * droop_scale;
  const double kick = c.base_voltage * sig.transient * amp_scale;
  for (std::size_t n = c.fault_onset(); n < c.window_len; ++n) {
    const double tau = static_cast<double>(n - c.fault_onset()) / c.sample_rate;
    const double envelope = c.ripple_floor + (1.0 - c.ripple_floor) * std::exp(-tau / c.ripple_tau);
    w.v[n] += amp * envelope * std::sin(kTwoPi * sig.ripple_hz * tau + sig.phase) + kick * std::exp(-tau / kTransientTau);
    w.p[n] -= dp;
    w.q[n] -= dq;
  }
  return w;
}

std::vector<Waveform> generate_dataset(const ScenarioConfig& c, std::size_t n_normal,
                                       std::size_t n_per_fault, std::uint64_t seed) {
  std::vector<Waveform> out;
  out.reserve(n_normal + 24 * n_per_fault);
  std::uint64_t id = 0;
  for (std::size_t i = 0; i < n_normal; ++i, ++id) {
    out.push_back(generate_normal(c, derive_seed(seed, id)));
    out.back().window_id = id;
  }
  for (int inv = 1; inv <= kNumInverters; ++inv) {
    for (int sw = 1; sw <= kSwitchesPerInverter; ++sw) {
      for (std::size_t i = 0; i < n_per_fault; ++i, ++id) {
        out.push_back(generate_fault(c, inv, sw, derive_seed(seed, id)));
        out.back().window_id = id;
      }
    }
  }
  return out;
}

}  // namespace fomads::sigsim
