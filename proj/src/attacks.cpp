#include "fomads/attacks.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "fomads/errors.hpp"
#include "fomads/rng.hpp"

namespace fomads::attacks {
namespace {

void require_kind(const AttackSpec& spec, AttackKind kind) {
  if (spec.kind() != kind) {
    throw std::domain_error("attack spec is " + std::string(to_string(spec.kind())) +
                            ", expected " + std::string(to_string(kind)));
  }
}

void require_segment(std::size_t start, std::size_t len, std::size_t size, const char* what) {
  if (start > size || len > size - start) {
    throw std::domain_error(std::string(what) + " segment [" + std::to_string(start) + ", " +
                            std::to_string(start + len) + ") exceeds window of " +
                            std::to_string(size) + " samples");
  }
}

Waveform annotated(const Waveform& w, const AttackSpec& spec) {
  Waveform out = w;
  out.attack = spec;
  return out;
}

}  // namespace

AttackSpec default_spec(AttackKind kind) {
  switch (kind) {
    case AttackKind::Bias: return AttackSpec{BiasParams{}, 0.3, 0};
    case AttackKind::Noise: return AttackSpec{NoiseParams{}, 0.6, 0};
    case AttackKind::Replacement: return AttackSpec{ReplacementParams{}, 0.9, 0};
    case AttackKind::Replay: return AttackSpec{ReplayParams{}, 0.8, 0};
    case AttackKind::None: break;
  }
  throw std::domain_error("no attack spec for kind none");
}

const AttackSpec& AttackSettings::spec(AttackKind kind) const {
  switch (kind) {
    case AttackKind::Bias: return bias;
    case AttackKind::Noise: return noise;
    case AttackKind::Replacement: return replacement;
    case AttackKind::Replay: return replay;
    case AttackKind::None: break;
  }
  throw std::domain_error("no attack spec for kind none");
}

AttackSettings attack_settings_from(const KeyValues& kv, const sigsim::ScenarioConfig& scenario) {
  AttackSettings s;
  s.scales = {scenario.base_voltage, scenario.base_p, scenario.base_q};
  const auto seed = static_cast<std::uint64_t>(kv.get_int("attack.seed", 7));
  const auto idx = [&](const std::string& key, std::size_t fallback) {
    const auto v = kv.get_int(key, static_cast<long long>(fallback));
    if (v < 0) throw ConfigError(key + " must be non-negative");
    return static_cast<std::size_t>(v);
  };

  auto& b = std::get<BiasParams>(s.bias.params);
  b.dv = kv.get_double("attack.bias.dv", b.dv);
  b.dp = kv.get_double("attack.bias.dp", b.dp);
  b.dq = kv.get_double("attack.bias.dq", b.dq);
  s.bias.difficulty = kv.get_double("attack.bias.difficulty", s.bias.difficulty);

  auto& n = std::get<NoiseParams>(s.noise.params);
  n.sigma_rel = kv.get_double("attack.noise.sigma_rel", n.sigma_rel);
  n.start = idx("attack.noise.start", n.start);
  n.len = idx("attack.noise.len", n.len);
  s.noise.difficulty = kv.get_double("attack.noise.difficulty", s.noise.difficulty);

  auto& r = std::get<ReplacementParams>(s.replacement.params);
  const auto mode = kv.get_string("attack.replacement.mode", "zero");
  if (mode == "zero") {
    r.mode = ReplacementMode::Zero;
  } else if (mode == "hold-first") {
    r.mode = ReplacementMode::HoldFirst;
  } else if (mode == "constant") {
    r.mode = ReplacementMode::Constant;
  } else {
    throw ConfigError("attack.replacement.mode must be zero, hold-first or constant");
  }
  r.constant = kv.get_double("attack.replacement.constant", r.constant);
  r.start = idx("attack.replacement.start", r.start);
  r.len = idx("attack.replacement.len", r.len);
  s.replacement.difficulty = kv.get_double("attack.replacement.difficulty", s.replacement.difficulty);

  auto& p = std::get<ReplayParams>(s.replay.params);
  p.source_start = idx("attack.replay.source_start", p.source_start);
  p.target_start = idx("attack.replay.target_start", p.target_start);
  p.len = idx("attack.replay.len", p.len);
  s.replay.difficulty = kv.get_double("attack.replay.difficulty", s.replay.difficulty);

  for (AttackSpec* spec : {&s.bias, &s.noise, &s.replacement, &s.replay}) {
    spec->seed = derive_seed(seed, static_cast<std::uint64_t>(spec->kind()));
    if (!(spec->difficulty >= 0.0 && spec->difficulty <= 1.0)) {
      throw ConfigError("attack difficulty must lie in [0, 1]");
    }
  }
  return s;
}

Waveform apply_bias(const Waveform& w, const AttackSpec& spec) {
  require_kind(spec, AttackKind::Bias);
  const auto& b = std::get<BiasParams>(spec.params);
  Waveform out = annotated(w, spec);
  for (std::size_t n = 0; n < out.size(); ++n) {
    out.v[n] += b.dv;
    out.p[n] += b.dp;
    out.q[n] += b.dq;
  }
  return out;
}

Waveform apply_noise(const Waveform& w, const AttackSpec& spec, const ChannelScales& scales) {
  require_kind(spec, AttackKind::Noise);
  const auto& p = std::get<NoiseParams>(spec.params);
  require_segment(p.start, p.len, w.size(), "noise");
  if (p.sigma_rel < 0) throw std::domain_error("noise sigma_rel must be non-negative");
  Waveform out = annotated(w, spec);
  if (p.sigma_rel == 0.0) return out;
  Rng rng(spec.seed);
  const double sv = p.sigma_rel * scales.v;
  const double sp = p.sigma_rel * scales.p;
  const double sq = p.sigma_rel * scales.q;
  for (std::size_t n = p.start; n < p.start + p.len; ++n) {
    out.v[n] += rng.normal(0.0, sv);
    out.p[n] += rng.normal(0.0, sp);
    out.q[n] += rng.normal(0.0, sq);
  }
  return out;
}

Waveform apply_replacement(const Waveform& w, const AttackSpec& spec) {
  require_kind(spec, AttackKind::Replacement);
  const auto& r = std::get<ReplacementParams>(spec.params);
  require_segment(r.start, r.len, w.size(), "replacement");
  Waveform out = annotated(w, spec);
  if (r.len == 0) return out;
  for (int c = 0; c < 3; ++c) {
    auto& ch = out.channel(c);
    double value = 0.0;
    switch (r.mode) {
      case ReplacementMode::Zero: value = 0.0; break;
      case ReplacementMode::Constant: value = r.constant; break;
      case ReplacementMode::HoldFirst: value = ch[r.start > 0 ? r.start - 1 : 0]; break;
    }
    std::fill(ch.begin() + static_cast<std::ptrdiff_t>(r.start),
              ch.begin() + static_cast<std::ptrdiff_t>(r.start + r.len), value);
  }
  return out;
}

Waveform apply_replay(const Waveform& w, const AttackSpec& spec) {
  require_kind(spec, AttackKind::Replay);
  const auto& r = std::get<ReplayParams>(spec.params);
  require_segment(r.target_start, r.len, w.size(), "replay target");
  if (r.source_start + r.len > w.size() / 2) {
    throw std::domain_error("replay source segment must lie entirely before the fault onset");
  }
  Waveform out = annotated(w, spec);
  for (int c = 0; c < 3; ++c) {
    const auto src = w.channel(c);
    auto& dst = out.channel(c);
    for (std::size_t k = 0; k < r.len; ++k) dst[r.target_start + k] = src[r.source_start + k];
  }
  return out;
}

Waveform apply(const Waveform& w, const AttackSpec& spec, const ChannelScales& scales) {
  switch (spec.kind()) {
    case AttackKind::Bias: return apply_bias(w, spec);
    case AttackKind::Noise: return apply_noise(w, spec, scales);
    case AttackKind::Replacement: return apply_replacement(w, spec);
    case AttackKind::Replay: return apply_replay(w, spec);
    case AttackKind::None: break;
  }
  throw std::domain_error("cannot apply attack kind none");
}

std::vector<Waveform> apply_to_dataset(std::span<const Waveform> windows, const AttackSpec& spec,
                                       const ChannelScales& scales) {
  std::vector<Waveform> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    AttackSpec local = spec;
    local.seed = derive_seed(spec.seed, w.window_id);
    out.push_back(apply(w, local, scales));
  }
  return out;
}

}  // namespace fomads::attacks
