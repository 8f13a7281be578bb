#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "fomads/config.hpp"
#include "fomads/fracdiff.hpp"
#include "fomads/waveform.hpp"

// Per-window feature vectors built from the dual fractional-derivative
// series of V, P and Q.
//
// Fractional layout (schema 1, D = 30): series
//   CaputoV, CaputoP, CaputoQ, GLV, GLP, GLQ
// each summarised by
//   mean, std, max|x|, RMS, argmax|x| / L
// stored series-major (feature index = series * 5 + stat).
//
// Raw layout (schema 2, D = 15): the same five statistics over the raw V, P,
// Q channels. Used by the ablation without fractional features.

namespace fomads::featlib {

inline constexpr int kStatsPerSeries = 5;
inline constexpr int kSchemaFractional = 1;
inline constexpr int kSchemaRaw = 2;

struct FeatureConfig {
  double alpha = 0.7;  // Caputo order
  double beta = 0.3;   // GL order
  std::size_t kernel_len = 10;
  bool fractional = true;
  // Normalized values are clamped to [-clip, clip] before the classifier;
  // dimensions that are constant on clean data otherwise reach ~1e9 under
  // attack and saturate every hidden unit. 0 disables.
  double clip = 5.0;

  int schema_id() const { return fractional ? kSchemaFractional : kSchemaRaw; }
  std::size_t dim() const { return fractional ? 30 : 15; }
};

/// Reads `feat.alpha`, `feat.beta`, `feat.kernel_len`, `feat.fractional`, `feat.clip`.
/// Throws ConfigError when kernel_len falls outside [5, 20].
FeatureConfig feature_config_from(const KeyValues& kv);

struct FeatureVector {
  std::vector<double> values;
  int schema_id = kSchemaFractional;

  std::size_t size() const { return values.size(); }
};

/// mean, population std, max|x|, RMS, first argmax|x| / n.
std::array<double, kStatsPerSeries> summarize(std::span<const double> series);

/// Holds the Caputo and GL kernels for one configuration and sample rate.
class FeatureExtractor {
 public:
  FeatureExtractor(const FeatureConfig& config, double sample_rate);

  const FeatureConfig& config() const { return config_; }

  /// Throws DataError naming the window id when any sample is non-finite,
  /// std::domain_error when the window has fewer than 2 samples.
  FeatureVector extract(const Waveform& w) const;
  std::vector<FeatureVector> extract_all(std::span<const Waveform> windows) const;

 private:
  FeatureConfig config_;
  double sample_rate_;
  fracdiff::FractionalKernel caputo_;
  fracdiff::FractionalKernel gl_;
};

FeatureVector extract_features(const Waveform& w, double alpha, double beta, std::size_t kernel_len);

/// Per-dimension affine standardizer fitted on training features.
/// Uses the population std, floored at kStdFloor.
class Normalizer {
 public:
  static constexpr double kStdFloor = 1e-9;

  Normalizer() = default;
  Normalizer(int schema_id, std::vector<double> mean, std::vector<double> stddev);

  /// Throws std::domain_error on fewer than 2 vectors or mixed schemas.
  static Normalizer fit(std::span<const FeatureVector> features);

  /// Throw std::domain_error on a schema or dimension mismatch.
  FeatureVector apply(const FeatureVector& f) const;
  FeatureVector unapply(const FeatureVector& f) const;

  int schema_id() const { return schema_id_; }
  std::span<const double> mean() const { return mean_; }
  std::span<const double> stddev() const { return std_; }

  /// Text format: `schema_id <id>` line, then `dim,mean,std` rows.
  void save(const std::filesystem::path& path) const;
  static Normalizer load(const std::filesystem::path& path);

 private:
  void check(const FeatureVector& f) const;

  int schema_id_ = kSchemaFractional;
  std::vector<double> mean_;
  std::vector<double> std_;
};

/// Clamps every value to [-limit, limit]; limit <= 0 returns f unchanged.
FeatureVector clip_features(FeatureVector f, double limit);

}  // namespace fomads::featlib
