#include "fomads/featlib.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fomads/errors.hpp"

namespace fomads::featlib {

FeatureConfig feature_config_from(const KeyValues& kv) {
  FeatureConfig c;
  c.alpha = kv.get_double("feat.alpha", c.alpha);
  c.beta = kv.get_double("feat.beta", c.beta);
  const auto k = kv.get_int("feat.kernel_len", static_cast<long long>(c.kernel_len));
  if (k < 5 || k > 20) throw ConfigError("feat.kernel_len must lie in [5, 20]");
  c.kernel_len = static_cast<std::size_t>(k);
  c.fractional = kv.get_bool("feat.fractional", c.fractional);
  c.clip = kv.get_double("feat.clip", c.clip);
  if (!(c.clip >= 0)) throw ConfigError("feat.clip must be non-negative");
  if (!(c.alpha > 0 && c.alpha <= 1)) throw ConfigError("feat.alpha must lie in (0, 1]");
  if (!(c.beta > 0 && c.beta < 1)) throw ConfigError("feat.beta must lie in (0, 1)");
  return c;
}

std::array<double, kStatsPerSeries> summarize(std::span<const double> s) {
  const auto n = static_cast<double>(s.size());
  double sum = 0.0;
  double sum_sq = 0.0;
  double max_abs = 0.0;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    sum += s[i];
    sum_sq += s[i] * s[i];
    if (std::abs(s[i]) > max_abs) {
      max_abs = std::abs(s[i]);
      arg = i;
    }
  }
  const double mean = sum / n;
  double var = 0.0;
  for (double x : s) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / n), max_abs, std::sqrt(sum_sq / n), static_cast<double>(arg) / n};
}

FeatureExtractor::FeatureExtractor(const FeatureConfig& config, double sample_rate)
    : config_(config),
      sample_rate_(sample_rate),
      caputo_(fracdiff::OperatorKind::Caputo, config.alpha, config.kernel_len, 1.0 / sample_rate),
      gl_(fracdiff::OperatorKind::GL, config.beta, config.kernel_len, 1.0 / sample_rate) {}

FeatureVector FeatureExtractor::extract(const Waveform& w) const {
  for (int c = 0; c < 3; ++c) {
    for (double x : w.channel(c)) {
      if (!std::isfinite(x)) {
        throw DataError("window " + std::to_string(w.window_id) + " contains a non-finite sample");
      }
    }
  }
  if (w.size() < 2) throw std::domain_error("feature extraction needs at least 2 samples");

  FeatureVector f;
  f.schema_id = config_.schema_id();
  f.values.reserve(config_.dim());
  const auto push = [&](std::span<const double> series) {
    const auto stats = summarize(series);
    f.values.insert(f.values.end(), stats.begin(), stats.end());
  };
  if (config_.fractional) {
    for (int c = 0; c < 3; ++c) push(caputo_.apply(w.channel(c)));
    for (int c = 0; c < 3; ++c) push(gl_.apply(w.channel(c)));
  } else {
    for (int c = 0; c < 3; ++c) push(w.channel(c));
  }
  return f;
}

std::vector<FeatureVector> FeatureExtractor::extract_all(std::span<const Waveform> windows) const {
  std::vector<FeatureVector> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(extract(w));
  return out;
}

FeatureVector extract_features(const Waveform& w, double alpha, double beta, std::size_t kernel_len) {
  FeatureConfig cfg;
  cfg.alpha = alpha;
  cfg.beta = beta;
  cfg.kernel_len = kernel_len;
  return FeatureExtractor(cfg, w.sample_rate).extract(w);
}

Normalizer::Normalizer(int schema_id, std::vector<double> mean, std::vector<double> stddev)
    : schema_id_(schema_id), mean_(std::move(mean)), std_(std::move(stddev)) {
  if (mean_.size() != std_.size()) throw std::domain_error("normalizer mean/std size mismatch");
  for (double& s : std_) s = std::max(s, kStdFloor);
}

Normalizer Normalizer::fit(std::span<const FeatureVector> features) {
  if (features.size() < 2) throw std::domain_error("normalizer needs at least 2 feature vectors");
  const std::size_t dim = features.front().size();
  const int schema = features.front().schema_id;
  std::vector<double> mean(dim, 0.0);
  std::vector<double> var(dim, 0.0);
  for (const auto& f : features) {
    if (f.size() != dim || f.schema_id != schema) {
      throw std::domain_error("normalizer inputs must share one schema");
    }
    for (std::size_t d = 0; d < dim; ++d) mean[d] += f.values[d];
  }
  const auto n = static_cast<double>(features.size());
  for (double& m : mean) m /= n;
  for (const auto& f : features) {
    for (std::size_t d = 0; d < dim; ++d) var[d] += (f.values[d] - mean[d]) * (f.values[d] - mean[d]);
  }
  for (double& v : var) v = std::sqrt(v / n);
  return Normalizer(schema, std::move(mean), std::move(var));
}

void Normalizer::check(const FeatureVector& f) const {
  if (f.schema_id != schema_id_) {
    throw std::domain_error("feature schema " + std::to_string(f.schema_id) +
                            " does not match normalizer schema " + std::to_string(schema_id_));
  }
  if (f.size() != mean_.size()) throw std::domain_error("feature dimension mismatch");
}

FeatureVector Normalizer::apply(const FeatureVector& f) const {
  check(f);
  FeatureVector out = f;
  for (std::size_t d = 0; d < out.size(); ++d) out.values[d] = (f.values[d] - mean_[d]) / std_[d];
  return out;
}

FeatureVector Normalizer::unapply(const FeatureVector& f) const {
  check(f);
  FeatureVector out = f;
  for (std::size_t d = 0; d < out.size(); ++d) out.values[d] = f.values[d] * std_[d] + mean_[d];
  return out;
}

FeatureVector clip_features(FeatureVector f, double limit) {
  if (limit <= 0) return f;
  for (double& x : f.values) x = std::clamp(x, -limit, limit);
  return f;
}

void Normalizer::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write normalizer to " + path.string());
  out << "schema_id " << schema_id_ << '\n' << std::setprecision(17);
  for (std::size_t d = 0; d < mean_.size(); ++d) out << d << ',' << mean_[d] << ',' << std_[d] << '\n';
}

Normalizer Normalizer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open normalizer file " + path.string());
  std::string tag;
  int schema = 0;
  if (!(in >> tag >> schema) || tag != "schema_id") {
    throw DataError(path.string() + ": expected `schema_id <id>` header");
  }
  std::vector<double> mean;
  std::vector<double> stddev;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::size_t dim = 0;
    double m = 0;
    double s = 0;
    char c1 = 0;
    char c2 = 0;
    if (!(row >> dim >> c1 >> m >> c2 >> s) || c1 != ',' || c2 != ',' || dim != mean.size()) {
      throw DataError(path.string() + ": malformed row `" + line + "`");
    }
    mean.push_back(m);
    stddev.push_back(s);
  }
  return Normalizer(schema, std::move(mean), std::move(stddev));
}

}  // namespace fomads::featlib
