#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fomads/attacks.hpp"
#include "fomads/config.hpp"
#include "fomads/featlib.hpp"
#include "fomads/model.hpp"
#include "fomads/pmrat.hpp"
#include "fomads/sigsim.hpp"

// Dataset persistence, stratified splitting, evaluation reports and the
// alpha x L sensitivity sweep. The CLI in tools/ is a thin layer over this.

namespace fomads::harness {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct PipelineConfig {
  sigsim::ScenarioConfig scenario;
  attacks::AttackSettings attacks;
  featlib::FeatureConfig features;
  pmrat::TrainConfig train;
  std::size_t n_normal = 800;
  std::size_t n_per_fault = 200;
  double train_frac = 0.8;
  std::uint64_t seed = 42;
};

/// Builds every sub-config from one key-value set and rejects unknown keys.
PipelineConfig pipeline_config_from(const KeyValues& kv);

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

/// `window_id,sample_idx,V,P,Q,class_id,attack_kind`, one row per sample.
void write_dataset_csv(std::ostream& out, std::span<const Waveform> windows);
void write_dataset_csv(const std::filesystem::path& path, std::span<const Waveform> windows);
/// Throws DataError on malformed rows or inconsistent window labels.
std::vector<Waveform> read_dataset_csv(std::istream& in, double sample_rate = kDefaultSampleRate);
std::vector<Waveform> read_dataset_csv(const std::filesystem::path& path,
                                       double sample_rate = kDefaultSampleRate);

/// `window_id,f_0,...,f_{D-1},class_id,attack_kind`.
void write_features_csv(const std::filesystem::path& path, std::span<const Waveform> windows,
                        std::span<const featlib::FeatureVector> features);

// ---------------------------------------------------------------------------
// Split
// ---------------------------------------------------------------------------

struct Split {
  std::vector<std::size_t> train;  // indices into the dataset, ascending
  std::vector<std::size_t> test;
};

/// Per class, a seeded shuffle sends round(train_frac * n) windows to train.
Split stratified_split(std::span<const Waveform> windows, double train_frac, std::uint64_t seed);

std::vector<Waveform> subset(std::span<const Waveform> windows, std::span<const std::size_t> idx);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Conditions in report column order.
inline constexpr std::array<AttackKind, 5> kConditions = {
    AttackKind::None, AttackKind::Bias, AttackKind::Noise, AttackKind::Replacement, AttackKind::Replay};

std::string condition_name(AttackKind kind);

struct ConditionReport {
  AttackKind condition = AttackKind::None;
  std::size_t n = 0;
  double overall_acc = 0.0;
  double inverter_acc = 0.0;
  /// Over fault samples routed to their true inverter; 0 when there are none.
  double switch_acc = 0.0;
  std::size_t switch_n = 0;
  /// Exact-class accuracy over every fault sample, regardless of routing.
  double switch_acc_all = 0.0;
  /// Errors whose true and predicted labels are both faults on the same
  /// inverter or on neighbouring switch indices, over all errors.
  double adjacency_error_frac = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][pred], 25 x 25
};

struct EvalReport {
  std::vector<ConditionReport> conditions;

  const ConditionReport& at(AttackKind kind) const;
  friend bool operator==(const EvalReport&, const EvalReport&);
};

/// Builds one condition report from true/predicted class ids.
ConditionReport score_condition(AttackKind condition, std::span<const int> truth, std::span<const int> predicted);

/// Predicted class id for one normalized feature vector.
using Predictor = std::function<int(std::span<const double>)>;

/// Attacks the test windows per condition, extracts and normalizes
/// features, and scores `predict`.
EvalReport evaluate(const Predictor& predict, std::span<const Waveform> test_windows,
                    const featlib::FeatureConfig& features, const featlib::Normalizer& normalizer,
                    const attacks::AttackSettings& attacks, std::span<const AttackKind> conditions = kConditions);

EvalReport evaluate(const model::HierarchicalModel& model, std::span<const Waveform> test_windows,
                    const featlib::FeatureConfig& features, const featlib::Normalizer& normalizer,
                    const attacks::AttackSettings& attacks, std::span<const AttackKind> conditions = kConditions);

/// Evaluates pre-attacked windows (one dataset per condition).
ConditionReport evaluate_windows(const Predictor& predict, AttackKind condition, std::span<const Waveform> windows,
                                 const featlib::FeatureConfig& features, const featlib::Normalizer& normalizer);

/// `condition,n,overall_acc,inverter_acc,switch_acc,switch_acc_all,adjacency_error_frac`.
void write_report_csv(std::ostream& out, const EvalReport& report);
/// `condition,true_class,p_0,...,p_24`.
void write_confusion_csv(std::ostream& out, const EvalReport& report);
/// Human-readable table: rows overall/inverter/switch, one column per condition.
void print_report_table(std::ostream& out, const EvalReport& report);

// ---------------------------------------------------------------------------
// End-to-end
// ---------------------------------------------------------------------------

struct PipelineResult {
  pmrat::TrainResult training;
  EvalReport report;
  Split split;
};

/// generate -> split -> train -> evaluate with the configured seeds.
PipelineResult run_pipeline(const PipelineConfig& config);

// ---------------------------------------------------------------------------
// Sensitivity sweep
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMaxWindowLen = 2000;

struct SweepConfig {
  std::vector<double> alphas = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<std::size_t> lengths = {100, 200, 300, 400, 500, 600};
  int epochs = 10;
  std::size_t threads = 0;  // 0 selects hardware concurrency
};

struct SweepCell {
  double alpha = 0.0;
  std::size_t window_len = 0;
  double val_acc = 0.0;
};

/// One reduced clean-data training per (alpha, L) cell. Datasets are
/// regenerated per L with a seed derived from (config.seed, L), so cells
/// sharing L see the same windows. Throws std::domain_error for L outside
/// [2 * kernel_len, kMaxWindowLen] or alpha outside (0, 1].
std::vector<SweepCell> run_sweep(const PipelineConfig& base, const SweepConfig& sweep);

/// 1-based rank of `cell` (1 + number of cells with strictly higher accuracy).
std::size_t rank_of(std::span<const SweepCell> cells, double alpha, std::size_t window_len);

void write_sweep_csv(std::ostream& out, std::span<const SweepCell> cells);

}  // namespace fomads::harness
