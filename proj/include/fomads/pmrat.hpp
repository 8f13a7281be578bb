#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fomads/attacks.hpp"
#include "fomads/config.hpp"
#include "fomads/featlib.hpp"
#include "fomads/model.hpp"
#include "fomads/waveform.hpp"

// Progressive memory-replay adversarial training.
//
// Stages run normal -> bias -> noise -> replacement -> replay. Each stage
// appends attacked copies of the clean training windows to a cumulative
// pool. Every batch mixes fresh pool samples, their PGD perturbations and
// (from stage 1 on) replayed high-loss adversarial samples; the loss is
// mean CE plus lambda times the mean CE over the OHEM-selected hard subset.
// Stage 1, every stage-2 net and the fallback net train with their own
// optimizer, OHEM selection and replay buffer.

namespace fomads::pmrat {

struct TrainConfig {
  int pgd_steps = 7;
  double pgd_eps = 0.1;          // budget used for the adversarial-accuracy metric
  double pgd_step_size = 0.0;    // <= 0 selects 2.5 * eps / steps
  double eps_start = 0.02;
  double eps_end = 0.15;
  double ohem_frac = 0.2;
  double lambda_beta = 0.5;
  double max_difficulty = 1.0;
  double replay_frac = 0.25;
  std::size_t buffer_capacity = 512;
  double insert_frac = 0.1;      // adversarial samples in the batch top-10% loss enter the buffer
  int epochs_per_stage = 20;
  std::size_t batch_size = 64;
  double learn_rate = 0.01;
  double momentum = 0.9;
  std::size_t hidden_dim = 64;
  double gate_threshold = 0.6;
  std::uint64_t seed = 1;
  std::vector<AttackKind> stages = {AttackKind::None, AttackKind::Bias, AttackKind::Noise,
                                    AttackKind::Replacement, AttackKind::Replay};
  bool ohem = true;   // false forces lambda = 0
  bool flat = false;  // train only the 25-class fallback net
};

/// Reads `train.*` keys. Throws ConfigError on invalid values.
TrainConfig train_config_from(const KeyValues& kv);

/// Parses a comma-separated stage list such as "normal,bias,noise".
/// Stages must appear in curriculum order without repeats.
std::vector<AttackKind> parse_stages(std::string_view list);

struct CurriculumStage {
  int index = 0;
  std::string name;
  std::optional<AttackSpec> attack;
  int epochs = 0;
};

std::vector<CurriculumStage> build_curriculum(const TrainConfig& config,
                                              const attacks::AttackSettings& attacks);

/// PGD on the columns of x: delta_{k+1} = clip(delta_k + step * sign(grad), -eps, eps),
/// delta_0 = 0, sign(0) = 0. eps = 0 returns x unchanged.
/// Throws std::domain_error for eps < 0 or steps < 1, TrainingError on
/// non-finite gradients.
Eigen::MatrixXd pgd_attack(const model::DenseNet& net, const Eigen::MatrixXd& x,
                           std::span<const int> labels, double eps, int steps, double step_size);

/// beta * difficulty / max_difficulty clamped to [0, beta].
/// Throws std::domain_error when max_difficulty <= 0.
double adaptive_lambda(double attack_difficulty, double max_difficulty, double beta);

/// Indices of the ceil(frac * n) largest losses, ties to the lower index,
/// returned in ascending index order.
std::vector<std::size_t> ohem_select(std::span<const double> losses, double frac);

/// Mean CE over the batch plus lambda * mean CE over `hard_set`.
model::LossResult total_loss(const model::DenseNet& net, const Eigen::MatrixXd& x,
                             std::span<const int> labels, std::span<const std::size_t> hard_set,
                             double lambda);

/// Linear from eps_start at epoch 0 to eps_end at epoch total_epochs - 1.
double epsilon_schedule(int epoch, int total_epochs, double eps_start, double eps_end);

struct ReplayEntry {
  Eigen::VectorXd x;
  int label = 0;  // target in the owning net's label space
  double loss = 0.0;
  int stage = 0;
};

/// Bounded keep-highest-loss store. Internally a min-heap on loss, so the
/// front entry is always the eviction candidate.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

  /// Returns true when the entry was stored. When full, the entry replaces
  /// the lowest-loss entry only if its loss is strictly higher.
  bool insert(ReplayEntry entry);

  std::size_t size() const { return heap_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return heap_.empty(); }
  /// Throws std::domain_error on an empty buffer.
  double min_loss() const;
  std::span<const ReplayEntry> entries() const { return heap_; }

 private:
  std::size_t capacity_;
  std::vector<ReplayEntry> heap_;
};

/// k entries drawn uniformly without replacement (all entries when k >= size).
std::vector<ReplayEntry> replay_sample(const ReplayBuffer& buffer, std::size_t k, std::uint64_t seed);

struct MetricsRow {
  int stage = 0;
  int epoch = 0;
  double epsilon = 0.0;
  double clean_acc = 0.0;  // full 25-class model on the clean training pool
  double adv_acc = 0.0;    // primary net alone (stage 1, or fallback when flat) under PGD at pgd_eps
  std::size_t buffer_size = 0;  // summed over every learner's buffer
  double mean_loss = 0.0;
};

struct TrainResult {
  model::HierarchicalModel model;
  featlib::Normalizer normalizer;
  std::vector<MetricsRow> metrics;
  std::vector<std::size_t> pool_sizes;    // cumulative pool size after each stage
  std::vector<std::size_t> buffer_sizes;  // total buffer entries after each stage
  double max_perturbation_excess = 0.0;   // max over batches of ||x_adv - x||_inf - eps(t)
};

/// Runs the whole curriculum on the training windows. The normalizer is
/// fitted on the clean training features only. Throws TrainingError naming
/// stage, epoch and batch on a non-finite loss.
TrainResult train_curriculum(std::span<const Waveform> train_windows,
                             const featlib::FeatureConfig& features,
                             const attacks::AttackSettings& attacks, const TrainConfig& config);

/// Writes `stage,epoch,epsilon,clean_acc,adv_acc,buffer_size,mean_loss`.
void write_metrics_csv(const std::string& path, std::span<const MetricsRow> rows);

}  // namespace fomads::pmrat
