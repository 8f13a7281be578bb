#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fomads/waveform.hpp"

// Single-hidden-layer dense classifiers with exact parameter and input
// gradients, and the gated inverter -> switch hierarchy built from them.

namespace fomads::model {

struct Gradients {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;
};

/// softmax(W2 tanh(W1 x + b1) + b2).
class DenseNet {
 public:
  DenseNet() = default;
  /// All parameters zero.
  DenseNet(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes);

  /// Weights and biases uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static DenseNet random(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes,
                         std::uint64_t seed);

  std::size_t input_dim() const { return static_cast<std::size_t>(w1.cols()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(w1.rows()); }
  std::size_t num_classes() const { return static_cast<std::size_t>(w2.rows()); }
  std::size_t parameter_count() const;

  /// Column-wise probabilities for a D x B input batch.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd logits_batch(const Eigen::MatrixXd& x) const;

  /// Throws std::domain_error when x.size() != input_dim().
  Eigen::VectorXd forward(std::span<const double> x) const;

  /// Flat parameter order: W1 (row-major), b1, W2 (row-major), b2.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> flat);

  /// In-place `params -= scale * grads`.
  void apply_update(const Gradients& g, double scale);

  Eigen::MatrixXd w1;  // H x D
  Eigen::VectorXd b1;  // H
  Eigen::MatrixXd w2;  // C x H
  Eigen::VectorXd b2;  // C
};

struct LossResult {
  double loss = 0.0;                 // (1/n) sum_i weight_i * CE_i
  std::vector<double> per_sample;    // unweighted CE_i
  Gradients grads;                   // d loss / d parameters
  Eigen::MatrixXd input_grads;       // D x n, d loss / d x_i
  std::size_t correct = 0;           // argmax hits
};

/// Weighted mean cross-entropy over the columns of `x` with exact gradients.
/// Throws std::domain_error on a label outside [0, C), a negative weight, or
/// mismatched lengths.
LossResult loss_and_grads(const DenseNet& net, const Eigen::MatrixXd& x, std::span<const int> labels,
                          std::span<const double> weights);

/// Per-sample cross-entropy only (no gradients).
std::vector<double> per_sample_loss(const DenseNet& net, const Eigen::MatrixXd& x,
                                    std::span<const int> labels);

/// One plain gradient-descent step on a copy of `net`.
/// Throws TrainingError when the loss or any gradient is non-finite.
DenseNet train_step(const DenseNet& net, const Eigen::MatrixXd& x, std::span<const int> labels,
                    std::span<const double> weights, double learn_rate);

/// SGD with classical momentum; velocity buffers are shaped on first use.
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum = 0.9) : momentum_(momentum) {}
  void step(DenseNet& net, const Gradients& g, double learn_rate);

 private:
  double momentum_;
  bool initialized_ = false;
  Gradients velocity_;
};

/// Routing taken by a hierarchical prediction.
enum class Route { Normal, Stage2, Fallback, Flat };

struct Prediction {
  ClassLabel label;
  double confidence = 0.0;
  Route route = Route::Normal;
};

/// Instrumentation for gating tests.
struct PredictCounters {
  std::size_t stage2_calls = 0;
  std::size_t fallback_calls = 0;
};

class HierarchicalModel {
 public:
  HierarchicalModel() = default;

  /// stage1: n_inverters + 1 classes; stage2[i]: 6 classes; fallback:
  /// 6 * n_inverters + 1 classes. Each net seeded from (seed, index).
  static HierarchicalModel make(std::size_t input_dim, std::size_t hidden_dim, double gate_threshold,
                                std::uint64_t seed, int n_inverters = kNumInverters);

  int n_inverters() const { return static_cast<int>(stage2.size()); }
  std::size_t input_dim() const { return fallback.input_dim(); }

  /// Flat mode answers from the fallback net only.
  Prediction predict(std::span<const double> x, PredictCounters* counters = nullptr) const;

  /// Widens stage1 and fallback by one inverter and appends a stage-2 net.
  /// Existing parameters keep their values; new rows start at zero.
  void add_inverter(std::uint64_t seed);

  /// Text format: `FOMADS-MODEL v1`, a `mode` line, a `gate_threshold`
  /// line, then one block per net: `net <name>`, a `dims D H C` line and
  /// the flat parameters with 17 significant digits.
  void save(const std::filesystem::path& path) const;
  /// Throws DataError on a malformed file.
  static HierarchicalModel load(const std::filesystem::path& path);

  DenseNet stage1;
  std::vector<DenseNet> stage2;
  DenseNet fallback;
  double gate_threshold = 0.6;
  bool flat = false;
};

}  // namespace fomads::model
