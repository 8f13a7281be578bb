#include "fomads/pmrat.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <stdexcept>

#include "fomads/errors.hpp"
#include "fomads/rng.hpp"

namespace fomads::pmrat {
namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Eigen::MatrixXd gather(const Eigen::MatrixXd& pool, std::span<const std::size_t> cols) {
  Eigen::MatrixXd out(pool.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) = pool.col(static_cast<Eigen::Index>(cols[i]));
  }
  return out;
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

double stage_difficulty(const CurriculumStage& stage) {
  return stage.attack ? stage.attack->difficulty : 0.0;
}

// One trainable net with its own optimizer, OHEM selection and replay buffer.
struct Learner {
  model::DenseNet* net;
  std::function<int(int)> target;  // class id -> net label, -1 when the sample does not apply
  model::SgdMomentum optimizer;
  ReplayBuffer buffer;
  std::uint64_t stream;
  std::string name;
};

}  // namespace

TrainConfig train_config_from(const KeyValues& kv) {
  TrainConfig c;
  c.pgd_steps = static_cast<int>(kv.get_int("train.pgd_steps", c.pgd_steps));
  c.pgd_eps = kv.get_double("train.pgd_eps", c.pgd_eps);
  c.pgd_step_size = kv.get_double("train.pgd_step_size", c.pgd_step_size);
  c.eps_start = kv.get_double("train.eps_start", c.eps_start);
  c.eps_end = kv.get_double("train.eps_end", c.eps_end);
  c.ohem_frac = kv.get_double("train.ohem_frac", c.ohem_frac);
  c.lambda_beta = kv.get_double("train.lambda_beta", c.lambda_beta);
  c.max_difficulty = kv.get_double("train.max_difficulty", c.max_difficulty);
  c.replay_frac = kv.get_double("train.replay_frac", c.replay_frac);
  c.buffer_capacity = static_cast<std::size_t>(
      kv.get_int("train.buffer_capacity", static_cast<long long>(c.buffer_capacity)));
  c.insert_frac = kv.get_double("train.insert_frac", c.insert_frac);
  c.epochs_per_stage = static_cast<int>(kv.get_int("train.epochs_per_stage", c.epochs_per_stage));
  c.batch_size = static_cast<std::size_t>(kv.get_int("train.batch_size", static_cast<long long>(c.batch_size)));
  c.learn_rate = kv.get_double("train.learn_rate", c.learn_rate);
  c.momentum = kv.get_double("train.momentum", c.momentum);
  c.hidden_dim = static_cast<std::size_t>(kv.get_int("train.hidden_dim", static_cast<long long>(c.hidden_dim)));
  c.gate_threshold = kv.get_double("train.gate_threshold", c.gate_threshold);
  c.seed = static_cast<std::uint64_t>(kv.get_int("train.seed", static_cast<long long>(c.seed)));
  if (kv.contains("train.stages")) c.stages = parse_stages(kv.get_string("train.stages", ""));
  c.ohem = kv.get_bool("train.ohem", c.ohem);
  c.flat = kv.get_bool("train.flat", c.flat);

  if (c.pgd_steps < 1) throw ConfigError("train.pgd_steps must be >= 1");
  if (!(c.eps_start > 0 && c.eps_start <= c.eps_end)) throw ConfigError("need 0 < eps_start <= eps_end");
  if (!(c.pgd_eps > 0)) throw ConfigError("train.pgd_eps must be positive");
  if (!(c.ohem_frac > 0 && c.ohem_frac <= 1)) throw ConfigError("train.ohem_frac must lie in (0, 1]");
  if (!(c.lambda_beta >= 0)) throw ConfigError("train.lambda_beta must be non-negative");
  if (!(c.max_difficulty > 0)) throw ConfigError("train.max_difficulty must be positive");
  if (!(c.replay_frac >= 0 && c.replay_frac < 1)) throw ConfigError("train.replay_frac must lie in [0, 1)");
  if (!(c.insert_frac > 0 && c.insert_frac <= 1)) throw ConfigError("train.insert_frac must lie in (0, 1]");
  if (c.epochs_per_stage < 1) throw ConfigError("train.epochs_per_stage must be >= 1");
  if (c.batch_size < 2) throw ConfigError("train.batch_size must be >= 2");
  if (!(c.learn_rate > 0)) throw ConfigError("train.learn_rate must be positive");
  if (!(c.momentum >= 0 && c.momentum < 1)) throw ConfigError("train.momentum must lie in [0, 1)");
  if (c.hidden_dim < 1) throw ConfigError("train.hidden_dim must be >= 1");
  if (!(c.gate_threshold > 0 && c.gate_threshold < 1)) throw ConfigError("train.gate_threshold must lie in (0, 1)");
  return c;
}

std::vector<AttackKind> parse_stages(std::string_view list) {
  std::vector<AttackKind> out;
  while (!list.empty()) {
    const auto comma = list.find(',');
    std::string_view item = list.substr(0, comma);
    list = comma == std::string_view::npos ? std::string_view{} : list.substr(comma + 1);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (item.empty()) continue;
    const AttackKind kind = item == "normal" ? AttackKind::None : [&] {
      try {
        return parse_attack_kind(item);
      } catch (const std::domain_error& e) {
        throw ConfigError(e.what());
      }
    }();
    if (!out.empty() && static_cast<int>(kind) <= static_cast<int>(out.back())) {
      throw ConfigError("stages must follow normal,bias,noise,replacement,replay order without repeats");
    }
    out.push_back(kind);
  }
  if (out.empty()) throw ConfigError("stage list is empty");
  return out;
}

std::vector<CurriculumStage> build_curriculum(const TrainConfig& config,
                                              const attacks::AttackSettings& attacks) {
  std::vector<CurriculumStage> stages;
  for (AttackKind kind : config.stages) {
    CurriculumStage s;
    s.index = static_cast<int>(kind);
    s.name = kind == AttackKind::None ? "normal" : std::string(to_string(kind));
    if (kind != AttackKind::None) s.attack = attacks.spec(kind);
    s.epochs = config.epochs_per_stage;
    stages.push_back(std::move(s));
  }
  return stages;
}

Eigen::MatrixXd pgd_attack(const model::DenseNet& net, const Eigen::MatrixXd& x,
                           std::span<const int> labels, double eps, int steps, double step_size) {
  if (eps < 0) throw std::domain_error("PGD eps must be non-negative");
  if (steps < 1) throw std::domain_error("PGD needs at least one step");
  if (eps == 0.0) return x;
  const std::vector<double> ones(labels.size(), 1.0);
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  for (int k = 0; k < steps; ++k) {
    const auto r = model::loss_and_grads(net, x + delta, labels, ones);
    if (!r.input_grads.allFinite()) throw TrainingError("non-finite input gradient during PGD");
    delta += step_size * r.input_grads.unaryExpr(&sign);
    delta = delta.cwiseMax(-eps).cwiseMin(eps);
  }
  Eigen::MatrixXd out = x + delta;
  // x + delta can round past the ball by an ulp; pull such entries back.
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    double& o = out.data()[i];
    const double xi = x.data()[i];
    while (std::abs(o - xi) > eps) o = std::nextafter(o, xi);
  }
  return out;
}

double adaptive_lambda(double attack_difficulty, double max_difficulty, double beta) {
  if (!(max_difficulty > 0)) throw std::domain_error("max_difficulty must be positive");
  return std::clamp(beta * attack_difficulty / max_difficulty, 0.0, beta);
}

std::vector<std::size_t> ohem_select(std::span<const double> losses, double frac) {
  if (losses.empty()) throw std::domain_error("OHEM needs at least one loss");
  if (!(frac > 0 && frac <= 1)) throw std::domain_error("OHEM fraction must lie in (0, 1]");
  const auto n = losses.size();
  // Guard against 0.2 * 5 evaluating to 1.0000000000000002.
  const auto k = std::min(n, static_cast<std::size_t>(std::ceil(frac * static_cast<double>(n) - 1e-9)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return losses[a] > losses[b]; });
  idx.resize(std::max<std::size_t>(k, 1));
  std::sort(idx.begin(), idx.end());
  return idx;
}

model::LossResult total_loss(const model::DenseNet& net, const Eigen::MatrixXd& x,
                             std::span<const int> labels, std::span<const std::size_t> hard_set,
                             double lambda) {
  const auto n = static_cast<std::size_t>(x.cols());
  std::vector<double> weights(n, 1.0);
  if (!hard_set.empty() && lambda != 0.0) {
    const double extra = lambda * static_cast<double>(n) / static_cast<double>(hard_set.size());
    for (std::size_t i : hard_set) {
      if (i >= n) throw std::domain_error("hard-set index outside the batch");
      weights[i] += extra;
    }
  }
  return model::loss_and_grads(net, x, labels, weights);
}

double epsilon_schedule(int epoch, int total_epochs, double eps_start, double eps_end) {
  if (total_epochs < 1) throw std::domain_error("total_epochs must be >= 1");
  if (total_epochs == 1) return eps_start;
  const int e = std::clamp(epoch, 0, total_epochs - 1);
  if (e == total_epochs - 1) return eps_end;
  const double t = static_cast<double>(e) / static_cast<double>(total_epochs - 1);
  return eps_start + (eps_end - eps_start) * t;
}

namespace {
bool heap_cmp(const ReplayEntry& a, const ReplayEntry& b) { return a.loss > b.loss; }
}  // namespace

bool ReplayBuffer::insert(ReplayEntry entry) {
  if (capacity_ == 0) return false;
  if (heap_.size() < capacity_) {
    heap_.push_back(std::move(entry));
    std::push_heap(heap_.begin(), heap_.end(), heap_cmp);
    return true;
  }
  if (!(entry.loss > heap_.front().loss)) return false;
  std::pop_heap(heap_.begin(), heap_.end(), heap_cmp);
  heap_.back() = std::move(entry);
  std::push_heap(heap_.begin(), heap_.end(), heap_cmp);
  return true;
}

double ReplayBuffer::min_loss() const {
  if (heap_.empty()) throw std::domain_error("replay buffer is empty");
  return heap_.front().loss;
}

std::vector<ReplayEntry> replay_sample(const ReplayBuffer& buffer, std::size_t k, std::uint64_t seed) {
  const auto entries = buffer.entries();
  if (k >= entries.size()) return {entries.begin(), entries.end()};
  std::vector<std::size_t> idx(entries.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  // Partial Fisher-Yates: the first k slots end up a uniform sample.
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  std::vector<ReplayEntry> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(entries[idx[i]]);
  return out;
}

TrainResult train_curriculum(std::span<const Waveform> train_windows,
                             const featlib::FeatureConfig& features,
                             const attacks::AttackSettings& attack_settings, const TrainConfig& config) {
  if (train_windows.size() < 2) throw std::domain_error("need at least 2 training windows");
  const auto curriculum = build_curriculum(config, attack_settings);
  const featlib::FeatureExtractor extractor(features, train_windows.front().sample_rate);

  TrainResult result;
  const auto clean = extractor.extract_all(train_windows);
  result.normalizer = featlib::Normalizer::fit(clean);
  const auto D = static_cast<Eigen::Index>(features.dim());

  std::vector<int> clean_class;
  for (const auto& w : train_windows) clean_class.push_back(w.label.class_id);
  const auto to_matrix = [&](const std::vector<featlib::FeatureVector>& fv) {
    Eigen::MatrixXd m(D, static_cast<Eigen::Index>(fv.size()));
    for (std::size_t i = 0; i < fv.size(); ++i) {
      const auto nf = featlib::clip_features(result.normalizer.apply(fv[i]), features.clip);
      m.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(nf.values.data(), D);
    }
    return m;
  };
  const Eigen::MatrixXd clean_x = to_matrix(clean);

  auto& model = result.model;
  model = model::HierarchicalModel::make(features.dim(), config.hidden_dim, config.gate_threshold, config.seed);
  model.flat = config.flat;

  std::vector<Learner> learners;
  const auto add = [&](model::DenseNet* net, std::function<int(int)> target, std::string name) {
    learners.push_back(Learner{net, std::move(target), model::SgdMomentum(config.momentum),
                               ReplayBuffer(config.buffer_capacity), learners.size(), std::move(name)});
  };
  if (!config.flat) {
    add(&model.stage1, [](int c) { return inverter_of(c); }, "stage1");
    for (int inv = 1; inv <= model.n_inverters(); ++inv) {
      add(&model.stage2[static_cast<std::size_t>(inv - 1)],
          [inv](int c) { return c != 0 && inverter_of(c) == inv ? switch_of(c) - 1 : -1; },
          "stage2_" + std::to_string(inv));
    }
  }
  add(&model.fallback, [](int c) { return c; }, "fallback");
  Learner& primary = learners.front();

  const auto step_for = [&](double eps) {
    return config.pgd_step_size > 0 ? config.pgd_step_size : 2.5 * eps / config.pgd_steps;
  };

  std::vector<int> primary_clean_labels;
  for (int c : clean_class) primary_clean_labels.push_back(primary.target(c));

  Eigen::MatrixXd pool_x(D, 0);
  std::vector<int> pool_class;
  int total_epochs = 0;
  for (const auto& s : curriculum) total_epochs += s.epochs;

  int global_epoch = 0;
  for (const auto& stage : curriculum) {
    // Grow the cumulative pool with this stage's data.
    const Eigen::MatrixXd stage_x =
        stage.attack ? to_matrix(extractor.extract_all(
                           attacks::apply_to_dataset(train_windows, *stage.attack, attack_settings.scales)))
                     : clean_x;
    const Eigen::Index old_cols = pool_x.cols();
    pool_x.conservativeResize(D, old_cols + stage_x.cols());
    pool_x.rightCols(stage_x.cols()) = stage_x;
    pool_class.insert(pool_class.end(), clean_class.begin(), clean_class.end());
    result.pool_sizes.push_back(pool_class.size());

    const double lambda =
        config.ohem ? adaptive_lambda(stage_difficulty(stage), config.max_difficulty, config.lambda_beta) : 0.0;

    for (int epoch = 0; epoch < stage.epochs; ++epoch, ++global_epoch) {
      const double eps = epsilon_schedule(global_epoch, total_epochs, config.eps_start, config.eps_end);
      const double step_size = step_for(eps);
      double primary_loss = 0.0;
      std::size_t primary_batches = 0;

      for (auto& learner : learners) {
        std::vector<std::size_t> idx;
        std::vector<int> targets(pool_class.size(), -1);
        for (std::size_t i = 0; i < pool_class.size(); ++i) {
          targets[i] = learner.target(pool_class[i]);
          if (targets[i] >= 0) idx.push_back(i);
        }
        Rng rng(derive_seed(config.seed, 100 + learner.stream, static_cast<std::uint64_t>(global_epoch)));
        shuffle(idx, rng);

        const bool replay_on = stage.index > 0 && !learner.buffer.empty();
        const std::size_t replay_n =
            replay_on ? static_cast<std::size_t>(std::lround(config.replay_frac * static_cast<double>(config.batch_size)))
                      : 0;
        const std::size_t fresh_n = config.batch_size - replay_n;

        std::size_t batch_no = 0;
        for (std::size_t start = 0; start < idx.size(); start += fresh_n, ++batch_no) {
          const std::size_t m = std::min(fresh_n, idx.size() - start);
          const std::span<const std::size_t> cols(idx.data() + start, m);
          const Eigen::MatrixXd xf = gather(pool_x, cols);
          std::vector<int> yf(m);
          for (std::size_t i = 0; i < m; ++i) yf[i] = targets[cols[i]];

          const Eigen::MatrixXd xa = pgd_attack(*learner.net, xf, yf, eps, config.pgd_steps, step_size);
          result.max_perturbation_excess =
              std::max(result.max_perturbation_excess, (xa - xf).cwiseAbs().maxCoeff() - eps);

          std::vector<ReplayEntry> replayed;
          if (replay_n > 0) {
            replayed = replay_sample(learner.buffer, replay_n,
                                     derive_seed(config.seed, 5000 + learner.stream,
                                                 static_cast<std::uint64_t>(global_epoch) * 100000 + batch_no));
          }

          const auto n = static_cast<Eigen::Index>(2 * m + replayed.size());
          Eigen::MatrixXd x(D, n);
          x.leftCols(static_cast<Eigen::Index>(m)) = xf;
          x.middleCols(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m)) = xa;
          std::vector<int> y = yf;
          y.insert(y.end(), yf.begin(), yf.end());
          for (std::size_t i = 0; i < replayed.size(); ++i) {
            x.col(static_cast<Eigen::Index>(2 * m + i)) = replayed[i].x;
            y.push_back(replayed[i].label);
          }

          const auto losses = model::per_sample_loss(*learner.net, x, y);
          const auto hard = ohem_select(losses, config.ohem_frac);
          const auto r = total_loss(*learner.net, x, y, hard, lambda);
          if (!std::isfinite(r.loss)) {
            throw TrainingError("non-finite loss in " + learner.name + " at stage " + stage.name + ", epoch " +
                                std::to_string(epoch) + ", batch " + std::to_string(batch_no));
          }
          try {
            learner.optimizer.step(*learner.net, r.grads, config.learn_rate);
          } catch (const TrainingError& e) {
            throw TrainingError(std::string(e.what()) + " in " + learner.name + " at stage " + stage.name +
                                ", epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_no));
          }

          // Adversarial samples within the batch top insert_frac by loss enter the buffer.
          std::vector<double> sorted = r.per_sample;
          const auto k_ins = std::max<std::size_t>(
              1, static_cast<std::size_t>(std::ceil(config.insert_frac * static_cast<double>(sorted.size()))));
          std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k_ins - 1), sorted.end(),
                           std::greater<>());
          const double threshold = sorted[k_ins - 1];
          for (std::size_t i = 0; i < m; ++i) {
            const double loss = r.per_sample[m + i];
            if (loss >= threshold) {
              learner.buffer.insert(ReplayEntry{xa.col(static_cast<Eigen::Index>(i)), yf[i], loss, stage.index});
            }
          }
          if (&learner == &primary) {
            primary_loss += r.loss;
            ++primary_batches;
          }
        }
      }

      MetricsRow row;
      row.stage = stage.index;
      row.epoch = epoch;
      row.epsilon = eps;
      std::size_t hits = 0;
      for (Eigen::Index i = 0; i < clean_x.cols(); ++i) {
        const auto p = model.predict(std::span<const double>(clean_x.col(i).data(), static_cast<std::size_t>(D)));
        if (p.label.class_id == clean_class[static_cast<std::size_t>(i)]) ++hits;
      }
      row.clean_acc = static_cast<double>(hits) / static_cast<double>(clean_x.cols());
      const Eigen::MatrixXd adv =
          pgd_attack(*primary.net, clean_x, primary_clean_labels, config.pgd_eps, config.pgd_steps,
                     step_for(config.pgd_eps));
      const Eigen::MatrixXd probs = primary.net->forward_batch(adv);
      std::size_t adv_hits = 0;
      for (Eigen::Index i = 0; i < probs.cols(); ++i) {
        Eigen::Index arg = 0;
        probs.col(i).maxCoeff(&arg);
        if (arg == primary_clean_labels[static_cast<std::size_t>(i)]) ++adv_hits;
      }
      row.adv_acc = static_cast<double>(adv_hits) / static_cast<double>(probs.cols());
      for (const auto& l : learners) row.buffer_size += l.buffer.size();
      row.mean_loss = primary_batches > 0 ? primary_loss / static_cast<double>(primary_batches) : 0.0;
      result.metrics.push_back(row);
    }
    std::size_t buffered = 0;
    for (const auto& l : learners) buffered += l.buffer.size();
    result.buffer_sizes.push_back(buffered);
  }
  return result;
}

void write_metrics_csv(const std::string& path, std::span<const MetricsRow> rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write metrics to " + path);
  out << "stage,epoch,epsilon,clean_acc,adv_acc,buffer_size,mean_loss\n" << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.stage << ',' << r.epoch << ',' << r.epsilon << ',' << r.clean_acc << ',' << r.adv_acc << ','
        << r.buffer_size << ',' << r.mean_loss << '\n';
  }
}

}  // namespace fomads::pmrat
