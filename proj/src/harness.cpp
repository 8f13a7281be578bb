#include "fomads/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "fomads/errors.hpp"
#include "fomads/rng.hpp"

namespace fomads::harness {

PipelineConfig pipeline_config_from(const KeyValues& kv) {
  PipelineConfig c;
  c.scenario = sigsim::scenario_from(kv);
  c.attacks = attacks::attack_settings_from(kv, c.scenario);
  c.features = featlib::feature_config_from(kv);
  c.train = pmrat::train_config_from(kv);
  const auto nn = kv.get_int("data.n_normal", static_cast<long long>(c.n_normal));
  const auto npf = kv.get_int("data.n_per_fault", static_cast<long long>(c.n_per_fault));
  if (nn < 0 || npf < 0) throw ConfigError("dataset counts must be non-negative");
  c.n_normal = static_cast<std::size_t>(nn);
  c.n_per_fault = static_cast<std::size_t>(npf);
  c.train_frac = kv.get_double("data.train_frac", c.train_frac);
  if (!(c.train_frac > 0 && c.train_frac < 1)) throw ConfigError("data.train_frac must lie in (0, 1)");
  c.seed = static_cast<std::uint64_t>(kv.get_int("data.seed", static_cast<long long>(c.seed)));
  kv.reject_unused();
  return c;
}

// --- files -----------------------------------------------------------------

void write_dataset_csv(std::ostream& out, std::span<const Waveform> windows) {
  out << "window_id,sample_idx,V,P,Q,class_id,attack_kind\n";
  out << std::setprecision(17);
  for (const auto& w : windows) {
    const auto kind = to_string(w.attack_kind());
    for (std::size_t n = 0; n < w.size(); ++n) {
      out << w.window_id << ',' << n << ',' << w.v[n] << ',' << w.p[n] << ',' << w.q[n] << ','
          << w.label.class_id << ',' << kind << '\n';
    }
  }
}

void write_dataset_csv(const std::filesystem::path& path, std::span<const Waveform> windows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset to " + path.string());
  write_dataset_csv(out, windows);
}

std::vector<Waveform> read_dataset_csv(std::istream& in, double sample_rate) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("window_id,sample_idx,V,P,Q,class_id,attack_kind", 0) != 0) {
    throw DataError("dataset CSV: missing header");
  }
  std::vector<Waveform> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::istringstream row(line);
    std::string cell[7];
    for (int i = 0; i < 7; ++i) {
      if (!std::getline(row, cell[i], i < 6 ? ',' : '\n')) {
        throw DataError("dataset CSV line " + std::to_string(line_no) + ": expected 7 fields");
      }
    }
    if (!cell[6].empty() && cell[6].back() == '\r') cell[6].pop_back();
    try {
      const auto id = static_cast<std::uint64_t>(std::stoull(cell[0]));
      const auto idx = static_cast<std::size_t>(std::stoull(cell[1]));
      const int class_id = std::stoi(cell[5]);
      const AttackKind kind = parse_attack_kind(cell[6]);
      if (out.empty() || out.back().window_id != id) {
        Waveform w;
        w.window_id = id;
        w.sample_rate = sample_rate;
        w.label = decode_label(class_id);
        if (kind != AttackKind::None) w.attack = attacks::default_spec(kind);
        out.push_back(std::move(w));
      }
      auto& w = out.back();
      if (idx != w.size()) throw DataError("samples out of order");
      if (class_id != w.label.class_id || kind != w.attack_kind()) throw DataError("label changes within window");
      w.v.push_back(std::stod(cell[2]));
      w.p.push_back(std::stod(cell[3]));
      w.q.push_back(std::stod(cell[4]));
    } catch (const DataError& e) {
      throw DataError("dataset CSV line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::exception& e) {
      throw DataError("dataset CSV line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Waveform> read_dataset_csv(const std::filesystem::path& path, double sample_rate) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  return read_dataset_csv(in, sample_rate);
}

void write_features_csv(const std::filesystem::path& path, std::span<const Waveform> windows,
                        std::span<const featlib::FeatureVector> features) {
  if (windows.size() != features.size()) throw std::domain_error("windows/features length mismatch");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write features to " + path.string());
  const std::size_t dim = features.empty() ? 0 : features.front().size();
  out << "window_id";
  for (std::size_t d = 0; d < dim; ++d) out << ",f_" << d;
  out << ",class_id,attack_kind\n" << std::setprecision(17);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    out << windows[i].window_id;
    for (double v : features[i].values) out << ',' << v;
    out << ',' << windows[i].label.class_id << ',' << to_string(windows[i].attack_kind()) << '\n';
  }
}

// --- split -----------------------------------------------------------------

Split stratified_split(std::span<const Waveform> windows, double train_frac, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < windows.size(); ++i) by_class[windows[i].label.class_id].push_back(i);
  Split s;
  for (auto& [cls, idx] : by_class) {
    Rng rng(derive_seed(seed, 0x5917, static_cast<std::uint64_t>(cls)));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    const auto n_train = static_cast<std::size_t>(std::lround(train_frac * static_cast<double>(idx.size())));
    s.train.insert(s.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.insert(s.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::vector<Waveform> subset(std::span<const Waveform> windows, std::span<const std::size_t> idx) {
  std::vector<Waveform> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(windows[i]);
  return out;
}

// --- evaluation ------------------------------------------------------------

std::string condition_name(AttackKind kind) {
  return kind == AttackKind::None ? "normal" : std::string(to_string(kind));
}

const ConditionReport& EvalReport::at(AttackKind kind) const {
  for (const auto& c : conditions) {
    if (c.condition == kind) return c;
  }
  throw std::out_of_range("condition " + condition_name(kind) + " not in report");
}

bool operator==(const EvalReport& a, const EvalReport& b) {
  if (a.conditions.size() != b.conditions.size()) return false;
  for (std::size_t i = 0; i < a.conditions.size(); ++i) {
    const auto& x = a.conditions[i];
    const auto& y = b.conditions[i];
    if (x.condition != y.condition || x.n != y.n || x.overall_acc != y.overall_acc ||
        x.inverter_acc != y.inverter_acc || x.switch_acc != y.switch_acc || x.switch_n != y.switch_n ||
        x.switch_acc_all != y.switch_acc_all ||
        x.adjacency_error_frac != y.adjacency_error_frac || x.confusion != y.confusion) {
      return false;
    }
  }
  return true;
}

ConditionReport score_condition(AttackKind condition, std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw std::domain_error("truth/prediction length mismatch");
  ConditionReport r;
  r.condition = condition;
  r.n = truth.size();
  r.confusion.assign(kNumClasses, std::vector<std::size_t>(kNumClasses, 0));
  std::size_t correct = 0;
  std::size_t inv_correct = 0;
  std::size_t sw_correct = 0;
  std::size_t faults = 0;
  std::size_t errors = 0;
  std::size_t adjacent = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    const int p = predicted[i];
    if (t < 0 || t >= kNumClasses || p < 0 || p >= kNumClasses) throw std::domain_error("class id out of range");
    ++r.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    if (t == p) ++correct;
    if (inverter_of(t) == inverter_of(p)) ++inv_correct;
    if (t != 0) ++faults;
    if (t != 0 && inverter_of(t) == inverter_of(p)) {
      ++r.switch_n;
      if (t == p) ++sw_correct;
    }
    if (t != p) {
      ++errors;
      if (t != 0 && p != 0 &&
          (inverter_of(t) == inverter_of(p) || std::abs(switch_of(t) - switch_of(p)) == 1)) {
        ++adjacent;
      }
    }
  }
  const auto frac = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  r.overall_acc = frac(correct, r.n);
  r.inverter_acc = frac(inv_correct, r.n);
  r.switch_acc = frac(sw_correct, r.switch_n);
  r.switch_acc_all = frac(sw_correct, faults);
  r.adjacency_error_frac = frac(adjacent, errors);
  return r;
}

ConditionReport evaluate_windows(const Predictor& predict, AttackKind condition, std::span<const Waveform> windows,
                                 const featlib::FeatureConfig& features, const featlib::Normalizer& normalizer) {
  std::vector<int> truth;
  std::vector<int> pred;
  if (!windows.empty()) {
    const featlib::FeatureExtractor extractor(features, windows.front().sample_rate);
    for (const auto& w : windows) {
      const auto f = featlib::clip_features(normalizer.apply(extractor.extract(w)), features.clip);
      truth.push_back(w.label.class_id);
      pred.push_back(predict(f.values));
    }
  }
  return score_condition(condition, truth, pred);
}

EvalReport evaluate(const Predictor& predict, std::span<const Waveform> test_windows,
                    const featlib::FeatureConfig& features, const featlib::Normalizer& normalizer,
                    const attacks::AttackSettings& attack_settings, std::span<const AttackKind> conditions) {
  EvalReport report;
  for (AttackKind kind : conditions) {
    if (kind == AttackKind::None) {
      report.conditions.push_back(evaluate_windows(predict, kind, test_windows, features, normalizer));
    } else {
      // Test-time attacks use a seed stream distinct from the training pools.
      AttackSpec spec = attack_settings.spec(kind);
      spec.seed = derive_seed(spec.seed, 0x7E57);
      const auto attacked = attacks::apply_to_dataset(test_windows, spec, attack_settings.scales);
      report.conditions.push_back(evaluate_windows(predict, kind, attacked, features, normalizer));
    }
  }
  return report;
}

EvalReport evaluate(const model::HierarchicalModel& model, std::span<const Waveform> test_windows,
                    const featlib::FeatureConfig& features, const featlib::Normalizer& normalizer,
                    const attacks::AttackSettings& attack_settings, std::span<const AttackKind> conditions) {
  const Predictor predict = [&model](std::span<const double> x) { return model.predict(x).label.class_id; };
  return evaluate(predict, test_windows, features, normalizer, attack_settings, conditions);
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  out << "condition,n,overall_acc,inverter_acc,switch_acc,switch_acc_all,adjacency_error_frac\n"
      << std::setprecision(10);
  for (const auto& c : report.conditions) {
    out << condition_name(c.condition) << ',' << c.n << ',' << c.overall_acc << ',' << c.inverter_acc << ','
        << c.switch_acc << ',' << c.switch_acc_all << ',' << c.adjacency_error_frac << '\n';
  }
}

void write_confusion_csv(std::ostream& out, const EvalReport& report) {
  out << "condition,true_class";
  for (int k = 0; k < kNumClasses; ++k) out << ",p_" << k;
  out << '\n';
  for (const auto& c : report.conditions) {
    for (std::size_t t = 0; t < c.confusion.size(); ++t) {
      out << condition_name(c.condition) << ',' << t;
      for (std::size_t v : c.confusion[t]) out << ',' << v;
      out << '\n';
    }
  }
}

void print_report_table(std::ostream& out, const EvalReport& report) {
  const auto header = [&](const char* title) {
    out << std::left << std::setw(16) << title;
    for (const auto& c : report.conditions) {
      std::string name = condition_name(c.condition);
      if (name == "replacement") name = "replace";
      name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
      out << std::right << std::setw(9) << name;
    }
    out << '\n';
  };
  const auto row = [&](const char* title, double ConditionReport::*field) {
    out << std::left << std::setw(16) << title;
    for (const auto& c : report.conditions) {
      out << std::right << std::setw(9) << std::fixed << std::setprecision(1) << 100.0 * (c.*field);
    }
    out << '\n';
  };
  header("Accuracy (%)");
  row("Overall", &ConditionReport::overall_acc);
  row("Inverter-level", &ConditionReport::inverter_acc);
  row("Switch-level", &ConditionReport::switch_acc);
  row("Switch (all)", &ConditionReport::switch_acc_all);
  row("Adjacent errors", &ConditionReport::adjacency_error_frac);
  out.unsetf(std::ios::fixed);
}

// --- pipeline --------------------------------------------------------------

PipelineResult run_pipeline(const PipelineConfig& config) {
  const auto data = sigsim::generate_dataset(config.scenario, config.n_normal, config.n_per_fault, config.seed);
  PipelineResult r;
  r.split = stratified_split(data, config.train_frac, config.seed);
  const auto train = subset(data, r.split.train);
  const auto test = subset(data, r.split.test);
  r.training = pmrat::train_curriculum(train, config.features, config.attacks, config.train);
  r.report = evaluate(r.training.model, test, config.features, r.training.normalizer, config.attacks);
  return r;
}

// --- sweep -----------------------------------------------------------------

std::vector<SweepCell> run_sweep(const PipelineConfig& base, const SweepConfig& sweep) {
  for (double a : sweep.alphas) {
    if (!(a > 0 && a <= 1)) throw std::domain_error("sweep alpha must lie in (0, 1]");
  }
  for (std::size_t L : sweep.lengths) {
    if (L < 2 * base.features.kernel_len || L > kMaxWindowLen) {
      throw std::domain_error("sweep window length " + std::to_string(L) + " outside [" +
                              std::to_string(2 * base.features.kernel_len) + ", " + std::to_string(kMaxWindowLen) +
                              "]");
    }
  }
  std::vector<SweepCell> cells;
  for (std::size_t L : sweep.lengths) {
    for (double a : sweep.alphas) cells.push_back(SweepCell{a, L, 0.0});
  }

  const auto run_cell = [&](SweepCell& cell) {
    PipelineConfig c = base;
    c.scenario.window_len = cell.window_len;
    c.features.alpha = cell.alpha;
    c.train.stages = {AttackKind::None};
    c.train.epochs_per_stage = sweep.epochs;
    const std::uint64_t data_seed = derive_seed(base.seed, 0x5EE9, cell.window_len);
    const auto data = sigsim::generate_dataset(c.scenario, c.n_normal, c.n_per_fault, data_seed);
    const auto split = stratified_split(data, c.train_frac, data_seed);
    const auto train = subset(data, split.train);
    const auto test = subset(data, split.test);
    const auto trained = pmrat::train_curriculum(train, c.features, c.attacks, c.train);
    const std::array<AttackKind, 1> clean = {AttackKind::None};
    cell.val_acc = evaluate(trained.model, test, c.features, trained.normalizer, c.attacks, clean)
                       .conditions.front()
                       .overall_acc;
  };

  std::size_t threads = sweep.threads > 0 ? sweep.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, cells.size());
  if (threads <= 1) {
    for (auto& cell : cells) run_cell(cell);
    return cells;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(cells[i]);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return cells;
}

std::size_t rank_of(std::span<const SweepCell> cells, double alpha, std::size_t window_len) {
  const auto it = std::find_if(cells.begin(), cells.end(), [&](const SweepCell& c) {
    return std::abs(c.alpha - alpha) < 1e-9 && c.window_len == window_len;
  });
  if (it == cells.end()) throw std::domain_error("cell not present in sweep");
  return 1 + static_cast<std::size_t>(
                 std::count_if(cells.begin(), cells.end(), [&](const SweepCell& c) { return c.val_acc > it->val_acc; }));
}

void write_sweep_csv(std::ostream& out, std::span<const SweepCell> cells) {
  out << "alpha,L,val_acc\n";
  for (const auto& c : cells) {
    out << std::setprecision(3) << c.alpha << ',' << c.window_len << ',' << std::setprecision(10) << c.val_acc
        << '\n';
  }
}

}  // namespace fomads::harness
