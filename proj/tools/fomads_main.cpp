#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fomads/errors.hpp"
#include "fomads/harness.hpp"

namespace fs = std::filesystem;
using namespace fomads;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitTraining = 4;

// Options shared by every subcommand.
struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::optional<long long> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key = value config file");
  cmd->add_option("--set", c.sets, "override one config key (key=value); repeatable");
  cmd->add_option("--seed", c.seed, "seed for this step (falls back to FOMADS_SEED)");
}

std::optional<long long> resolve_seed(const Common& c) {
  if (c.seed) return c.seed;
  if (const char* env = std::getenv("FOMADS_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(std::string("FOMADS_SEED is not an integer: ") + env);
    }
  }
  return std::nullopt;
}

KeyValues load_config(const Common& c) {
  KeyValues kv = c.config.empty() ? KeyValues{} : KeyValues::load(c.config);
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
    const auto trim = [](std::string x) {
      const auto b = x.find_first_not_of(" \t");
      const auto e = x.find_last_not_of(" \t");
      return b == std::string::npos ? std::string{} : x.substr(b, e - b + 1);
    };
    kv.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return kv;
}

void write_feature_config(const fs::path& path, const featlib::FeatureConfig& f) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << std::setprecision(17) << "feat.fractional = " << (f.fractional ? "true" : "false") << '\n'
      << "feat.alpha = " << f.alpha << '\n'
      << "feat.beta = " << f.beta << '\n'
      << "feat.kernel_len = " << f.kernel_len << '\n'
      << "feat.clip = " << f.clip << '\n';
}

featlib::FeatureConfig read_feature_config(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("missing feature config " + path.string());
  const auto kv = KeyValues::load(path);
  auto f = featlib::feature_config_from(kv);
  kv.reject_unused();
  return f;
}

struct LoadedModel {
  model::HierarchicalModel model;
  featlib::Normalizer normalizer;
  featlib::FeatureConfig features;
};

LoadedModel load_model_dir(const fs::path& dir) {
  LoadedModel m{model::HierarchicalModel::load(dir / "model.txt"), featlib::Normalizer::load(dir / "normalizer.txt"),
                read_feature_config(dir / "features.cfg")};
  if (m.normalizer.schema_id() != m.features.schema_id() || m.normalizer.mean().size() != m.features.dim() ||
      m.model.input_dim() != m.features.dim()) {
    throw DataError("model, normalizer and feature schema in " + dir.string() + " do not match");
  }
  return m;
}

// --- subcommands -----------------------------------------------------------

struct GenerateArgs {
  Common common;
  std::string out;
  std::string test_out;
  std::optional<long long> n_normal;
  std::optional<long long> n_per_fault;
};

int run_generate(const GenerateArgs& a) {
  auto kv = load_config(a.common);
  if (const auto s = resolve_seed(a.common)) kv.set("data.seed", std::to_string(*s));
  if (a.n_normal) kv.set("data.n_normal", std::to_string(*a.n_normal));
  if (a.n_per_fault) kv.set("data.n_per_fault", std::to_string(*a.n_per_fault));
  const auto cfg = harness::pipeline_config_from(kv);
  const auto data = sigsim::generate_dataset(cfg.scenario, cfg.n_normal, cfg.n_per_fault, cfg.seed);
  if (a.test_out.empty()) {
    harness::write_dataset_csv(a.out, data);
    std::cout << "wrote " << data.size() << " windows to " << a.out << '\n';
    return 0;
  }
  const auto split = harness::stratified_split(data, cfg.train_frac, cfg.seed);
  harness::write_dataset_csv(a.out, harness::subset(data, split.train));
  harness::write_dataset_csv(a.test_out, harness::subset(data, split.test));
  std::cout << "wrote " << split.train.size() << " train windows to " << a.out << " and " << split.test.size()
            << " test windows to " << a.test_out << '\n';
  return 0;
}

struct AttackArgs {
  Common common;
  std::string dataset;
  std::string kind;
  std::string out;
};

int run_attack(const AttackArgs& a) {
  auto kv = load_config(a.common);
  if (const auto s = resolve_seed(a.common)) kv.set("attack.seed", std::to_string(*s));
  const auto cfg = harness::pipeline_config_from(kv);
  const AttackKind kind = parse_attack_kind(a.kind);
  if (kind == AttackKind::None) throw ConfigError("--kind must name an attack");
  const auto data = harness::read_dataset_csv(a.dataset, cfg.scenario.sample_rate);
  const auto attacked = attacks::apply_to_dataset(data, cfg.attacks.spec(kind), cfg.attacks.scales);
  harness::write_dataset_csv(a.out, attacked);
  std::cout << "wrote " << attacked.size() << " " << a.kind << "-attacked windows to " << a.out << '\n';
  return 0;
}

struct ExtractArgs {
  Common common;
  std::string dataset;
  std::string out;
  bool no_frac = false;
};

int run_extract(const ExtractArgs& a) {
  auto kv = load_config(a.common);
  if (a.no_frac) kv.set("feat.fractional", "false");
  const auto cfg = harness::pipeline_config_from(kv);
  const auto data = harness::read_dataset_csv(a.dataset, cfg.scenario.sample_rate);
  const auto feats = featlib::FeatureExtractor(cfg.features, cfg.scenario.sample_rate).extract_all(data);
  harness::write_features_csv(a.out, data, feats);
  std::cout << "wrote " << feats.size() << " feature rows (D=" << cfg.features.dim() << ") to " << a.out << '\n';
  return 0;
}

struct TrainArgs {
  Common common;
  std::string dataset;
  std::string out_dir;
  std::string test_out;
  std::optional<long long> n_per_fault;
  std::string stages;
  bool no_ohem = false;
  bool no_frac = false;
  bool flat = false;
};

int run_train(const TrainArgs& a) {
  auto kv = load_config(a.common);
  if (const auto s = resolve_seed(a.common)) {
    kv.set("train.seed", std::to_string(*s));
    kv.set("data.seed", std::to_string(*s));
  }
  if (a.n_per_fault) kv.set("data.n_per_fault", std::to_string(*a.n_per_fault));
  if (!a.stages.empty()) kv.set("train.stages", a.stages);
  if (a.no_ohem) kv.set("train.ohem", "false");
  if (a.no_frac) kv.set("feat.fractional", "false");
  if (a.flat) kv.set("train.flat", "true");
  const auto cfg = harness::pipeline_config_from(kv);

  std::vector<Waveform> train;
  if (!a.dataset.empty()) {
    train = harness::read_dataset_csv(a.dataset, cfg.scenario.sample_rate);
  } else {
    // No dataset: generate one and train on its stratified train split.
    const auto data = sigsim::generate_dataset(cfg.scenario, cfg.n_normal, cfg.n_per_fault, cfg.seed);
    const auto split = harness::stratified_split(data, cfg.train_frac, cfg.seed);
    train = harness::subset(data, split.train);
    if (!a.test_out.empty()) harness::write_dataset_csv(a.test_out, harness::subset(data, split.test));
  }
  if (train.empty()) throw DataError("training set is empty");

  const auto result = pmrat::train_curriculum(train, cfg.features, cfg.attacks, cfg.train);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  result.model.save(dir / "model.txt");
  result.normalizer.save(dir / "normalizer.txt");
  write_feature_config(dir / "features.cfg", cfg.features);
  pmrat::write_metrics_csv((dir / "metrics.csv").string(), result.metrics);
  const auto& last = result.metrics.back();
  std::cout << "trained on " << train.size() << " windows; final clean acc " << std::fixed << std::setprecision(3)
            << last.clean_acc << ", adv acc " << last.adv_acc << "; wrote " << dir.string() << '\n';
  return 0;
}

struct EvalArgs {
  Common common;
  std::string model_dir;
  std::string dataset;
  std::vector<std::string> condition_data;
  std::string report;
  std::string confusion;
};

int run_eval(const EvalArgs& a) {
  auto kv = load_config(a.common);
  if (const auto s = resolve_seed(a.common)) kv.set("attack.seed", std::to_string(*s));
  const auto cfg = harness::pipeline_config_from(kv);
  const auto m = load_model_dir(a.model_dir);
  const harness::Predictor predict = [&](std::span<const double> x) { return m.model.predict(x).label.class_id; };

  harness::EvalReport report;
  if (!a.dataset.empty()) {
    const auto test = harness::read_dataset_csv(a.dataset, cfg.scenario.sample_rate);
    report = harness::evaluate(predict, test, m.features, m.normalizer, cfg.attacks);
  }
  for (const auto& entry : a.condition_data) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) throw ConfigError("--condition-data expects kind=path, got '" + entry + "'");
    const auto name = entry.substr(0, eq);
    const AttackKind kind = name == "normal" ? AttackKind::None : parse_attack_kind(name);
    const auto windows = harness::read_dataset_csv(entry.substr(eq + 1), cfg.scenario.sample_rate);
    report.conditions.push_back(harness::evaluate_windows(predict, kind, windows, m.features, m.normalizer));
  }
  if (report.conditions.empty()) throw ConfigError("eval needs --dataset or --condition-data");

  harness::print_report_table(std::cout, report);
  if (!a.report.empty()) {
    std::ofstream out(a.report);
    if (!out) throw DataError("cannot write " + a.report);
    harness::write_report_csv(out, report);
  }
  if (!a.confusion.empty()) {
    std::ofstream out(a.confusion);
    if (!out) throw DataError("cannot write " + a.confusion);
    harness::write_confusion_csv(out, report);
  }
  return 0;
}

struct SweepArgs {
  Common common;
  std::string out;
  std::vector<double> alphas;
  std::vector<std::size_t> lengths;
  int epochs = 10;
  std::size_t threads = 0;
};

int run_sweep(const SweepArgs& a) {
  auto kv = load_config(a.common);
  if (const auto s = resolve_seed(a.common)) {
    kv.set("data.seed", std::to_string(*s));
    kv.set("train.seed", std::to_string(*s));
  }
  const auto cfg = harness::pipeline_config_from(kv);
  harness::SweepConfig sweep;
  if (!a.alphas.empty()) sweep.alphas = a.alphas;
  if (!a.lengths.empty()) sweep.lengths = a.lengths;
  sweep.epochs = a.epochs;
  sweep.threads = a.threads;
  const auto cells = harness::run_sweep(cfg, sweep);
  if (a.out.empty()) {
    harness::write_sweep_csv(std::cout, cells);
  } else {
    std::ofstream out(a.out);
    if (!out) throw DataError("cannot write " + a.out);
    harness::write_sweep_csv(out, cells);
  }
  const auto best = std::max_element(cells.begin(), cells.end(),
                                     [](const auto& x, const auto& y) { return x.val_acc < y.val_acc; });
  std::cerr << "best cell: alpha=" << best->alpha << " L=" << best->window_len << " val_acc=" << best->val_acc
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fractional-order microgrid fault diagnosis under sensor attacks"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "synthesize a labelled VPQ window dataset");
  add_common(g, gen.common);
  g->add_option("--out", gen.out, "dataset CSV (train split when --test-out is given)")->required();
  g->add_option("--test-out", gen.test_out, "also split and write the test part here");
  g->add_option("--n-normal", gen.n_normal, "normal windows")->check(CLI::NonNegativeNumber);
  g->add_option("--n-per-fault", gen.n_per_fault, "windows per fault class")->check(CLI::NonNegativeNumber);

  AttackArgs att;
  auto* at = app.add_subcommand("attack", "inject one attack kind into every window");
  add_common(at, att.common);
  at->add_option("--dataset", att.dataset, "input dataset CSV")->required();
  at->add_option("--kind", att.kind, "bias | noise | replacement | replay")->required();
  at->add_option("--out", att.out, "attacked dataset CSV")->required();

  ExtractArgs ext;
  auto* ex = app.add_subcommand("extract", "write the feature matrix of a dataset");
  add_common(ex, ext.common);
  ex->add_option("--dataset", ext.dataset, "input dataset CSV")->required();
  ex->add_option("--out", ext.out, "feature CSV")->required();
  ex->add_flag("--no-frac-features", ext.no_frac, "raw statistics only");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "curriculum training; writes model, normalizer and metrics");
  add_common(t, tr.common);
  t->add_option("--dataset", tr.dataset, "training dataset CSV (generated from config when omitted)");
  t->add_option("--out-dir", tr.out_dir, "output directory")->required();
  t->add_option("--test-out", tr.test_out, "with a generated dataset, also write its test split");
  t->add_option("--n-per-fault", tr.n_per_fault, "windows per fault class for a generated dataset")
      ->check(CLI::NonNegativeNumber);
  t->add_option("--stages", tr.stages, "comma-separated curriculum, e.g. normal,bias,noise");
  t->add_flag("--no-ohem", tr.no_ohem, "disable hard-example weighting");
  t->add_flag("--no-frac-features", tr.no_frac, "raw statistics only");
  t->add_flag("--flat", tr.flat, "train only the flat 25-class net");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "score a trained model per attack condition");
  add_common(e, ev.common);
  e->add_option("--model-dir", ev.model_dir, "directory written by train")->required();
  e->add_option("--dataset", ev.dataset, "clean test CSV; every condition is attacked in-process");
  e->add_option("--condition-data", ev.condition_data, "pre-attacked set as kind=path; repeatable");
  e->add_option("--report", ev.report, "report CSV");
  e->add_option("--confusion", ev.confusion, "confusion-matrix CSV");

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "alpha x window-length sensitivity grid");
  add_common(s, sw.common);
  s->add_option("--out", sw.out, "grid CSV (stdout when omitted)");
  s->add_option("--alphas", sw.alphas, "alpha values")->delimiter(',');
  s->add_option("--lengths", sw.lengths, "window lengths")->delimiter(',');
  s->add_option("--epochs", sw.epochs, "epochs per cell")->check(CLI::PositiveNumber);
  s->add_option("--threads", sw.threads, "worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*g) return run_generate(gen);
    if (*at) return run_attack(att);
    if (*ex) return run_extract(ext);
    if (*t) return run_train(tr);
    if (*e) return run_eval(ev);
    if (*s) return run_sweep(sw);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const DataError& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return kExitData;
  } catch (const TrainingError& err) {
    std::cerr << "training error: " << err.what() << '\n';
    return kExitTraining;
  } catch (const std::domain_error& err) {
    std::cerr << "invalid argument: " << err.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
