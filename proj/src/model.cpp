#include "fomads/model.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fomads/errors.hpp"
#include "fomads/rng.hpp"

namespace fomads::model {
namespace {

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double m = logits.col(j).maxCoeff();
    p.col(j) = (logits.col(j).array() - m).exp().matrix();
    p.col(j) /= p.col(j).sum();
  }
  return p;
}

bool all_finite(const Gradients& g) {
  return g.w1.allFinite() && g.b1.allFinite() && g.w2.allFinite() && g.b2.allFinite();
}

void fill_uniform(Eigen::MatrixXd& m, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-bound, bound);
  }
}

void fill_uniform(Eigen::VectorXd& v, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(-bound, bound);
}

}  // namespace

DenseNet::DenseNet(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes)
    : w1(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(hidden_dim), static_cast<Eigen::Index>(input_dim))),
      b1(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hidden_dim))),
      w2(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(num_classes), static_cast<Eigen::Index>(hidden_dim))),
      b2(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_classes))) {}

DenseNet DenseNet::random(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes,
                          std::uint64_t seed) {
  DenseNet net(input_dim, hidden_dim, num_classes);
  Rng rng(seed);
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  fill_uniform(net.w1, bound1, rng);
  fill_uniform(net.b1, bound1, rng);
  fill_uniform(net.w2, bound2, rng);
  fill_uniform(net.b2, bound2, rng);
  return net;
}

std::size_t DenseNet::parameter_count() const {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size());
}

Eigen::MatrixXd DenseNet::logits_batch(const Eigen::MatrixXd& x) const {
  if (x.rows() != w1.cols()) throw std::domain_error("input dimension mismatch");
  const Eigen::MatrixXd hidden = ((w1 * x).colwise() + b1).array().tanh().matrix();
  return (w2 * hidden).colwise() + b2;
}

Eigen::MatrixXd DenseNet::forward_batch(const Eigen::MatrixXd& x) const {
  return softmax_columns(logits_batch(x));
}

Eigen::VectorXd DenseNet::forward(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) != w1.cols()) {
    throw std::domain_error("input dimension " + std::to_string(x.size()) + " != " +
                            std::to_string(w1.cols()));
  }
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  return forward_batch(xv);
}

std::vector<double> DenseNet::parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (Eigen::Index i = 0; i < w1.rows(); ++i) {
    for (Eigen::Index j = 0; j < w1.cols(); ++j) flat.push_back(w1(i, j));
  }
  for (Eigen::Index i = 0; i < b1.size(); ++i) flat.push_back(b1(i));
  for (Eigen::Index i = 0; i < w2.rows(); ++i) {
    for (Eigen::Index j = 0; j < w2.cols(); ++j) flat.push_back(w2(i, j));
  }
  for (Eigen::Index i = 0; i < b2.size(); ++i) flat.push_back(b2(i));
  return flat;
}

void DenseNet::set_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw std::domain_error("parameter count mismatch");
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < w1.rows(); ++i) {
    for (Eigen::Index j = 0; j < w1.cols(); ++j) w1(i, j) = flat[k++];
  }
  for (Eigen::Index i = 0; i < b1.size(); ++i) b1(i) = flat[k++];
  for (Eigen::Index i = 0; i < w2.rows(); ++i) {
    for (Eigen::Index j = 0; j < w2.cols(); ++j) w2(i, j) = flat[k++];
  }
  for (Eigen::Index i = 0; i < b2.size(); ++i) b2(i) = flat[k++];
}

void DenseNet::apply_update(const Gradients& g, double scale) {
  w1 -= scale * g.w1;
  b1 -= scale * g.b1;
  w2 -= scale * g.w2;
  b2 -= scale * g.b2;
}

LossResult loss_and_grads(const DenseNet& net, const Eigen::MatrixXd& x, std::span<const int> labels,
                          std::span<const double> weights) {
  const auto n = static_cast<std::size_t>(x.cols());
  if (labels.size() != n || weights.size() != n) {
    throw std::domain_error("batch, label and weight lengths differ");
  }
  if (x.rows() != net.w1.cols()) throw std::domain_error("input dimension mismatch");
  const auto classes = static_cast<int>(net.num_classes());

  const Eigen::MatrixXd hidden = ((net.w1 * x).colwise() + net.b1).array().tanh().matrix();
  const Eigen::MatrixXd logits = (net.w2 * hidden).colwise() + net.b2;

  LossResult r;
  r.per_sample.resize(n);
  Eigen::MatrixXd dlogits(logits.rows(), logits.cols());
  const double inv_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= classes) throw std::domain_error("label " + std::to_string(y) + " out of range");
    if (weights[i] < 0) throw std::domain_error("sample weights must be non-negative");
    const auto col = static_cast<Eigen::Index>(i);
    Eigen::Index arg = 0;
    const double m = logits.col(col).maxCoeff(&arg);
    const Eigen::ArrayXd e = (logits.col(col).array() - m).exp();
    const double z = e.sum();
    const double ce = std::log(z) + m - logits(y, col);
    r.per_sample[i] = ce;
    r.loss += weights[i] * ce * inv_n;
    if (arg == y) ++r.correct;
    dlogits.col(col) = (e / z).matrix() * (weights[i] * inv_n);
    dlogits(y, col) -= weights[i] * inv_n;
  }

  r.grads.w2 = dlogits * hidden.transpose();
  r.grads.b2 = dlogits.rowwise().sum();
  const Eigen::MatrixXd dhidden =
      ((net.w2.transpose() * dlogits).array() * (1.0 - hidden.array().square())).matrix();
  r.grads.w1 = dhidden * x.transpose();
  r.grads.b1 = dhidden.rowwise().sum();
  r.input_grads = net.w1.transpose() * dhidden;
  return r;
}

std::vector<double> per_sample_loss(const DenseNet& net, const Eigen::MatrixXd& x,
                                    std::span<const int> labels) {
  if (labels.size() != static_cast<std::size_t>(x.cols())) throw std::domain_error("batch and label lengths differ");
  if (x.rows() != net.w1.cols()) throw std::domain_error("input dimension mismatch");
  const Eigen::MatrixXd logits = net.logits_batch(x);
  std::vector<double> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= logits.rows()) throw std::domain_error("label outside [0, C)");
    const auto col = static_cast<Eigen::Index>(i);
    const double m = logits.col(col).maxCoeff();
    out[i] = std::log((logits.col(col).array() - m).exp().sum()) + m - logits(labels[i], col);
  }
  return out;
}

DenseNet train_step(const DenseNet& net, const Eigen::MatrixXd& x, std::span<const int> labels,
                    std::span<const double> weights, double learn_rate) {
  if (learn_rate < 0) throw std::domain_error("learn_rate must be non-negative");
  const LossResult r = loss_and_grads(net, x, labels, weights);
  if (!std::isfinite(r.loss) || !all_finite(r.grads)) throw TrainingError("non-finite loss or gradient");
  DenseNet out = net;
  out.apply_update(r.grads, learn_rate);
  return out;
}

void SgdMomentum::step(DenseNet& net, const Gradients& g, double learn_rate) {
  if (!all_finite(g)) throw TrainingError("non-finite gradient");
  if (!initialized_ || velocity_.w1.rows() != g.w1.rows() || velocity_.w1.cols() != g.w1.cols() ||
      velocity_.w2.rows() != g.w2.rows()) {
    velocity_ = Gradients{Eigen::MatrixXd::Zero(g.w1.rows(), g.w1.cols()), Eigen::VectorXd::Zero(g.b1.size()),
                          Eigen::MatrixXd::Zero(g.w2.rows(), g.w2.cols()), Eigen::VectorXd::Zero(g.b2.size())};
    initialized_ = true;
  }
  velocity_.w1 = momentum_ * velocity_.w1 + g.w1;
  velocity_.b1 = momentum_ * velocity_.b1 + g.b1;
  velocity_.w2 = momentum_ * velocity_.w2 + g.w2;
  velocity_.b2 = momentum_ * velocity_.b2 + g.b2;
  net.apply_update(velocity_, learn_rate);
  if (!net.w1.allFinite() || !net.b1.allFinite() || !net.w2.allFinite() || !net.b2.allFinite()) {
    throw TrainingError("parameters diverged to a non-finite value");
  }
}

HierarchicalModel HierarchicalModel::make(std::size_t input_dim, std::size_t hidden_dim,
                                          double gate_threshold, std::uint64_t seed, int n_inverters) {
  if (!(gate_threshold > 0.0 && gate_threshold < 1.0)) {
    throw std::domain_error("gate_threshold must lie in (0, 1)");
  }
  if (n_inverters < 1) throw std::domain_error("need at least one inverter");
  HierarchicalModel m;
  m.gate_threshold = gate_threshold;
  const auto inv = static_cast<std::size_t>(n_inverters);
  m.stage1 = DenseNet::random(input_dim, hidden_dim, inv + 1, derive_seed(seed, 0));
  for (std::size_t i = 0; i < inv; ++i) {
    m.stage2.push_back(DenseNet::random(input_dim, hidden_dim, kSwitchesPerInverter, derive_seed(seed, 1 + i)));
  }
  m.fallback = DenseNet::random(input_dim, hidden_dim, inv * kSwitchesPerInverter + 1,
                                derive_seed(seed, 1000));
  return m;
}

Prediction HierarchicalModel::predict(std::span<const double> x, PredictCounters* counters) const {
  const auto from_fallback = [&](Route route) {
    if (counters) ++counters->fallback_calls;
    const Eigen::VectorXd p = fallback.forward(x);
    Eigen::Index arg = 0;
    const double conf = p.maxCoeff(&arg);
    return Prediction{decode_label(static_cast<int>(arg), n_inverters()), conf, route};
  };
  if (flat) return from_fallback(Route::Flat);

  const Eigen::VectorXd p1 = stage1.forward(x);
  Eigen::Index inv = 0;
  const double conf1 = p1.maxCoeff(&inv);
  if (conf1 < gate_threshold) return from_fallback(Route::Fallback);
  if (inv == 0) return Prediction{normal_label(), conf1, Route::Normal};

  if (counters) ++counters->stage2_calls;
  const Eigen::VectorXd p2 = stage2[static_cast<std::size_t>(inv - 1)].forward(x);
  Eigen::Index sw = 0;
  const double conf2 = p2.maxCoeff(&sw);
  const int class_id = encode_label(static_cast<int>(inv), static_cast<int>(sw) + 1, n_inverters());
  return Prediction{decode_label(class_id, n_inverters()), conf1 * conf2, Route::Stage2};
}

void HierarchicalModel::add_inverter(std::uint64_t seed) {
  const auto widen = [](DenseNet& net, Eigen::Index extra) {
    Eigen::MatrixXd w2 = Eigen::MatrixXd::Zero(net.w2.rows() + extra, net.w2.cols());
    w2.topRows(net.w2.rows()) = net.w2;
    Eigen::VectorXd b2 = Eigen::VectorXd::Zero(net.b2.size() + extra);
    b2.head(net.b2.size()) = net.b2;
    net.w2 = std::move(w2);
    net.b2 = std::move(b2);
  };
  widen(stage1, 1);
  widen(fallback, kSwitchesPerInverter);
  stage2.push_back(DenseNet::random(stage1.input_dim(), stage1.hidden_dim(), kSwitchesPerInverter,
                                    derive_seed(seed, stage2.size() + 1)));
}

void HierarchicalModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model to " + path.string());
  out << "FOMADS-MODEL v1\n";
  out << "mode " << (flat ? "flat" : "hierarchical") << '\n';
  out << std::setprecision(17);
  out << "gate_threshold " << gate_threshold << '\n';
  const auto block = [&](const std::string& name, const DenseNet& net) {
    out << "net " << name << '\n';
    out << "dims " << net.input_dim() << ' ' << net.hidden_dim() << ' ' << net.num_classes() << '\n';
    const auto params = net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      out << params[i] << ((i + 1) % 8 == 0 || i + 1 == params.size() ? '\n' : ' ');
    }
  };
  block("stage1", stage1);
  for (std::size_t i = 0; i < stage2.size(); ++i) block("stage2_" + std::to_string(i + 1), stage2[i]);
  block("fallback", fallback);
}

HierarchicalModel HierarchicalModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file " + path.string());
  const auto fail = [&](const std::string& what) -> DataError {
    return DataError(path.string() + ": " + what);
  };
  std::string line;
  if (!std::getline(in, line) || line != "FOMADS-MODEL v1") throw fail("missing `FOMADS-MODEL v1` header");

  HierarchicalModel m;
  std::string tag;
  std::string mode;
  if (!(in >> tag >> mode) || tag != "mode" || (mode != "flat" && mode != "hierarchical")) {
    throw fail("expected `mode flat|hierarchical`");
  }
  m.flat = mode == "flat";
  if (!(in >> tag >> m.gate_threshold) || tag != "gate_threshold") throw fail("expected gate_threshold");

  std::vector<std::pair<std::string, DenseNet>> nets;
  std::string name;
  while (in >> tag) {
    if (tag != "net" || !(in >> name)) throw fail("expected `net <name>`");
    std::size_t d = 0;
    std::size_t h = 0;
    std::size_t c = 0;
    if (!(in >> tag >> d >> h >> c) || tag != "dims") throw fail("expected `dims D H C` for " + name);
    DenseNet net(d, h, c);
    std::vector<double> params(net.parameter_count());
    for (double& p : params) {
      if (!(in >> p)) throw fail("truncated parameters for " + name);
    }
    net.set_parameters(params);
    nets.emplace_back(name, std::move(net));
  }
  for (auto& [n, net] : nets) {
    if (n == "stage1") {
      m.stage1 = std::move(net);
    } else if (n == "fallback") {
      m.fallback = std::move(net);
    } else if (n.rfind("stage2_", 0) == 0) {
      m.stage2.push_back(std::move(net));
    } else {
      throw fail("unknown net " + n);
    }
  }
  if (m.fallback.num_classes() != m.stage2.size() * kSwitchesPerInverter + 1 ||
      m.stage1.num_classes() != m.stage2.size() + 1) {
    throw fail("network shapes are inconsistent");
  }
  return m;
}

}  // namespace fomads::model
