// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Training-based criteria share the desk-scale dataset
// (n_per_fault = 50, 80/20 stratified split, default seeds).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fomads/fracdiff.hpp"
#include "fomads/harness.hpp"
#include "fomads/model.hpp"
#include "fomads/pmrat.hpp"

using namespace fomads;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(const std::string& id, bool pass, const std::string& title, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << "CRITERION " << id << ' ' << (pass ? "PASS" : "FAIL") << "  " << title << "  |  " << detail
            << std::endl;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0, double e = 0, double g = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d, e, g);
  return buf;
}

// --- 1 ---------------------------------------------------------------------

void fractional_analytics() {
  const auto t0 = Clock::now();
  const double h = 1e-3;
  std::vector<double> ramp(1001);
  for (std::size_t n = 0; n < ramp.size(); ++n) ramp[n] = static_cast<double>(n) * h;
  const double caputo = fracdiff::caputo_derivative(ramp, 0.7, ramp.size(), h).back();
  const double gl = fracdiff::gl_derivative(ramp, 0.3, ramp.size(), h).back();
  const double caputo_ref = 1.0 / std::tgamma(1.3);
  const double gl_ref = 1.0 / std::tgamma(1.7);
  const double ec = std::abs(caputo - caputo_ref) / caputo_ref;
  const double eg = std::abs(gl - gl_ref) / gl_ref;
  const double dt = seconds_since(t0);
  report("1", ec < 0.02 && eg < 0.02 && dt < 1.0, "fractional-operator analytics",
         fmt("caputo %.6f vs %.6f (rel %.2e); gl %.6f vs %.6f (rel %.2e)", caputo, caputo_ref, ec, gl, gl_ref, eg) +
             fmt("; %.3f s", dt));
}

// --- 2 ---------------------------------------------------------------------

void gl_weight_suite() {
  // (-1)^k binom(b, k) via gamma functions; tgamma handles the negative
  // non-integer arguments that appear for k > b + 1.
  const auto direct = [](double b, std::size_t k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    return sign * std::tgamma(b + 1) / (std::tgamma(static_cast<double>(k) + 1) * std::tgamma(b - k + 1));
  };
  double worst = 0.0;
  for (double order : {0.1, 0.3, 0.5, 0.9}) {
    const auto w = fracdiff::gl_weights(order, 20);
    for (std::size_t k = 0; k < w.size(); ++k) worst = std::max(worst, std::abs(w[k] - direct(order, k)));
  }
  report("2", worst < 1e-12, "GL weights: recurrence vs direct binomial (K=20, 4 orders)",
         fmt("max |diff| %.3e", worst));
}

// --- 3 ---------------------------------------------------------------------

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-7, std::abs(a) + std::abs(b)); }

void gradient_suite() {
  const auto t0 = Clock::now();
  const double h = 1e-5;
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const auto net = model::DenseNet::random(30, 16, 6, 1000 + trial);
    std::mt19937_64 gen(trial);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd x(30, 8);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(gen);
    std::vector<int> y(8);
    std::vector<double> wts(8);
    for (std::size_t i = 0; i < 8; ++i) {
      y[i] = static_cast<int>((i + trial) % 6);
      wts[i] = 0.5 + 0.25 * static_cast<double>(i % 3);
    }
    const auto r = model::loss_and_grads(net, x, y, wts);
    const auto loss_at = [&](const model::DenseNet& n, const Eigen::MatrixXd& xx) {
      return model::loss_and_grads(n, xx, y, wts).loss;
    };
    std::vector<double> analytic;
    // Flat order of DenseNet::parameters(): w1 row-major, b1, w2 row-major, b2.
    for (Eigen::Index i = 0; i < r.grads.w1.rows(); ++i)
      for (Eigen::Index j = 0; j < r.grads.w1.cols(); ++j) analytic.push_back(r.grads.w1(i, j));
    for (Eigen::Index i = 0; i < r.grads.b1.size(); ++i) analytic.push_back(r.grads.b1(i));
    for (Eigen::Index i = 0; i < r.grads.w2.rows(); ++i)
      for (Eigen::Index j = 0; j < r.grads.w2.cols(); ++j) analytic.push_back(r.grads.w2(i, j));
    for (Eigen::Index i = 0; i < r.grads.b2.size(); ++i) analytic.push_back(r.grads.b2(i));
    const auto params = net.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto plus = params;
      auto minus = params;
      plus[k] += h;
      minus[k] -= h;
      auto np = net;
      auto nm = net;
      np.set_parameters(plus);
      nm.set_parameters(minus);
      const double numeric = (loss_at(np, x) - loss_at(nm, x)) / (2 * h);
      if (std::abs(numeric) + std::abs(analytic[k]) > 1e-9) {
        worst = std::max(worst, rel_err(analytic[k], numeric));
        ++checked;
      }
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Eigen::MatrixXd xp = x;
      Eigen::MatrixXd xm = x;
      xp.data()[i] += h;
      xm.data()[i] -= h;
      const double numeric = (loss_at(net, xp) - loss_at(net, xm)) / (2 * h);
      const double a = r.input_grads.data()[i];
      if (std::abs(numeric) + std::abs(a) > 1e-9) {
        worst = std::max(worst, rel_err(a, numeric));
        ++checked;
      }
    }
  }
  const double dt = seconds_since(t0);
  report("3", worst < 1e-4 && dt < 10.0, "gradient suite (20 random nets, params and inputs)",
         fmt("max rel err %.3e over %.0f entries; %.2f s", worst, static_cast<double>(checked), dt));
}

// --- 4 (unit part) ---------------------------------------------------------

struct PgdCheck {
  std::size_t examples = 0;
  std::size_t infeasible = 0;
  int ascending_nets = 0;
};

PgdCheck pgd_random_nets() {
  PgdCheck c;
  for (std::uint64_t t = 0; t < 10; ++t) {
    const auto net = model::DenseNet::random(30, 64, 5, 70 + t);
    std::mt19937_64 gen(100 + t);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd x(30, 64);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(gen);
    std::vector<int> y(64);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>((i * 7 + t) % 5);
    const double eps = 0.1;
    const auto xa = pmrat::pgd_attack(net, x, y, eps, 7, 2.5 * eps / 7);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      ++c.examples;
      if ((xa.col(j) - x.col(j)).cwiseAbs().maxCoeff() > eps) ++c.infeasible;
    }
    const auto mean = [&](const Eigen::MatrixXd& m) {
      const auto l = model::per_sample_loss(net, m, y);
      return std::accumulate(l.begin(), l.end(), 0.0) / static_cast<double>(l.size());
    };
    if (mean(xa) >= mean(x)) ++c.ascending_nets;
  }
  return c;
}

// --- 8 ---------------------------------------------------------------------

void spot_checks() {
  const double lambda = pmrat::adaptive_lambda(0.9, 1.0, 0.5);
  const pmrat::TrainConfig tc;
  const int total = tc.epochs_per_stage * static_cast<int>(tc.stages.size());
  const double e0 = pmrat::epsilon_schedule(0, total, tc.eps_start, tc.eps_end);
  const double e1 = pmrat::epsilon_schedule(total - 1, total, tc.eps_start, tc.eps_end);
  report("8", lambda == 0.45 && e0 == 0.02 && e1 == 0.15, "lambda and epsilon-schedule spot checks",
         fmt("lambda(0.9,1,0.5)=%.15g; eps[0]=%.15g eps[last]=%.15g (exact equality checked)", lambda, e0, e1));
}

// --- training runs ---------------------------------------------------------

harness::PipelineConfig desk_config() {
  harness::PipelineConfig c;
  c.n_per_fault = 50;
  return c;
}

harness::PipelineResult timed_run(const std::string& name, const harness::PipelineConfig& c, double* secs) {
  const auto t0 = Clock::now();
  auto r = harness::run_pipeline(c);
  *secs = seconds_since(t0);
  std::cout << "  run " << name << ": " << fmt("%.1f s", *secs) << std::endl;
  return r;
}

double mean_switch(const harness::EvalReport& r) {
  double s = 0.0;
  for (const auto& c : r.conditions) s += c.switch_acc;
  return s / static_cast<double>(r.conditions.size());
}

double pct(double x) { return 100.0 * x; }

}  // namespace

int main() {
  std::cout << "FO-MADS acceptance suite" << std::endl;
  fractional_analytics();
  gl_weight_suite();
  gradient_suite();
  const auto pgd = pgd_random_nets();
  spot_checks();

  double secs = 0.0;
  const auto base = desk_config();
  const auto full = timed_run("full", base, &secs);
  const double full_secs = secs;

  {
    const auto exc = full.training.max_perturbation_excess;
    const bool pass = pgd.infeasible == 0 && pgd.ascending_nets == 10 && exc <= 0.0;
    report("4", pass, "PGD contract (budget and ascent)",
           fmt("random nets: %.0f/%.0f feasible, %.0f/10 ascending; training max excess over eps %.3g",
               static_cast<double>(pgd.examples - pgd.infeasible), static_cast<double>(pgd.examples),
               pgd.ascending_nets, exc));
  }

  const auto& clean = full.report.at(AttackKind::None);
  report("5", clean.overall_acc >= 0.90 && full_secs < 600.0, "clean-accuracy floor (desk scale)",
         fmt("overall %.2f%% (floor 90%%); training+eval %.1f s", pct(clean.overall_acc), full_secs));

  auto flat_cfg = base;
  flat_cfg.train.flat = true;
  const auto flat = timed_run("flat", flat_cfg, &secs);
  auto plain_cfg = base;
  plain_cfg.train.ohem = false;
  const auto plain = timed_run("no-ohem", plain_cfg, &secs);
  auto normal_cfg = base;
  normal_cfg.train.stages = {AttackKind::None};
  const auto normal_only = timed_run("normal-only", normal_cfg, &secs);
  auto raw_cfg = base;
  raw_cfg.features.fractional = false;
  const auto raw = timed_run("raw-features", raw_cfg, &secs);

  {
    const double h = pct(mean_switch(full.report));
    const double f = pct(mean_switch(flat.report));
    report("6a", h - f >= 2.0, "hierarchical vs flat: switch-level accuracy (mean over 5 conditions), >= +2",
           fmt("hierarchical %.2f%%, flat %.2f%%, diff %+.2f", h, f, h - f));
  }
  {
    const double a = pct(full.report.at(AttackKind::Replacement).overall_acc);
    const double b = pct(plain.report.at(AttackKind::Replacement).overall_acc);
    report("6b", a - b >= 1.0, "OHEM vs no-OHEM: replacement accuracy, >= +1",
           fmt("OHEM %.2f%%, no-OHEM %.2f%%, diff %+.2f", a, b, a - b));
  }
  {
    const double a = pct(full.report.at(AttackKind::Replay).overall_acc);
    const double b = pct(normal_only.report.at(AttackKind::Replay).overall_acc);
    report("6c", a - b >= 2.0, "PMR-AT vs normal-only: replay accuracy, >= +2",
           fmt("PMR-AT %.2f%%, normal-only %.2f%%, diff %+.2f", a, b, a - b));
  }
  {
    const double fn = pct(full.report.at(AttackKind::Noise).overall_acc);
    const double rn = pct(raw.report.at(AttackKind::Noise).overall_acc);
    const double fr = pct(full.report.at(AttackKind::Replacement).overall_acc);
    const double rr = pct(raw.report.at(AttackKind::Replacement).overall_acc);
    report("6d", fn - rn >= 1.0 && fr - rr >= 1.0, "fractional vs raw features: noise and replacement, >= +1 each",
           fmt("noise %.2f%% vs %.2f%% (%+.2f); replacement %.2f%% vs %.2f%% (%+.2f)", fn, rn, fn - rn, fr, rr,
               fr - rr));
  }

  {
    const auto acc = [&](AttackKind k) { return pct(full.report.at(k).overall_acc); };
    const double n = acc(AttackKind::None), b = acc(AttackKind::Bias), z = acc(AttackKind::Noise),
                 r = acc(AttackKind::Replacement), p = acc(AttackKind::Replay);
    const bool pass = n >= b && r <= b && r <= z && r <= p;
    report("7", pass, "attack-resilience ordering: normal >= bias, replacement is the minimum attack",
           fmt("normal %.2f, bias %.2f, noise %.2f, replace %.2f, replay %.2f", n, b, z, r, p));
  }

  {
    const auto again = timed_run("full (repeat)", base, &secs);
    std::ostringstream a;
    std::ostringstream b;
    harness::write_report_csv(a, full.report);
    harness::write_report_csv(b, again.report);
    harness::write_confusion_csv(a, full.report);
    harness::write_confusion_csv(b, again.report);
    const bool same = full.report == again.report && a.str() == b.str();
    report("9", same, "determinism: two end-to-end runs, identical seeds",
           same ? "EvalReports and CSV output identical" : "EvalReports differ");
  }

  {
    const auto t0 = Clock::now();
    const harness::SweepConfig sweep;
    const auto cells = harness::run_sweep(base, sweep);
    const auto rank = harness::rank_of(cells, 0.7, 400);
    const auto best = *std::max_element(cells.begin(), cells.end(),
                                        [](const auto& x, const auto& y) { return x.val_acc < y.val_acc; });
    const auto target = std::find_if(cells.begin(), cells.end(), [](const harness::SweepCell& c) {
      return std::abs(c.alpha - 0.7) < 1e-9 && c.window_len == 400;
    });
    std::ostringstream grid;
    harness::write_sweep_csv(grid, cells);
    std::cout << "  sweep grid (" << cells.size() << " cells, " << fmt("%.1f s", seconds_since(t0)) << "):\n";
    std::istringstream lines(grid.str());
    for (std::string line; std::getline(lines, line);) std::cout << "    " << line << '\n';
    report("10", rank <= 3, "sweep sanity: (alpha=0.7, L=400) in the top 3 of the 10x6 grid",
           fmt("cell acc %.2f%%, rank %.0f of %.0f; best alpha=%.1f L=%.0f at %.2f%%", pct(target->val_acc),
               static_cast<double>(rank), static_cast<double>(cells.size()), best.alpha,
               static_cast<double>(best.window_len), pct(best.val_acc)));
  }

  std::cout << (failures == 0 ? "ALL CRITERIA PASS" : std::to_string(failures) + " CRITERION LINE(S) FAILED")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
