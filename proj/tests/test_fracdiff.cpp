#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "fomads/fracdiff.hpp"

using namespace fomads::fracdiff;

namespace {

// Lanczos approximation (g = 7, 9 terms), used only as an independent
// reference for std::tgamma.
double lanczos_gamma(double x) {
  static const double c[] = {0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
                             771.32342877765313,   -176.61502916214059,   12.507343278686905,
                             -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  if (x < 0.5) return std::numbers::pi / (std::sin(std::numbers::pi * x) * lanczos_gamma(1.0 - x));
  x -= 1.0;
  double a = c[0];
  const double t = x + 7.5;
  for (int i = 1; i < 9; ++i) a += c[i] / (x + i);
  return std::sqrt(2.0 * std::numbers::pi) * std::pow(t, x + 0.5) * std::exp(-t) * a;
}

// (-1)^k binom(order, k) from the product formula.
double binomial_weight(double order, int k) {
  double w = 1.0;
  for (int i = 0; i < k; ++i) w *= (order - i) / (i + 1);
  return (k % 2 == 0) ? w : -w;
}

std::vector<double> sample(double (*f)(double), double h, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(static_cast<double>(i) * h);
  return out;
}

}  // namespace

TEST(Gamma, LanczosReferenceAgreesWithTgamma) {
  for (double x : {1.3, 1.7, 0.5, 2.5, 1.0, 0.1}) {
    EXPECT_NEAR(std::tgamma(x), lanczos_gamma(x), 1e-10 * std::tgamma(x)) << x;
  }
  EXPECT_NEAR(std::tgamma(0.5), std::sqrt(std::numbers::pi), 1e-14);
  EXPECT_NEAR(1.0 / std::tgamma(1.3), 1.1142425085473018, 1e-14);
  EXPECT_NEAR(1.0 / std::tgamma(1.7), 1.1005474055236657, 1e-14);
}

TEST(GlWeights, FrozenValues) {
  const auto w = gl_weights(0.3, 4);
  ASSERT_EQ(w.size(), 4u);
  EXPECT_DOUBLE_EQ(w[0], 1.0);
  EXPECT_NEAR(w[1], -0.3, 1e-15);
  EXPECT_NEAR(w[2], -0.105, 1e-15);
  EXPECT_NEAR(w[3], -0.0595, 1e-15);
}

TEST(GlWeights, RecurrenceMatchesBinomial) {
  for (double order : {0.1, 0.3, 0.5, 0.9}) {
    for (std::size_t K = 1; K <= 20; ++K) {
      const auto w = gl_weights(order, K);
      ASSERT_EQ(w.size(), K);
      for (std::size_t k = 0; k < K; ++k) {
        EXPECT_NEAR(w[k], binomial_weight(order, static_cast<int>(k)), 1e-12) << order << " k=" << k;
      }
    }
  }
}

TEST(GlWeights, SumForDefaultKernel) {
  const auto w = gl_weights(0.3, 10);
  double sum = 0.0;
  for (double x : w) sum += x;
  EXPECT_NEAR(sum, 0.39391898375156253, 1e-14);
}

TEST(GlWeights, RejectsBadArguments) {
  EXPECT_THROW(gl_weights(0.0, 5), std::domain_error);
  EXPECT_THROW(gl_weights(1.0, 5), std::domain_error);
  EXPECT_THROW(gl_weights(-0.2, 5), std::domain_error);
  EXPECT_THROW(gl_weights(0.5, 0), std::domain_error);
}

TEST(CaputoCoeffs, FrozenValues) {
  const auto b = caputo_l1_coeffs(0.7, 3);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_DOUBLE_EQ(b[0], 1.0);
  EXPECT_NEAR(b[1], 0.23114441334491628, 1e-14);
  EXPECT_NEAR(b[2], 0.15924475697099305, 1e-14);
}

TEST(CaputoCoeffs, OrderOneIsFirstDifference) {
  const auto b = caputo_l1_coeffs(1.0, 5);
  EXPECT_DOUBLE_EQ(b[0], 1.0);
  for (std::size_t j = 1; j < b.size(); ++j) EXPECT_DOUBLE_EQ(b[j], 0.0);
}

TEST(CaputoCoeffs, DecreasingAndPositive) {
  const auto b = caputo_l1_coeffs(0.4, 20);
  for (std::size_t j = 1; j < b.size(); ++j) {
    EXPECT_GT(b[j], 0.0);
    EXPECT_LT(b[j], b[j - 1]);
  }
}

TEST(Caputo, LinearRampMatchesAnalytic) {
  // Full-history kernel: the L1 scheme is exact for linear signals.
  const double h = 1e-3;
  const std::size_t n = 1001;
  const auto f = sample([](double t) { return t; }, h, n);
  const auto d = caputo_derivative(f, 0.7, n, h);
  const double expected = 1.0 / std::tgamma(1.3);
  EXPECT_NEAR(d.back(), expected, 0.02 * expected);
  EXPECT_NEAR(d.back(), 1.1142425085473018, 1e-9);
}

TEST(Gl, LinearRampMatchesAnalytic) {
  const double h = 1e-3;
  const std::size_t n = 1001;
  const auto f = sample([](double t) { return t; }, h, n);
  const auto d = gl_derivative(f, 0.3, n, h);
  const double expected = 1.0 / std::tgamma(1.7);
  EXPECT_NEAR(d.back(), expected, 0.02 * expected);
  EXPECT_NEAR(d.back(), 1.1004318618197069, 1e-9);
}

TEST(Caputo, ConstantSignalIsZero) {
  const std::vector<double> f(50, 3.25);
  for (double x : caputo_derivative(f, 0.7, 10, 5e-4)) EXPECT_EQ(x, 0.0);
}

TEST(Gl, ConstantSignalResidual) {
  // Short memory leaves a constant residual c * h^-beta * sum(w) once the
  // kernel is full.
  const std::vector<double> f(40, 1.0);
  const auto d = gl_derivative(f, 0.3, 10, 5e-4);
  for (std::size_t n = 9; n < f.size(); ++n) EXPECT_NEAR(d[n], 3.852262823617824, 1e-12);
}

TEST(Caputo, StepGivesDecayingSpike) {
  const std::size_t K = 10;
  std::vector<double> f(60, 0.0);
  for (std::size_t i = 20; i < f.size(); ++i) f[i] = 1.0;
  const auto d = caputo_derivative(f, 0.7, K, 5e-4);
  EXPECT_GT(d[20], d[20 + K]);
  EXPECT_GT(d[20], 0.0);
  EXPECT_EQ(d[20 + K], 0.0);
  EXPECT_EQ(d[19], 0.0);
}

TEST(Caputo, FirstOutputIsZeroAndShortSignalThrows) {
  const std::vector<double> f = {5.0, 7.0, 2.0};
  EXPECT_EQ(caputo_derivative(f, 0.5, 10, 1.0)[0], 0.0);
  EXPECT_THROW(caputo_derivative(std::vector<double>{1.0}, 0.5, 10, 1.0), std::domain_error);
  EXPECT_THROW(gl_derivative(std::vector<double>{}, 0.5, 10, 1.0), std::domain_error);
  EXPECT_THROW(gl_derivative(f, 0.5, 10, 0.0), std::domain_error);
}

TEST(Operators, Linearity) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> f(120);
    std::vector<double> g(120);
    for (auto& x : f) x = u(gen);
    for (auto& x : g) x = u(gen);
    const double a = u(gen) * 3.0;
    const double b = u(gen) * 3.0;
    std::vector<double> mix(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) mix[i] = a * f[i] + b * g[i];
    for (int op = 0; op < 2; ++op) {
      const auto run = [&](const std::vector<double>& s) {
        return op == 0 ? caputo_derivative(s, 0.7, 10, 5e-4) : gl_derivative(s, 0.3, 10, 5e-4);
      };
      const auto df = run(f);
      const auto dg = run(g);
      const auto dm = run(mix);
      for (std::size_t i = 0; i < f.size(); ++i) {
        const double expect = a * df[i] + b * dg[i];
        const double mag = std::abs(a * df[i]) + std::abs(b * dg[i]) + 1.0;
        EXPECT_NEAR(dm[i], expect, 1e-12 * mag);
      }
    }
  }
}

TEST(Operators, ConvergenceOnQuadratic) {
  // f(t) = t^2 has f(0) = f'(0) = 0, so Caputo and GL share the analytic
  // derivative 2 t^(2-q) / Gamma(3-q).
  for (int op = 0; op < 2; ++op) {
    const double q = op == 0 ? 0.7 : 0.3;
    double previous = INFINITY;
    for (int level = 0; level < 4; ++level) {
      const std::size_t n = (std::size_t{50} << level) + 1;
      const double h = 1.0 / static_cast<double>(n - 1);
      const auto f = sample([](double t) { return t * t; }, h, n);
      const auto d = op == 0 ? caputo_derivative(f, q, n, h) : gl_derivative(f, q, n, h);
      double err = 0.0;
      for (std::size_t i = 1; i < n; ++i) {
        const double t = static_cast<double>(i) * h;
        err = std::max(err, std::abs(d[i] - 2.0 * std::pow(t, 2.0 - q) / std::tgamma(3.0 - q)));
      }
      EXPECT_LT(err, previous) << "op " << op << " level " << level;
      previous = err;
    }
  }
}

TEST(Kernel, StreamingEqualsBatch) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  std::vector<double> s(80);
  for (auto& x : s) x = nd(gen);
  for (auto kind : {OperatorKind::Caputo, OperatorKind::GL}) {
    const FractionalKernel k(kind, kind == OperatorKind::Caputo ? 0.7 : 0.3, 10, 5e-4);
    const auto batch = k.apply(s);
    for (std::size_t n = 0; n < s.size(); ++n) {
      const std::vector<double> prefix(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n + 1));
      EXPECT_DOUBLE_EQ(k.at(prefix, n), batch[n]);
    }
    // Appending a sample leaves earlier outputs untouched.
    auto longer = s;
    longer.push_back(2.0);
    const auto extended = k.apply(longer);
    for (std::size_t n = 0; n < s.size(); ++n) EXPECT_EQ(extended[n], batch[n]);
  }
}

TEST(Kernel, ScaleAndAccessors) {
  const FractionalKernel c(OperatorKind::Caputo, 0.7, 10, 5e-4);
  EXPECT_NEAR(c.scale(), std::pow(5e-4, -0.7) / std::tgamma(1.3), 1e-9);
  EXPECT_EQ(c.kernel_len(), 10u);
  const FractionalKernel g(OperatorKind::GL, 0.3, 12, 5e-4);
  EXPECT_NEAR(g.scale(), std::pow(5e-4, -0.3), 1e-12);
  EXPECT_EQ(g.weights().size(), 12u);
}
