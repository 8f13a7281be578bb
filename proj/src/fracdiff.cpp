#include "fomads/fracdiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fomads::fracdiff {
namespace {

void check_gl_order(double order) {
  if (!(order > 0.0 && order < 1.0)) {
    throw std::domain_error("GL order must lie in (0, 1), got " + std::to_string(order));
  }
}

void check_caputo_order(double order) {
  if (!(order > 0.0 && order <= 1.0)) {
    throw std::domain_error("Caputo order must lie in (0, 1], got " + std::to_string(order));
  }
}

void check_len(std::size_t kernel_len) {
  if (kernel_len == 0) throw std::domain_error("kernel length must be positive");
}

void check_step(double step) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw std::domain_error("step must be positive and finite");
  }
}

}  // namespace

std::vector<double> gl_weights(double order, std::size_t kernel_len) {
  check_gl_order(order);
  check_len(kernel_len);
  std::vector<double> w(kernel_len);
  w[0] = 1.0;
  for (std::size_t k = 1; k < kernel_len; ++k) {
    w[k] = w[k - 1] * (1.0 - (order + 1.0) / static_cast<double>(k));
  }
  return w;
}

std::vector<double> caputo_l1_coeffs(double order, std::size_t kernel_len) {
  check_caputo_order(order);
  check_len(kernel_len);
  const double p = 1.0 - order;
  std::vector<double> b(kernel_len);
  // 0^p is 0 for p > 0 but pow(0, 0) == 1; b_0 is 1 in both cases.
  b[0] = 1.0;
  for (std::size_t j = 1; j < kernel_len; ++j) {
    const auto jd = static_cast<double>(j);
    b[j] = std::pow(jd + 1.0, p) - std::pow(jd, p);
  }
  return b;
}

FractionalKernel::FractionalKernel(OperatorKind kind, double order, std::size_t kernel_len,
                                   double step)
    : kind_(kind), order_(order), step_(step) {
  check_step(step);
  if (kind == OperatorKind::GL) {
    weights_ = gl_weights(order, kernel_len);
    scale_ = std::pow(step, -order);
  } else {
    weights_ = caputo_l1_coeffs(order, kernel_len);
    scale_ = std::pow(step, -order) / std::tgamma(2.0 - order);
  }
}

double FractionalKernel::at(std::span<const double> signal, std::size_t n) const {
  if (n >= signal.size()) throw std::out_of_range("derivative index past end of signal");
  const std::size_t K = weights_.size();
  double acc = 0.0;
  if (kind_ == OperatorKind::GL) {
    const std::size_t terms = std::min(n + 1, K);
    for (std::size_t k = 0; k < terms; ++k) acc += weights_[k] * signal[n - k];
  } else {
    const std::size_t terms = std::min(n, K);
    for (std::size_t j = 0; j < terms; ++j) {
      acc += weights_[j] * (signal[n - j] - signal[n - j - 1]);
    }
  }
  return scale_ * acc;
}

std::vector<double> FractionalKernel::apply(std::span<const double> signal) const {
  if (signal.empty()) throw std::domain_error("cannot differentiate an empty signal");
  if (kind_ == OperatorKind::Caputo && signal.size() < 2) {
    throw std::domain_error("Caputo derivative needs at least 2 samples");
  }
  std::vector<double> out(signal.size());
  for (std::size_t n = 0; n < signal.size(); ++n) out[n] = at(signal, n);
  return out;
}

std::vector<double> gl_derivative(std::span<const double> signal, double order,
                                  std::size_t kernel_len, double step) {
  if (signal.empty()) throw std::domain_error("cannot differentiate an empty signal");
  return FractionalKernel(OperatorKind::GL, order, kernel_len, step).apply(signal);
}

std::vector<double> caputo_derivative(std::span<const double> signal, double order,
                                      std::size_t kernel_len, double step) {
  if (signal.size() < 2) throw std::domain_error("Caputo derivative needs at least 2 samples");
  return FractionalKernel(OperatorKind::Caputo, order, kernel_len, step).apply(signal);
}

}  // namespace fomads::fracdiff
