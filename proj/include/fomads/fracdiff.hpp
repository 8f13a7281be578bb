#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Discrete fractional-order differentiation of uniformly sampled signals.
//
// Both operators use a short-memory kernel of K samples. Output n only sees
// samples [n-K+1, n] (GL) or the K most recent first differences (Caputo);
// where fewer samples exist, only the available history is used, so the
// output length always equals the input length.

namespace fomads::fracdiff {

enum class OperatorKind { Caputo, GL };

/// GL weights w_k = (-1)^k binom(order, k), k < kernel_len, by the
/// recurrence w_k = w_{k-1} (1 - (order + 1) / k).
/// Throws std::domain_error unless 0 < order < 1 and kernel_len >= 1.
std::vector<double> gl_weights(double order, std::size_t kernel_len);

/// L1-scheme coefficients b_j = (j+1)^(1-order) - j^(1-order), j < kernel_len.
/// Accepts order == 1 as the integer limit (b = [1, 0, 0, ...]), which the
/// sensitivity sweep uses for its alpha = 1.0 column.
std::vector<double> caputo_l1_coeffs(double order, std::size_t kernel_len);

/// Precomputed convolution weights for one operator. Immutable once built.
class FractionalKernel {
 public:
  FractionalKernel(OperatorKind kind, double order, std::size_t kernel_len, double step);

  OperatorKind kind() const { return kind_; }
  double order() const { return order_; }
  std::size_t kernel_len() const { return weights_.size(); }
  double step() const { return step_; }
  std::span<const double> weights() const { return weights_; }

  /// Multiplier applied to the weighted sum: step^-order for GL,
  /// step^-order / Gamma(2 - order) for Caputo.
  double scale() const { return scale_; }

  /// Derivative estimate at index n using signal[0..n] only.
  double at(std::span<const double> signal, std::size_t n) const;

  /// Derivative series with the same length as the input.
  std::vector<double> apply(std::span<const double> signal) const;

 private:
  OperatorKind kind_;
  double order_;
  double step_;
  double scale_;
  std::vector<double> weights_;
};

/// out[n] = step^-order * sum_{k <= min(n, K-1)} w_k signal[n-k].
/// Throws std::domain_error on an empty signal or step <= 0.
std::vector<double> gl_derivative(std::span<const double> signal, double order,
                                  std::size_t kernel_len, double step);

/// out[0] = 0; out[n] = step^-order / Gamma(2-order) *
/// sum_{j <= min(n-1, K-1)} b_j (signal[n-j] - signal[n-j-1]).
/// Throws std::domain_error when the signal has fewer than 2 samples.
std::vector<double> caputo_derivative(std::span<const double> signal, double order,
                                      std::size_t kernel_len, double step);

}  // namespace fomads::fracdiff
