#pragma once

#include <span>
#include <vector>

#include "kalab/linalg.hpp"

namespace kalab {

struct DeepMlpGradients {
  Matrix dW1, dW2, dW3;
  std::vector<double> db1, db2;
  double db3 = 0.0;

  DeepMlpGradients() = default;
  DeepMlpGradients(std::size_t n, std::size_t h1, std::size_t h2)
      : dW1(n, h1), dW2(h1, h2), dW3(h2, 1), db1(h1, 0.0), db2(h2, 0.0) {}

  void clear();
  std::vector<std::span<const double>> views() const;
};

/// Two-hidden-layer GeLU network used as a memorization baseline:
///   f(x) = gelu(gelu(x W1 + b1) W2 + b2) W3 + b3.
struct DeepMlp {
  using Gradients = DeepMlpGradients;

  std::size_t n = 0, h1 = 0, h2 = 0;
  Matrix W1, W2, W3;
  std::vector<double> b1, b2;
  double b3 = 0.0;

  DeepMlp() = default;
  DeepMlp(std::size_t inputs, std::size_t hidden1, std::size_t hidden2);

  std::size_t input_dim() const { return n; }
  double predict(std::span<const double> x) const;
  double accumulate_gradient(std::span<const double> x, double y, double scale,
                             DeepMlpGradients& grads) const;
  DeepMlpGradients zero_gradients() const { return DeepMlpGradients(n, h1, h2); }
  std::vector<std::span<double>> parameter_views();
};

/// Weights N(0, 1/fan_in), biases zero.
DeepMlp kaiming_init_deep(std::size_t n, std::size_t h1, std::size_t h2, RngStream& rng);

}  // namespace kalab
