#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kalab/linalg.hpp"

namespace kalab {

/// GeLU with the exact normal CDF: z * Phi(z).
double gelu(double z);
/// d/dz gelu(z) = Phi(z) + z * phi(z).
double gelu_prime(double z);

struct ForwardTrace {
  std::vector<double> z;  // pre-activations x . A + a
  std::vector<double> h;  // gelu(z)
  double y_hat = 0.0;
};

/// Parameter gradients with the shapes of MlpModel.
struct MlpGradients {
  Matrix dA;               // n x m
  std::vector<double> da;  // m
  Matrix dB;               // m x 1
  double db = 0.0;

  MlpGradients() = default;
  MlpGradients(std::size_t n, std::size_t m) : dA(n, m), da(m, 0.0), dB(m, 1), db(0.0) {}

  void clear();
  std::vector<std::span<const double>> views() const;
};

/// One-hidden-layer GeLU network  f(x) = gelu(x . A + a) . B + b.
///
/// A is n x m (inputs by hidden units), a has length m, B is m x 1, b scalar.
struct MlpModel {
  using Gradients = MlpGradients;

  std::size_t n = 0;
  std::size_t m = 0;
  Matrix A;
  std::vector<double> a;
  Matrix B;
  double b = 0.0;

  MlpModel() = default;
  MlpModel(std::size_t n_inputs, std::size_t hidden);

  std::size_t input_dim() const { return n; }

  ForwardTrace forward(std::span<const double> x) const;
  double predict(std::span<const double> x) const;

  /// m x n Jacobian of x -> gelu(x . A + a):  J(j, i) = gelu'(z_j) A(i, j).
  Matrix inner_jacobian(std::span<const double> x) const;

  /// Hidden activations gelu(x . A + a).
  std::vector<double> features(std::span<const double> x) const;

  /// Gradient of (y_hat - y)^2 for one example.
  MlpGradients backward(std::span<const double> x, double y) const;
  /// grads += scale * gradient of (y_hat - y)^2; returns y_hat.
  double accumulate_gradient(std::span<const double> x, double y, double scale,
                             MlpGradients& grads) const;

  MlpGradients zero_gradients() const { return MlpGradients(n, m); }
  std::vector<std::span<double>> parameter_views();

  bool operator==(const MlpModel&) const = default;
};

/// A ~ N(0, 1/n), B ~ N(0, 1/m), a = 0, b = 0.
MlpModel kaiming_init(std::size_t n, std::size_t m, RngStream& rng);

/// Model plus the provenance stored next to it on disk.
struct Checkpoint {
  MlpModel model;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  nlohmann::json meta = nlohmann::json::object();
};

/// Self-describing JSON; parameters are hex-encoded IEEE-754 bit patterns so
/// a load reproduces the saved model bit for bit.
nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

std::string encode_hex(double v);
double decode_hex(const std::string& s);

}  // namespace kalab
