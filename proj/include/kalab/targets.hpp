#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kalab/linalg.hpp"

namespace kalab {

enum class Family { Xor, Linear, Random, LambdaXor, SoXor, Gaussian };

std::string to_string(Family f);
Family family_from_string(const std::string& name);

/// A synthetic target on [-1, 1]^n.
///
///   xor        prod_i sin(pi x_i)
///   linear     x . c + c0, coefficients uniform on [-1, 1]
///   random     Y ~ U(-1, 1), drawn per example when a dataset is built
///   lambda_xor prod_i sin(lambda pi x_i)
///   so_xor     prod_i sin(pi (O x)_i), O Haar on SO(n)
///   gaussian   prod_i exp(-x_i^2 / (2 lambda^2))
class TargetFunction {
 public:
  static TargetFunction xor_fn(std::size_t n);
  static TargetFunction linear(std::size_t n, RngStream& rng);
  static TargetFunction linear(std::vector<double> c, double c0);
  static TargetFunction random(std::size_t n);
  static TargetFunction lambda_xor(std::size_t n, double lambda);
  /// The rotation is sampled from a stream keyed by alpha.
  static TargetFunction so_xor(std::size_t n, std::uint64_t alpha);
  static TargetFunction so_xor(Matrix rotation);
  static TargetFunction gaussian(std::size_t n, double lambda);

  Family family() const { return family_; }
  std::size_t dim() const { return n_; }
  double parameter() const { return param_; }
  const Matrix& rotation() const { return rotation_; }
  const std::vector<double>& coefficients() const { return coeffs_; }
  double intercept() const { return c0_; }

  /// True for the random family, whose labels are data rather than a
  /// function of x.
  bool is_lookup() const { return family_ == Family::Random; }

  /// Value at x. Throws std::logic_error for the random family: its labels
  /// exist only inside a Dataset.
  double evaluate(std::span<const double> x) const;

  std::string describe() const;

 private:
  TargetFunction(Family f, std::size_t n) : family_(f), n_(n) {}

  Family family_;
  std::size_t n_;
  double param_ = 1.0;
  std::vector<double> coeffs_;
  double c0_ = 0.0;
  Matrix rotation_;
};

struct Dataset {
  Matrix inputs;  // examples x n
  std::vector<double> labels;
  std::uint64_t seed = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return inputs.cols(); }
  std::span<const double> x(std::size_t i) const { return inputs.row(i); }
};

/// Inputs i.i.d. uniform on [-1, 1]^n, then labels. For the random family a
/// uniform(-1, 1) label is drawn per example from the same stream after all
/// inputs, so the labels are fixed data.
Dataset make_dataset(const TargetFunction& f, std::size_t count, RngStream& rng);

/// Labels of `data` re-derived from f (random family: the stored labels).
std::vector<double> relabel(const TargetFunction& f, const Dataset& data);

/// CSV with header x1..xn,y; values in round-trip-exact decimal.
std::string dataset_to_csv(const Dataset& data);
Dataset dataset_from_csv(const std::string& text);

}  // namespace kalab
