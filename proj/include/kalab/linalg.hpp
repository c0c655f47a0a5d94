#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace kalab {

/// Dense row-major matrix of doubles.
///
/// Every public constructor rejects NaN/Inf, so a Matrix built from external
/// data is finite on arrival. Element access is unchecked in release builds.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  Matrix transpose() const;
  Matrix scaled(double c) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& lhs, const Matrix& rhs);

/// Largest absolute entry of lhs - rhs; shapes must agree.
double max_abs_diff(const Matrix& lhs, const Matrix& rhs);

/// Deterministic random stream (64-bit Mersenne twister).
///
/// Uniform and normal variates are derived here rather than through
/// <random> distributions, whose output is implementation-defined; the same
/// seed therefore yields the same values on every platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  /// Stream keyed by a base seed, a purpose label and integer keys. Distinct
  /// (purpose, keys) pairs give statistically independent streams.
  static RngStream derive(std::uint64_t seed, std::string_view purpose,
                          std::initializer_list<std::uint64_t> keys = {});

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// 64-bit mixing used for seed derivation (SplitMix64 finalizer).
std::uint64_t mix64(std::uint64_t x);

/// Closed-form determinants. Arguments are row-major.
inline double det2(double a, double b, double c, double d) { return a * d - b * c; }

inline double det3(double a00, double a01, double a02, double a10, double a11, double a12,
                   double a20, double a21, double a22) {
  return a00 * (a11 * a22 - a12 * a21) - a01 * (a10 * a22 - a12 * a20) +
         a02 * (a10 * a21 - a11 * a20);
}

/// Determinant of a square matrix of size 1, 2 or 3 (cofactor expansion).
/// Throws std::invalid_argument for other shapes.
double det(const Matrix& m);

/// Haar-distributed element of SO(m): Householder QR of a standard Gaussian
/// matrix, signs of R's diagonal moved into Q, then one column flipped if the
/// result has determinant -1.
Matrix sample_orthogonal(std::size_t m, RngStream& rng);

/// Empirical quantile with linear interpolation between order statistics
/// (h = (N - 1) q). Throws on empty input or q outside [0, 1].
double quantile(std::span<const double> values, double q);
/// Same rule on data already sorted ascending.
double quantile_sorted(std::span<const double> sorted, double q);

/// ln Gamma(x) for x > 0.
double log_gamma(double x);

/// Generalized binomial coefficient C(n, k) for real n >= k >= 0, via
/// log-gamma. Returns 0 when n < k.
double binomial(double n, double k);

/// Integer binomial coefficient.
std::size_t choose(std::size_t n, std::size_t k);

double mean(std::span<const double> v);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double sample_stddev(std::span<const double> v);
/// Standard error of the mean, sample_stddev / sqrt(n).
double std_error(std::span<const double> v);

}  // namespace kalab
