#include "kalab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace kalab {

namespace {

void require_finite(std::span<const double> data) {
  for (double v : data) {
    if (!std::isfinite(v)) throw std::invalid_argument("Matrix: non-finite entry");
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (!std::isfinite(fill)) throw std::invalid_argument("Matrix: non-finite fill value");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw std::invalid_argument("Matrix: data length " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(rows) + "x" +
                                std::to_string(cols));
  }
  require_finite(data_);
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix Matrix::scaled(double c) const {
  Matrix out = *this;
  for (double& v : out.data_) v *= c;
  return out;
}

Matrix operator*(const Matrix& lhs, const Matrix& rhs) {
  if (lhs.cols() != rhs.rows()) throw std::invalid_argument("Matrix product: shape mismatch");
  Matrix out(lhs.rows(), rhs.cols());
  for (std::size_t i = 0; i < lhs.rows(); ++i) {
    for (std::size_t l = 0; l < lhs.cols(); ++l) {
      const double a = lhs(i, l);
      for (std::size_t j = 0; j < rhs.cols(); ++j) out(i, j) += a * rhs(l, j);
    }
  }
  return out;
}

double max_abs_diff(const Matrix& lhs, const Matrix& rhs) {
  if (lhs.rows() != rhs.rows() || lhs.cols() != rhs.cols())
    throw std::invalid_argument("max_abs_diff: shape mismatch");
  double worst = 0.0;
  auto a = lhs.data();
  auto b = rhs.data();
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// ---------------------------------------------------------------------------

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

RngStream RngStream::derive(std::uint64_t seed, std::string_view purpose,
                            std::initializer_list<std::uint64_t> keys) {
  // FNV-1a over the purpose label, folded with the seed and keys.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : purpose) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  std::uint64_t state = mix64(seed ^ mix64(h));
  for (std::uint64_t k : keys) state = mix64(state ^ mix64(k + 0x632be59bd9b4e019ULL));
  return RngStream(state);
}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::size_t RngStream::below(std::size_t n) {
  if (n == 0) throw std::invalid_argument("RngStream::below: empty range");
  // Rejection keeps the draw unbiased.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return static_cast<std::size_t>(x % bound);
}

// ---------------------------------------------------------------------------

double det(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("det: matrix is not square");
  switch (m.rows()) {
    case 1:
      return m(0, 0);
    case 2:
      return det2(m(0, 0), m(0, 1), m(1, 0), m(1, 1));
    case 3:
      return det3(m(0, 0), m(0, 1), m(0, 2), m(1, 0), m(1, 1), m(1, 2), m(2, 0), m(2, 1),
                  m(2, 2));
    default:
      throw std::invalid_argument("det: closed form only for sizes 1..3, got " +
                                  std::to_string(m.rows()));
  }
}

Matrix sample_orthogonal(std::size_t m, RngStream& rng) {
  if (m == 0) throw std::invalid_argument("sample_orthogonal: dimension must be >= 1");
  Matrix a(m, m);
  for (double& v : a.data()) v = rng.normal();

  Matrix q = Matrix::identity(m);
  int reflections = 0;
  std::vector<double> v(m);
  for (std::size_t j = 0; j + 1 < m; ++j) {
    double norm2 = 0.0;
    for (std::size_t i = j; i < m; ++i) norm2 += a(i, j) * a(i, j);
    const double norm = std::sqrt(norm2);
    if (norm == 0.0) continue;
    const double alpha = a(j, j) > 0.0 ? -norm : norm;
    for (std::size_t i = j; i < m; ++i) v[i] = a(i, j);
    v[j] -= alpha;
    double vnorm2 = 0.0;
    for (std::size_t i = j; i < m; ++i) vnorm2 += v[i] * v[i];
    if (vnorm2 == 0.0) continue;
    ++reflections;
    // A <- H A on the trailing block.
    for (std::size_t c = j; c < m; ++c) {
      double dot = 0.0;
      for (std::size_t i = j; i < m; ++i) dot += v[i] * a(i, c);
      const double f = 2.0 * dot / vnorm2;
      for (std::size_t i = j; i < m; ++i) a(i, c) -= f * v[i];
    }
    // Q <- Q H.
    for (std::size_t r = 0; r < m; ++r) {
      double dot = 0.0;
      for (std::size_t i = j; i < m; ++i) dot += q(r, i) * v[i];
      const double f = 2.0 * dot / vnorm2;
      for (std::size_t i = j; i < m; ++i) q(r, i) -= f * v[i];
    }
  }

  // Q D with D = sign(diag R): Haar on O(m). det(Q D) = (-1)^reflections * prod(D).
  int det_sign = (reflections % 2 == 0) ? 1 : -1;
  for (std::size_t j = 0; j < m; ++j) {
    if (a(j, j) < 0.0) {
      det_sign = -det_sign;
      for (std::size_t r = 0; r < m; ++r) q(r, j) = -q(r, j);
    }
  }
  if (det_sign < 0) {
    for (std::size_t r = 0; r < m; ++r) q(r, 0) = -q(r, 0);
  }
  return q;
}

// ---------------------------------------------------------------------------

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty input");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q outside [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::span<const double> values, double q) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return quantile_sorted(sorted, q);
}

double log_gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw std::invalid_argument("log_gamma: argument must be positive and finite");
  return std::lgamma(x);
}

double binomial(double n, double k) {
  if (k < 0.0) throw std::invalid_argument("binomial: negative k");
  if (n < k) return 0.0;
  if (k == 0.0 || n == k) return 1.0;
  return std::exp(log_gamma(n + 1.0) - log_gamma(k + 1.0) - log_gamma(n - k + 1.0));
}

std::size_t choose(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::size_t result = 1;
  for (std::size_t i = 1; i <= k; ++i) result = result * (n - k + i) / i;
  return result;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double std_error(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return sample_stddev(v) / std::sqrt(static_cast<double>(v.size()));
}

}  // namespace kalab
