#include <omp.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kalab/kernels.hpp"

namespace kalab {

std::vector<IndexTuple> combinations(std::size_t count, std::size_t k) {
  if (k < 1 || k > 3) throw std::invalid_argument("combinations: k must be 1, 2 or 3");
  std::vector<IndexTuple> out;
  if (count < k) return out;
  out.reserve(choose(count, k));
  if (k == 1) {
    for (std::size_t i = 0; i < count; ++i) out.push_back({i, 0, 0});
  } else if (k == 2) {
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t j = i + 1; j < count; ++j) out.push_back({i, j, 0});
  } else {
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t j = i + 1; j < count; ++j)
        for (std::size_t l = j + 1; l < count; ++l) out.push_back({i, j, l});
  }
  return out;
}

void fill_minor_matrix(const Matrix& J, std::size_t k, std::span<const IndexTuple> rows,
                       std::span<const IndexTuple> cols, std::span<double> out) {
  std::size_t pos = 0;
  switch (k) {
    case 1:
      for (const auto& r : rows)
        for (const auto& c : cols) out[pos++] = std::abs(J(r[0], c[0]));
      break;
    case 2:
      for (const auto& r : rows)
        for (const auto& c : cols)
          out[pos++] = std::abs(
              det2(J(r[0], c[0]), J(r[0], c[1]), J(r[1], c[0]), J(r[1], c[1])));
      break;
    case 3:
      for (const auto& r : rows)
        for (const auto& c : cols)
          out[pos++] = std::abs(det3(J(r[0], c[0]), J(r[0], c[1]), J(r[0], c[2]),
                                     J(r[1], c[0]), J(r[1], c[1]), J(r[1], c[2]),
                                     J(r[2], c[0]), J(r[2], c[1]), J(r[2], c[2])));
      break;
    default:
      throw std::invalid_argument("fill_minor_matrix: k must be 1, 2 or 3");
  }
}

std::array<double, 3> max_minors(const Matrix& J, std::size_t kmax) {
  const std::size_t m = J.rows();
  const std::size_t n = J.cols();
  std::array<double, 3> best{0.0, 0.0, 0.0};
  if (kmax >= 1) {
    for (double v : J.data()) best[0] = std::max(best[0], std::abs(v));
  }
  if (n == 3 && kmax >= 2) {
    // 2x2 minors of a row pair are the components of the rows' cross
    // product, and a 3x3 minor is a row dotted with a cross product.
    thread_local std::vector<double> cross;
    cross.resize(m * m * 3);
    for (std::size_t j = 0; j < m; ++j) {
      const double a0 = J(j, 0), a1 = J(j, 1), a2 = J(j, 2);
      for (std::size_t l = j + 1; l < m; ++l) {
        const double b0 = J(l, 0), b1 = J(l, 1), b2 = J(l, 2);
        double* c = &cross[(j * m + l) * 3];
        c[0] = a1 * b2 - a2 * b1;
        c[1] = a2 * b0 - a0 * b2;
        c[2] = a0 * b1 - a1 * b0;
        best[1] = std::max({best[1], std::abs(c[0]), std::abs(c[1]), std::abs(c[2])});
      }
    }
    if (kmax >= 3) {
      for (std::size_t i = 0; i < m; ++i) {
        const double r0 = J(i, 0), r1 = J(i, 1), r2 = J(i, 2);
        for (std::size_t j = i + 1; j < m; ++j) {
          for (std::size_t l = j + 1; l < m; ++l) {
            const double* c = &cross[(j * m + l) * 3];
            best[2] = std::max(best[2], std::abs(r0 * c[0] + r1 * c[1] + r2 * c[2]));
          }
        }
      }
    }
    return best;
  }
  if (kmax >= 2) {
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t l = j + 1; l < m; ++l)
        for (std::size_t a = 0; a < n; ++a)
          for (std::size_t b = a + 1; b < n; ++b)
            best[1] = std::max(best[1], std::abs(det2(J(j, a), J(j, b), J(l, a), J(l, b))));
  }
  if (kmax >= 3) {
    const auto rows = combinations(m, 3);
    const auto cols = combinations(n, 3);
    for (const auto& r : rows)
      for (const auto& c : cols)
        best[2] = std::max(best[2], std::abs(det3(J(r[0], c[0]), J(r[0], c[1]), J(r[0], c[2]),
                                                  J(r[1], c[0]), J(r[1], c[1]), J(r[1], c[2]),
                                                  J(r[2], c[0]), J(r[2], c[1]), J(r[2], c[2]))));
  }
  return best;
}

void set_worker_count(int workers) {
  if (workers > 0) omp_set_num_threads(workers);
}

namespace omp {

std::vector<double> minor_ensemble(std::span<const Matrix> jacobians, std::size_t k) {
  if (jacobians.empty()) return {};
  const std::size_t m = jacobians.front().rows();
  const std::size_t n = jacobians.front().cols();
  if (k < 1 || k > std::min<std::size_t>({m, n, 3}))
    throw std::invalid_argument("minor_ensemble: k out of range");
  const auto rows = combinations(m, k);
  const auto cols = combinations(n, k);
  const std::size_t block = rows.size() * cols.size();
  std::vector<double> out(jacobians.size() * block);
  const auto count = static_cast<std::ptrdiff_t>(jacobians.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t e = 0; e < count; ++e) {
    fill_minor_matrix(jacobians[e], k, rows, cols,
                      std::span<double>(out.data() + static_cast<std::size_t>(e) * block, block));
  }
  return out;
}

std::vector<RotationMaxima> rotation_maxima(std::span<const Matrix> jacobians,
                                            std::span<const Matrix> rotations,
                                            std::size_t kmax) {
  std::vector<RotationMaxima> out(jacobians.size());
  if (jacobians.empty()) return out;
  const std::size_t m = jacobians.front().rows();
  const std::size_t n = jacobians.front().cols();
  const auto count = static_cast<std::ptrdiff_t>(jacobians.size());
  const double inv_n = rotations.empty() ? 0.0 : 1.0 / static_cast<double>(rotations.size());
#pragma omp parallel
  {
    Matrix rotated(m, n);
#pragma omp for schedule(dynamic, 8)
    for (std::ptrdiff_t e = 0; e < count; ++e) {
      const Matrix& J = jacobians[e];
      RotationMaxima rm;
      rm.own = max_minors(J, kmax);
      std::array<double, 3> sums{0.0, 0.0, 0.0};
      for (const Matrix& R : rotations) {
        for (std::size_t r = 0; r < m; ++r) {
          double* dst = rotated.row(r).data();
          std::fill(dst, dst + n, 0.0);
          const double* rrow = R.row(r).data();
          for (std::size_t l = 0; l < m; ++l) {
            const double w = rrow[l];
            const double* src = J.row(l).data();
            for (std::size_t c = 0; c < n; ++c) dst[c] += w * src[c];
          }
        }
        const auto mx = max_minors(rotated, kmax);
        for (std::size_t k = 0; k < 3; ++k) sums[k] += mx[k];
      }
      for (std::size_t k = 0; k < 3; ++k) rm.rotated_mean[k] = sums[k] * inv_n;
      out[static_cast<std::size_t>(e)] = rm;
    }
  }
  return out;
}

}  // namespace omp
}  // namespace kalab
