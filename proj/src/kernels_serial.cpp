#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kalab/kernels.hpp"

namespace kalab::serial {

namespace {

Matrix submatrix(const Matrix& J, const IndexTuple& rows, const IndexTuple& cols, std::size_t k) {
  Matrix sub(k, k);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) sub(a, b) = J(rows[a], cols[b]);
  return sub;
}

std::vector<double> minor_matrix(const Matrix& J, std::size_t k) {
  const auto rows = combinations(J.rows(), k);
  const auto cols = combinations(J.cols(), k);
  std::vector<double> out;
  out.reserve(rows.size() * cols.size());
  for (const auto& r : rows)
    for (const auto& c : cols) out.push_back(std::abs(det(submatrix(J, r, c, k))));
  return out;
}

}  // namespace

std::vector<double> minor_ensemble(std::span<const Matrix> jacobians, std::size_t k) {
  std::vector<double> out;
  for (const Matrix& J : jacobians) {
    if (k < 1 || k > std::min<std::size_t>({J.rows(), J.cols(), 3}))
      throw std::invalid_argument("minor_ensemble: k out of range");
    const auto block = minor_matrix(J, k);
    out.insert(out.end(), block.begin(), block.end());
  }
  return out;
}

std::vector<RotationMaxima> rotation_maxima(std::span<const Matrix> jacobians,
                                            std::span<const Matrix> rotations,
                                            std::size_t kmax) {
  std::vector<RotationMaxima> out;
  out.reserve(jacobians.size());
  for (const Matrix& J : jacobians) {
    RotationMaxima rm;
    for (std::size_t k = 1; k <= kmax; ++k) {
      const auto own = minor_matrix(J, k);
      rm.own[k - 1] = *std::max_element(own.begin(), own.end());
      double sum = 0.0;
      for (const Matrix& R : rotations) {
        const auto rotated = minor_matrix(R * J, k);
        sum += *std::max_element(rotated.begin(), rotated.end());
      }
      rm.rotated_mean[k - 1] = rotations.empty() ? 0.0 : sum / static_cast<double>(rotations.size());
    }
    out.push_back(rm);
  }
  return out;
}

}  // namespace kalab::serial
