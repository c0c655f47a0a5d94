#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "kalab/linalg.hpp"

// Per-example kernels over an ensemble of Jacobians.
//
// Two implementations share each signature: `omp` is the fused,
// OpenMP-parallel version used by the library, `serial` is a direct
// transcription of the definitions (explicit submatrices, generic
// determinant) kept as the reference the tests and benchmark compare
// against. Both write per-example results into caller-visible slots, so the
// parallel version is independent of thread count and scheduling.
namespace kalab {

/// Ascending index tuple; only the first k slots are meaningful.
using IndexTuple = std::array<std::size_t, 3>;

/// All k-subsets of {0..count-1} in lexicographic order (k <= 3).
std::vector<IndexTuple> combinations(std::size_t count, std::size_t k);

/// |det| of J restricted to every (row tuple, column tuple) pair, written
/// row-major into out (rows.size() x cols.size()).
void fill_minor_matrix(const Matrix& J, std::size_t k, std::span<const IndexTuple> rows,
                       std::span<const IndexTuple> cols, std::span<double> out);

/// Largest |k x k minor| of J for k = 1..kmax (index k-1 of the result).
std::array<double, 3> max_minors(const Matrix& J, std::size_t kmax);

/// Per-example rotation statistics for one Jacobian: the unrotated maximum
/// minor M[k] and the rotation-averaged maximum mean_p max|minor(R_p J)|.
struct RotationMaxima {
  std::array<double, 3> own{};
  std::array<double, 3> rotated_mean{};
};

namespace serial {

/// Flat examples x rows x cols buffer of minor magnitudes.
std::vector<double> minor_ensemble(std::span<const Matrix> jacobians, std::size_t k);

std::vector<RotationMaxima> rotation_maxima(std::span<const Matrix> jacobians,
                                            std::span<const Matrix> rotations,
                                            std::size_t kmax);

}  // namespace serial

namespace omp {

std::vector<double> minor_ensemble(std::span<const Matrix> jacobians, std::size_t k);

std::vector<RotationMaxima> rotation_maxima(std::span<const Matrix> jacobians,
                                            std::span<const Matrix> rotations,
                                            std::size_t kmax);

}  // namespace omp

/// Sets the OpenMP team size used by the omp kernels (0 leaves the default).
void set_worker_count(int workers);

}  // namespace kalab
