#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "kalab/minors.hpp"

namespace kalab {

struct ParticipationStats {
  double mean = 0.0;
  double stddev = 0.0;
  double std_err = 0.0;
  std::size_t excluded = 0;  // examples whose minor matrix is identically zero
  std::vector<double> per_example;
};

/// L1 / L2 of each example's flattened minor matrix, averaged over examples.
ParticipationStats participation_ratio(const MinorEnsemble& ensemble);
ParticipationStats participation_ratio(std::span<const double> values, std::size_t examples);

/// sqrt(C(m,k) C(n,k)), the value for a constant matrix.
double pr_max(std::size_t m, std::size_t n, std::size_t k);

/// N independent Haar rotations of SO(m).
std::vector<Matrix> make_rotations(std::size_t m, std::size_t count, RngStream& rng);

struct RotationRatioReport {
  std::size_t rotations = 0;
  std::size_t kmax = 0;
  std::array<double, 3> mean{};
  std::array<double, 3> std_err{};
  std::array<std::size_t, 3> excluded{};  // examples with a vanishing denominator
  std::array<double, 3> max_minor_mean{};  // mean over examples of M^(k)(x)
};

/// r(x) = M^(k)(x) / mean_p m_p^(k)(x), averaged over examples, for
/// k = 1..kmax. The same rotations are applied to every example.
RotationRatioReport random_rotation_ratio(std::span<const Matrix> jacobians,
                                          std::span<const Matrix> rotations, std::size_t kmax);

enum class ColumnNorm { Softmax, L1 };

/// Column distributions of every example: entries are normalized down each
/// column (softmax at unit temperature, or division by the column sum).
struct ColumnDistributions {
  std::size_t examples = 0, rows = 0, cols = 0;
  std::vector<double> values;  // examples x rows x cols
};

ColumnDistributions column_probabilities(const MinorEnsemble& ensemble,
                                         ColumnNorm norm = ColumnNorm::Softmax);

/// Shannon entropy of each column in log base `rows`, averaged over columns
/// and then examples.
double column_entropy(const ColumnDistributions& p);

/// KL(P || Q) per column in log base `rows`, averaged over columns and then
/// examples. Shapes must agree.
double column_divergence(const ColumnDistributions& p, const ColumnDistributions& q);

struct TailReport {
  std::vector<double> ranks;      // quantile ranks q with a non-empty exceedance set
  std::vector<double> threshold;  // u = Q(q)
  std::vector<double> mef;        // mean of X - u over X > u
  double fit_lo = 0.90, fit_hi = 0.99;
  double slope = 0.0;      // least-squares MEF against u within the fit window
  double intercept = 0.0;
  std::size_t fit_points = 0;
};

/// Default rank grid: 101 evenly spaced points on [0.90, 0.999].
std::vector<double> mef_rank_grid(double lo = 0.90, double hi = 0.999, std::size_t points = 101);

/// Mean excess function at u = Q(q) for q on `ranks`. Requires at least 100
/// samples.
TailReport mean_excess(std::span<const double> values, std::span<const double> ranks,
                       double fit_lo = 0.90, double fit_hi = 0.99);

struct Histogram {
  std::vector<double> edges;  // bins + 1 ascending edges
  std::vector<std::size_t> counts;
  std::size_t clamped = 0;  // values below the floor, counted in the first bin
};

/// Log-spaced bins from `floor` to the largest value; smaller values are
/// clamped to the floor.
Histogram log_histogram(std::span<const double> values, std::size_t bins = 60,
                        double floor = 1e-16);

}  // namespace kalab
