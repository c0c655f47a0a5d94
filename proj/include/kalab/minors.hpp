#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kalab/kernels.hpp"
#include "kalab/model.hpp"
#include "kalab/targets.hpp"

namespace kalab {

/// Per-example size-k minor matrices J^(k)(x) of an ensemble of m x n
/// Jacobians. Row r stands for the hidden-unit tuple row_tuples[r], column c
/// for the input tuple col_tuples[c]; entries are |det| and stored flat as
/// examples x rows x cols.
struct MinorEnsemble {
  std::size_t k = 0, m = 0, n = 0, examples = 0;
  std::vector<IndexTuple> row_tuples;
  std::vector<IndexTuple> col_tuples;
  std::vector<double> values;

  std::size_t rows() const { return row_tuples.size(); }
  std::size_t cols() const { return col_tuples.size(); }
  std::size_t block() const { return rows() * cols(); }
  std::span<const double> example(std::size_t e) const {
    return {values.data() + e * block(), block()};
  }
  double at(std::size_t e, std::size_t r, std::size_t c) const {
    return values[(e * rows() + r) * cols() + c];
  }

  static MinorEnsemble from_jacobians(std::span<const Matrix> jacobians, std::size_t k);
  static MinorEnsemble from_model(const MlpModel& model, const Dataset& data, std::size_t k);
};

/// Inner-map Jacobians of model at every input of data.
std::vector<Matrix> jacobians(const MlpModel& model, const Dataset& data);

/// C(m,k) x C(n,k) matrix of |k x k minors| of J. Throws unless
/// 1 <= k <= min(m, n, 3).
Matrix exterior_power(const Matrix& J, std::size_t k);

/// Per-(example, row) mean over columns, flat examples x rows.
std::vector<double> row_means(const MinorEnsemble& ensemble);

/// False-positive rate induced at size k by a size-1 rate q1:
/// 1 - C(m (1 - q1), k) / C(m, k), with real binomials through log-gamma.
double derive_qk(double q1, std::size_t m, std::size_t k);

struct ZeroRowReport {
  std::size_t k = 0, m = 0, examples = 0, rows = 0;
  double q1 = 0.0;
  double qk = 0.0;
  double threshold = 0.0;  // Q^(k), quantile of the pooled baseline row means
  std::vector<std::uint8_t> flags;  // examples x rows, 1 = zero row
  double zero_percent = 0.0;         // mean over examples of the per-example percentage
  double zero_percent_pooled = 0.0;  // over all (example, row) pairs

  bool is_zero(std::size_t e, std::size_t r) const { return flags[e * rows + r] != 0; }
};

/// Flags rows whose mean lies strictly below Q^(k) = quantile(baseline, q^(k)).
/// Both mean buffers are examples x rows; throws if their sizes differ.
ZeroRowReport detect_zero_rows(std::span<const double> trained_means,
                               std::span<const double> baseline_means, std::size_t examples,
                               std::size_t m, std::size_t k, double q1);
ZeroRowReport detect_zero_rows(const MinorEnsemble& trained, const MinorEnsemble& baseline,
                               double q1);

struct ConsistencyReport {
  double threshold = 0.99;
  std::vector<std::size_t> consistent_rows;  // rows zero on >= threshold of examples
  double consistent_percent = 0.0;    // zero rows that belong to consistent rows
  double inconsistent_percent = 0.0;  // the remaining, example-dependent zero rows
};

ConsistencyReport classify_consistent(const ZeroRowReport& report, double threshold = 0.99);

struct DependentReport {
  double dependent2_percent = 0.0;
  double dependent3_percent = 0.0;
  std::vector<std::uint8_t> dependent2;  // examples x C(m,2)
  std::vector<std::uint8_t> dependent3;  // examples x C(m,3), empty when not given
};

/// A size-2 zero row (i,j) is dependent when neither i nor j is a size-1 zero
/// row for that example; a size-3 zero row (i,j,l) when none of its pairs is
/// a size-2 zero row. Percentages are over all rows, averaged over examples.
DependentReport classify_dependent(const ZeroRowReport& size1, const ZeroRowReport& size2,
                                   const ZeroRowReport* size3 = nullptr);

/// Binary little-endian float64 values at `stem`.bin plus a JSON sidecar
/// `stem`.json with shapes and index maps.
void write_spill(const std::string& stem, const MinorEnsemble& ensemble);
MinorEnsemble read_spill(const std::string& stem);

}  // namespace kalab
