#include "kalab/minors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include <json.hpp>

#include "kalab/io.hpp"

namespace kalab {

MinorEnsemble MinorEnsemble::from_jacobians(std::span<const Matrix> jacobians, std::size_t k) {
  MinorEnsemble out;
  if (jacobians.empty()) throw std::invalid_argument("MinorEnsemble: no Jacobians");
  out.k = k;
  out.m = jacobians.front().rows();
  out.n = jacobians.front().cols();
  for (const Matrix& J : jacobians)
    if (J.rows() != out.m || J.cols() != out.n)
      throw std::invalid_argument("MinorEnsemble: Jacobian shapes differ");
  out.examples = jacobians.size();
  out.row_tuples = combinations(out.m, k);
  out.col_tuples = combinations(out.n, k);
  out.values = omp::minor_ensemble(jacobians, k);
  return out;
}

MinorEnsemble MinorEnsemble::from_model(const MlpModel& model, const Dataset& data,
                                        std::size_t k) {
  const auto js = jacobians(model, data);
  return from_jacobians(js, k);
}

std::vector<Matrix> jacobians(const MlpModel& model, const Dataset& data) {
  std::vector<Matrix> out(data.size());
  const auto count = static_cast<std::ptrdiff_t>(data.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t e = 0; e < count; ++e)
    out[static_cast<std::size_t>(e)] = model.inner_jacobian(data.x(static_cast<std::size_t>(e)));
  return out;
}

Matrix exterior_power(const Matrix& J, std::size_t k) {
  if (k < 1 || k > std::min<std::size_t>({J.rows(), J.cols(), 3}))
    throw std::invalid_argument("exterior_power: k out of range");
  const auto rows = combinations(J.rows(), k);
  const auto cols = combinations(J.cols(), k);
  Matrix out(rows.size(), cols.size());
  fill_minor_matrix(J, k, rows, cols, out.data());
  return out;
}

std::vector<double> row_means(const MinorEnsemble& ens) {
  const std::size_t rows = ens.rows(), cols = ens.cols();
  std::vector<double> out(ens.examples * rows);
  const double inv = 1.0 / static_cast<double>(cols);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double* p = ens.values.data() + i * cols;
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += p[c];
    out[i] = s * inv;
  }
  return out;
}

double derive_qk(double q1, std::size_t m, std::size_t k) {
  if (!(q1 >= 0.0 && q1 < 1.0)) throw std::invalid_argument("derive_qk: q1 must lie in [0, 1)");
  if (k == 1) return q1;
  const double kept = static_cast<double>(m) * (1.0 - q1);
  const double kd = static_cast<double>(k);
  if (kept < kd) return 1.0;
  // ratio of generalized binomials, taken in log space
  const double log_ratio = log_gamma(kept + 1.0) - log_gamma(kept - kd + 1.0) -
                           (log_gamma(static_cast<double>(m) + 1.0) -
                            log_gamma(static_cast<double>(m) - kd + 1.0));
  return -std::expm1(log_ratio);
}

ZeroRowReport detect_zero_rows(std::span<const double> trained_means,
                               std::span<const double> baseline_means, std::size_t examples,
                               std::size_t m, std::size_t k, double q1) {
  if (trained_means.size() != baseline_means.size())
    throw std::invalid_argument("detect_zero_rows: trained and baseline shapes differ");
  if (examples == 0 || trained_means.size() % examples != 0)
    throw std::invalid_argument("detect_zero_rows: row-mean buffer is not examples x rows");
  ZeroRowReport rep;
  rep.k = k;
  rep.m = m;
  rep.examples = examples;
  rep.rows = trained_means.size() / examples;
  if (rep.rows != choose(m, k))
    throw std::invalid_argument("detect_zero_rows: row count does not match C(m, k)");
  rep.q1 = q1;
  rep.qk = derive_qk(q1, m, k);
  rep.threshold = quantile(baseline_means, rep.qk);
  rep.flags.assign(trained_means.size(), 0);
  std::size_t total = 0;
  double frac_sum = 0.0;
  for (std::size_t e = 0; e < examples; ++e) {
    std::size_t count = 0;
    for (std::size_t r = 0; r < rep.rows; ++r) {
      const std::size_t i = e * rep.rows + r;
      if (trained_means[i] < rep.threshold) {
        rep.flags[i] = 1;
        ++count;
      }
    }
    total += count;
    frac_sum += static_cast<double>(count) / static_cast<double>(rep.rows);
  }
  rep.zero_percent = 100.0 * frac_sum / static_cast<double>(examples);
  rep.zero_percent_pooled =
      100.0 * static_cast<double>(total) / static_cast<double>(trained_means.size());
  return rep;
}

ZeroRowReport detect_zero_rows(const MinorEnsemble& trained, const MinorEnsemble& baseline,
                               double q1) {
  if (trained.k != baseline.k || trained.m != baseline.m || trained.n != baseline.n ||
      trained.examples != baseline.examples)
    throw std::invalid_argument("detect_zero_rows: ensembles have different shapes");
  const auto t = row_means(trained);
  const auto b = row_means(baseline);
  return detect_zero_rows(t, b, trained.examples, trained.m, trained.k, q1);
}

ConsistencyReport classify_consistent(const ZeroRowReport& rep, double threshold) {
  ConsistencyReport out;
  out.threshold = threshold;
  std::vector<std::uint8_t> consistent(rep.rows, 0);
  for (std::size_t r = 0; r < rep.rows; ++r) {
    std::size_t hits = 0;
    for (std::size_t e = 0; e < rep.examples; ++e) hits += rep.flags[e * rep.rows + r];
    if (static_cast<double>(hits) >= threshold * static_cast<double>(rep.examples)) {
      consistent[r] = 1;
      out.consistent_rows.push_back(r);
    }
  }
  double frac_sum = 0.0;
  for (std::size_t e = 0; e < rep.examples; ++e) {
    std::size_t count = 0;
    for (std::size_t r : out.consistent_rows) count += rep.flags[e * rep.rows + r];
    frac_sum += static_cast<double>(count) / static_cast<double>(rep.rows);
  }
  out.consistent_percent = 100.0 * frac_sum / static_cast<double>(rep.examples);
  out.inconsistent_percent = std::max(0.0, rep.zero_percent - out.consistent_percent);
  return out;
}

DependentReport classify_dependent(const ZeroRowReport& s1, const ZeroRowReport& s2,
                                   const ZeroRowReport* s3) {
  if (s1.k != 1 || s2.k != 2 || (s3 && s3->k != 3))
    throw std::invalid_argument("classify_dependent: reports must be sizes 1, 2 (and 3)");
  const std::size_t m = s1.m, E = s1.examples;
  if (s2.m != m || s2.examples != E || (s3 && (s3->m != m || s3->examples != E)))
    throw std::invalid_argument("classify_dependent: reports describe different ensembles");

  const auto pairs = combinations(m, 2);
  std::vector<std::size_t> pair_index(m * m, 0);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    pair_index[pairs[p][0] * m + pairs[p][1]] = p;
  }

  DependentReport out;
  out.dependent2.assign(E * s2.rows, 0);
  double frac2 = 0.0;
  for (std::size_t e = 0; e < E; ++e) {
    std::size_t count = 0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      if (!s2.is_zero(e, p)) continue;
      if (s1.is_zero(e, pairs[p][0]) || s1.is_zero(e, pairs[p][1])) continue;
      out.dependent2[e * s2.rows + p] = 1;
      ++count;
    }
    frac2 += static_cast<double>(count) / static_cast<double>(s2.rows);
  }
  out.dependent2_percent = 100.0 * frac2 / static_cast<double>(E);

  if (s3) {
    const auto triples = combinations(m, 3);
    out.dependent3.assign(E * s3->rows, 0);
    double frac3 = 0.0;
    for (std::size_t e = 0; e < E; ++e) {
      std::size_t count = 0;
      for (std::size_t t = 0; t < triples.size(); ++t) {
        if (!s3->is_zero(e, t)) continue;
        const auto [i, j, l] = triples[t];
        if (s2.is_zero(e, pair_index[i * m + j]) || s2.is_zero(e, pair_index[i * m + l]) ||
            s2.is_zero(e, pair_index[j * m + l]))
          continue;
        out.dependent3[e * s3->rows + t] = 1;
        ++count;
      }
      frac3 += static_cast<double>(count) / static_cast<double>(s3->rows);
    }
    out.dependent3_percent = 100.0 * frac3 / static_cast<double>(E);
  }
  return out;
}

namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r = (r << 8) | ((v >> (8 * i)) & 0xff);
    return r;
  }
  return v;
}

nlohmann::json tuples_json(const std::vector<IndexTuple>& tuples, std::size_t k) {
  auto arr = nlohmann::json::array();
  for (const auto& t : tuples) arr.push_back(std::vector<std::size_t>(t.begin(), t.begin() + k));
  return arr;
}

}  // namespace

void write_spill(const std::string& stem, const MinorEnsemble& ens) {
  std::string bytes(ens.values.size() * 8, '\0');
  for (std::size_t i = 0; i < ens.values.size(); ++i) {
    const std::uint64_t v = to_little(std::bit_cast<std::uint64_t>(ens.values[i]));
    std::memcpy(bytes.data() + 8 * i, &v, 8);
  }
  write_file_atomic(stem + ".bin", bytes);
  nlohmann::json meta = {
      {"format", "kalab-minors"},
      {"version", 1},
      {"dtype", "float64-le"},
      {"layout", "examples x rows x cols"},
      {"k", ens.k},
      {"m", ens.m},
      {"n", ens.n},
      {"examples", ens.examples},
      {"rows", tuples_json(ens.row_tuples, ens.k)},
      {"cols", tuples_json(ens.col_tuples, ens.k)},
  };
  write_file_atomic(stem + ".json", meta.dump(1) + "\n");
}

MinorEnsemble read_spill(const std::string& stem) {
  const auto meta = nlohmann::json::parse(read_file(stem + ".json"));
  if (meta.value("format", "") != "kalab-minors")
    throw std::runtime_error(stem + ".json: not a minor spill sidecar");
  MinorEnsemble ens;
  ens.k = meta.at("k");
  ens.m = meta.at("m");
  ens.n = meta.at("n");
  ens.examples = meta.at("examples");
  ens.row_tuples = combinations(ens.m, ens.k);
  ens.col_tuples = combinations(ens.n, ens.k);
  const std::string bytes = read_file(stem + ".bin");
  if (bytes.size() != ens.examples * ens.block() * 8)
    throw std::runtime_error(stem + ".bin: size does not match sidecar shape");
  ens.values.resize(ens.examples * ens.block());
  for (std::size_t i = 0; i < ens.values.size(); ++i) {
    std::uint64_t v = 0;
    std::memcpy(&v, bytes.data() + 8 * i, 8);
    ens.values[i] = std::bit_cast<double>(to_little(v));
  }
  return ens;
}

}  // namespace kalab
