#include "kalab/concentration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kalab {

ParticipationStats participation_ratio(std::span<const double> values, std::size_t examples) {
  if (examples == 0 || values.size() % examples != 0)
    throw std::invalid_argument("participation_ratio: buffer is not examples x entries");
  const std::size_t block = values.size() / examples;
  ParticipationStats out;
  for (std::size_t e = 0; e < examples; ++e) {
    const auto v = values.subspan(e * block, block);
    double peak = 0.0;
    for (double x : v) peak = std::max(peak, std::abs(x));
    if (peak == 0.0) {
      ++out.excluded;
      continue;
    }
    // scaled by the peak so tiny minors cannot underflow the squares
    double l1 = 0.0, l2 = 0.0;
    for (double x : v) {
      const double s = std::abs(x) / peak;
      l1 += s;
      l2 += s * s;
    }
    out.per_example.push_back(l1 / std::sqrt(l2));
  }
  if (!out.per_example.empty()) {
    out.mean = mean(out.per_example);
    out.stddev = sample_stddev(out.per_example);
    out.std_err = std_error(out.per_example);
  }
  return out;
}

ParticipationStats participation_ratio(const MinorEnsemble& ens) {
  return participation_ratio(ens.values, ens.examples);
}

double pr_max(std::size_t m, std::size_t n, std::size_t k) {
  return std::sqrt(static_cast<double>(choose(m, k)) * static_cast<double>(choose(n, k)));
}

std::vector<Matrix> make_rotations(std::size_t m, std::size_t count, RngStream& rng) {
  std::vector<Matrix> out;
  out.reserve(count);
  for (std::size_t p = 0; p < count; ++p) out.push_back(sample_orthogonal(m, rng));
  return out;
}

RotationRatioReport random_rotation_ratio(std::span<const Matrix> jacobians,
                                          std::span<const Matrix> rotations, std::size_t kmax) {
  if (rotations.empty()) throw std::invalid_argument("random_rotation_ratio: no rotations");
  if (kmax < 1 || kmax > 3) throw std::invalid_argument("random_rotation_ratio: kmax must be 1..3");
  RotationRatioReport rep;
  rep.rotations = rotations.size();
  rep.kmax = kmax;
  const auto maxima = omp::rotation_maxima(jacobians, rotations, kmax);
  for (std::size_t k = 0; k < kmax; ++k) {
    std::vector<double> ratios, own;
    for (const auto& rm : maxima) {
      if (!(rm.rotated_mean[k] > 0.0)) {
        ++rep.excluded[k];
        continue;
      }
      ratios.push_back(rm.own[k] / rm.rotated_mean[k]);
      own.push_back(rm.own[k]);
    }
    if (!ratios.empty()) {
      rep.mean[k] = mean(ratios);
      rep.std_err[k] = std_error(ratios);
      rep.max_minor_mean[k] = mean(own);
    }
  }
  return rep;
}

ColumnDistributions column_probabilities(const MinorEnsemble& ens, ColumnNorm norm) {
  ColumnDistributions out;
  out.examples = ens.examples;
  out.rows = ens.rows();
  out.cols = ens.cols();
  out.values.resize(ens.values.size());
  const std::size_t R = out.rows, C = out.cols;
  for (std::size_t e = 0; e < ens.examples; ++e) {
    const double* src = ens.values.data() + e * R * C;
    double* dst = out.values.data() + e * R * C;
    for (std::size_t c = 0; c < C; ++c) {
      double sum = 0.0;
      if (norm == ColumnNorm::Softmax) {
        double top = -INFINITY;
        for (std::size_t r = 0; r < R; ++r) top = std::max(top, src[r * C + c]);
        for (std::size_t r = 0; r < R; ++r) {
          dst[r * C + c] = std::exp(src[r * C + c] - top);
          sum += dst[r * C + c];
        }
      } else {
        for (std::size_t r = 0; r < R; ++r) {
          dst[r * C + c] = src[r * C + c];
          sum += dst[r * C + c];
        }
        if (sum == 0.0) {
          // an all-zero column carries no direction; treat it as uniform
          for (std::size_t r = 0; r < R; ++r) dst[r * C + c] = 1.0;
          sum = static_cast<double>(R);
        }
      }
      for (std::size_t r = 0; r < R; ++r) dst[r * C + c] /= sum;
    }
  }
  return out;
}

double column_entropy(const ColumnDistributions& p) {
  if (p.rows < 2) throw std::invalid_argument("column_entropy: need at least two rows");
  const double log_base = std::log(static_cast<double>(p.rows));
  const std::size_t R = p.rows, C = p.cols;
  double total = 0.0;
  for (std::size_t e = 0; e < p.examples; ++e) {
    const double* v = p.values.data() + e * R * C;
    double per_example = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < R; ++r) {
        const double x = v[r * C + c];
        if (x > 0.0) s -= x * std::log(x);
      }
      // near-uniform columns overshoot 1 by a few ulps
      per_example += std::min(1.0, s / log_base);
    }
    total += per_example / static_cast<double>(C);
  }
  return total / static_cast<double>(p.examples);
}

double column_divergence(const ColumnDistributions& p, const ColumnDistributions& q) {
  if (p.examples != q.examples || p.rows != q.rows || p.cols != q.cols)
    throw std::invalid_argument("column_divergence: distributions have different shapes");
  if (p.rows < 2) throw std::invalid_argument("column_divergence: need at least two rows");
  const double log_base = std::log(static_cast<double>(p.rows));
  const std::size_t R = p.rows, C = p.cols;
  double total = 0.0;
  for (std::size_t e = 0; e < p.examples; ++e) {
    const double* pv = p.values.data() + e * R * C;
    const double* qv = q.values.data() + e * R * C;
    double per_example = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < R; ++r) {
        const double x = pv[r * C + c];
        if (x > 0.0) s += x * std::log(x / qv[r * C + c]);
      }
      per_example += s / log_base;
    }
    total += per_example / static_cast<double>(C);
  }
  return total / static_cast<double>(p.examples);
}

std::vector<double> mef_rank_grid(double lo, double hi, std::size_t points) {
  if (points < 2 || !(lo < hi)) throw std::invalid_argument("mef_rank_grid: bad range");
  std::vector<double> out(points);
  for (std::size_t i = 0; i < points; ++i)
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  return out;
}

TailReport mean_excess(std::span<const double> values, std::span<const double> ranks,
                       double fit_lo, double fit_hi) {
  if (values.size() < 100) throw std::invalid_argument("mean_excess: need at least 100 samples");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  TailReport rep;
  rep.fit_lo = fit_lo;
  rep.fit_hi = fit_hi;
  for (double q : ranks) {
    const double u = quantile_sorted(sorted, q);
    auto it = std::upper_bound(sorted.begin(), sorted.end(), u);
    if (it == sorted.end()) continue;
    double s = 0.0;
    const auto count = static_cast<double>(sorted.end() - it);
    for (; it != sorted.end(); ++it) s += *it - u;
    rep.ranks.push_back(q);
    rep.threshold.push_back(u);
    rep.mef.push_back(s / count);
  }
  // ordinary least squares of MEF on u over the fit window
  const double tol = 1e-12;
  double su = 0.0, sm = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < rep.ranks.size(); ++i) {
    if (rep.ranks[i] < fit_lo - tol || rep.ranks[i] > fit_hi + tol) continue;
    su += rep.threshold[i];
    sm += rep.mef[i];
    ++n;
  }
  rep.fit_points = n;
  if (n >= 2) {
    const double mu = su / static_cast<double>(n), mm = sm / static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < rep.ranks.size(); ++i) {
      if (rep.ranks[i] < fit_lo - tol || rep.ranks[i] > fit_hi + tol) continue;
      sxy += (rep.threshold[i] - mu) * (rep.mef[i] - mm);
      sxx += (rep.threshold[i] - mu) * (rep.threshold[i] - mu);
    }
    rep.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    rep.intercept = mm - rep.slope * mu;
  }
  return rep;
}

Histogram log_histogram(std::span<const double> values, std::size_t bins, double floor) {
  if (bins == 0 || !(floor > 0.0)) throw std::invalid_argument("log_histogram: bad bins or floor");
  double top = floor;
  for (double v : values) top = std::max(top, v);
  if (top <= floor) top = floor * 10.0;
  const double lo = std::log10(floor), hi = std::log10(top);
  const double width = (hi - lo) / static_cast<double>(bins);
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i)
    h.edges[i] = std::pow(10.0, lo + width * static_cast<double>(i));
  h.counts.assign(bins, 0);
  for (double v : values) {
    if (v < floor) {
      ++h.clamped;
      v = floor;
    }
    auto idx = static_cast<std::size_t>((std::log10(v) - lo) / width);
    h.counts[std::min(idx, bins - 1)]++;
  }
  return h;
}

}  // namespace kalab
