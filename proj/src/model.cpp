#include "kalab/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "kalab/io.hpp"

namespace kalab {

double gelu(double z) { return z * (0.5 * std::erfc(-z / std::numbers::sqrt2)); }

double gelu_prime(double z) {
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * z * z) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2);
  return cdf + z * pdf;
}

void MlpGradients::clear() {
  for (double& v : dA.data()) v = 0.0;
  std::fill(da.begin(), da.end(), 0.0);
  for (double& v : dB.data()) v = 0.0;
  db = 0.0;
}

std::vector<std::span<const double>> MlpGradients::views() const {
  return {dA.data(), da, dB.data(), std::span<const double>(&db, 1)};
}

MlpModel::MlpModel(std::size_t n_inputs, std::size_t hidden)
    : n(n_inputs), m(hidden), A(n_inputs, hidden), a(hidden, 0.0), B(hidden, 1), b(0.0) {}

namespace {

// Forward pass into caller-owned buffers. With `slope` non-null the GeLU
// derivative is filled in too, sharing the one erfc per unit.
double forward_impl(const MlpModel& mdl, std::span<const double> x, std::vector<double>& z,
                    std::vector<double>& h, std::vector<double>* slope) {
  if (x.size() != mdl.n) throw std::invalid_argument("forward: input has wrong dimension");
  z.assign(mdl.a.begin(), mdl.a.end());
  for (std::size_t i = 0; i < mdl.n; ++i) {
    const auto row = mdl.A.row(i);
    for (std::size_t j = 0; j < mdl.m; ++j) z[j] += x[i] * row[j];
  }
  h.resize(mdl.m);
  if (slope) slope->resize(mdl.m);
  double y = mdl.b;
  for (std::size_t j = 0; j < mdl.m; ++j) {
    const double cdf = 0.5 * std::erfc(-z[j] / std::numbers::sqrt2);
    h[j] = z[j] * cdf;
    if (slope) {
      const double pdf =
          std::exp(-0.5 * z[j] * z[j]) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2);
      (*slope)[j] = cdf + z[j] * pdf;
    }
    y += h[j] * mdl.B(j, 0);
  }
  return y;
}

}  // namespace

ForwardTrace MlpModel::forward(std::span<const double> x) const {
  ForwardTrace t;
  t.y_hat = forward_impl(*this, x, t.z, t.h, nullptr);
  return t;
}

double MlpModel::predict(std::span<const double> x) const {
  thread_local std::vector<double> z, h;
  return forward_impl(*this, x, z, h, nullptr);
}

std::vector<double> MlpModel::features(std::span<const double> x) const {
  return forward(x).h;
}

Matrix MlpModel::inner_jacobian(std::span<const double> x) const {
  const ForwardTrace t = forward(x);
  Matrix J(m, n);
  for (std::size_t j = 0; j < m; ++j) {
    const double s = gelu_prime(t.z[j]);
    for (std::size_t i = 0; i < n; ++i) J(j, i) = s * A(i, j);
  }
  return J;
}

double MlpModel::accumulate_gradient(std::span<const double> x, double y, double scale,
                                     MlpGradients& g) const {
  thread_local std::vector<double> z, h, slope;
  const double y_hat = forward_impl(*this, x, z, h, &slope);
  const double dy = 2.0 * (y_hat - y) * scale;
  g.db += dy;
  for (std::size_t j = 0; j < m; ++j) {
    g.dB(j, 0) += dy * h[j];
    const double dz = dy * B(j, 0) * slope[j];
    g.da[j] += dz;
    for (std::size_t i = 0; i < n; ++i) g.dA(i, j) += x[i] * dz;
  }
  return y_hat;
}

MlpGradients MlpModel::backward(std::span<const double> x, double y) const {
  MlpGradients g(n, m);
  accumulate_gradient(x, y, 1.0, g);
  return g;
}

std::vector<std::span<double>> MlpModel::parameter_views() {
  return {A.data(), a, B.data(), std::span<double>(&b, 1)};
}

MlpModel kaiming_init(std::size_t n, std::size_t m, RngStream& rng) {
  if (n == 0 || m == 0) throw std::invalid_argument("kaiming_init: dimensions must be >= 1");
  MlpModel model(n, m);
  const double sd_a = 1.0 / std::sqrt(static_cast<double>(n));
  const double sd_b = 1.0 / std::sqrt(static_cast<double>(m));
  for (double& v : model.A.data()) v = sd_a * rng.normal();
  for (double& v : model.B.data()) v = sd_b * rng.normal();
  return model;
}

// ---------------------------------------------------------------------------

std::string encode_hex(double v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(v)));
  return buf;
}

double decode_hex(const std::string& s) {
  if (s.size() != 16) throw std::invalid_argument("decode_hex: expected 16 hex digits");
  std::size_t used = 0;
  const unsigned long long bits = std::stoull(s, &used, 16);
  if (used != 16) throw std::invalid_argument("decode_hex: malformed value '" + s + "'");
  return std::bit_cast<double>(static_cast<std::uint64_t>(bits));
}

namespace {

nlohmann::json encode_array(std::span<const double> values) {
  nlohmann::json out = nlohmann::json::array();
  for (double v : values) out.push_back(encode_hex(v));
  return out;
}

std::vector<double> decode_array(const nlohmann::json& arr, std::size_t expected,
                                 const char* name) {
  if (!arr.is_array() || arr.size() != expected)
    throw std::runtime_error(std::string("checkpoint: field '") + name + "' has wrong length");
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& v : arr) out.push_back(decode_hex(v.get<std::string>()));
  return out;
}

}  // namespace

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt) {
  const MlpModel& mdl = ckpt.model;
  nlohmann::json doc;
  doc["format"] = "kalab-checkpoint";
  doc["version"] = 1;
  doc["encoding"] = "ieee754-binary64-hex";
  doc["n"] = mdl.n;
  doc["m"] = mdl.m;
  doc["seed"] = ckpt.seed;
  doc["epoch"] = ckpt.epoch;
  doc["A"] = encode_array(mdl.A.data());
  doc["a"] = encode_array(mdl.a);
  doc["B"] = encode_array(mdl.B.data());
  doc["b"] = encode_hex(mdl.b);
  doc["meta"] = ckpt.meta;
  return doc;
}

Checkpoint checkpoint_from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "kalab-checkpoint")
    throw std::runtime_error("checkpoint: not a kalab checkpoint document");
  Checkpoint ckpt;
  const auto n = doc.at("n").get<std::size_t>();
  const auto m = doc.at("m").get<std::size_t>();
  ckpt.model = MlpModel(n, m);
  ckpt.model.A = Matrix(n, m, decode_array(doc.at("A"), n * m, "A"));
  ckpt.model.a = decode_array(doc.at("a"), m, "a");
  ckpt.model.B = Matrix(m, 1, decode_array(doc.at("B"), m, "B"));
  ckpt.model.b = decode_hex(doc.at("b").get<std::string>());
  ckpt.seed = doc.at("seed").get<std::uint64_t>();
  ckpt.epoch = doc.at("epoch").get<std::size_t>();
  if (doc.contains("meta")) ckpt.meta = doc.at("meta");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file_atomic(path, checkpoint_to_json(ckpt).dump(1) + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
  return checkpoint_from_json(nlohmann::json::parse(read_file(path)));
}

}  // namespace kalab
