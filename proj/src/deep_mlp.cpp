#include "kalab/deep_mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kalab/model.hpp"

namespace kalab {

void DeepMlpGradients::clear() {
  for (Matrix* w : {&dW1, &dW2, &dW3})
    for (double& v : w->data()) v = 0.0;
  std::fill(db1.begin(), db1.end(), 0.0);
  std::fill(db2.begin(), db2.end(), 0.0);
  db3 = 0.0;
}

std::vector<std::span<const double>> DeepMlpGradients::views() const {
  return {dW1.data(), db1, dW2.data(), db2, dW3.data(), std::span<const double>(&db3, 1)};
}

DeepMlp::DeepMlp(std::size_t inputs, std::size_t hidden1, std::size_t hidden2)
    : n(inputs), h1(hidden1), h2(hidden2), W1(inputs, hidden1), W2(hidden1, hidden2),
      W3(hidden2, 1), b1(hidden1, 0.0), b2(hidden2, 0.0) {}

namespace {

struct DeepTrace {
  std::vector<double> z1, g1, z2, g2;
  double y = 0.0;
};

void run_forward(const DeepMlp& net, std::span<const double> x, DeepTrace& t) {
  if (x.size() != net.n) throw std::invalid_argument("DeepMlp: input has wrong dimension");
  t.z1.assign(net.b1.begin(), net.b1.end());
  for (std::size_t i = 0; i < net.n; ++i) {
    const auto row = net.W1.row(i);
    for (std::size_t j = 0; j < net.h1; ++j) t.z1[j] += x[i] * row[j];
  }
  t.g1.resize(net.h1);
  for (std::size_t j = 0; j < net.h1; ++j) t.g1[j] = gelu(t.z1[j]);
  t.z2.assign(net.b2.begin(), net.b2.end());
  for (std::size_t j = 0; j < net.h1; ++j) {
    const auto row = net.W2.row(j);
    for (std::size_t l = 0; l < net.h2; ++l) t.z2[l] += t.g1[j] * row[l];
  }
  t.g2.resize(net.h2);
  t.y = net.b3;
  for (std::size_t l = 0; l < net.h2; ++l) {
    t.g2[l] = gelu(t.z2[l]);
    t.y += t.g2[l] * net.W3(l, 0);
  }
}

}  // namespace

double DeepMlp::predict(std::span<const double> x) const {
  thread_local DeepTrace t;
  run_forward(*this, x, t);
  return t.y;
}

double DeepMlp::accumulate_gradient(std::span<const double> x, double y, double scale,
                                    DeepMlpGradients& g) const {
  thread_local DeepTrace t;
  thread_local std::vector<double> dz2, dz1;
  run_forward(*this, x, t);
  const double dy = 2.0 * (t.y - y) * scale;
  g.db3 += dy;
  dz2.assign(h2, 0.0);
  for (std::size_t l = 0; l < h2; ++l) {
    g.dW3(l, 0) += dy * t.g2[l];
    dz2[l] = dy * W3(l, 0) * gelu_prime(t.z2[l]);
    g.db2[l] += dz2[l];
  }
  dz1.assign(h1, 0.0);
  for (std::size_t j = 0; j < h1; ++j) {
    const auto wrow = W2.row(j);
    auto grow = g.dW2.row(j);
    double back = 0.0;
    for (std::size_t l = 0; l < h2; ++l) {
      grow[l] += t.g1[j] * dz2[l];
      back += wrow[l] * dz2[l];
    }
    dz1[j] = back * gelu_prime(t.z1[j]);
    g.db1[j] += dz1[j];
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto grow = g.dW1.row(i);
    for (std::size_t j = 0; j < h1; ++j) grow[j] += x[i] * dz1[j];
  }
  return t.y;
}

std::vector<std::span<double>> DeepMlp::parameter_views() {
  return {W1.data(), b1, W2.data(), b2, W3.data(), std::span<double>(&b3, 1)};
}

DeepMlp kaiming_init_deep(std::size_t n, std::size_t h1, std::size_t h2, RngStream& rng) {
  DeepMlp net(n, h1, h2);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(n));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(h1));
  const double s3 = 1.0 / std::sqrt(static_cast<double>(h2));
  for (double& v : net.W1.data()) v = s1 * rng.normal();
  for (double& v : net.W2.data()) v = s2 * rng.normal();
  for (double& v : net.W3.data()) v = s3 * rng.normal();
  return net;
}

}  // namespace kalab
