#include "kalab/targets.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "kalab/io.hpp"

namespace kalab {

std::string to_string(Family f) {
  switch (f) {
    case Family::Xor: return "xor";
    case Family::Linear: return "linear";
    case Family::Random: return "random";
    case Family::LambdaXor: return "lambda_xor";
    case Family::SoXor: return "so_xor";
    case Family::Gaussian: return "gaussian";
  }
  return "unknown";
}

Family family_from_string(const std::string& name) {
  if (name == "xor") return Family::Xor;
  if (name == "linear") return Family::Linear;
  if (name == "random") return Family::Random;
  if (name == "lambda_xor") return Family::LambdaXor;
  if (name == "so_xor") return Family::SoXor;
  if (name == "gaussian") return Family::Gaussian;
  throw std::invalid_argument("unknown target family '" + name + "'");
}

TargetFunction TargetFunction::xor_fn(std::size_t n) { return TargetFunction(Family::Xor, n); }

TargetFunction TargetFunction::linear(std::size_t n, RngStream& rng) {
  std::vector<double> c(n);
  for (double& v : c) v = rng.uniform(-1.0, 1.0);
  const double c0 = rng.uniform(-1.0, 1.0);
  return linear(std::move(c), c0);
}

TargetFunction TargetFunction::linear(std::vector<double> c, double c0) {
  TargetFunction f(Family::Linear, c.size());
  f.coeffs_ = std::move(c);
  f.c0_ = c0;
  return f;
}

TargetFunction TargetFunction::random(std::size_t n) { return TargetFunction(Family::Random, n); }

TargetFunction TargetFunction::lambda_xor(std::size_t n, double lambda) {
  TargetFunction f(Family::LambdaXor, n);
  f.param_ = lambda;
  return f;
}

TargetFunction TargetFunction::so_xor(std::size_t n, std::uint64_t alpha) {
  RngStream rng = RngStream::derive(alpha, "so-xor-rotation", {n});
  TargetFunction f = so_xor(sample_orthogonal(n, rng));
  f.param_ = static_cast<double>(alpha);
  return f;
}

TargetFunction TargetFunction::so_xor(Matrix rotation) {
  if (rotation.rows() != rotation.cols())
    throw std::invalid_argument("so_xor: rotation must be square");
  TargetFunction f(Family::SoXor, rotation.rows());
  f.rotation_ = std::move(rotation);
  return f;
}

TargetFunction TargetFunction::gaussian(std::size_t n, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("gaussian: width must be positive");
  TargetFunction f(Family::Gaussian, n);
  f.param_ = lambda;
  return f;
}

double TargetFunction::evaluate(std::span<const double> x) const {
  if (x.size() != n_) throw std::invalid_argument("evaluate: input has wrong dimension");
  constexpr double pi = std::numbers::pi;
  switch (family_) {
    case Family::Xor: {
      double p = 1.0;
      for (double xi : x) p *= std::sin(pi * xi);
      return p;
    }
    case Family::LambdaXor: {
      double p = 1.0;
      for (double xi : x) p *= std::sin(param_ * pi * xi);
      return p;
    }
    case Family::SoXor: {
      double p = 1.0;
      for (std::size_t i = 0; i < n_; ++i) {
        double zi = 0.0;
        for (std::size_t k = 0; k < n_; ++k) zi += rotation_(i, k) * x[k];
        p *= std::sin(pi * zi);
      }
      return p;
    }
    case Family::Linear: {
      double s = c0_;
      for (std::size_t i = 0; i < n_; ++i) s += coeffs_[i] * x[i];
      return s;
    }
    case Family::Gaussian: {
      double s = 0.0;
      for (double xi : x) s += xi * xi;
      return std::exp(-s / (2.0 * param_ * param_));
    }
    case Family::Random:
      throw std::logic_error("random target has no closed form; labels live in the dataset");
  }
  return 0.0;
}

std::string TargetFunction::describe() const {
  std::ostringstream ss;
  ss << to_string(family_) << "(n=" << n_;
  if (family_ == Family::LambdaXor || family_ == Family::Gaussian)
    ss << ", lambda=" << format_double(param_);
  if (family_ == Family::SoXor) ss << ", alpha=" << format_double(param_);
  ss << ")";
  return ss.str();
}

Dataset make_dataset(const TargetFunction& f, std::size_t count, RngStream& rng) {
  if (count == 0) throw std::invalid_argument("make_dataset: need at least one example");
  Dataset d;
  d.seed = rng.seed();
  d.inputs = Matrix(count, f.dim());
  for (double& v : d.inputs.data()) v = rng.uniform(-1.0, 1.0);
  d.labels.resize(count);
  if (f.is_lookup()) {
    for (double& y : d.labels) y = rng.uniform(-1.0, 1.0);
  } else {
    for (std::size_t i = 0; i < count; ++i) d.labels[i] = f.evaluate(d.x(i));
  }
  return d;
}

std::vector<double> relabel(const TargetFunction& f, const Dataset& data) {
  if (f.is_lookup()) return data.labels;
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = f.evaluate(data.x(i));
  return out;
}

std::string dataset_to_csv(const Dataset& data) {
  std::string out;
  for (std::size_t i = 0; i < data.dim(); ++i) out += "x" + std::to_string(i + 1) + ",";
  out += "y\n";
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (double v : data.x(r)) out += format_double(v) + ",";
    out += format_double(data.labels[r]) + "\n";
  }
  return out;
}

Dataset dataset_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset csv: missing header");
  std::size_t columns = 1;
  for (char ch : line) columns += (ch == ',');
  if (columns < 2 || line.substr(line.rfind(',') + 1) != "y")
    throw std::runtime_error("dataset csv: header must be x1..xn,y");
  const std::size_t n = columns - 1;
  std::vector<double> xs;
  std::vector<double> ys;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(row, cell, ',')) {
      const double v = std::stod(cell);
      if (col < n) xs.push_back(v); else ys.push_back(v);
      ++col;
    }
    if (col != columns) throw std::runtime_error("dataset csv: ragged row");
  }
  Dataset d;
  d.inputs = Matrix(ys.size(), n, std::move(xs));
  d.labels = std::move(ys);
  return d;
}

}  // namespace kalab
