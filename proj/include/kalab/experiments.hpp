#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kalab/concentration.hpp"
#include "kalab/training.hpp"

namespace kalab {

enum class ExperimentKind {
  Static,
  Evolution,
  InterpolateLambda,
  InterpolateSo,
  InterpolateGaussian,
  BatchSweep,
  Bootstrap,
};

std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& name);

/// Declarative description of one experiment. Every field has a default, so
/// a config file only lists what it changes; see README for the schema.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Static;
  std::string id;  // defaults to the kind name
  std::size_t n = 3;
  std::vector<std::string> families{"xor", "linear", "random"};
  std::vector<std::size_t> widths{4, 8, 16, 32};
  std::size_t seed_count = 4;
  std::uint64_t first_seed = 0;
  std::size_t batch_size = 250;
  std::vector<std::size_t> batch_sizes{32, 64, 128, 256, 512, 1000};
  std::vector<double> q1{1e-4, 1e-3, 1e-2};
  std::size_t rotations = 400;
  std::uint64_t rotation_seed = 0;
  std::size_t kmax = 3;
  std::size_t train_size = 1000;
  std::size_t test_size = 1000;
  TrainConfig train;
  double r2_step = 0.05;
  std::vector<double> lambdas;           // lambda-xor grid
  std::vector<std::uint64_t> alphas;     // SO-xor rotation labels
  std::vector<double> gaussian_lambdas;  // G^lambda grid
  std::size_t second_width = 32;
  std::size_t expanded_width = 264;
  std::array<std::size_t, 2> deep_widths{32, 32};
  bool plots = true;
  bool spill = false;  // write minor ensembles next to each run
  int workers = 0;     // concurrent jobs; 0 = OpenMP default
  std::string output;
};

/// Defaults for a kind (grids, families and widths mirror the paper).
ExperimentConfig default_config(ExperimentKind kind);
/// Defaults for the named kind overlaid with the fields present in doc.
/// Unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentConfig& cfg);
/// FNV-1a of the canonical (key-sorted) JSON form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// Zero-row statistics of one size k at one base rate q1.
struct ZeroRowSummary {
  double q1 = 0.0, qk = 0.0, threshold = 0.0;
  double zero_percent = 0.0, zero_percent_pooled = 0.0;
  double consistent_percent = 0.0, inconsistent_percent = 0.0;
  std::size_t consistent_rows = 0;
  double dependent_percent = std::numeric_limits<double>::quiet_NaN();  // k >= 2
};

struct SizeMetrics {
  std::size_t k = 0;
  std::vector<ZeroRowSummary> zero;  // one entry per q1
  double pr_mean = 0.0, pr_sd = 0.0, pr_se = 0.0, pr_normalized = 0.0, pr_max = 0.0;
  std::size_t pr_excluded = 0;
  double rrr_mean = std::numeric_limits<double>::quiet_NaN();
  double rrr_se = std::numeric_limits<double>::quiet_NaN();
  double rrr_normalized = std::numeric_limits<double>::quiet_NaN();
  std::size_t rrr_excluded = 0;
  double entropy = 0.0, entropy_initial = 0.0, kl = 0.0;
};

/// All KA metrics of one model state on one dataset, with provenance.
struct MetricReport {
  std::string state;  // "initial", "trained", "checkpoint"
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  double level = std::numeric_limits<double>::quiet_NaN();  // R^2 grid level for checkpoints
  double train_r2 = std::numeric_limits<double>::quiet_NaN();
  double test_r2 = std::numeric_limits<double>::quiet_NaN();
  std::size_t rotations = 0;
  std::vector<SizeMetrics> sizes;
};

nlohmann::json to_json(const MetricReport& r);
MetricReport metric_report_from_json(const nlohmann::json& j);

/// Statistics of the initial model that every later state is compared with.
struct Baseline {
  std::size_t m = 0, n = 0, kmax = 0;
  std::array<std::vector<double>, 3> row_means;
  std::array<ColumnDistributions, 3> probabilities;
  std::array<double, 3> pr{};
  std::array<double, 3> entropy{};
  std::optional<RotationRatioReport> rrr;
};

Baseline make_baseline(const MlpModel& initial, const Dataset& data, std::size_t kmax,
                       const std::vector<Matrix>& rotations);

/// Metrics of `model` against the baseline; rotations may be empty.
MetricReport evaluate_metrics(const MlpModel& model, const Baseline& baseline,
                              const Dataset& data, std::span<const double> q1,
                              const std::vector<Matrix>& rotations);

/// Plot data for one model state: ranked row means (Zipf), log-spaced
/// histograms of minor values and mean excess curves, per k.
nlohmann::json plot_data(const MlpModel& model, const Dataset& data, std::size_t kmax);
/// A^T, B and J(x) grids of a model at one input.
nlohmann::json heatmap_data(const MlpModel& model, std::span<const double> x);

/// One (grid point, seed) unit of work and its outcome.
struct RunResult {
  std::string id;
  std::string status = "ok";  // "ok" or "failed"
  std::string error;
  nlohmann::json info;  // family, parameter, m, batch, seed, ...
  double wall_seconds = 0.0;
};

struct RunManifest {
  std::string root;
  ExperimentConfig config;
  std::vector<RunResult> runs;

  bool ok() const;
  std::size_t failures() const;
};

nlohmann::json to_json(const RunManifest& m);

/// Paper's experiment families. Each writes runs/<id>/ under cfg.output
/// and returns the manifest (also written to manifest.json). A failed run
/// is recorded and the others proceed.
RunManifest run_static(const ExperimentConfig& cfg);
RunManifest run_evolution(const ExperimentConfig& cfg);
RunManifest run_interpolation(const ExperimentConfig& cfg);
RunManifest run_batch_sweep(const ExperimentConfig& cfg);
RunManifest run_bootstrap(const ExperimentConfig& cfg);
/// Dispatch on cfg.kind.
RunManifest run_experiment(const ExperimentConfig& cfg);

/// Trains and saves a single model (CLI `train`).
RunResult run_single(const ExperimentConfig& cfg, const std::string& family, double parameter);

/// Recomputes metrics.json of every run under root from its stored
/// checkpoints and dataset, without retraining. Returns runs processed.
std::size_t recompute_metrics(const std::string& root, const ExperimentConfig& overrides);

/// Target for a family name and parameter (lambda, alpha or G-lambda);
/// linear coefficients come from the seed's target stream.
TargetFunction make_target(const std::string& family, double parameter, std::size_t n,
                           std::uint64_t seed);

}  // namespace kalab
