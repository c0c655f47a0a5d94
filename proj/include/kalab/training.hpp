#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kalab/targets.hpp"

namespace kalab {

/// Quantity watched by early stopping.
///   BatchMean: mean squared error of the mini-batches seen during the epoch,
///              each taken before its own update step.
///   LastBatch: mean squared error of the epoch's final mini-batch, taken
///              before its update step.
///   FullSet:   squared error of the whole training set after the epoch.
///   TestSet:   squared error of the held-out set (requires one).
enum class LossMonitor { BatchMean, LastBatch, FullSet, TestSet };
std::string to_string(LossMonitor m);
LossMonitor loss_monitor_from_string(const std::string& name);

struct TrainConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 250;
  std::size_t max_epochs = 10000;
  std::size_t patience = 50;
  std::uint64_t shuffle_seed = 0;
  LossMonitor monitor = LossMonitor::BatchMean;
  /// Train-R^2 levels at whose first crossing a snapshot of the model is kept.
  std::vector<double> snapshot_levels;
  /// Stop as soon as train R^2 reaches this value.
  std::optional<double> stop_at_r2;
  /// Evaluate the full training set after every optimizer step rather than
  /// once per epoch (used to time the first crossing of stop_at_r2).
  bool evaluate_every_step = false;
};

nlohmann::json to_json(const TrainConfig& cfg);

enum class TrainStatus { EarlyStopped, MaxEpochs, ReachedTarget, Diverged };
std::string to_string(TrainStatus s);

struct EpochStats {
  std::size_t epoch = 0;
  std::size_t steps = 0;     // optimizer steps taken so far
  std::size_t examples = 0;  // examples processed so far
  double loss = 0.0;            // full-training-set MSE after this epoch
  double monitored_loss = 0.0;  // value seen by early stopping
  double train_r2 = 0.0;
  double test_r2 = std::numeric_limits<double>::quiet_NaN();
};

template <class Model>
struct Snapshot {
  std::size_t epoch = 0;
  double train_r2 = 0.0;
  Model model;
};

/// Everything a training run produces. epochs[0] describes the initial model.
template <class Model>
struct TrainRecord {
  std::vector<EpochStats> epochs;
  std::vector<Snapshot<Model>> snapshots;
  Model best_model;
  std::size_t best_epoch = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  double best_train_r2 = 0.0;
  double best_test_r2 = std::numeric_limits<double>::quiet_NaN();
  std::size_t total_steps = 0;
  std::optional<std::size_t> target_step;      // first step with R^2 >= stop_at_r2
  std::optional<std::size_t> target_examples;  // examples processed by then
  TrainStatus status = TrainStatus::MaxEpochs;
  std::string message;
  double wall_seconds = 0.0;

  bool ok() const { return status != TrainStatus::Diverged; }
};

/// Coefficient of determination 1 - SS_res / SS_tot. Throws when lengths
/// differ, fewer than two labels are given, or the labels are constant.
double r_squared(std::span<const double> predictions, std::span<const double> labels);

template <class Model>
std::vector<double> predict_all(const Model& model, const Dataset& data);

/// Adam with bias correction over a list of parameter blocks.
class Adam {
 public:
  Adam(const TrainConfig& cfg, const std::vector<std::size_t>& block_sizes);

  void step(const std::vector<std::span<double>>& params,
            const std::vector<std::span<const double>>& grads);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Mini-batch Adam on the mean squared error.
///
/// Each epoch visits the training set once in a fresh shuffle (last short
/// batch kept). After every epoch the full training loss and R^2 are
/// recorded; training stops when the best loss has not improved for
/// `patience` epochs, after `max_epochs`, or when `stop_at_r2` is met. The
/// returned record carries the best-loss model. A non-finite loss ends the
/// run with status Diverged.
template <class Model>
TrainRecord<Model> train(const Model& initial, const Dataset& train_set, const TrainConfig& cfg,
                         const Dataset* test_set = nullptr);

/// One grid level resolved against a training record.
template <class Model>
struct ScheduledCheckpoint {
  double level = 0.0;
  std::size_t epoch = 0;
  double train_r2 = 0.0;
  const Model* model = nullptr;
};

template <class Model>
struct Schedule {
  std::vector<ScheduledCheckpoint<Model>> present;
  std::vector<double> missing;  // levels never crossed
};

/// For each level, the first epoch whose train R^2 reaches it, paired with
/// the snapshot taken there. The grid must be strictly increasing in (0, 1)
/// and every level must have been in cfg.snapshot_levels during training.
template <class Model>
Schedule<Model> checkpoint_schedule(const TrainRecord<Model>& record,
                                    std::span<const double> grid);

/// Evenly spaced levels step, 2 step, ... below 1.
std::vector<double> r2_grid(double step);

/// One JSON object per epoch.
template <class Model>
std::string record_to_jsonl(const TrainRecord<Model>& record);

struct CriticalBatchSpec {
  TargetFunction target = TargetFunction::xor_fn(3);
  std::size_t n = 3;
  std::size_t m = 32;
  double criterion = 0.5;
  std::size_t small_batch = 64;
  std::size_t full_batch = 1000;
  std::size_t train_size = 1000;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3};
  TrainConfig base;
};

struct CriticalBatchResult {
  double batch_size = 0.0;     // E_min / S_min
  double examples_min = 0.0;   // mean examples to criterion at the small batch
  double steps_min = 0.0;      // mean steps to criterion at full batch
  std::vector<std::size_t> examples_per_seed;
  std::vector<std::size_t> steps_per_seed;
};

/// B_c = E_min / S_min with E_min measured at `small_batch` and S_min at
/// `full_batch`; the criterion is checked after every optimizer step.
/// Throws if any run never reaches the criterion.
CriticalBatchResult critical_batch_size(const CriticalBatchSpec& spec);

}  // namespace kalab
