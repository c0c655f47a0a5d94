#include "kalab/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "kalab/deep_mlp.hpp"
#include "kalab/io.hpp"
#include "kalab/model.hpp"
#include "kalab/seeds.hpp"

namespace kalab {

nlohmann::json to_json(const TrainConfig& cfg) {
  nlohmann::json j;
  j["learning_rate"] = cfg.learning_rate;
  j["beta1"] = cfg.beta1;
  j["beta2"] = cfg.beta2;
  j["epsilon"] = cfg.epsilon;
  j["batch_size"] = cfg.batch_size;
  j["max_epochs"] = cfg.max_epochs;
  j["patience"] = cfg.patience;
  j["shuffle_seed"] = cfg.shuffle_seed;
  j["early_stopping_monitor"] = to_string(cfg.monitor);
  if (cfg.stop_at_r2) j["stop_at_r2"] = *cfg.stop_at_r2;
  return j;
}

std::string to_string(LossMonitor m) {
  switch (m) {
    case LossMonitor::BatchMean: return "train_loss_batch_mean";
    case LossMonitor::LastBatch: return "train_loss_last_batch";
    case LossMonitor::FullSet: return "train_loss_full_set";
    case LossMonitor::TestSet: return "test_loss";
  }
  return "unknown";
}

LossMonitor loss_monitor_from_string(const std::string& name) {
  for (auto m : {LossMonitor::BatchMean, LossMonitor::LastBatch, LossMonitor::FullSet,
                 LossMonitor::TestSet})
    if (to_string(m) == name) return m;
  throw std::invalid_argument("unknown early-stopping monitor: " + name);
}

std::string to_string(TrainStatus s) {
  switch (s) {
    case TrainStatus::EarlyStopped: return "early_stopped";
    case TrainStatus::MaxEpochs: return "max_epochs";
    case TrainStatus::ReachedTarget: return "reached_target";
    case TrainStatus::Diverged: return "diverged";
  }
  return "unknown";
}

double r_squared(std::span<const double> predictions, std::span<const double> labels) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("r_squared: length mismatch");
  if (labels.size() < 2) throw std::invalid_argument("r_squared: need at least two labels");
  const double ybar = mean(labels);
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ss_res += (labels[i] - predictions[i]) * (labels[i] - predictions[i]);
    ss_tot += (labels[i] - ybar) * (labels[i] - ybar);
  }
  if (ss_tot == 0.0) throw std::invalid_argument("r_squared: labels are constant");
  return 1.0 - ss_res / ss_tot;
}

template <class Model>
std::vector<double> predict_all(const Model& model, const Dataset& data) {
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = model.predict(data.x(i));
  return out;
}

// ---------------------------------------------------------------------------

Adam::Adam(const TrainConfig& cfg, const std::vector<std::size_t>& block_sizes)
    : lr_(cfg.learning_rate), beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.epsilon) {
  for (std::size_t s : block_sizes) {
    m_.emplace_back(s, 0.0);
    v_.emplace_back(s, 0.0);
  }
}

void Adam::step(const std::vector<std::span<double>>& params,
                const std::vector<std::span<const double>>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw std::invalid_argument("Adam::step: block count mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t blk = 0; blk < params.size(); ++blk) {
    auto p = params[blk];
    auto g = grads[blk];
    auto& m = m_[blk];
    auto& v = v_[blk];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

struct Evaluation {
  double loss = 0.0;
  double r2 = 0.0;
};

template <class Model>
Evaluation evaluate(const Model& model, const Dataset& data, double ss_tot) {
  double ss_res = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double e = model.predict(data.x(i)) - data.labels[i];
    ss_res += e * e;
  }
  return {ss_res / static_cast<double>(data.size()), 1.0 - ss_res / ss_tot};
}

double total_sum_squares(const Dataset& data) {
  const double ybar = mean(data.labels);
  double s = 0.0;
  for (double y : data.labels) s += (y - ybar) * (y - ybar);
  if (s == 0.0) throw std::invalid_argument("train: labels are constant");
  return s;
}

}  // namespace

template <class Model>
TrainRecord<Model> train(const Model& initial, const Dataset& train_set, const TrainConfig& cfg,
                         const Dataset* test_set) {
  const std::size_t count = train_set.size();
  if (cfg.batch_size < 1 || cfg.batch_size > count)
    throw std::invalid_argument("train: batch size must lie in [1, dataset size]");
  if (train_set.dim() != initial.input_dim())
    throw std::invalid_argument("train: dataset dimension does not match the model");
  for (std::size_t i = 1; i < cfg.snapshot_levels.size(); ++i)
    if (!(cfg.snapshot_levels[i] > cfg.snapshot_levels[i - 1]))
      throw std::invalid_argument("train: snapshot levels must be strictly increasing");
  if (cfg.monitor == LossMonitor::TestSet && !test_set)
    throw std::invalid_argument("train: the test-loss monitor needs a test set");

  const auto t0 = std::chrono::steady_clock::now();
  const double ss_tot = total_sum_squares(train_set);
  const double ss_tot_test = test_set ? total_sum_squares(*test_set) : 0.0;

  TrainRecord<Model> rec;
  Model model = initial;
  auto grads = model.zero_gradients();
  std::vector<std::size_t> sizes;
  for (auto v : model.parameter_views()) sizes.push_back(v.size());
  Adam adam(cfg, sizes);
  RngStream shuffle(cfg.shuffle_seed);
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::size_t next_level = 0;
  std::size_t examples = 0;
  std::size_t stale = 0;

  double running_sq_error = 0.0;
  double last_batch_loss = 0.0;

  auto record_epoch = [&](std::size_t epoch) -> bool {
    const Evaluation ev = evaluate(model, train_set, ss_tot);
    EpochStats st;
    st.epoch = epoch;
    st.steps = adam.steps();
    st.examples = examples;
    st.loss = ev.loss;
    st.monitored_loss = ev.loss;
    if (epoch > 0 && cfg.monitor == LossMonitor::BatchMean)
      st.monitored_loss = running_sq_error / static_cast<double>(count);
    if (epoch > 0 && cfg.monitor == LossMonitor::LastBatch) st.monitored_loss = last_batch_loss;
    st.train_r2 = ev.r2;
    if (test_set) {
      const Evaluation tev = evaluate(model, *test_set, ss_tot_test);
      st.test_r2 = tev.r2;
      if (cfg.monitor == LossMonitor::TestSet) st.monitored_loss = tev.loss;
    }
    rec.epochs.push_back(st);
    if (!std::isfinite(ev.loss) || !std::isfinite(st.monitored_loss)) {
      rec.status = TrainStatus::Diverged;
      rec.message = "non-finite training loss at epoch " + std::to_string(epoch);
      return false;
    }
    bool crossed = false;
    while (next_level < cfg.snapshot_levels.size() && ev.r2 >= cfg.snapshot_levels[next_level]) {
      ++next_level;
      crossed = true;
    }
    if (crossed) rec.snapshots.push_back({epoch, ev.r2, model});
    if (st.monitored_loss < rec.best_loss) {
      rec.best_loss = st.monitored_loss;
      rec.best_epoch = epoch;
      rec.best_model = model;
      rec.best_train_r2 = ev.r2;
      rec.best_test_r2 = st.test_r2;
      stale = 0;
    } else {
      ++stale;
    }
    return true;
  };

  auto target_met = [&](double r2) {
    if (!cfg.stop_at_r2 || r2 < *cfg.stop_at_r2) return false;
    if (!rec.target_step) {
      rec.target_step = adam.steps();
      rec.target_examples = examples;
    }
    return true;
  };

  // The criterion is only tested after the first optimizer step.
  bool running = record_epoch(0);

  for (std::size_t epoch = 1; running && epoch <= cfg.max_epochs; ++epoch) {
    // Fisher-Yates with the stream's own unbiased integer draws.
    for (std::size_t i = count - 1; i > 0; --i) std::swap(order[i], order[shuffle.below(i + 1)]);

    bool hit = false;
    running_sq_error = 0.0;
    for (std::size_t start = 0; start < count && !hit; start += cfg.batch_size) {
      const std::size_t stop = std::min(count, start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      grads.clear();
      double batch_sq_error = 0.0;
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t idx = order[k];
        const double y_hat =
            model.accumulate_gradient(train_set.x(idx), train_set.labels[idx], scale, grads);
        batch_sq_error += (y_hat - train_set.labels[idx]) * (y_hat - train_set.labels[idx]);
      }
      running_sq_error += batch_sq_error;
      last_batch_loss = batch_sq_error * scale;
      adam.step(model.parameter_views(), grads.views());
      examples += stop - start;
      if (cfg.evaluate_every_step && cfg.stop_at_r2) {
        hit = target_met(evaluate(model, train_set, ss_tot).r2);
      }
    }

    if (!record_epoch(epoch)) break;
    if (hit || target_met(rec.epochs.back().train_r2)) {
      rec.status = TrainStatus::ReachedTarget;
      break;
    }
    if (stale >= cfg.patience) {
      rec.status = TrainStatus::EarlyStopped;
      break;
    }
  }

  rec.total_steps = adam.steps();
  if (rec.best_model.input_dim() == 0) rec.best_model = initial;
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

// ---------------------------------------------------------------------------

std::vector<double> r2_grid(double step) {
  if (!(step > 0.0 && step < 1.0)) throw std::invalid_argument("r2_grid: step must be in (0,1)");
  std::vector<double> grid;
  for (int i = 1;; ++i) {
    // Rounded to avoid 0.30000000000000004-style levels.
    const double level = std::round(i * step * 1e9) / 1e9;
    if (level >= 1.0) break;
    grid.push_back(level);
  }
  return grid;
}

template <class Model>
Schedule<Model> checkpoint_schedule(const TrainRecord<Model>& record,
                                    std::span<const double> grid) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0 && grid[i] < 1.0))
      throw std::invalid_argument("checkpoint_schedule: levels must lie in (0, 1)");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw std::invalid_argument("checkpoint_schedule: levels must be strictly increasing");
  }
  Schedule<Model> out;
  for (double level : grid) {
    auto it = std::find_if(record.epochs.begin(), record.epochs.end(),
                           [&](const EpochStats& e) { return e.train_r2 >= level; });
    if (it == record.epochs.end()) {
      out.missing.push_back(level);
      continue;
    }
    auto snap = std::find_if(record.snapshots.begin(), record.snapshots.end(),
                             [&](const Snapshot<Model>& s) { return s.epoch == it->epoch; });
    if (snap == record.snapshots.end())
      throw std::invalid_argument("checkpoint_schedule: no snapshot for level " +
                                  format_double(level) + "; it was not in the training grid");
    out.present.push_back({level, it->epoch, it->train_r2, &snap->model});
  }
  return out;
}

template <class Model>
std::string record_to_jsonl(const TrainRecord<Model>& record) {
  std::string out;
  for (const EpochStats& e : record.epochs) {
    nlohmann::json j;
    j["epoch"] = e.epoch;
    j["steps"] = e.steps;
    j["examples"] = e.examples;
    j["loss"] = e.loss;
    j["monitored_loss"] = e.monitored_loss;
    j["train_r2"] = e.train_r2;
    if (std::isfinite(e.test_r2)) j["test_r2"] = e.test_r2; else j["test_r2"] = nullptr;
    out += j.dump() + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

CriticalBatchResult critical_batch_size(const CriticalBatchSpec& spec) {
  CriticalBatchResult res;
  for (std::uint64_t seed : spec.seeds) {
    RngStream init_rng = seeds::model(seed);
    const MlpModel model = kaiming_init(spec.n, spec.m, init_rng);
    RngStream data_rng = seeds::train_data(seed);
    const Dataset data = make_dataset(spec.target, spec.train_size, data_rng);

    for (const std::size_t batch : {spec.small_batch, spec.full_batch}) {
      TrainConfig cfg = spec.base;
      cfg.batch_size = std::min(batch, data.size());
      cfg.shuffle_seed = seeds::shuffle(seed).seed();
      cfg.stop_at_r2 = spec.criterion;
      cfg.evaluate_every_step = true;
      const auto rec = train(model, data, cfg);
      if (!rec.target_step) {
        throw std::runtime_error("critical_batch_size: " + spec.target.describe() + " m=" +
                                 std::to_string(spec.m) + " seed=" + std::to_string(seed) +
                                 " batch=" + std::to_string(batch) +
                                 " never reached R^2 >= " + format_double(spec.criterion));
      }
      if (batch == spec.small_batch) {
        res.examples_per_seed.push_back(*rec.target_examples);
      } else {
        res.steps_per_seed.push_back(*rec.target_step);
      }
    }
  }
  std::vector<double> e(res.examples_per_seed.begin(), res.examples_per_seed.end());
  std::vector<double> s(res.steps_per_seed.begin(), res.steps_per_seed.end());
  res.examples_min = mean(e);
  res.steps_min = mean(s);
  res.batch_size = res.steps_min > 0.0 ? res.examples_min / res.steps_min
                                       : std::numeric_limits<double>::quiet_NaN();
  return res;
}

// ---------------------------------------------------------------------------

template std::vector<double> predict_all(const MlpModel&, const Dataset&);
template std::vector<double> predict_all(const DeepMlp&, const Dataset&);
template TrainRecord<MlpModel> train(const MlpModel&, const Dataset&, const TrainConfig&,
                                     const Dataset*);
template TrainRecord<DeepMlp> train(const DeepMlp&, const Dataset&, const TrainConfig&,
                                    const Dataset*);
template Schedule<MlpModel> checkpoint_schedule(const TrainRecord<MlpModel>&,
                                                std::span<const double>);
template std::string record_to_jsonl(const TrainRecord<MlpModel>&);
template std::string record_to_jsonl(const TrainRecord<DeepMlp>&);

}  // namespace kalab
