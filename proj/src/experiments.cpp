#include "kalab/experiments.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>

#include "kalab/deep_mlp.hpp"
#include "kalab/io.hpp"
#include "kalab/seeds.hpp"

#ifndef KALAB_VERSION
#define KALAB_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace kalab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double num(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

std::vector<double> linspace(double lo, double hi, double step) {
  std::vector<double> out;
  const auto count = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
  for (int i = 0; i <= count; ++i) out.push_back(std::round((lo + i * step) * 1e9) / 1e9);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Static: return "static";
    case ExperimentKind::Evolution: return "evolution";
    case ExperimentKind::InterpolateLambda: return "interpolate_lambda";
    case ExperimentKind::InterpolateSo: return "interpolate_so";
    case ExperimentKind::InterpolateGaussian: return "interpolate_gaussian";
    case ExperimentKind::BatchSweep: return "batch_sweep";
    case ExperimentKind::Bootstrap: return "bootstrap";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (auto k : {ExperimentKind::Static, ExperimentKind::Evolution,
                 ExperimentKind::InterpolateLambda, ExperimentKind::InterpolateSo,
                 ExperimentKind::InterpolateGaussian, ExperimentKind::BatchSweep,
                 ExperimentKind::Bootstrap})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown experiment kind: " + name);
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.id = to_string(kind);
  c.lambdas = linspace(0.5, 1.5, 0.1);
  c.alphas = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  c.gaussian_lambdas = linspace(0.1, 1.0, 0.1);
  switch (kind) {
    case ExperimentKind::Static: break;
    case ExperimentKind::Evolution:
      c.families = {"xor"};
      c.widths = {32};
      break;
    case ExperimentKind::InterpolateLambda:
      c.families = {"lambda_xor"};
      c.widths = {32};
      break;
    case ExperimentKind::InterpolateSo:
      c.families = {"so_xor"};
      c.widths = {32};
      break;
    case ExperimentKind::InterpolateGaussian:
      c.families = {"gaussian"};
      c.widths = {32};
      break;
    case ExperimentKind::BatchSweep:
      c.widths = {32};
      break;
    case ExperimentKind::Bootstrap:
      c.families = {"random"};
      c.widths = {32};
      c.plots = false;
      break;
  }
  return c;
}

namespace {

const std::set<std::string> kConfigKeys = {
    "kind", "id", "n", "families", "widths", "seed_count", "first_seed", "batch_size",
    "batch_sizes", "q1", "rotations", "rotation_seed", "kmax", "train_size", "test_size",
    "train", "r2_step", "lambdas", "alphas", "gaussian_lambdas", "second_width",
    "expanded_width", "deep_widths", "plots", "spill", "workers", "output"};

const std::set<std::string> kTrainKeys = {"learning_rate", "beta1", "beta2", "epsilon",
                                          "max_epochs", "patience", "monitor"};

template <class T>
void take(const json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc.at(key).get<T>();
}

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("config: expected a JSON object");
  for (const auto& [key, _] : doc.items())
    if (!kConfigKeys.count(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
  const auto kind = experiment_kind_from_string(doc.value("kind", std::string("static")));
  ExperimentConfig c = default_config(kind);
  take(doc, "id", c.id);
  take(doc, "n", c.n);
  take(doc, "families", c.families);
  take(doc, "widths", c.widths);
  take(doc, "seed_count", c.seed_count);
  take(doc, "first_seed", c.first_seed);
  take(doc, "batch_size", c.batch_size);
  take(doc, "batch_sizes", c.batch_sizes);
  take(doc, "q1", c.q1);
  take(doc, "rotations", c.rotations);
  take(doc, "rotation_seed", c.rotation_seed);
  take(doc, "kmax", c.kmax);
  take(doc, "train_size", c.train_size);
  take(doc, "test_size", c.test_size);
  take(doc, "r2_step", c.r2_step);
  take(doc, "lambdas", c.lambdas);
  take(doc, "alphas", c.alphas);
  take(doc, "gaussian_lambdas", c.gaussian_lambdas);
  take(doc, "second_width", c.second_width);
  take(doc, "expanded_width", c.expanded_width);
  take(doc, "deep_widths", c.deep_widths);
  take(doc, "plots", c.plots);
  take(doc, "spill", c.spill);
  take(doc, "workers", c.workers);
  take(doc, "output", c.output);
  if (doc.contains("train")) {
    const json& t = doc.at("train");
    for (const auto& [key, _] : t.items())
      if (!kTrainKeys.count(key))
        throw std::invalid_argument("config: unknown key 'train." + key + "'");
    take(t, "learning_rate", c.train.learning_rate);
    take(t, "beta1", c.train.beta1);
    take(t, "beta2", c.train.beta2);
    take(t, "epsilon", c.train.epsilon);
    take(t, "max_epochs", c.train.max_epochs);
    take(t, "patience", c.train.patience);
    if (t.contains("monitor")) c.train.monitor = loss_monitor_from_string(t.at("monitor"));
  }
  if (c.n < 1 || c.n > 3) throw std::invalid_argument("config: n must be 1, 2 or 3");
  if (c.kmax < 1 || c.kmax > 3) throw std::invalid_argument("config: kmax must be 1, 2 or 3");
  if (c.seed_count == 0) throw std::invalid_argument("config: seed_count must be positive");
  for (double q : c.q1)
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("config: q1 values must lie in (0, 1)");
  for (const auto& f : c.families) family_from_string(f);
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["kind"] = to_string(c.kind);
  j["id"] = c.id;
  j["n"] = c.n;
  j["families"] = c.families;
  j["widths"] = c.widths;
  j["seed_count"] = c.seed_count;
  j["first_seed"] = c.first_seed;
  j["batch_size"] = c.batch_size;
  j["batch_sizes"] = c.batch_sizes;
  j["q1"] = c.q1;
  j["rotations"] = c.rotations;
  j["rotation_seed"] = c.rotation_seed;
  j["kmax"] = c.kmax;
  j["train_size"] = c.train_size;
  j["test_size"] = c.test_size;
  j["train"] = {{"learning_rate", c.train.learning_rate}, {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},                 {"epsilon", c.train.epsilon},
                {"max_epochs", c.train.max_epochs},       {"patience", c.train.patience},
                {"monitor", to_string(c.train.monitor)}};
  j["r2_step"] = c.r2_step;
  j["lambdas"] = c.lambdas;
  j["alphas"] = c.alphas;
  j["gaussian_lambdas"] = c.gaussian_lambdas;
  j["second_width"] = c.second_width;
  j["expanded_width"] = c.expanded_width;
  j["deep_widths"] = c.deep_widths;
  j["plots"] = c.plots;
  j["spill"] = c.spill;
  return j;  // workers and output do not affect results and are left out
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::uint64_t h = fnv1a64(to_json(cfg).dump());
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 0; i < 16; ++i) out[15 - i] = digits[(h >> (4 * i)) & 0xf];
  return out;
}

TargetFunction make_target(const std::string& family, double parameter, std::size_t n,
                           std::uint64_t seed) {
  switch (family_from_string(family)) {
    case Family::Xor: return TargetFunction::xor_fn(n);
    case Family::Linear: {
      RngStream rng = seeds::target(seed);
      return TargetFunction::linear(n, rng);
    }
    case Family::Random: return TargetFunction::random(n);
    case Family::LambdaXor: return TargetFunction::lambda_xor(n, parameter);
    case Family::SoXor: return TargetFunction::so_xor(n, static_cast<std::uint64_t>(parameter));
    case Family::Gaussian: return TargetFunction::gaussian(n, parameter);
  }
  throw std::invalid_argument("make_target: unknown family");
}

// ---------------------------------------------------------------------------
// Metric reports

json to_json(const MetricReport& r) {
  json j;
  j["state"] = r.state;
  j["seed"] = r.seed;
  j["epoch"] = r.epoch;
  j["level"] = num(r.level);
  j["train_r2"] = num(r.train_r2);
  j["test_r2"] = num(r.test_r2);
  j["rotations"] = r.rotations;
  json sizes = json::array();
  for (const auto& s : r.sizes) {
    json z = json::array();
    for (const auto& q : s.zero) {
      z.push_back({{"q1", q.q1},
                   {"qk", q.qk},
                   {"threshold", q.threshold},
                   {"zero_percent", q.zero_percent},
                   {"zero_percent_pooled", q.zero_percent_pooled},
                   {"consistent_percent", q.consistent_percent},
                   {"inconsistent_percent", q.inconsistent_percent},
                   {"consistent_rows", q.consistent_rows},
                   {"dependent_percent", num(q.dependent_percent)}});
    }
    sizes.push_back({{"k", s.k},
                     {"zero_rows", z},
                     {"pr_mean", s.pr_mean},
                     {"pr_sd", s.pr_sd},
                     {"pr_se", s.pr_se},
                     {"pr_normalized", num(s.pr_normalized)},
                     {"pr_max", s.pr_max},
                     {"pr_excluded", s.pr_excluded},
                     {"rrr_mean", num(s.rrr_mean)},
                     {"rrr_se", num(s.rrr_se)},
                     {"rrr_normalized", num(s.rrr_normalized)},
                     {"rrr_excluded", s.rrr_excluded},
                     {"entropy", s.entropy},
                     {"entropy_initial", s.entropy_initial},
                     {"kl", s.kl}});
  }
  j["sizes"] = sizes;
  return j;
}

MetricReport metric_report_from_json(const json& j) {
  MetricReport r;
  r.state = j.at("state");
  r.seed = j.at("seed");
  r.epoch = j.at("epoch");
  r.level = num(j.at("level"));
  r.train_r2 = num(j.at("train_r2"));
  r.test_r2 = num(j.at("test_r2"));
  r.rotations = j.at("rotations");
  for (const auto& s : j.at("sizes")) {
    SizeMetrics m;
    m.k = s.at("k");
    for (const auto& q : s.at("zero_rows")) {
      ZeroRowSummary z;
      z.q1 = q.at("q1");
      z.qk = q.at("qk");
      z.threshold = q.at("threshold");
      z.zero_percent = q.at("zero_percent");
      z.zero_percent_pooled = q.at("zero_percent_pooled");
      z.consistent_percent = q.at("consistent_percent");
      z.inconsistent_percent = q.at("inconsistent_percent");
      z.consistent_rows = q.at("consistent_rows");
      z.dependent_percent = num(q.at("dependent_percent"));
      m.zero.push_back(z);
    }
    m.pr_mean = s.at("pr_mean");
    m.pr_sd = s.at("pr_sd");
    m.pr_se = s.at("pr_se");
    m.pr_normalized = num(s.at("pr_normalized"));
    m.pr_max = s.at("pr_max");
    m.pr_excluded = s.at("pr_excluded");
    m.rrr_mean = num(s.at("rrr_mean"));
    m.rrr_se = num(s.at("rrr_se"));
    m.rrr_normalized = num(s.at("rrr_normalized"));
    m.rrr_excluded = s.at("rrr_excluded");
    m.entropy = s.at("entropy");
    m.entropy_initial = s.at("entropy_initial");
    m.kl = s.at("kl");
    r.sizes.push_back(m);
  }
  return r;
}

namespace {

std::size_t effective_kmax(std::size_t kmax, std::size_t m, std::size_t n) {
  return std::min({kmax, m, n, std::size_t{3}});
}

}  // namespace

Baseline make_baseline(const MlpModel& initial, const Dataset& data, std::size_t kmax,
                       const std::vector<Matrix>& rotations) {
  Baseline b;
  b.m = initial.m;
  b.n = initial.n;
  b.kmax = effective_kmax(kmax, initial.m, initial.n);
  const auto js = jacobians(initial, data);
  for (std::size_t k = 1; k <= b.kmax; ++k) {
    const auto ens = MinorEnsemble::from_jacobians(js, k);
    b.row_means[k - 1] = row_means(ens);
    b.pr[k - 1] = participation_ratio(ens).mean;
    if (ens.rows() > 1) {
      b.probabilities[k - 1] = column_probabilities(ens);
      b.entropy[k - 1] = column_entropy(b.probabilities[k - 1]);
    }
  }
  if (!rotations.empty()) b.rrr = random_rotation_ratio(js, rotations, b.kmax);
  return b;
}

MetricReport evaluate_metrics(const MlpModel& model, const Baseline& base, const Dataset& data,
                              std::span<const double> q1, const std::vector<Matrix>& rotations) {
  if (model.m != base.m || model.n != base.n)
    throw std::invalid_argument("evaluate_metrics: model and baseline shapes differ");
  MetricReport rep;
  rep.train_r2 = r_squared(predict_all(model, data), data.labels);
  rep.rotations = rotations.size();
  const auto js = jacobians(model, data);
  const std::size_t E = data.size();

  // zero-row reports are kept per (q1, k) for the dependence classification
  std::vector<std::array<ZeroRowReport, 3>> zr(q1.size());
  for (std::size_t k = 1; k <= base.kmax; ++k) {
    const auto ens = MinorEnsemble::from_jacobians(js, k);
    const auto means = row_means(ens);
    SizeMetrics sm;
    sm.k = k;
    for (std::size_t qi = 0; qi < q1.size(); ++qi) {
      zr[qi][k - 1] = detect_zero_rows(means, base.row_means[k - 1], E, model.m, k, q1[qi]);
      const auto cons = classify_consistent(zr[qi][k - 1]);
      ZeroRowSummary z;
      z.q1 = q1[qi];
      z.qk = zr[qi][k - 1].qk;
      z.threshold = zr[qi][k - 1].threshold;
      z.zero_percent = zr[qi][k - 1].zero_percent;
      z.zero_percent_pooled = zr[qi][k - 1].zero_percent_pooled;
      z.consistent_percent = cons.consistent_percent;
      z.inconsistent_percent = cons.inconsistent_percent;
      z.consistent_rows = cons.consistent_rows.size();
      sm.zero.push_back(z);
    }
    const auto pr = participation_ratio(ens);
    sm.pr_mean = pr.mean;
    sm.pr_sd = pr.stddev;
    sm.pr_se = pr.std_err;
    sm.pr_excluded = pr.excluded;
    sm.pr_max = pr_max(model.m, model.n, k);
    sm.pr_normalized = base.pr[k - 1] > 0.0 ? pr.mean / base.pr[k - 1] : kNaN;
    if (ens.rows() > 1) {
      const auto p = column_probabilities(ens);
      sm.entropy = column_entropy(p);
      sm.entropy_initial = base.entropy[k - 1];
      sm.kl = column_divergence(p, base.probabilities[k - 1]);
    } else {
      sm.entropy = sm.entropy_initial = sm.kl = kNaN;
    }
    rep.sizes.push_back(sm);
  }
  for (std::size_t qi = 0; qi < q1.size() && base.kmax >= 2; ++qi) {
    const auto dep = classify_dependent(zr[qi][0], zr[qi][1], base.kmax >= 3 ? &zr[qi][2] : nullptr);
    rep.sizes[1].zero[qi].dependent_percent = dep.dependent2_percent;
    if (base.kmax >= 3) rep.sizes[2].zero[qi].dependent_percent = dep.dependent3_percent;
  }
  if (!rotations.empty()) {
    const auto rrr = random_rotation_ratio(js, rotations, base.kmax);
    for (std::size_t k = 0; k < base.kmax; ++k) {
      rep.sizes[k].rrr_mean = rrr.mean[k];
      rep.sizes[k].rrr_se = rrr.std_err[k];
      rep.sizes[k].rrr_excluded = rrr.excluded[k];
      if (base.rrr && base.rrr->mean[k] > 0.0)
        rep.sizes[k].rrr_normalized = rrr.mean[k] / base.rrr->mean[k];
    }
  }
  return rep;
}

json plot_data(const MlpModel& model, const Dataset& data, std::size_t kmax) {
  json out;
  const auto js = jacobians(model, data);
  const auto ranks = mef_rank_grid();
  for (std::size_t k = 1; k <= effective_kmax(kmax, model.m, model.n); ++k) {
    const auto ens = MinorEnsemble::from_jacobians(js, k);
    auto means = row_means(ens);
    std::sort(means.begin(), means.end());
    json zipf = json::array();
    for (int i = 0; i < 1000; ++i) {
      const double q = i / 999.0;
      zipf.push_back({q, quantile_sorted(means, q)});
    }
    const auto h = log_histogram(ens.values);
    const auto tail = mean_excess(ens.values, ranks);
    json mef = json::array();
    for (std::size_t i = 0; i < tail.ranks.size(); ++i)
      mef.push_back({tail.ranks[i], tail.threshold[i], tail.mef[i]});
    out[std::to_string(k)] = {
        {"zipf", zipf},
        {"histogram", {{"edges", h.edges}, {"counts", h.counts}, {"clamped", h.clamped}}},
        {"mef", mef},
        {"mef_fit",
         {{"lo", tail.fit_lo}, {"hi", tail.fit_hi}, {"slope", tail.slope},
          {"intercept", tail.intercept}, {"points", tail.fit_points}}},
    };
  }
  return out;
}

json heatmap_data(const MlpModel& model, std::span<const double> x) {
  auto grid = [](const Matrix& M) {
    json rows = json::array();
    for (std::size_t r = 0; r < M.rows(); ++r)
      rows.push_back(std::vector<double>(M.row(r).begin(), M.row(r).end()));
    return rows;
  };
  return {{"x", std::vector<double>(x.begin(), x.end())},
          {"A", grid(model.A)},
          {"A_T", grid(model.A.transpose())},
          {"B", grid(model.B)},
          {"J", grid(model.inner_jacobian(x))}};
}

// ---------------------------------------------------------------------------
// Manifest

bool RunManifest::ok() const { return failures() == 0; }

std::size_t RunManifest::failures() const {
  return static_cast<std::size_t>(
      std::count_if(runs.begin(), runs.end(), [](const RunResult& r) { return r.status != "ok"; }));
}

json to_json(const RunManifest& m) {
  json runs = json::array();
  for (const auto& r : m.runs) {
    json j = {{"id", r.id}, {"status", r.status}, {"info", r.info}, {"path", "runs/" + r.id},
              {"wall_seconds", r.wall_seconds}};
    if (!r.error.empty()) j["error"] = r.error;
    j["artifacts"] = {"initial.json", "trained.json", "train.jsonl", "metrics.json",
                      "dataset.csv",  "test.csv"};
    runs.push_back(j);
  }
  return {{"format", "kalab-manifest"},
          {"version", 1},
          {"code_version", KALAB_VERSION},
          {"config", to_json(m.config)},
          {"config_hash", config_hash(m.config)},
          {"runs", runs},
          {"failures", m.failures()}};
}

// ---------------------------------------------------------------------------
// Runs

namespace {

/// One trained configuration inside a job.
struct Point {
  std::string family;
  double parameter = kNaN;
  std::size_t batch = 0;
};

/// Jobs group the points that share an initial model and dataset inputs, so
/// the baseline is computed once per (m, seed).
struct Job {
  std::size_t m = 0;
  std::uint64_t seed = 0;
  std::vector<Point> points;
};

struct Shared {
  ExperimentConfig cfg;
  std::string root;
  std::map<std::size_t, std::vector<Matrix>> rotations;  // by m, read-only once built
};

std::string point_id(const ExperimentConfig& cfg, const Point& p, std::size_t m,
                     std::uint64_t seed) {
  std::string id = p.family;
  if (std::isfinite(p.parameter)) id += "-p" + format_double(p.parameter);
  id += "-m" + std::to_string(m);
  if (cfg.kind == ExperimentKind::BatchSweep || cfg.kind == ExperimentKind::Bootstrap)
    id += "-b" + std::to_string(p.batch);
  id += "-s" + std::to_string(seed);
  if (cfg.kind == ExperimentKind::Bootstrap) id = "bootstrap-" + id;
  return id;
}

json point_info(const ExperimentConfig& cfg, const Point& p, std::size_t m, std::uint64_t seed,
                const TargetFunction& f) {
  return {{"experiment", cfg.id},
          {"kind", to_string(cfg.kind)},
          {"family", p.family},
          {"parameter", num(p.parameter)},
          {"target", f.describe()},
          {"n", cfg.n},
          {"m", m},
          {"batch_size", p.batch},
          {"seed", seed},
          {"train_size", cfg.train_size},
          {"test_size", cfg.test_size},
          {"test_size_note", "test-set size is not stated by the paper; defaults to 1000"}};
}

TrainConfig train_config(const ExperimentConfig& cfg, std::size_t batch, std::uint64_t seed) {
  TrainConfig t = cfg.train;
  t.batch_size = batch;
  t.shuffle_seed = seeds::shuffle(seed).seed();
  return t;
}

json training_summary(const TrainRecord<MlpModel>& rec, const TrainConfig& t) {
  return {{"best_epoch", rec.best_epoch},
          {"epochs", rec.epochs.empty() ? 0 : rec.epochs.back().epoch},
          {"total_steps", rec.total_steps},
          {"status", to_string(rec.status)},
          {"message", rec.message},
          {"best_train_r2", num(rec.best_train_r2)},
          {"best_test_r2", num(rec.best_test_r2)},
          {"best_loss", num(rec.best_loss)},
          {"config", to_json(t)}};
}

/// Everything derived from stored models: what `metrics` recomputes.
struct RunStates {
  MlpModel initial;
  MlpModel trained;
  std::vector<std::pair<double, Checkpoint>> checkpoints;  // (level, snapshot)
};

json analyze_run(const Shared& sh, const json& info, const RunStates& st, const Dataset& train_set,
                 const Dataset& test_set, const json& training, const Baseline& base) {
  const auto& cfg = sh.cfg;
  const std::uint64_t seed = info.at("seed");
  static const std::vector<Matrix> kNone;
  const auto it = sh.rotations.find(st.initial.m);
  const auto& rot = it == sh.rotations.end() ? kNone : it->second;

  auto report = [&](const MlpModel& model, const std::string& state, std::size_t epoch,
                    double level) {
    MetricReport r = evaluate_metrics(model, base, train_set, cfg.q1, rot);
    r.state = state;
    r.seed = seed;
    r.epoch = epoch;
    r.level = level;
    r.test_r2 = r_squared(predict_all(model, test_set), test_set.labels);
    return to_json(r);
  };

  json reports = json::array();
  reports.push_back(report(st.initial, "initial", 0, kNaN));
  for (const auto& [level, ck] : st.checkpoints)
    reports.push_back(report(ck.model, "checkpoint", ck.epoch, level));
  reports.push_back(report(st.trained, "trained", training.value("best_epoch", 0), kNaN));

  json doc = {{"run", info}, {"training", training}, {"reports", reports}};
  if (cfg.plots) {
    doc["plots"] = {{"initial", plot_data(st.initial, train_set, cfg.kmax)},
                    {"trained", plot_data(st.trained, train_set, cfg.kmax)}};
    doc["heatmaps"] = {{"initial", heatmap_data(st.initial, train_set.x(0))},
                       {"trained", heatmap_data(st.trained, train_set.x(0))}};
  }
  return doc;
}

void write_json(const std::string& path, const json& doc) {
  write_file_atomic(path, doc.dump(1) + "\n");
}

Checkpoint make_checkpoint(const MlpModel& model, std::uint64_t seed, std::size_t epoch,
                           const json& info, const std::string& state, const json& training) {
  Checkpoint ck;
  ck.model = model;
  ck.seed = seed;
  ck.epoch = epoch;
  ck.meta = {{"run", info}, {"state", state}};
  if (!training.is_null()) ck.meta["training"] = training;
  return ck;
}

Dataset features_dataset(const MlpModel& model, const Dataset& data) {
  const std::size_t E = data.size();
  std::vector<double> values;
  values.reserve(E * model.m);
  for (std::size_t e = 0; e < E; ++e) {
    const auto h = model.features(data.x(e));
    values.insert(values.end(), h.begin(), h.end());
  }
  Dataset out;
  out.inputs = Matrix(E, model.m, std::move(values));
  out.labels = data.labels;
  out.seed = data.seed;
  return out;
}

json bootstrap_variants(const Shared& sh, const Point& p, std::size_t m, std::uint64_t seed,
                        const MlpModel& initial, const MlpModel& base_trained,
                        const Dataset& data, double base_r2) {
  const auto& cfg = sh.cfg;
  const TrainConfig t = train_config(cfg, p.batch, seed);

  RngStream second_rng = seeds::second_stage(seed, cfg.second_width);
  const MlpModel second = kaiming_init(m, cfg.second_width, second_rng);
  const auto boot = train(second, features_dataset(base_trained, data), t);
  const auto control = train(second, features_dataset(initial, data), t);

  RngStream wide_rng = seeds::model(seed);
  const auto expanded = train(kaiming_init(cfg.n, cfg.expanded_width, wide_rng), data, t);

  RngStream deep_rng = RngStream::derive(seed, "deep-init");
  const auto deep =
      train(kaiming_init_deep(cfg.n, cfg.deep_widths[0], cfg.deep_widths[1], deep_rng), data, t);

  auto entry = [&](const std::string& name, double r2, const std::string& status,
                   const std::string& arch) {
    return json{{"variant", name}, {"train_r2", num(r2)}, {"status", status}, {"architecture", arch}};
  };
  const std::string w = std::to_string(m);
  return json::array({
      entry("bootstrapped", boot.best_train_r2, to_string(boot.status),
            "frozen trained features (" + w + ") -> MLP " + std::to_string(cfg.second_width)),
      entry("untrained_bootstrap", control.best_train_r2, to_string(control.status),
            "frozen initial features (" + w + ") -> MLP " + std::to_string(cfg.second_width)),
      entry("base", base_r2, "see training", "MLP " + w),
      entry("expanded", expanded.best_train_r2, to_string(expanded.status),
            "MLP " + std::to_string(cfg.expanded_width)),
      entry("two_hidden_layer", deep.best_train_r2, to_string(deep.status),
            "MLP " + std::to_string(cfg.deep_widths[0]) + "/" +
                std::to_string(cfg.deep_widths[1])),
  });
}

std::vector<RunResult> run_job(const Shared& sh, const Job& job) {
  const auto& cfg = sh.cfg;
  std::vector<RunResult> results;

  RngStream init_rng = seeds::model(job.seed);
  const MlpModel initial = kaiming_init(cfg.n, job.m, init_rng);

  // The baseline is a property of the initial model on the shared inputs;
  // it is built lazily from the first dataset of the job.
  std::optional<Baseline> base;

  for (const Point& p : job.points) {
    RunResult res;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const TargetFunction f = make_target(p.family, p.parameter, cfg.n, job.seed);
      res.id = point_id(cfg, p, job.m, job.seed);
      res.info = point_info(cfg, p, job.m, job.seed, f);
      res.info["id"] = res.id;
      const std::string dir = sh.root + "/runs/" + res.id;

      RngStream train_rng = seeds::train_data(job.seed);
      RngStream test_rng = seeds::test_data(job.seed);
      const Dataset train_set = make_dataset(f, cfg.train_size, train_rng);
      const Dataset test_set = make_dataset(f, cfg.test_size, test_rng);

      const auto rot_it = sh.rotations.find(job.m);
      static const std::vector<Matrix> kNone;
      if (!base)
        base = make_baseline(initial, train_set, cfg.kmax,
                             rot_it == sh.rotations.end() ? kNone : rot_it->second);

      TrainConfig t = train_config(cfg, p.batch, job.seed);
      std::vector<double> grid;
      if (cfg.kind == ExperimentKind::Evolution) {
        grid = r2_grid(cfg.r2_step);
        t.snapshot_levels = grid;
      }
      const auto rec = train(initial, train_set, t, &test_set);
      const json training = training_summary(rec, t);

      write_file_atomic(dir + "/train.jsonl", record_to_jsonl(rec));
      write_file_atomic(dir + "/dataset.csv", dataset_to_csv(train_set));
      write_file_atomic(dir + "/test.csv", dataset_to_csv(test_set));
      save_checkpoint(dir + "/initial.json",
                      make_checkpoint(initial, job.seed, 0, res.info, "initial", nullptr));
      if (!rec.ok()) throw std::runtime_error(rec.message);
      save_checkpoint(dir + "/trained.json", make_checkpoint(rec.best_model, job.seed,
                                                             rec.best_epoch, res.info, "trained",
                                                             training));

      RunStates st{initial, rec.best_model, {}};
      if (!grid.empty()) {
        const auto sched = checkpoint_schedule(rec, grid);
        for (const auto& c : sched.present) {
          Checkpoint ck = make_checkpoint(*c.model, job.seed, c.epoch, res.info, "checkpoint",
                                          nullptr);
          ck.meta["level"] = c.level;
          save_checkpoint(dir + "/checkpoints/r2_" + format_double(c.level) + ".json", ck);
          st.checkpoints.emplace_back(c.level, std::move(ck));
        }
        res.info["missing_levels"] = sched.missing;
      }

      json doc = analyze_run(sh, res.info, st, train_set, test_set, training, *base);
      if (cfg.kind == ExperimentKind::Bootstrap)
        doc["bootstrap"] = bootstrap_variants(sh, p, job.m, job.seed, initial, rec.best_model,
                                              train_set, rec.best_train_r2);
      if (cfg.spill) {
        const auto js = jacobians(rec.best_model, train_set);
        for (std::size_t k = 1; k <= effective_kmax(cfg.kmax, job.m, cfg.n); ++k)
          write_spill(dir + "/minors_k" + std::to_string(k),
                      MinorEnsemble::from_jacobians(js, k));
      }
      write_json(dir + "/metrics.json", doc);
    } catch (const std::exception& e) {
      res.status = "failed";
      res.error = e.what();
      if (res.id.empty()) res.id = point_id(cfg, p, job.m, job.seed);
    }
    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    results.push_back(std::move(res));
  }
  return results;
}

std::vector<std::uint64_t> seed_list(const ExperimentConfig& cfg) {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < cfg.seed_count; ++i) out.push_back(cfg.first_seed + i);
  return out;
}

std::string resolve_root(const ExperimentConfig& cfg) {
  if (!cfg.output.empty()) return cfg.output;
  const char* env = std::getenv("KALAB_OUTPUT_ROOT");
  return std::string(env && *env ? env : "kalab-runs") + "/" + cfg.id;
}

RunManifest execute(const ExperimentConfig& cfg, const std::vector<Job>& jobs) {
  Shared sh;
  sh.cfg = cfg;
  sh.root = resolve_root(cfg);
  fs::create_directories(sh.root + "/runs");
  if (cfg.rotations > 0) {
    for (const auto& job : jobs) {
      if (sh.rotations.count(job.m)) continue;
      RngStream rng = seeds::rotations(cfg.rotation_seed, job.m);
      sh.rotations[job.m] = make_rotations(job.m, cfg.rotations, rng);
    }
  }

  std::vector<std::vector<RunResult>> slots(jobs.size());
  const int workers = cfg.workers > 0 ? cfg.workers : omp_get_max_threads();
  const auto count = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    slots[static_cast<std::size_t>(i)] = run_job(sh, jobs[static_cast<std::size_t>(i)]);
  }

  RunManifest man;
  man.root = sh.root;
  man.config = cfg;
  for (auto& s : slots)
    for (auto& r : s) man.runs.push_back(std::move(r));
  std::sort(man.runs.begin(), man.runs.end(),
            [](const RunResult& a, const RunResult& b) { return a.id < b.id; });
  write_json(sh.root + "/manifest.json", to_json(man));
  return man;
}

}  // namespace

RunManifest run_static(const ExperimentConfig& cfg) {
  std::vector<Job> jobs;
  for (std::size_t m : cfg.widths)
    for (std::uint64_t seed : seed_list(cfg)) {
      Job job{m, seed, {}};
      for (const auto& f : cfg.families) job.points.push_back({f, kNaN, cfg.batch_size});
      jobs.push_back(job);
    }
  return execute(cfg, jobs);
}

RunManifest run_evolution(const ExperimentConfig& cfg) {
  if (cfg.kind != ExperimentKind::Evolution)
    throw std::invalid_argument("run_evolution: config kind must be evolution");
  return run_static(cfg);
}

RunManifest run_interpolation(const ExperimentConfig& cfg) {
  std::string family;
  std::vector<double> grid;
  switch (cfg.kind) {
    case ExperimentKind::InterpolateLambda:
      family = "lambda_xor";
      grid = cfg.lambdas;
      break;
    case ExperimentKind::InterpolateSo:
      family = "so_xor";
      for (auto a : cfg.alphas) grid.push_back(static_cast<double>(a));
      break;
    case ExperimentKind::InterpolateGaussian:
      family = "gaussian";
      grid = cfg.gaussian_lambdas;
      break;
    default:
      throw std::invalid_argument("run_interpolation: config kind is not an interpolation");
  }
  if (grid.empty()) throw std::invalid_argument("run_interpolation: empty parameter grid");
  std::vector<Job> jobs;
  for (std::size_t m : cfg.widths)
    for (std::uint64_t seed : seed_list(cfg)) {
      Job job{m, seed, {}};
      for (double v : grid) job.points.push_back({family, v, cfg.batch_size});
      jobs.push_back(job);
    }
  return execute(cfg, jobs);
}

RunManifest run_batch_sweep(const ExperimentConfig& cfg) {
  std::vector<Job> jobs;
  for (std::size_t m : cfg.widths)
    for (std::uint64_t seed : seed_list(cfg)) {
      Job job{m, seed, {}};
      for (const auto& f : cfg.families)
        for (std::size_t b : cfg.batch_sizes) job.points.push_back({f, kNaN, b});
      jobs.push_back(job);
    }
  return execute(cfg, jobs);
}

RunManifest run_bootstrap(const ExperimentConfig& cfg) {
  if (cfg.kind != ExperimentKind::Bootstrap)
    throw std::invalid_argument("run_bootstrap: config kind must be bootstrap");
  std::vector<Job> jobs;
  for (std::size_t m : cfg.widths)
    for (std::uint64_t seed : seed_list(cfg)) {
      Job job{m, seed, {}};
      for (std::size_t b : cfg.batch_sizes) job.points.push_back({"random", kNaN, b});
      jobs.push_back(job);
    }
  return execute(cfg, jobs);
}

RunManifest run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.kind) {
    case ExperimentKind::Static: return run_static(cfg);
    case ExperimentKind::Evolution: return run_evolution(cfg);
    case ExperimentKind::InterpolateLambda:
    case ExperimentKind::InterpolateSo:
    case ExperimentKind::InterpolateGaussian: return run_interpolation(cfg);
    case ExperimentKind::BatchSweep: return run_batch_sweep(cfg);
    case ExperimentKind::Bootstrap: return run_bootstrap(cfg);
  }
  throw std::invalid_argument("run_experiment: unknown kind");
}

RunResult run_single(const ExperimentConfig& cfg, const std::string& family, double parameter) {
  if (cfg.widths.size() != 1 || cfg.seed_count != 1)
    throw std::invalid_argument("train: exactly one width and one seed expected");
  Job job{cfg.widths.front(), cfg.first_seed, {{family, parameter, cfg.batch_size}}};
  ExperimentConfig c = cfg;
  c.kind = ExperimentKind::Static;
  auto man = execute(c, {job});
  return man.runs.front();
}

std::size_t recompute_metrics(const std::string& root, const ExperimentConfig& overrides) {
  const std::string runs_dir = root + "/runs";
  if (!fs::is_directory(runs_dir)) throw std::runtime_error("no runs found under " + root);
  std::vector<std::string> dirs;
  for (const auto& e : fs::directory_iterator(runs_dir))
    if (e.is_directory()) dirs.push_back(e.path().string());
  std::sort(dirs.begin(), dirs.end());

  Shared sh;
  sh.cfg = overrides;
  sh.root = root;
  std::size_t done = 0;
  for (const auto& dir : dirs) {
    if (!fs::exists(dir + "/trained.json"))
      throw std::runtime_error("missing checkpoint " + dir + "/trained.json");
    const Checkpoint init = load_checkpoint(dir + "/initial.json");
    const Checkpoint trained = load_checkpoint(dir + "/trained.json");
    const Dataset train_set = dataset_from_csv(read_file(dir + "/dataset.csv"));
    const Dataset test_set = dataset_from_csv(read_file(dir + "/test.csv"));
    const json info = trained.meta.at("run");

    RunStates st{init.model, trained.model, {}};
    if (fs::is_directory(dir + "/checkpoints")) {
      std::vector<std::string> files;
      for (const auto& e : fs::directory_iterator(dir + "/checkpoints"))
        files.push_back(e.path().string());
      for (const auto& f : files) {
        Checkpoint ck = load_checkpoint(f);
        const double level = ck.meta.at("level");
        st.checkpoints.emplace_back(level, std::move(ck));
      }
      std::sort(st.checkpoints.begin(), st.checkpoints.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
    }
    const std::size_t m = init.model.m;
    if (sh.cfg.rotations > 0 && !sh.rotations.count(m)) {
      RngStream rng = seeds::rotations(sh.cfg.rotation_seed, m);
      sh.rotations[m] = make_rotations(m, sh.cfg.rotations, rng);
    }
    static const std::vector<Matrix> kNone;
    const auto rit = sh.rotations.find(m);
    const Baseline base = make_baseline(init.model, train_set, sh.cfg.kmax,
                                        rit == sh.rotations.end() ? kNone : rit->second);

    json doc = analyze_run(sh, info, st, train_set, test_set, trained.meta.at("training"), base);
    // bootstrap variants need retraining; keep the stored comparison
    if (fs::exists(dir + "/metrics.json")) {
      const json old = json::parse(read_file(dir + "/metrics.json"));
      if (old.contains("bootstrap")) doc["bootstrap"] = old.at("bootstrap");
    }
    write_json(dir + "/metrics.json", doc);
    ++done;
  }
  return done;
}

}  // namespace kalab
