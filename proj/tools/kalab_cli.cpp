// kalab: command-line driver for the experiments and the CSV report.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <json.hpp>

#include "kalab/experiments.hpp"
#include "kalab/io.hpp"
#include "kalab/kernels.hpp"
#include "kalab/report.hpp"

using namespace kalab;

namespace {

struct Overrides {
  std::string config;
  std::string out;
  std::optional<std::size_t> seed_count;
  std::optional<std::size_t> batch_size;
  std::vector<double> q1;
  std::optional<std::size_t> rotations;
  std::optional<int> workers;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "output directory (default $KALAB_OUTPUT_ROOT/<id>)");
  cmd->add_option("--seed-count", o.seed_count, "number of seeds");
  cmd->add_option("--batch-size", o.batch_size, "mini-batch size");
  cmd->add_option("--q1", o.q1, "size-1 zero-row base rates");
  cmd->add_option("--rotations", o.rotations, "random rotations for the RRR (0 disables)");
  cmd->add_option("--workers", o.workers, "concurrent jobs / OpenMP threads");
}

ExperimentConfig load(const Overrides& o, ExperimentKind kind) {
  ExperimentConfig cfg = default_config(kind);
  if (!o.config.empty()) {
    auto doc = nlohmann::json::parse(read_file(o.config));
    if (!doc.contains("kind")) doc["kind"] = to_string(kind);
    cfg = config_from_json(doc);
  }
  if (o.seed_count) cfg.seed_count = *o.seed_count;
  if (o.batch_size) cfg.batch_size = *o.batch_size;
  if (!o.q1.empty()) cfg.q1 = o.q1;
  if (o.rotations) cfg.rotations = *o.rotations;
  if (o.workers) {
    cfg.workers = *o.workers;
    if (*o.workers > 0) set_worker_count(*o.workers);
  }
  if (!o.out.empty()) cfg.output = o.out;
  return cfg;
}

int finish(const RunManifest& man) {
  std::cout << man.root << ": " << man.runs.size() << " runs, " << man.failures()
            << " failed\n";
  for (const auto& r : man.runs)
    if (r.status != "ok") std::cerr << "run " << r.id << " failed: " << r.error << "\n";
  return man.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kolmogorov-Arnold structure probes for small GeLU networks"};
  app.require_subcommand(1);
  Overrides o;

  auto* train_cmd = app.add_subcommand("train", "train one model and compute its metrics");
  add_common(train_cmd, o);
  std::string family = "xor";
  double parameter = NAN;
  std::size_t width = 32;
  std::uint64_t seed = 0;
  train_cmd->add_option("--family", family, "target family");
  train_cmd->add_option("--param", parameter, "family parameter (lambda, alpha)");
  train_cmd->add_option("--width", width, "hidden width m");
  train_cmd->add_option("--seed", seed, "model seed");

  auto* static_cmd = app.add_subcommand("static", "trained models over families x widths");
  add_common(static_cmd, o);
  auto* evolve_cmd = app.add_subcommand("evolve", "metrics at R^2 checkpoints during training");
  add_common(evolve_cmd, o);
  auto* interp_cmd = app.add_subcommand("interpolate", "targets between xor and smooth families");
  add_common(interp_cmd, o);
  std::string path = "lambda";
  interp_cmd->add_option("--path", path, "lambda | so | gaussian")
      ->check(CLI::IsMember({"lambda", "so", "gaussian"}));
  auto* sweep_cmd = app.add_subcommand("batch-sweep", "metrics across mini-batch sizes");
  add_common(sweep_cmd, o);
  auto* boot_cmd = app.add_subcommand("bootstrap", "second-stage models on learned features");
  add_common(boot_cmd, o);

  auto* metrics_cmd = app.add_subcommand("metrics", "recompute metrics from stored checkpoints");
  add_common(metrics_cmd, o);
  auto* report_cmd = app.add_subcommand("report", "render CSV tables from metrics JSON");
  std::string report_root, csv_dir;
  report_cmd->add_option("root", report_root, "experiment output directory")->required();
  report_cmd->add_option("--csv", csv_dir, "CSV directory (default <root>/csv)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      ExperimentConfig cfg = load(o, ExperimentKind::Static);
      cfg.widths = {width};
      cfg.seed_count = 1;
      cfg.first_seed = seed;
      cfg.id = "train";
      const auto res = run_single(cfg, family, parameter);
      if (res.status != "ok") {
        std::cerr << "run " << res.id << " failed: " << res.error << "\n";
        return 1;
      }
      std::cout << res.id << " ok\n";
      return 0;
    }
    if (*static_cmd) return finish(run_static(load(o, ExperimentKind::Static)));
    if (*evolve_cmd) return finish(run_evolution(load(o, ExperimentKind::Evolution)));
    if (*interp_cmd) {
      const auto kind = path == "lambda" ? ExperimentKind::InterpolateLambda
                        : path == "so"   ? ExperimentKind::InterpolateSo
                                         : ExperimentKind::InterpolateGaussian;
      return finish(run_interpolation(load(o, kind)));
    }
    if (*sweep_cmd) return finish(run_batch_sweep(load(o, ExperimentKind::BatchSweep)));
    if (*boot_cmd) return finish(run_bootstrap(load(o, ExperimentKind::Bootstrap)));
    if (*metrics_cmd) {
      if (o.out.empty()) throw std::runtime_error("metrics: --out <run root> is required");
      const auto cfg = load(o, ExperimentKind::Static);
      const auto count = recompute_metrics(o.out, cfg);
      std::cout << "recomputed " << count << " runs\n";
      return 0;
    }
    if (*report_cmd) {
      const auto rep = write_report(report_root, csv_dir);
      for (const auto& f : rep.files) std::cout << f << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "kalab: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
