#include <gtest/gtest.h>

#include <filesystem>

#include "kalab/experiments.hpp"
#include "kalab/io.hpp"
#include "kalab/report.hpp"

using namespace kalab;
namespace fs = std::filesystem;

namespace {

std::string scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("kalab_test_" + name);
  fs::remove_all(dir);
  return dir.string();
}

ExperimentConfig tiny(const std::string& out) {
  ExperimentConfig cfg = default_config(ExperimentKind::Static);
  cfg.families = {"xor", "linear"};
  cfg.widths = {4};
  cfg.seed_count = 1;
  cfg.train_size = 200;
  cfg.test_size = 100;
  cfg.batch_size = 100;
  cfg.train.max_epochs = 30;
  cfg.rotations = 6;
  cfg.output = out;
  return cfg;
}

}  // namespace

TEST(Config, DefaultsAndOverrides) {
  const auto cfg = config_from_json({{"kind", "interpolate_lambda"}, {"seed_count", 2},
                                     {"train", {{"patience", 7}}}});
  EXPECT_EQ(cfg.kind, ExperimentKind::InterpolateLambda);
  EXPECT_EQ(cfg.seed_count, 2u);
  EXPECT_EQ(cfg.train.patience, 7u);
  ASSERT_EQ(cfg.lambdas.size(), 11u);
  EXPECT_EQ(cfg.lambdas.front(), 0.5);
  EXPECT_EQ(cfg.lambdas.back(), 1.5);
  EXPECT_EQ(cfg.lambdas[3], 0.8);
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(config_from_json({{"sead_count", 2}}), std::invalid_argument);
  EXPECT_THROW(config_from_json({{"train", {{"lr", 0.1}}}}), std::invalid_argument);
  EXPECT_THROW(config_from_json({{"kind", "nope"}}), std::invalid_argument);
  EXPECT_THROW(config_from_json({{"q1", {1.5}}}), std::invalid_argument);
  EXPECT_THROW(config_from_json({{"families", {"sawtooth"}}}), std::invalid_argument);
  EXPECT_THROW(config_from_json({{"seed_count", "four"}}), std::exception);
}

TEST(Config, HashTracksResultAffectingFields) {
  auto a = default_config(ExperimentKind::Static), b = a;
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  b.workers = 8;
  b.output = "/elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed_count = 3;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(config_from_json(to_json(a))), config_hash(a));
}

TEST(Runner, StaticRunWritesArtifactsAndRecomputes) {
  const auto out = scratch("static");
  const auto man = run_static(tiny(out));
  ASSERT_TRUE(man.ok()) << man.runs.front().error;
  ASSERT_EQ(man.runs.size(), 2u);
  EXPECT_EQ(man.runs[0].id, "linear-m4-s0");
  EXPECT_EQ(man.runs[1].id, "xor-m4-s0");
  for (const char* f : {"initial.json", "trained.json", "train.jsonl", "metrics.json",
                        "dataset.csv", "test.csv"})
    EXPECT_TRUE(fs::exists(out + "/runs/xor-m4-s0/" + f)) << f;
  EXPECT_TRUE(fs::exists(out + "/manifest.json"));

  const auto doc = nlohmann::json::parse(read_file(out + "/runs/xor-m4-s0/metrics.json"));
  const auto rep = metric_report_from_json(doc.at("reports").back());
  EXPECT_EQ(rep.state, "trained");
  ASSERT_EQ(rep.sizes.size(), 3u);
  EXPECT_EQ(rep.sizes[2].zero.size(), 3u);
  EXPECT_EQ(to_json(rep), doc.at("reports").back());

  // metrics recomputed from the stored checkpoints equal the originals
  const std::string before = read_file(out + "/runs/xor-m4-s0/metrics.json");
  EXPECT_EQ(recompute_metrics(out, tiny(out)), 2u);
  EXPECT_EQ(read_file(out + "/runs/xor-m4-s0/metrics.json"), before);
  fs::remove_all(out);
}

TEST(Runner, InitialMetricsMatchBaseline) {
  const auto out = scratch("baseline");
  ASSERT_TRUE(run_static(tiny(out)).ok());
  const auto doc = nlohmann::json::parse(read_file(out + "/runs/linear-m4-s0/metrics.json"));
  const auto init = metric_report_from_json(doc.at("reports").front());
  EXPECT_EQ(init.state, "initial");
  for (const auto& s : init.sizes) {
    EXPECT_DOUBLE_EQ(s.pr_normalized, 1.0);
    EXPECT_NEAR(s.kl, 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(s.rrr_normalized, 1.0);
  }
  fs::remove_all(out);
}

TEST(Runner, RepeatedRunsGiveIdenticalReports) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  auto ca = tiny(a), cb = tiny(b);
  cb.workers = 2;
  ASSERT_TRUE(run_static(ca).ok());
  ASSERT_TRUE(run_static(cb).ok());
  const auto ra = write_report(a), rb = write_report(b);
  ASSERT_EQ(ra.files.size(), rb.files.size());
  for (std::size_t i = 0; i < ra.files.size(); ++i)
    EXPECT_EQ(read_file(ra.files[i]), read_file(rb.files[i])) << ra.files[i];
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Runner, FailedRunIsRecordedAndOthersProceed) {
  const auto out = scratch("fail");
  auto cfg = tiny(out);
  cfg.train.learning_rate = 1e200;  // diverges
  const auto man = run_static(cfg);
  EXPECT_FALSE(man.ok());
  EXPECT_EQ(man.runs.size(), 2u);
  const auto doc = nlohmann::json::parse(read_file(out + "/manifest.json"));
  EXPECT_EQ(doc.at("failures"), man.failures());
  fs::remove_all(out);
}

TEST(Report, EmptyDirectoryIsAnError) {
  const auto out = scratch("empty");
  fs::create_directories(out);
  try {
    write_report(out);
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("no runs found"), std::string::npos);
  }
  fs::remove_all(out);
}

TEST(Report, CsvValuesRoundTrip) {
  const auto out = scratch("csv");
  ASSERT_TRUE(run_static(tiny(out)).ok());
  write_report(out);
  const auto doc = nlohmann::json::parse(read_file(out + "/runs/xor-m4-s0/metrics.json"));
  const double pr = doc.at("reports").back().at("sizes")[2].at("pr_mean");
  const std::string csv = read_file(out + "/csv/metrics_long.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "run,family,parameter,m,batch_size,seed,state,epoch,level,k,q1,metric,value,unit");
  EXPECT_NE(csv.find(",3,,pr_mean," + format_double(pr) + ",ratio\n"), std::string::npos);
  EXPECT_EQ(std::stod(format_double(pr)), pr);
  fs::remove_all(out);
}

TEST(Targets, FamilyFactory) {
  EXPECT_EQ(make_target("lambda_xor", 0.7, 3, 0).parameter(), 0.7);
  EXPECT_EQ(make_target("xor", NAN, 3, 0).family(), Family::Xor);
  EXPECT_EQ(make_target("linear", NAN, 3, 1).coefficients(),
            make_target("linear", NAN, 3, 1).coefficients());
  EXPECT_THROW(make_target("nope", 0, 3, 0), std::invalid_argument);
}
