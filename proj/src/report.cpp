#include "kalab/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "kalab/io.hpp"
#include "kalab/linalg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace kalab {

namespace {

std::string cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  return format_double(v.get<double>());
}

class Table {
 public:
  explicit Table(std::vector<std::string> header) : width_(header.size()) {
    line(header);
  }
  void add(const std::vector<json>& row) {
    if (row.size() != width_) throw std::logic_error("report: row width mismatch");
    std::vector<std::string> cells;
    for (const auto& v : row) cells.push_back(cell(v));
    line(cells);
  }
  std::string str() const { return out_.str(); }

 private:
  void line(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }
  std::size_t width_;
  std::ostringstream out_;
};

const char* unit_of(const std::string& metric) {
  if (metric.find("percent") != std::string::npos) return "percent";
  if (metric == "train_r2" || metric == "test_r2") return "r2";
  if (metric == "entropy" || metric == "entropy_initial" || metric == "kl") return "log_rows";
  if (metric == "consistent_rows") return "rows";
  return "ratio";
}

struct Group {
  std::vector<double> values;
};

}  // namespace

ReportFiles write_report(const std::string& root, const std::string& out_dir_arg) {
  const std::string runs_dir = root + "/runs";
  std::vector<std::string> ids;
  if (fs::is_directory(runs_dir))
    for (const auto& e : fs::directory_iterator(runs_dir))
      if (fs::exists(e.path() / "metrics.json")) ids.push_back(e.path().filename().string());
  if (ids.empty()) throw std::runtime_error("no runs found under " + root);
  std::sort(ids.begin(), ids.end());
  const std::string out_dir = out_dir_arg.empty() ? root + "/csv" : out_dir_arg;

  const std::vector<std::string> keys = {"run", "family", "parameter", "m", "batch_size", "seed"};
  auto with_keys = [&](std::vector<std::string> tail) {
    std::vector<std::string> h(keys);
    h.insert(h.end(), tail.begin(), tail.end());
    return h;
  };

  Table metrics(with_keys({"state", "epoch", "level", "k", "q1", "metric", "value", "unit"}));
  Table training(with_keys({"best_epoch", "epochs", "status", "best_train_r2", "best_test_r2",
                            "best_loss", "monitor"}));
  Table zipf(with_keys({"state", "k", "quantile", "row_mean"}));
  Table hist(with_keys({"state", "k", "lo", "hi", "count", "clamped"}));
  Table mef(with_keys({"state", "k", "rank", "threshold", "mef"}));
  Table fit(with_keys({"state", "k", "fit_lo", "fit_hi", "slope", "intercept", "points"}));
  Table heat(with_keys({"state", "matrix", "row", "col", "value"}));
  Table boot(with_keys({"variant", "architecture", "status", "train_r2"}));
  bool any_plots = false, any_boot = false;

  // summary key: family, parameter, m, batch, state, level, k, q1, metric
  std::map<std::vector<std::string>, Group> groups;

  for (const auto& id : ids) {
    const json doc = json::parse(read_file(runs_dir + "/" + id + "/metrics.json"));
    const json& run = doc.at("run");
    const std::vector<json> kv = {id, run.at("family"), run.at("parameter"), run.at("m"),
                                  run.at("batch_size"), run.at("seed")};
    auto row = [&](std::vector<json> tail) {
      std::vector<json> r(kv);
      r.insert(r.end(), tail.begin(), tail.end());
      return r;
    };
    auto emit = [&](const json& rep, const json& k, const json& q1, const std::string& name,
                    const json& value) {
      metrics.add(
          row({rep.at("state"), rep.at("epoch"), rep.at("level"), k, q1, name, value, unit_of(name)}));
      if (value.is_null()) return;
      groups[{cell(run.at("family")), cell(run.at("parameter")), cell(run.at("m")),
              cell(run.at("batch_size")), cell(rep.at("state")), cell(rep.at("level")), cell(k),
              cell(q1), name}]
          .values.push_back(value.get<double>());
    };

    const json& tr = doc.at("training");
    training.add(row({tr.at("best_epoch"), tr.at("epochs"), tr.at("status"),
                      tr.at("best_train_r2"), tr.at("best_test_r2"), tr.at("best_loss"),
                      tr.at("config").at("early_stopping_monitor")}));

    for (const auto& rep : doc.at("reports")) {
      emit(rep, nullptr, nullptr, "train_r2", rep.at("train_r2"));
      emit(rep, nullptr, nullptr, "test_r2", rep.at("test_r2"));
      for (const auto& s : rep.at("sizes")) {
        const json& k = s.at("k");
        for (const char* name : {"pr_mean", "pr_sd", "pr_se", "pr_normalized", "pr_max",
                                 "rrr_mean", "rrr_se", "rrr_normalized", "entropy",
                                 "entropy_initial", "kl"}) {
          if (name[0] == 'r' && rep.at("rotations") == 0) continue;
          emit(rep, k, nullptr, name, s.at(name));
        }
        for (const auto& z : s.at("zero_rows")) {
          for (const char* name : {"qk", "threshold", "zero_percent", "zero_percent_pooled",
                                   "consistent_percent", "inconsistent_percent",
                                   "consistent_rows", "dependent_percent"}) {
            if (std::string(name) == "dependent_percent" && z.at(name).is_null()) continue;
            emit(rep, k, z.at("q1"), name, z.at(name));
          }
        }
      }
    }

    if (doc.contains("plots")) {
      any_plots = true;
      for (const auto& [state, per_k] : doc.at("plots").items()) {
        for (const auto& [k, p] : per_k.items()) {
          const json kj = std::stoi(k);
          for (const auto& pt : p.at("zipf")) zipf.add(row({state, kj, pt[0], pt[1]}));
          const auto& h = p.at("histogram");
          const auto& edges = h.at("edges");
          const auto& counts = h.at("counts");
          for (std::size_t i = 0; i < counts.size(); ++i)
            hist.add(row({state, kj, edges[i], edges[i + 1], counts[i],
                          i == 0 ? h.at("clamped") : json(0)}));
          for (const auto& pt : p.at("mef")) mef.add(row({state, kj, pt[0], pt[1], pt[2]}));
          const auto& f = p.at("mef_fit");
          fit.add(row({state, kj, f.at("lo"), f.at("hi"), f.at("slope"), f.at("intercept"),
                       f.at("points")}));
        }
      }
      for (const auto& [state, h] : doc.at("heatmaps").items()) {
        for (const char* name : {"A_T", "B", "J"}) {
          const auto& grid = h.at(name);
          for (std::size_t r = 0; r < grid.size(); ++r)
            for (std::size_t c = 0; c < grid[r].size(); ++c)
              heat.add(row({state, name, r, c, grid[r][c]}));
        }
      }
    }
    if (doc.contains("bootstrap")) {
      any_boot = true;
      for (const auto& v : doc.at("bootstrap"))
        boot.add(row({v.at("variant"), v.at("architecture"), v.at("status"), v.at("train_r2")}));
    }
  }

  Table summary({"family", "parameter", "m", "batch_size", "state", "level", "k", "q1", "metric",
                 "mean", "sd", "se", "n", "unit"});
  for (const auto& [key, g] : groups) {
    const double mu = mean(g.values);
    const bool many = g.values.size() > 1;
    std::vector<json> r(key.begin(), key.end());
    r.push_back(mu);
    r.push_back(many ? json(sample_stddev(g.values)) : json(nullptr));
    r.push_back(many ? json(std_error(g.values)) : json(nullptr));
    r.push_back(g.values.size());
    r.push_back(unit_of(key.back()));
    summary.add(r);
  }

  ReportFiles out;
  out.runs = ids.size();
  auto save = [&](const std::string& name, const Table& t) {
    const std::string path = out_dir + "/" + name + ".csv";
    write_file_atomic(path, t.str());
    out.files.push_back(path);
  };
  save("metrics_long", metrics);
  save("summary", summary);
  save("training", training);
  if (any_plots) {
    save("zipf", zipf);
    save("histogram", hist);
    save("mef", mef);
    save("mef_fit", fit);
    save("heatmap", heat);
  }
  if (any_boot) save("bootstrap", boot);
  return out;
}

}  // namespace kalab
