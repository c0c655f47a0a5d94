#pragma once

#include <string>
#include <vector>

namespace kalab {

struct ReportFiles {
  std::size_t runs = 0;
  std::vector<std::string> files;  // paths written, in order
};

/// Reads every runs/*/metrics.json under root and writes long-format CSV
/// tables to out_dir (default root/csv). Output bytes depend only on the
/// metrics files. Throws std::runtime_error when no runs are found.
ReportFiles write_report(const std::string& root, const std::string& out_dir = "");

}  // namespace kalab
