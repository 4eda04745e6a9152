#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "culgen/annotator.hpp"
#include "culgen/bias_audit.hpp"
#include "culgen/eval.hpp"

namespace culgen {

// A rendered table: first column holds row labels, cells are final
// strings (numeric formatting already applied).
struct TableDoc {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

// Round-half-even at two decimals with an epsilon snap at the .005
// boundary, so decimal halves round the way the printed tables do
// ((0.78 + 0.63) / 2 renders as "0.70").
std::string format_score(double v);
std::string format_pct(double v);

TableDoc to_table(const DistributionTable& table, const std::string& name);
TableDoc to_table(const WinTable& table, const std::string& name);
TableDoc to_table(const std::vector<AblationRow>& rows, const std::string& name = "alignment");
TableDoc to_table(const std::map<std::string, int>& distribution, const std::string& name);

struct ReportInputs {
  std::vector<TableDoc> tables;
  // name -> (label, value) bars; rendered as PNG charts as well as TSV.
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, double>>>> distributions;
};

// TSV + JSON per table, PNG per distribution, then manifest.json listing
// every artifact with size and crc32. Deterministic naming and content;
// re-running over the same inputs is byte-identical. Throws on empty
// inputs.
std::vector<std::filesystem::path> emit_report(const ReportInputs& inputs,
                                               const std::filesystem::path& out_dir);

}  // namespace culgen
