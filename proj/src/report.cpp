#include "culgen/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "culgen/chart.hpp"
#include "culgen/errors.hpp"
#include "culgen/image.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace culgen {

namespace {

std::string round_even_2dp(double v) {
  double scaled = v * 100.0;
  const double floor_v = std::floor(scaled);
  const double frac = scaled - floor_v;
  double rounded;
  if (std::abs(frac - 0.5) < 1e-9) {
    // Exact decimal half: round to even.
    const long long f = static_cast<long long>(floor_v);
    rounded = (f % 2 == 0) ? static_cast<double>(f) : static_cast<double>(f + 1);
  } else {
    rounded = std::nearbyint(scaled);
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", rounded / 100.0);
  return buf;
}

}  // namespace

std::string format_score(double v) { return round_even_2dp(v); }
std::string format_pct(double v) { return round_even_2dp(v); }

TableDoc to_table(const DistributionTable& table, const std::string& name) {
  TableDoc doc;
  doc.name = name;
  doc.columns.push_back("Topic");
  for (const auto& c : table.columns) doc.columns.push_back(c);
  for (const auto& topic : table.topics) {
    std::vector<std::string> row{topic};
    for (const auto& c : table.columns) row.push_back(format_pct(table.pct.at(topic).at(c)));
    doc.rows.push_back(std::move(row));
  }
  return doc;
}

TableDoc to_table(const WinTable& table, const std::string& name) {
  TableDoc doc;
  doc.name = name;
  doc.columns.push_back("Topic");
  for (const auto& v : table.values) doc.columns.push_back(v);
  for (const auto& topic : table.topics) {
    std::vector<std::string> row{topic};
    for (const auto& v : table.values) row.push_back(format_pct(table.pct.at(topic).at(v)));
    doc.rows.push_back(std::move(row));
    if (table.invalid_verdicts > 0 || table.excluded_pairs > 0) {
      // Raw companion row: wins over every verdict, valid or not.
      std::vector<std::string> raw{topic + " (raw)"};
      for (const auto& v : table.values) raw.push_back(format_pct(table.raw_pct.at(topic).at(v)));
      doc.rows.push_back(std::move(raw));
    }
  }
  return doc;
}

TableDoc to_table(const std::vector<AblationRow>& rows, const std::string& name) {
  TableDoc doc;
  doc.name = name;
  doc.columns = {"Variant", "Average", "AR", "Country"};
  for (const auto& r : rows)
    doc.rows.push_back({r.variant, format_score(r.average), format_score(r.ar),
                        format_score(r.country)});
  return doc;
}

TableDoc to_table(const std::map<std::string, int>& distribution, const std::string& name) {
  TableDoc doc;
  doc.name = name;
  doc.columns = {"Country", "Count"};
  for (const auto& [country, count] : distribution)
    doc.rows.push_back({country, std::to_string(count)});
  return doc;
}

namespace {

void write_tsv(const fs::path& path, const TableDoc& doc) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path.string());
  for (size_t i = 0; i < doc.columns.size(); ++i)
    os << doc.columns[i] << (i + 1 < doc.columns.size() ? "\t" : "\n");
  for (const auto& row : doc.rows)
    for (size_t i = 0; i < row.size(); ++i)
      os << row[i] << (i + 1 < row.size() ? "\t" : "\n");
}

void write_json(const fs::path& path, const TableDoc& doc) {
  json rows = json::array();
  for (const auto& row : doc.rows) {
    json r = json::object();
    for (size_t i = 0; i < row.size() && i < doc.columns.size(); ++i)
      r[doc.columns[i]] = row[i];
    rows.push_back(std::move(r));
  }
  const json j = {{"name", doc.name}, {"columns", doc.columns}, {"rows", rows}};
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path.string());
  os << j.dump(2) << "\n";
}

}  // namespace

std::vector<fs::path> emit_report(const ReportInputs& inputs, const fs::path& out_dir) {
  if (inputs.tables.empty() && inputs.distributions.empty())
    throw InvalidInputError("emit_report: nothing to report");

  const fs::path tables_dir = out_dir / "tables";
  const fs::path charts_dir = out_dir / "charts";
  fs::create_directories(tables_dir);
  std::vector<fs::path> files;

  for (const auto& doc : inputs.tables) {
    const fs::path tsv = tables_dir / (doc.name + ".tsv");
    const fs::path js = tables_dir / (doc.name + ".json");
    write_tsv(tsv, doc);
    write_json(js, doc);
    files.push_back(tsv);
    files.push_back(js);
  }

  for (const auto& [name, bars] : inputs.distributions) {
    fs::create_directories(charts_dir);
    const fs::path png = charts_dir / (name + ".png");
    write_png(png.string(), render_bar_chart(bars, name));
    files.push_back(png);
    const fs::path tsv = tables_dir / (name + ".tsv");
    TableDoc doc;
    doc.name = name;
    doc.columns = {"Label", "Value"};
    for (const auto& [label, value] : bars) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%g", value);
      doc.rows.push_back({label, buf});
    }
    write_tsv(tsv, doc);
    files.push_back(tsv);
  }

  // Manifest with content hashes, path-sorted for determinism.
  std::sort(files.begin(), files.end());
  json manifest = json::array();
  for (const auto& f : files) {
    manifest.push_back({{"path", fs::relative(f, out_dir).generic_string()},
                        {"bytes", static_cast<uint64_t>(fs::file_size(f))},
                        {"crc32", crc32_of_file(f.string())}});
  }
  const fs::path manifest_path = out_dir / "manifest.json";
  std::ofstream os(manifest_path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + manifest_path.string());
  os << json{{"files", manifest}}.dump(2) << "\n";
  files.push_back(manifest_path);
  return files;
}

}  // namespace culgen
