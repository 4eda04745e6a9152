#include "culgen/cultural_db.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "culgen/errors.hpp"
#include "culgen/log.hpp"
#include "culgen/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace culgen {

VisualElementTable VisualElementTable::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open visual-element table: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ParseError("visual-element table " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError("visual-element table must be a JSON object: " + path);
  VisualElementTable t;
  for (auto& [country, element] : j.items()) t.table_[country] = element.get<std::string>();
  return t;
}

void VisualElementTable::save(const std::string& path) const {
  json j = json::object();
  for (const auto& [country, element] : table_) j[country] = element;
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for write: " + path);
  os << j.dump(2) << "\n";
}

CountryVisualElement VisualElementTable::lookup(const std::string& country) const {
  auto it = table_.find(country);
  if (it == table_.end())
    throw NotFoundError("no visual element for country '" + country + "'");
  return {country, it->second};
}

std::optional<std::string> VisualElementTable::try_lookup(const std::string& country) const {
  auto it = table_.find(country);
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

void VisualElementTable::set(const std::string& country, const std::string& element) {
  table_[country] = element;
}

VisualElementTable regenerate_visual_elements(const std::vector<std::string>& countries,
                                              TextModelClient& client) {
  VisualElementTable t;
  for (const auto& country : countries) {
    const std::string prompt =
        "Name one visual element that best represents " + country +
        " in advertisement imagery. Answer with the element name only.";
    std::string element = client.complete(prompt);
    // Trim whitespace and a trailing period.
    const auto first = element.find_first_not_of(" \t\r\n");
    const auto last = element.find_last_not_of(" \t\r\n.");
    if (first == std::string::npos)
      throw ParseError("empty visual-element response for " + country);
    t.set(country, element.substr(first, last - first + 1));
  }
  return t;
}

CulturalDB CulturalDB::ingest(const std::string& manifest_path, IngestReport* report) {
  std::ifstream is(manifest_path);
  if (!is) throw IoError("cannot open manifest: " + manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();

  CulturalDB db;
  std::string line;
  int line_no = 0;
  int total = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      std::ostringstream msg;
      msg << manifest_path << ":" << line_no << ": malformed manifest line: " << e.what();
      throw ParseError(msg.str());
    }
    CulturalRecord rec;
    try {
      rec.id = j.at("id").get<std::string>();
      rec.country = j.at("country").get<std::string>();
      const auto image = j.at("image").get<std::string>();
      rec.image_ref = (base / image).string();
      std::set<std::string> seen;
      for (const auto& c : j.at("components")) {
        auto s = c.get<std::string>();
        if (seen.insert(s).second) rec.components.push_back(std::move(s));
      }
      rec.topic = j.value("topic", "");
    } catch (const json::exception& e) {
      std::ostringstream msg;
      msg << manifest_path << ":" << line_no << ": missing/bad field: " << e.what();
      throw ParseError(msg.str());
    }
    if (rec.country.empty()) {
      std::ostringstream msg;
      msg << manifest_path << ":" << line_no << ": empty country";
      throw ParseError(msg.str());
    }
    if (!fs::exists(rec.image_ref))
      throw IoError("manifest references missing image: " + rec.image_ref);
    db.by_country_[rec.country].push_back(std::move(rec));
    ++total;
  }
  if (total == 0) throw InvalidInputError("ingest: no records in " + manifest_path);

  for (auto& [country, recs] : db.by_country_)
    std::sort(recs.begin(), recs.end(),
              [](const CulturalRecord& a, const CulturalRecord& b) { return a.id < b.id; });

  if (report) {
    report->total = total;
    for (const auto& [country, recs] : db.by_country_)
      report->per_country[country] = static_cast<int>(recs.size());
  }
  return db;
}

void CulturalDB::save_index(const std::string& path) const {
  json recs = json::array();
  for (const auto& [country, list] : by_country_) {
    for (const auto& r : list) {
      recs.push_back({{"id", r.id},
                      {"image", r.image_ref},
                      {"country", r.country},
                      {"components", r.components},
                      {"topic", r.topic}});
    }
  }
  json j = {{"schema", "culgen-db"}, {"version", 1}, {"records", recs}};
  if (elements_.size() > 0) {
    json ve = json::object();
    for (const auto& [c, e] : elements_.entries()) ve[c] = e;
    j["visual_elements"] = ve;
  }
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for write: " + path);
  os << j.dump(2) << "\n";
}

CulturalDB CulturalDB::load_index(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open db index: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("db index: ") + e.what());
  }
  if (j.value("schema", "") != "culgen-db")
    throw ParseError("not a culgen db index: " + path);
  CulturalDB db;
  for (const auto& r : j.at("records")) {
    CulturalRecord rec;
    rec.id = r.at("id").get<std::string>();
    rec.image_ref = r.at("image").get<std::string>();
    rec.country = r.at("country").get<std::string>();
    for (const auto& c : r.at("components")) rec.components.push_back(c.get<std::string>());
    rec.topic = r.value("topic", "");
    db.by_country_[rec.country].push_back(std::move(rec));
  }
  for (auto& [country, recs] : db.by_country_)
    std::sort(recs.begin(), recs.end(),
              [](const CulturalRecord& a, const CulturalRecord& b) { return a.id < b.id; });
  if (j.contains("visual_elements")) {
    VisualElementTable t;
    for (auto& [c, e] : j.at("visual_elements").items()) t.set(c, e.get<std::string>());
    db.elements_ = std::move(t);
  }
  return db;
}

int CulturalDB::count(const std::string& country) const {
  auto it = by_country_.find(country);
  return it == by_country_.end() ? 0 : static_cast<int>(it->second.size());
}

int CulturalDB::total() const {
  int n = 0;
  for (const auto& [country, recs] : by_country_) n += static_cast<int>(recs.size());
  return n;
}

std::vector<std::string> CulturalDB::countries() const {
  std::vector<std::string> out;
  out.reserve(by_country_.size());
  for (const auto& [country, recs] : by_country_) out.push_back(country);
  return out;
}

const std::vector<CulturalRecord>& CulturalDB::records(const std::string& country) const {
  auto it = by_country_.find(country);
  if (it == by_country_.end()) {
    std::ostringstream msg;
    msg << "no records for country '" << country << "'; known countries:";
    for (const auto& c : countries()) msg << " " << c;
    throw NotFoundError(msg.str());
  }
  return it->second;
}

RetrievalResult CulturalDB::retrieve(const std::string& country, uint64_t seed) const {
  const auto& all = records(country);  // throws NotFoundError when absent
  const size_t n = all.size();
  const size_t k = std::min<size_t>(3, n);

  // Fisher-Yates partial shuffle over the id-sorted records; one further
  // draw from the same stream picks the reference. Stream pinned in
  // docs/determinism.md.
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  SeededRng rng(seed);
  for (size_t i = 0; i < k; ++i) {
    const size_t j = i + static_cast<size_t>(rng.bounded(n - i));
    std::swap(order[i], order[j]);
  }

  RetrievalResult result;
  result.seed = seed;
  for (size_t i = 0; i < k; ++i) result.selected.push_back(all[order[i]]);
  result.reference = result.selected[static_cast<size_t>(rng.bounded(k))];

  std::set<std::string> seen;
  for (const auto& rec : result.selected)
    for (const auto& c : rec.components)
      if (seen.insert(c).second) result.components.push_back(c);
  if (auto element = elements_.try_lookup(country)) {
    if (seen.insert(*element).second) result.components.push_back(*element);
  } else {
    log_warn("no visual element for country '" + country + "'; continuing without it");
  }
  return result;
}

}  // namespace culgen
