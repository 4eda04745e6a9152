#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace culgen {

struct CulturalRecord {
  std::string id;
  std::string image_ref;  // resolved path
  std::string country;
  std::vector<std::string> components;  // deduplicated, first-seen order
  std::string topic;
};

struct CountryVisualElement {
  std::string country;
  std::string element;
};

struct RetrievalResult {
  std::vector<CulturalRecord> selected;   // min(3, n) records
  std::vector<std::string> components;    // merged union + visual element
  CulturalRecord reference;               // one of selected
  uint64_t seed = 0;
};

// One representative visual element per country, shipped as an editable
// JSON object {country: element}.
class VisualElementTable {
 public:
  VisualElementTable() = default;
  static VisualElementTable load(const std::string& path);
  void save(const std::string& path) const;

  CountryVisualElement lookup(const std::string& country) const;
  std::optional<std::string> try_lookup(const std::string& country) const;
  void set(const std::string& country, const std::string& element);
  size_t size() const { return table_.size(); }
  const std::map<std::string, std::string>& entries() const { return table_; }

 private:
  std::map<std::string, std::string> table_;
};

// Text-model contract used to (re)generate the visual-element table.
class TextModelClient {
 public:
  virtual ~TextModelClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

VisualElementTable regenerate_visual_elements(const std::vector<std::string>& countries,
                                              TextModelClient& client);

// Immutable after ingest; keyed by country. Retrieval is the documented
// seeded Fisher-Yates partial shuffle (docs/determinism.md).
class CulturalDB {
 public:
  struct IngestReport {
    int total = 0;
    std::map<std::string, int> per_country;
  };

  // Manifest: JSON-lines {id, image, country, components[], topic?}.
  // Image paths resolve relative to the manifest's directory.
  static CulturalDB ingest(const std::string& manifest_path, IngestReport* report = nullptr);

  // Persisted single-JSON index (image paths stored as given).
  void save_index(const std::string& path) const;
  static CulturalDB load_index(const std::string& path);

  void attach_visual_elements(VisualElementTable table) { elements_ = std::move(table); }
  const VisualElementTable& visual_elements() const { return elements_; }

  int count(const std::string& country) const;
  int total() const;
  std::vector<std::string> countries() const;
  const std::vector<CulturalRecord>& records(const std::string& country) const;

  RetrievalResult retrieve(const std::string& country, uint64_t seed) const;

 private:
  std::map<std::string, std::vector<CulturalRecord>> by_country_;  // sorted by id
  VisualElementTable elements_;
};

}  // namespace culgen
