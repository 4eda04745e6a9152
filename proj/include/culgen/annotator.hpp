#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace culgen {

// Country predictions for one image, rank-ordered, 1..3 entries, all
// canonical names.
struct AnnotationResult {
  std::string image_id;
  std::vector<std::string> countries;
  std::vector<std::string> components;
  std::string raw_response;
  bool truncated = false;
};

class VLMClient {
 public:
  virtual ~VLMClient() = default;
  virtual std::string query(const std::string& image_ref, const std::string& instruction) = 0;
  virtual std::string id() const = 0;
};

// Deterministic replay from recorded (image basename, image crc32,
// instruction version, response) records, one JSON object per line.
class FixtureVLMClient : public VLMClient {
 public:
  explicit FixtureVLMClient(const std::string& fixture_path, bool verify_crc = true);
  std::string query(const std::string& image_ref, const std::string& instruction) override;
  std::string id() const override { return "fixture-vlm"; }

 private:
  struct Record {
    std::string response;
    std::optional<uint32_t> image_crc32;
    std::string instruction_version;
  };
  std::map<std::string, Record> records_;
  bool verify_crc_;
};

// Canonical country list + alias table (countries.json).
class Vocabulary {
 public:
  static Vocabulary load(const std::string& path);

  bool contains(const std::string& canonical) const;
  // Case-insensitive match against canonical names and aliases; throws
  // ParseError listing the nearest canonical names when nothing matches.
  std::string canonicalize(const std::string& raw) const;
  std::vector<std::string> nearest(const std::string& raw, int k = 3) const;
  const std::vector<std::string>& canonical() const { return canonical_; }

 private:
  std::vector<std::string> canonical_;
  std::map<std::string, std::string> lookup_;  // lowercase -> canonical
};

// country -> cultural region; total over the canonical list (checked at
// load).
class RegionMap {
 public:
  static RegionMap load(const std::string& path, const Vocabulary& vocab);
  const std::string& of(const std::string& country) const;
  const std::map<std::string, std::string>& entries() const { return region_; }

 private:
  std::map<std::string, std::string> region_;
};

// Instruction version tag for the shipped annotation template.
inline const char* kAnnotationInstructionVersion = "v1";

// Queries the client and parses its structured response: a numbered
// country list (capped at 3 with a warning) and "- " component lines.
AnnotationResult annotate(const std::string& image_ref, VLMClient& client,
                          const Vocabulary& vocab, const std::string& instruction);

AnnotationResult annotate_with_retries(const std::string& image_ref, VLMClient& client,
                                       const Vocabulary& vocab, const std::string& instruction,
                                       int max_attempts = 3);

struct AnnotationMetrics {
  double recall = 0.0;
  double p_at_1 = 0.0;
  int n = 0;
};

// recall: gold country anywhere in the <=3 predictions; p@1: exact top-1.
// With a RegionMap, equality is tested after mapping both sides.
AnnotationMetrics score_annotations(const std::vector<AnnotationResult>& preds,
                                    const std::map<std::string, std::string>& gold,
                                    const RegionMap* grouping = nullptr);

// Counts keyed by top-1 country.
std::map<std::string, int> distribution_report(const std::vector<AnnotationResult>& annotations);

// Annotation store helpers (JSON-lines of AnnotationResult).
void save_annotations(const std::string& path, const std::vector<AnnotationResult>& annotations);
std::vector<AnnotationResult> load_annotations(const std::string& path);

// Gold labels: CSV "image_id,country" with a header line.
std::map<std::string, std::string> load_gold_csv(const std::string& path);

}  // namespace culgen
