#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "culgen/embedding.hpp"
#include "culgen/pipeline.hpp"

namespace culgen {

struct Image;

struct AlignmentScore {
  double ar_score = 0.0;
  double country_score = 0.0;
  double average = 0.0;

  static AlignmentScore of(double ar, double country);
};

class AlignmentScorer {
 public:
  virtual ~AlignmentScorer() = default;
  virtual double score(const Image& image, const std::string& text) = 0;
  virtual std::string id() const = 0;
  double score_path(const std::string& image_path, const std::string& text);
};

// Shipped default: cosine between toy embeddings of the rendered latent
// and the text, squashed to [0,1] via (1+cos)/2. Validates plumbing, not
// any published alignment numbers.
class ToyCosineScorer : public AlignmentScorer {
 public:
  explicit ToyCosineScorer(int dim = 16, uint64_t text_seed = 0);
  double score(const Image& image, const std::string& text) override;
  std::string id() const override;

 private:
  int dim_;
  ToyHashTextEncoder text_enc_;
};

class ConstantScorer : public AlignmentScorer {
 public:
  explicit ConstantScorer(double value) : value_(value) {}
  double score(const Image&, const std::string&) override { return value_; }
  std::string id() const override { return "constant"; }

 private:
  double value_;
};

AlignmentScore score_alignment(const Image& image, const ActionReason& ar,
                               const std::string& country, AlignmentScorer& scorer);

// 100 statements x 5 countries at seed 0 unless configured otherwise;
// samples() is |statements| * |countries| and is asserted before any
// generation begins.
struct EvalProtocol {
  std::vector<ActionReason> statements;
  std::vector<std::string> countries = {"China", "France", "South Africa",
                                        "United Arab Emirates", "Mexico"};
  uint64_t seed = 0;

  int samples() const;
  void validate() const;
};

// Statements file: JSON-lines {action, reason}; limit 0 keeps all.
std::vector<ActionReason> load_statements(const std::string& path, int limit = 0);

enum class Variant {
  kNone,
  kNoCultural,
  kEarly,
  kLate,
  kNoStyle,
  kMultiStyle,
  kCulgen,
};

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

// Mapping table in docs/ablations.md.
AblationFlags flags_for_variant(Variant v);

struct SampleScore {
  int index = 0;
  std::string country;
  std::string statement;
  double ar_score = 0.0;
  double country_score = 0.0;
  double average = 0.0;
};

struct AblationRow {
  std::string variant;
  double average = 0.0;
  double ar = 0.0;
  double country = 0.0;
  int n = 0;
};

// Generates every protocol sample under the variant's flags, scores each
// image, writes samples + scores.jsonl under run_dir (when non-empty) and
// returns the mean row.
AblationRow run_ablation(Variant variant, const EvalProtocol& protocol,
                         AlignmentScorer& scorer, const PipelineContext& base_ctx,
                         const std::filesystem::path& run_dir,
                         std::vector<SampleScore>* per_sample = nullptr);

void save_scores(const std::string& path, const std::vector<SampleScore>& scores);
std::vector<SampleScore> load_scores(const std::string& path);

}  // namespace culgen
