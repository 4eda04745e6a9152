#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "culgen/embedding.hpp"
#include "culgen/pipeline.hpp"

namespace culgen {

enum class Axis { kRace, kGender };

std::string to_string(Axis a);
Axis axis_from_string(const std::string& s);

// Six-way taxonomy used by the swap experiment (win-table column order);
// the five-way subset (no Indian) is the demographic-distribution layout.
const std::vector<std::string>& race_labels6();
const std::vector<std::string>& race_labels5();
const std::vector<std::string>& gender_labels();

struct DemographicProfile {
  std::string image_id;
  int face_index = 0;
  std::string gender;  // man | woman
  std::string race;    // race_labels6 entry
};

struct RawFace {
  std::string gender;
  std::string race;
};

class FaceAnalyzerClient {
 public:
  virtual ~FaceAnalyzerClient() = default;
  virtual std::vector<RawFace> analyze(const std::string& image_ref) = 0;
};

// Replay client: JSON-lines {image, faces: [{gender, race}]}.
class FixtureFaceAnalyzer : public FaceAnalyzerClient {
 public:
  explicit FixtureFaceAnalyzer(const std::string& fixture_path);
  std::vector<RawFace> analyze(const std::string& image_ref) override;

 private:
  std::map<std::string, std::vector<RawFace>> records_;
};

// Maps raw analyzer labels through the shipped alias tables into the
// closed sets. Recognized non-binary outputs are counted (not profiled);
// anything else raises AuditError with the raw label.
std::vector<DemographicProfile> profile_faces(const std::string& image_ref,
                                              FaceAnalyzerClient& analyzer,
                                              int* nonbinary_count = nullptr);

struct DistributionTable {
  Axis axis;
  std::vector<std::string> columns;
  std::vector<std::string> topics;  // row order; "Overall" last
  std::map<std::string, std::map<std::string, double>> pct;
  std::map<std::string, int> faces_per_topic;
  int out_of_set_faces = 0;  // labels outside the requested column set
};

// Per-topic and Overall percentages over detected faces. Race uses the
// five-way columns by default; pass race_labels6() to keep Indian.
DistributionTable tabulate_demographics(const std::vector<DemographicProfile>& profiles,
                                        const std::map<std::string, std::string>& topics,
                                        Axis axis,
                                        const std::vector<std::string>& labels = {});

// --- demographic-swap persuasion experiment ------------------------------

struct SwapVariant {
  std::string image_ref;
  std::string description;
  std::string value;  // the attribute value this variant depicts
};

struct PairTrial {
  std::string pair_id;
  std::string topic;
  Axis attribute = Axis::kRace;
  SwapVariant variant_a;
  SwapVariant variant_b;
  ActionReason ar;
};

struct SwapBase {
  std::string id;
  std::string image_ref;
  std::string description;
  std::string topic;
  ActionReason ar;
  Axis attribute = Axis::kRace;
  std::string source_value;
};

struct EditRequest {
  std::string instruction;  // rendered edit template
  std::string description;
  std::string source_image;
  std::string source_value;
  std::string target_value;
};

class TextEditClient {
 public:
  virtual ~TextEditClient() = default;
  virtual std::string edit(const EditRequest& request) = 0;
};

class ImageEditClient {
 public:
  virtual ~ImageEditClient() = default;
  // Returns the edited image's path.
  virtual std::string edit(const EditRequest& request) = 0;
};

// Local stand-ins for the remote editors: the text editor performs the
// "<source> person" -> "<target> person" replacement the template asks
// for; the image editor copies the file with a per-value deterministic
// tint so variants are distinguishable.
class LocalSwapTextEditor : public TextEditClient {
 public:
  std::string edit(const EditRequest& request) override;
};

class LocalTintImageEditor : public ImageEditClient {
 public:
  explicit LocalTintImageEditor(std::string out_dir) : out_dir_(std::move(out_dir)) {}
  std::string edit(const EditRequest& request) override;

 private:
  std::string out_dir_;
};

// One variant per value (the source value reuses the base unedited), then
// every unordered value pair becomes a PairTrial. Editor failures skip the
// affected value with a provenance log entry.
std::vector<PairTrial> build_swap_pairs(const SwapBase& base,
                                        const std::vector<std::string>& values,
                                        ImageEditClient& image_editor,
                                        TextEditClient& text_editor,
                                        const PromptTemplates& templates,
                                        std::vector<std::string>* skipped_values = nullptr);

enum class Order { kAB, kBA };

std::string to_string(Order o);

struct JudgeVerdict {
  std::string pair_id;
  std::string judge_id;
  std::string modality;  // "MLLM" | "LLM"
  Order order = Order::kAB;
  bool valid = false;
  std::string winner_value;
  std::string explanation;
  std::string raw_transcript;
};

struct JudgeRequest {
  std::string prompt;
  // Contents in presentation order: descriptions for LLM judges, image
  // refs for MLLM judges.
  std::string first_content;
  std::string second_content;
};

class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  virtual std::string respond(const JudgeRequest& request) = 0;
  virtual std::string id() const = 0;
  virtual std::string modality() const = 0;  // "MLLM" | "LLM"
};

// Always answers the same index: the pure position bias that both-order
// aggregation must cancel exactly.
class PositionBiasedJudge : public JudgeClient {
 public:
  explicit PositionBiasedJudge(int index = 1, std::string modality = "LLM")
      : index_(index), modality_(std::move(modality)) {}
  std::string respond(const JudgeRequest&) override;
  std::string id() const override { return "mock-position-" + std::to_string(index_); }
  std::string modality() const override { return modality_; }

 private:
  int index_;
  std::string modality_;
};

class UniformRandomJudge : public JudgeClient {
 public:
  explicit UniformRandomJudge(uint64_t seed, std::string modality = "LLM");
  std::string respond(const JudgeRequest&) override;
  std::string id() const override { return "mock-uniform"; }
  std::string modality() const override { return modality_; }

 private:
  uint64_t state_;
  std::string modality_;
};

// Decides from content hashes only; the winner is order-independent.
class ContentHashJudge : public JudgeClient {
 public:
  explicit ContentHashJudge(std::string modality = "LLM") : modality_(std::move(modality)) {}
  std::string respond(const JudgeRequest&) override;
  std::string id() const override { return "mock-content"; }
  std::string modality() const override { return modality_; }

 private:
  std::string modality_;
};

// Replays recorded transcripts keyed by (pair_id, order); JSON-lines
// {pair_id, order, transcript}. judge_pair passes the key via
// JudgeRequest.prompt lookup, so this client also needs the trial id;
// set_current is called by judge_pair before respond.
class ScriptedJudge : public JudgeClient {
 public:
  ScriptedJudge(const std::string& fixture_path, std::string judge_id, std::string modality);
  std::string respond(const JudgeRequest&) override;
  std::string id() const override { return judge_id_; }
  std::string modality() const override { return modality_; }
  void set_current(const std::string& pair_id, Order order);

 private:
  std::map<std::string, std::string> transcripts_;
  std::string judge_id_;
  std::string modality_;
  std::string current_key_;
};

// Renders the modality's verbatim prompt with the pair's contents in the
// given order, parses "Answer: <index>" (last occurrence) out of the
// transcript and maps it back through the order. Unparseable answers
// yield valid=false verdicts.
JudgeVerdict judge_pair(const PairTrial& trial, JudgeClient& judge, Order order,
                        const PromptTemplates& templates);

struct WinTable {
  std::string judge_id;
  std::string modality;
  Axis attribute = Axis::kRace;
  std::vector<std::string> values;
  std::vector<std::string> topics;  // "Overall" last
  std::map<std::string, std::map<std::string, double>> pct;      // over valid verdicts
  std::map<std::string, std::map<std::string, double>> raw_pct;  // over all verdicts
  std::map<std::string, int> verdicts_per_topic;                 // valid + complete
  int invalid_verdicts = 0;
  int excluded_pairs = 0;
};

// Requires both orders valid per (pair, judge); incomplete pairs are
// excluded and counted. Percentages are wins over included verdicts.
WinTable aggregate_wins(const std::vector<JudgeVerdict>& verdicts,
                        const std::vector<PairTrial>& trials);

void save_verdicts(const std::string& path, const std::vector<JudgeVerdict>& verdicts);
std::vector<JudgeVerdict> load_verdicts(const std::string& path);

void save_trials(const std::string& path, const std::vector<PairTrial>& trials);
std::vector<PairTrial> load_trials(const std::string& path);

void save_profiles(const std::string& path, const std::vector<DemographicProfile>& profiles);
std::vector<DemographicProfile> load_profiles(const std::string& path);

}  // namespace culgen
