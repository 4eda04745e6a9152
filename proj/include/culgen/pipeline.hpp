#pragma once

#include <map>
#include <string>

#include "culgen/backbone.hpp"
#include "culgen/cultural_db.hpp"
#include "culgen/embedding.hpp"
#include "culgen/scheduler.hpp"

namespace culgen {

// Replaces "{key}" for each provided slot; anything else (including the
// judge templates' "${...}" answer-format markers) passes through.
std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& slots);

// Prompt texts shipped verbatim under data/prompts/.
struct PromptTemplates {
  std::string generation_ar;        // message-only generation
  std::string generation_cultural;  // country-targeted generation
  std::string edit_image_race;
  std::string edit_text_race;
  std::string edit_image_gender;
  std::string edit_text_gender;
  std::string judge_llm;
  std::string judge_mllm;
  std::string annotation_instruction;

  static PromptTemplates load(const std::string& prompts_dir);
};

// Turns one retrieval result + statement into the four condition sources.
// Cultural components are joined into one comma-separated string before
// encoding unless per_component_encoding asks for one encoder call per
// component (concatenated afterwards). num_images = 1 encodes the random
// reference; k > 1 encodes the first k selected records.
ConditionBundle make_bundle(const RetrievalResult& retrieval, const std::string& country,
                            const ActionReason& ar, const TextEncoder& text_enc,
                            const ImageEncoder& image_enc, const PromptTemplates& templates,
                            int num_images = 1, bool per_component_encoding = false);

struct PipelineContext {
  const CulturalDB& db;
  const DenoiserBase& denoiser;
  const AdapterParams& adapters;
  const TextEncoder& text_enc;
  const ImageEncoder& image_enc;
  const PromptTemplates& templates;
  ScheduleConfig schedule;
  AblationFlags flags;
  bool per_component_cultural = false;
};

struct GenerationSpec {
  std::string country;
  ActionReason ar;
  uint64_t retrieval_seed = 0;
  uint64_t noise_seed = 0;
};

struct GenerationOutput {
  SampleResult sample;
  RetrievalResult retrieval;
  std::string prompt_text;
};

GenerationOutput generate_sample(const GenerationSpec& spec, const PipelineContext& ctx);

}  // namespace culgen
