#include "culgen/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "culgen/errors.hpp"

namespace fs = std::filesystem;

namespace culgen {

std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& slots) {
  std::string out = tmpl;
  for (const auto& [key, value] : slots) {
    const std::string needle = "{" + key + "}";
    size_t pos = 0;
    while ((pos = out.find(needle, pos)) != std::string::npos) {
      out.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  return out;
}

namespace {
std::string read_text_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open prompt template: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  std::string text = ss.str();
  // Template files end with one newline for editor hygiene; the prompt
  // itself does not.
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}
}  // namespace

PromptTemplates PromptTemplates::load(const std::string& prompts_dir) {
  const fs::path dir(prompts_dir);
  PromptTemplates t;
  t.generation_ar = read_text_file(dir / "generation_ar.txt");
  t.generation_cultural = read_text_file(dir / "generation_cultural.txt");
  t.edit_image_race = read_text_file(dir / "edit_image_race.txt");
  t.edit_text_race = read_text_file(dir / "edit_text_race.txt");
  t.edit_image_gender = read_text_file(dir / "edit_image_gender.txt");
  t.edit_text_gender = read_text_file(dir / "edit_text_gender.txt");
  t.judge_llm = read_text_file(dir / "judge_llm.txt");
  t.judge_mllm = read_text_file(dir / "judge_mllm.txt");
  t.annotation_instruction = read_text_file(dir / "annotation_instruction_v1.txt");
  return t;
}

ConditionBundle make_bundle(const RetrievalResult& retrieval, const std::string& country,
                            const ActionReason& ar, const TextEncoder& text_enc,
                            const ImageEncoder& image_enc, const PromptTemplates& templates,
                            int num_images, bool per_component_encoding) {
  const std::string prompt_text = render_template(
      templates.generation_cultural, {{"country", country}, {"AR", ar.render()}});

  std::optional<Embedding> cultural;
  if (!retrieval.components.empty()) {
    if (per_component_encoding) {
      std::vector<Embedding> parts;
      for (const auto& c : retrieval.components) parts.push_back(encode_text(c, text_enc));
      cultural = concat_sequences(parts);
    } else {
      std::string joined;
      for (const auto& c : retrieval.components) {
        if (!joined.empty()) joined += ", ";
        joined += c;
      }
      cultural = encode_text(joined, text_enc);
    }
  }

  ConditionBundle bundle{encode_text(prompt_text, text_enc), std::move(cultural),
                         encode_text(ar.reason, text_enc), {}};
  if (num_images <= 1) {
    bundle.images.push_back(encode_image(retrieval.reference.image_ref, image_enc));
  } else {
    const int k = std::min<int>(num_images, static_cast<int>(retrieval.selected.size()));
    for (int i = 0; i < k; ++i)
      bundle.images.push_back(encode_image(retrieval.selected[static_cast<size_t>(i)].image_ref,
                                           image_enc));
  }
  return bundle;
}

GenerationOutput generate_sample(const GenerationSpec& spec, const PipelineContext& ctx) {
  GenerationOutput out{
      {}, ctx.db.retrieve(spec.country, spec.retrieval_seed),
      render_template(ctx.templates.generation_cultural,
                      {{"country", spec.country}, {"AR", spec.ar.render()}})};
  const ConditionBundle bundle =
      make_bundle(out.retrieval, spec.country, spec.ar, ctx.text_enc, ctx.image_enc,
                  ctx.templates, ctx.flags.num_style_images, ctx.per_component_cultural);
  out.sample = sample(ctx.denoiser, bundle, ctx.schedule, ctx.adapters, ctx.flags,
                      spec.noise_seed);
  return out;
}

}  // namespace culgen
