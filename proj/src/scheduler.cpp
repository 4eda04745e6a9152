#include "culgen/scheduler.hpp"

#include <algorithm>
#include <sstream>

#include "culgen/errors.hpp"

namespace culgen {

std::string to_string(Stage s) {
  switch (s) {
    case Stage::kStage1: return "stage1";
    case Stage::kStage2: return "stage2";
    case Stage::kStage3: return "stage3";
  }
  return "?";
}

void ScheduleConfig::validate() const {
  if (!(0.0 < b1 && b1 < b2 && b2 < 1.0))
    throw ConfigError("ScheduleConfig: need 0 < b1 < b2 < 1");
  if (total_steps < 1) throw ConfigError("ScheduleConfig: total_steps must be >= 1");
}

Stage stage_of_fraction(double fraction, const ScheduleConfig& cfg) {
  cfg.validate();
  if (fraction < cfg.b1) return Stage::kStage1;
  if (fraction < cfg.b2) return Stage::kStage2;
  return Stage::kStage3;
}

Stage stage_of(int step, const ScheduleConfig& cfg) {
  cfg.validate();
  if (step < 0 || step >= cfg.total_steps) {
    std::ostringstream msg;
    msg << "stage_of: step " << step << " outside [0, " << cfg.total_steps << ")";
    throw InvalidInputError(msg.str());
  }
  return stage_of_fraction(static_cast<double>(step) / cfg.total_steps, cfg);
}

CulturalStart cultural_start_from_string(const std::string& s) {
  if (s == "early") return CulturalStart::kEarly;
  if (s == "middle") return CulturalStart::kMiddle;
  if (s == "late") return CulturalStart::kLate;
  throw ConfigError("unknown cultural_start_stage '" + s + "' (early|middle|late)");
}

std::string to_string(CulturalStart s) {
  switch (s) {
    case CulturalStart::kEarly: return "early";
    case CulturalStart::kMiddle: return "middle";
    case CulturalStart::kLate: return "late";
  }
  return "?";
}

void AblationFlags::validate() const {
  if (num_style_images < 1 || num_style_images > 3)
    throw ConfigError("AblationFlags: num_style_images must be in {1,2,3}");
}

namespace {

bool cultural_in_stage(Stage stage, const AblationFlags& flags) {
  if (!flags.include_cultural) return false;
  switch (flags.cultural_start) {
    case CulturalStart::kEarly: return true;
    case CulturalStart::kMiddle: return stage != Stage::kStage1;
    case CulturalStart::kLate: return stage == Stage::kStage3;
  }
  return false;
}

[[noreturn]] void missing(const char* member, Stage stage) {
  throw ConfigError(std::string("build_condition: bundle member '") + member +
                    "' required for " + to_string(stage) + " is missing");
}

}  // namespace

Embedding build_condition(Stage stage, const ConditionBundle& bundle,
                          const AdapterParams& adapters, const AblationFlags& flags,
                          ConditionCache* cache) {
  flags.validate();
  if (cache) *cache = ConditionCache{};

  const bool with_cultural = cultural_in_stage(stage, flags);
  const bool with_style = flags.include_style_image && stage == Stage::kStage3;

  if (with_cultural && !bundle.cultural) missing("cultural", stage);
  if (with_style) {
    // The projected-image block is built from the cultural and reason
    // embeddings even when the raw cultural rows are ablated away.
    if (!bundle.cultural) missing("cultural", stage);
    if (!bundle.reason) missing("reason", stage);
    if (bundle.images.empty()) missing("images", stage);
  }
  const bool with_reason = flags.include_reason_stage3 && stage == Stage::kStage3;
  if (with_reason && !bundle.reason) missing("reason", stage);

  std::vector<Embedding> parts;
  if (with_style) {
    // Up to num_style_images blocks; underrepresented countries may
    // retrieve fewer references and degrade gracefully.
    const int blocks =
        std::min<int>(flags.num_style_images, static_cast<int>(bundle.images.size()));
    for (int k = 0; k < blocks; ++k) {
      ProjectedImageCache block_cache;
      Matrix block = build_projected_image_forward(bundle.cultural->rows(),
                                                   bundle.reason->rows(),
                                                   bundle.images[static_cast<size_t>(k)].rows(),
                                                   adapters, cache ? &block_cache : nullptr);
      if (cache) {
        cache->blocks.push_back(std::move(block_cache));
        cache->rows_per_block = static_cast<int>(block.rows());
        cache->adapter_rows += static_cast<int>(block.rows());
      }
      parts.emplace_back(std::move(block), "projected-image");
    }
  }
  parts.push_back(bundle.prompt);
  if (with_cultural) parts.push_back(*bundle.cultural);
  if (with_reason) parts.push_back(*bundle.reason);

  return concat_sequences(parts);
}

void condition_backward(const AdapterParams& adapters, const ConditionCache& cache,
                        const Matrix& d_condition, AdapterGrads* grads) {
  for (size_t k = 0; k < cache.blocks.size(); ++k) {
    const Matrix d_block =
        d_condition.middleRows(static_cast<Eigen::Index>(k) * cache.rows_per_block,
                               cache.rows_per_block);
    build_projected_image_backward(adapters, cache.blocks[k], d_block, grads);
  }
}

int condition_length(Stage stage, int prompt_len, int cultural_len, int reason_len,
                     const AblationFlags& flags, int images_available) {
  int len = prompt_len;
  if (flags.include_cultural) {
    const bool cultural =
        flags.cultural_start == CulturalStart::kEarly ||
        (flags.cultural_start == CulturalStart::kMiddle && stage != Stage::kStage1) ||
        (flags.cultural_start == CulturalStart::kLate && stage == Stage::kStage3);
    if (cultural) len += cultural_len;
  }
  if (flags.include_style_image && stage == Stage::kStage3) {
    const int blocks = images_available < 0
                           ? flags.num_style_images
                           : std::min(flags.num_style_images, images_available);
    len += blocks * cultural_len;  // each block has cultural_len rows
  }
  if (flags.include_reason_stage3 && stage == Stage::kStage3) len += reason_len;
  return len;
}

}  // namespace culgen
