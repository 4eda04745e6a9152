#pragma once

#include <optional>
#include <string>
#include <vector>

#include "culgen/embedding.hpp"
#include "culgen/projector.hpp"

namespace culgen {

enum class Stage { kStage1 = 1, kStage2 = 2, kStage3 = 3 };

std::string to_string(Stage s);

// Stage boundaries as fractions of the denoising run. Step 0 is the
// noisiest step; Stage1 covers i/T < b1, Stage2 covers b1 <= i/T < b2.
struct ScheduleConfig {
  double b1 = 1.0 / 3.0;
  double b2 = 2.0 / 3.0;
  int total_steps = 30;

  void validate() const;
};

Stage stage_of(int step, const ScheduleConfig& cfg);

// Shared with the trainer, which draws tau in [0,1] and maps it through
// f = 1 - tau (tau=1 is pure noise, i.e. the earliest step).
Stage stage_of_fraction(double fraction, const ScheduleConfig& cfg);

enum class CulturalStart { kEarly, kMiddle, kLate };

CulturalStart cultural_start_from_string(const std::string& s);
std::string to_string(CulturalStart s);

// Defaults reproduce the full method; other settings are the ablation
// variants (mapping table in docs/ablations.md).
struct AblationFlags {
  bool include_cultural = true;
  CulturalStart cultural_start = CulturalStart::kMiddle;
  bool include_style_image = true;
  int num_style_images = 1;
  bool include_reason_stage3 = false;

  void validate() const;
};

// The four condition sources. prompt is always present; images holds the
// retrieved style references (one by default, up to three for the
// multi-style variant).
struct ConditionBundle {
  Embedding prompt;
  std::optional<Embedding> cultural;
  std::optional<Embedding> reason;
  std::vector<Embedding> images;
};

// Caches the projected-image blocks so training can push gradients back
// through them; adapter_rows counts leading condition rows owned by the
// adapters (0 when the stage has no projected-image block).
struct ConditionCache {
  int adapter_rows = 0;
  int rows_per_block = 0;
  std::vector<ProjectedImageCache> blocks;
};

// Stage1 -> prompt (bit-identical); Stage2 -> (prompt, cultural);
// Stage3 -> (projected image x k, prompt, cultural[, reason]).
// AblationFlags move or drop the cultural/image blocks.
Embedding build_condition(Stage stage, const ConditionBundle& bundle,
                          const AdapterParams& adapters, const AblationFlags& flags,
                          ConditionCache* cache = nullptr);

// Gradient of a scalar loss w.r.t. the full condition matrix, routed into
// the adapter parameters. No-op when the stage had no adapter block.
void condition_backward(const AdapterParams& adapters, const ConditionCache& cache,
                        const Matrix& d_condition, AdapterGrads* grads);

// Closed-form condition length for a given stage and bundle lengths.
// images_available of -1 assumes num_style_images references exist.
int condition_length(Stage stage, int prompt_len, int cultural_len, int reason_len,
                     const AblationFlags& flags, int images_available = -1);

}  // namespace culgen
