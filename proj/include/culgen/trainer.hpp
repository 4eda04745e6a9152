#pragma once

#include <string>
#include <vector>

#include "culgen/backbone.hpp"
#include "culgen/cultural_db.hpp"
#include "culgen/pipeline.hpp"
#include "culgen/rng.hpp"

namespace culgen {

// Defaults are the published regime: lr 1e-5, batch 1, 4 accumulation
// steps, 500 steps, 250-image dataset (informational).
struct TrainConfig {
  double learning_rate = 1e-5;
  int batch_size = 1;
  int grad_accum = 4;
  int steps = 500;
  int dataset_size = 250;
  uint64_t seed = 0;

  void validate() const;
};

struct TrainItem {
  Latent x0;
  ConditionBundle bundle;
  std::string source_id;
};

// Adam moments share the AdapterGrads layout.
struct AdamState {
  AdapterGrads m, v;
  int t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

// Owns the only mutable parameters in the system; everything else
// (backbone, encoders) is frozen by construction.
struct TrainState {
  AdapterParams adapters;
  AdamState opt;
  AdapterGrads accum;
  int step = 0;
  int optimizer_steps = 0;
  int accum_count = 0;
  std::vector<double> loss_history;
  SeededRng rng;

  TrainState(AdapterParams params, uint64_t seed);
};

// Flow-matching MSE through the frozen denoiser at one (item, tau, eps)
// draw; fills adapter gradients when grads is non-null. Stages without a
// projected-image block contribute exactly zero adapter gradient.
double adapter_loss(const TrainItem& item, double tau, const Latent& eps,
                    const ToyDenoiser& denoiser, const AdapterParams& adapters,
                    const ScheduleConfig& schedule, const AblationFlags& flags,
                    AdapterGrads* grads);

// One batch: tau ~ U[0,1) and eps ~ N(0,I) per example from state.rng;
// gradients accumulate and Adam applies them every cfg.grad_accum calls.
// Returns the batch-mean loss.
double train_step(const std::vector<TrainItem>& batch, TrainState& state,
                  const TrainConfig& cfg, const ToyDenoiser& denoiser,
                  const ScheduleConfig& schedule, const AblationFlags& flags);

struct TrainRunResult {
  std::vector<double> losses;
  double initial_smoothed = 0.0;
  double final_smoothed = 0.0;
  int optimizer_steps = 0;
  int skipped_examples = 0;
  std::string checkpoint_path;
};

// Mean over the first/last max(1, min(50, n/10)) entries.
double smoothed_initial(const std::vector<double>& losses);
double smoothed_final(const std::vector<double>& losses);

// Training manifest: JSON-lines {image, country, action, reason}; images
// resolve relative to the manifest. Examples whose country is absent from
// the db are skipped with a warning (error when nothing remains).
std::vector<TrainItem> load_train_items(const std::string& manifest_path, const CulturalDB& db,
                                        const TextEncoder& text_enc,
                                        const ImageEncoder& image_enc,
                                        const PromptTemplates& templates, LatentShape shape,
                                        uint64_t seed, int num_images, int* skipped = nullptr);

TrainRunResult train(const TrainConfig& cfg, const CulturalDB& db,
                     const std::string& manifest_path, const ToyDenoiser& denoiser,
                     const TextEncoder& text_enc, const ImageEncoder& image_enc,
                     const PromptTemplates& templates, const ScheduleConfig& schedule,
                     const AblationFlags& flags, TrainState& state,
                     const std::string& checkpoint_path, const std::string& loss_csv_path);

}  // namespace culgen
