#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "culgen/embedding.hpp"
#include "culgen/scheduler.hpp"

namespace culgen {

class SeededRng;
struct Image;

struct LatentShape {
  int channels = 4;
  int height = 8;
  int width = 8;

  int size() const { return channels * height * width; }
  bool operator==(const LatentShape& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

// Channel-major flat storage: values[(c*H + y)*W + x].
struct Latent {
  LatentShape shape;
  Vector values;

  Latent() = default;
  explicit Latent(LatentShape s) : shape(s), values(Vector::Zero(s.size())) {}
  Latent(LatentShape s, Vector v);

  double& at(int c, int y, int x) {
    return values[(c * shape.height + y) * shape.width + x];
  }
  double at(int c, int y, int x) const {
    return values[(c * shape.height + y) * shape.width + x];
  }
};

// Rectified flow: straight-line interpolation between data and noise with
// velocity-prediction targets. tau=0 is data, tau=1 is pure noise.
namespace flow {

// x_tau = (1 - tau) * x0 + tau * eps
Latent add_noise(const Latent& x0, const Latent& eps, double tau);

// v = eps - x0
Latent velocity_target(const Latent& x0, const Latent& eps);

// One Euler step: x + (tau_next - tau) * prediction.
Latent step(const Latent& x_t, const Latent& prediction, double tau, double tau_next);

}  // namespace flow

class DenoiserBase {
 public:
  virtual ~DenoiserBase() = default;
  virtual LatentShape latent_shape() const = 0;
  virtual Latent forward(const Latent& x, double tau, const Embedding& condition) const = 0;
};

struct DenoiserCache;

// Two blocks of (cross-attention from flattened latent tokens to the
// condition sequence) + tanh MLP, both with residual connections, between
// a token embedding and an output projection. Small enough for
// finite-difference checks; parameters never train (the adapters do).
class ToyDenoiser : public DenoiserBase {
 public:
  ToyDenoiser(LatentShape shape, int model_dim, int cond_dim, uint64_t seed);

  LatentShape latent_shape() const override { return shape_; }
  int cond_dim() const { return cond_dim_; }
  int model_dim() const { return model_dim_; }
  int parameter_count() const;
  uint32_t checksum() const;

  Latent forward(const Latent& x, double tau, const Embedding& condition) const override;
  Latent forward_cached(const Latent& x, double tau, const Matrix& condition,
                        DenoiserCache* cache) const;
  // Gradient of a scalar loss w.r.t. the condition rows. Denoiser
  // parameters stay untouched (frozen by construction).
  Matrix backward_condition(const DenoiserCache& cache, const Latent& d_prediction) const;

 private:
  struct Block {
    CrossAttentionParams attn;
    Matrix mlp_w1;
    Vector mlp_b1;
    Matrix mlp_w2;
    Vector mlp_b2;
  };

  Matrix tokens_of(const Latent& x) const;
  Matrix time_features(double tau) const;

  LatentShape shape_;
  int model_dim_;
  int cond_dim_;
  int time_feats_ = 8;  // sin/cos pairs, k = 1..4
  Matrix token_embed_;  // C x D
  Matrix pos_embed_;    // (H*W) x D
  Matrix time_w_;       // time_feats x D
  Vector time_b_;       // D
  Matrix cond_proj_;    // cond_dim x D
  std::vector<Block> blocks_;
  Matrix out_w_;  // D x C
  Vector out_b_;  // C
};

struct DenoiserCache {
  Matrix ctx;  // condition * cond_proj
  std::vector<CrossAttentionCache> attn;
  std::vector<Matrix> mlp_in;      // block inputs to the MLP
  std::vector<Matrix> mlp_hidden;  // tanh activations
};

struct SampleTrace {
  std::vector<Stage> stages;
  std::vector<int> condition_lengths;
};

struct SampleResult {
  Latent latent;
  SampleTrace trace;
};

Latent random_latent(LatentShape shape, SeededRng& rng);

// Euler integration over cfg.total_steps from seeded pure noise; the
// condition at step i is build_condition(stage_of(i, cfg), ...).
SampleResult sample(const DenoiserBase& denoiser, const ConditionBundle& bundle,
                    const ScheduleConfig& cfg, const AdapterParams& adapters,
                    const AblationFlags& flags, uint64_t seed);

// Channels rendered as horizontal grayscale panels, nearest-neighbour
// upscaled; values normalized to the latent's own range.
Image visualize_latent(const Latent& latent, int upscale = 16);

// Deterministic image -> latent stand-in (no VAE at this scale):
// nearest-neighbour resample, RGB -> channels 0..2 in [-1,1], channel 3
// (if present) = luminance.
Latent latent_from_image(const std::string& path, LatentShape shape);

void save_latent(const std::string& path, const Latent& latent);
Latent load_latent(const std::string& path);

}  // namespace culgen
