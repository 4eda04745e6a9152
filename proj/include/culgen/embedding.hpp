#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>
#include <vector>

namespace culgen {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// A length-L sequence of d-dimensional rows with encoder provenance; the
// currency between encoders, scheduler, and denoiser. Always finite,
// L >= 1, d >= 1 (checked at construction).
class Embedding {
 public:
  Embedding(Matrix rows, std::string encoder_id);

  const Matrix& rows() const { return rows_; }
  int length() const { return static_cast<int>(rows_.rows()); }
  int dim() const { return static_cast<int>(rows_.cols()); }
  const std::string& encoder_id() const { return encoder_id_; }

 private:
  Matrix rows_;
  std::string encoder_id_;
};

// "I should {action} because {reason}".
struct ActionReason {
  std::string action;
  std::string reason;

  std::string render() const;
  // Inverse of render(); splits at the first " because ".
  static ActionReason parse(const std::string& statement);

  bool operator==(const ActionReason& o) const {
    return action == o.action && reason == o.reason;
  }
};

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual std::string id() const = 0;
  virtual int output_dim() const = 0;
  virtual Embedding encode(const std::string& text) const = 0;
};

class ImageEncoder {
 public:
  virtual ~ImageEncoder() = default;
  virtual std::string id() const = 0;
  virtual int output_dim() const = 0;
  virtual Embedding encode(const std::string& image_path) const = 0;
};

// Contract-enforcing wrappers: precondition checks plus an output-dim
// assertion on whatever encoder is plugged in.
Embedding encode_text(const std::string& text, const TextEncoder& enc);
Embedding encode_image(const std::string& image_path, const ImageEncoder& enc);

// Sequence-axis concatenation; rows appear in argument order, unmodified.
Embedding concat_sequences(const std::vector<Embedding>& parts);

// One row per whitespace token; row entries are uniform [-1,1) draws from
// a SplitMix64 stream seeded by fnv1a64(token) ^ seed.
class ToyHashTextEncoder : public TextEncoder {
 public:
  explicit ToyHashTextEncoder(int dim, uint64_t seed = 0);
  std::string id() const override;
  int output_dim() const override { return dim_; }
  Embedding encode(const std::string& text) const override;

  static std::vector<std::string> tokenize(const std::string& text);

 private:
  int dim_;
  uint64_t seed_;
};

// Single pixel-statistics row: per-channel means and stddevs over [0,1]
// pixels, then 2x2 / 4x4 / ... grid-cell channel means until `dim`
// features exist. An all-black image maps to the zero vector.
class ToyImageEncoder : public ImageEncoder {
 public:
  explicit ToyImageEncoder(int dim);
  std::string id() const override;
  int output_dim() const override { return dim_; }
  Embedding encode(const std::string& image_path) const override;

  // Statistics for an in-memory raster (used by the alignment scorer on
  // latents it has just rendered).
  Vector features(const struct Image& img) const;

 private:
  int dim_;
};

}  // namespace culgen
