#pragma once

#include <string>
#include <vector>

#include "culgen/embedding.hpp"

namespace culgen {

class SeededRng;

// Single cross-attention layer. Matrices use the row-vector convention:
// a query row q maps to q * w_q. No residual connection or layer norm
// (recorded in checkpoint metadata). scale() is 1/sqrt(d_attn/num_heads),
// which is 1/sqrt(d_attn) in the default single-head configuration.
struct CrossAttentionParams {
  Matrix w_q;  // d_in x d_attn
  Matrix w_k;  // d_in x d_attn
  Matrix w_v;  // d_in x d_attn
  Matrix w_o;  // d_attn x d_out
  int num_heads = 1;

  int d_in() const { return static_cast<int>(w_q.rows()); }
  int d_attn() const { return static_cast<int>(w_q.cols()); }
  int d_out() const { return static_cast<int>(w_o.cols()); }
  double scale() const;
  void validate() const;

  static CrossAttentionParams random(int d_in, int d_attn, int d_out, SeededRng& rng,
                                     double stddev = 1.0, int num_heads = 1);
};

// Row-wise affine map into the text embedding space: row * w + b.
struct LinearProjector {
  Matrix w;  // d_img x d_text
  Vector b;  // d_text

  int d_in() const { return static_cast<int>(w.rows()); }
  int d_out() const { return static_cast<int>(w.cols()); }
  void validate() const;

  static LinearProjector random(int d_img, int d_text, SeededRng& rng, double stddev = 1.0);
};

// Numerically stable row softmax (subtracts the row max).
Matrix softmax_rows(const Matrix& scores);

struct CrossAttentionCache {
  Matrix q_in, c_in;              // inputs
  Matrix qp, kp, vp;              // projected q/k/v, L x d_attn
  std::vector<Matrix> attn;       // per-head attention weights, Lq x Lc
  Matrix head_out;                // concatenated per-head outputs, Lq x d_attn
};

struct CrossAttentionGrads {
  Matrix w_q, w_k, w_v, w_o;
  static CrossAttentionGrads zeros_like(const CrossAttentionParams& p);
};

Matrix cross_attention_forward(const Matrix& queries, const Matrix& context,
                               const CrossAttentionParams& p,
                               CrossAttentionCache* cache = nullptr);

// d_queries / d_context / d_params may be null when unneeded.
void cross_attention_backward(const CrossAttentionParams& p, const CrossAttentionCache& cache,
                              const Matrix& d_out, Matrix* d_queries, Matrix* d_context,
                              CrossAttentionGrads* d_params);

Embedding cross_attention(const Embedding& queries, const Embedding& context,
                          const CrossAttentionParams& p);

Matrix project_forward(const Matrix& input, const LinearProjector& lp);
void project_backward(const Matrix& input, const LinearProjector& lp, const Matrix& d_out,
                      Matrix* d_input, Matrix* d_w, Vector* d_b);

Embedding project_image(const Embedding& img, const LinearProjector& lp);

// The full trainable state: CA1 (cultural -> reason), CA2 (CA1 output ->
// projected image), and the image-to-text linear projection.
struct AdapterParams {
  CrossAttentionParams ca1;
  CrossAttentionParams ca2;
  LinearProjector proj;

  int d_text() const { return ca1.d_in(); }
  int d_img() const { return proj.d_in(); }
  void validate() const;

  static AdapterParams random(int d_text, int d_img, int d_attn, uint64_t seed,
                              double stddev = 1.0, int num_heads = 1);

  // Flat named-array checkpoint; key names and metadata documented in
  // docs/formats.md.
  void save(const std::string& path) const;
  static AdapterParams load(const std::string& path);
  uint32_t checksum() const;
};

struct AdapterGrads {
  CrossAttentionGrads ca1, ca2;
  Matrix proj_w;
  Vector proj_b;

  static AdapterGrads zeros_like(const AdapterParams& p);
  void add(const AdapterGrads& other);
  void scale(double s);
  bool is_zero(double tol = 0.0) const;
};

struct ProjectedImageCache {
  CrossAttentionCache ca1, ca2;
  Matrix image_in;     // raw image embedding rows
  Matrix projected;    // after the linear projector
};

// pc = CA1(queries=cultural, context=reason);
// out = CA2(queries=pc, context=project(image)). Output length equals
// cultural.length.
Embedding build_projected_image(const Embedding& cultural, const Embedding& reason,
                                const Embedding& image, const CrossAttentionParams& ca1,
                                const CrossAttentionParams& ca2, const LinearProjector& lp);

Matrix build_projected_image_forward(const Matrix& cultural, const Matrix& reason,
                                     const Matrix& image, const AdapterParams& adapters,
                                     ProjectedImageCache* cache = nullptr);

void build_projected_image_backward(const AdapterParams& adapters, const ProjectedImageCache& cache,
                                    const Matrix& d_out, AdapterGrads* grads);

}  // namespace culgen
