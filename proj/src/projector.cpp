#include "culgen/projector.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "culgen/errors.hpp"
#include "culgen/image.hpp"
#include "culgen/rng.hpp"
#include "culgen/tensor_file.hpp"

namespace culgen {

namespace {

Matrix random_matrix(int rows, int cols, SeededRng& rng, double stddev) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = stddev * rng.normal();
  return m;
}

void check_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw InvalidInputError(std::string(what) + ": non-finite entries");
}

}  // namespace

double CrossAttentionParams::scale() const {
  return 1.0 / std::sqrt(static_cast<double>(d_attn() / num_heads));
}

void CrossAttentionParams::validate() const {
  if (w_q.rows() != w_k.rows() || w_q.rows() != w_v.rows() || w_q.cols() != w_k.cols() ||
      w_q.cols() != w_v.cols() || w_o.rows() != w_q.cols())
    throw InvalidInputError("CrossAttentionParams: inconsistent shapes");
  if (num_heads < 1 || d_attn() % num_heads != 0)
    throw InvalidInputError("CrossAttentionParams: d_attn must be divisible by num_heads");
  check_finite(w_q, "w_q");
  check_finite(w_k, "w_k");
  check_finite(w_v, "w_v");
  check_finite(w_o, "w_o");
}

CrossAttentionParams CrossAttentionParams::random(int d_in, int d_attn, int d_out,
                                                  SeededRng& rng, double stddev, int num_heads) {
  CrossAttentionParams p;
  p.w_q = random_matrix(d_in, d_attn, rng, stddev);
  p.w_k = random_matrix(d_in, d_attn, rng, stddev);
  p.w_v = random_matrix(d_in, d_attn, rng, stddev);
  p.w_o = random_matrix(d_attn, d_out, rng, stddev);
  p.num_heads = num_heads;
  p.validate();
  return p;
}

void LinearProjector::validate() const {
  if (w.cols() != b.size()) throw InvalidInputError("LinearProjector: w/b shape mismatch");
  check_finite(w, "proj w");
  if (!b.allFinite()) throw InvalidInputError("proj b: non-finite entries");
}

LinearProjector LinearProjector::random(int d_img, int d_text, SeededRng& rng, double stddev) {
  LinearProjector lp;
  lp.w = random_matrix(d_img, d_text, rng, stddev);
  lp.b = Vector(d_text);
  for (int j = 0; j < d_text; ++j) lp.b[j] = stddev * rng.normal();
  return lp;
}

Matrix softmax_rows(const Matrix& scores) {
  Matrix out(scores.rows(), scores.cols());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    const double m = scores.row(r).maxCoeff();
    Eigen::RowVectorXd e = (scores.row(r).array() - m).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

Matrix cross_attention_forward(const Matrix& queries, const Matrix& context,
                               const CrossAttentionParams& p, CrossAttentionCache* cache) {
  if (queries.cols() != p.d_in() || context.cols() != p.d_in()) {
    std::ostringstream msg;
    msg << "cross_attention: query dim " << queries.cols() << " / context dim "
        << context.cols() << " must equal parameter d_in " << p.d_in();
    throw InvalidInputError(msg.str());
  }
  const int h = p.num_heads;
  const int dh = p.d_attn() / h;
  const double s = p.scale();

  Matrix qp = queries * p.w_q;
  Matrix kp = context * p.w_k;
  Matrix vp = context * p.w_v;
  Matrix head_out(queries.rows(), p.d_attn());
  std::vector<Matrix> attn(static_cast<size_t>(h));
  for (int i = 0; i < h; ++i) {
    const auto qh = qp.middleCols(i * dh, dh);
    const auto kh = kp.middleCols(i * dh, dh);
    const auto vh = vp.middleCols(i * dh, dh);
    attn[static_cast<size_t>(i)] = softmax_rows(s * (qh * kh.transpose()));
    head_out.middleCols(i * dh, dh) = attn[static_cast<size_t>(i)] * vh;
  }
  Matrix out = head_out * p.w_o;
  if (cache) {
    cache->q_in = queries;
    cache->c_in = context;
    cache->qp = std::move(qp);
    cache->kp = std::move(kp);
    cache->vp = std::move(vp);
    cache->attn = std::move(attn);
    cache->head_out = std::move(head_out);
  }
  return out;
}

void cross_attention_backward(const CrossAttentionParams& p, const CrossAttentionCache& cache,
                              const Matrix& d_out, Matrix* d_queries, Matrix* d_context,
                              CrossAttentionGrads* d_params) {
  const int h = p.num_heads;
  const int dh = p.d_attn() / h;
  const double s = p.scale();

  const Matrix d_head = d_out * p.w_o.transpose();
  Matrix d_qp = Matrix::Zero(cache.qp.rows(), cache.qp.cols());
  Matrix d_kp = Matrix::Zero(cache.kp.rows(), cache.kp.cols());
  Matrix d_vp = Matrix::Zero(cache.vp.rows(), cache.vp.cols());

  for (int i = 0; i < h; ++i) {
    const Matrix& a = cache.attn[static_cast<size_t>(i)];
    const auto kh = cache.kp.middleCols(i * dh, dh);
    const auto vh = cache.vp.middleCols(i * dh, dh);
    const auto d_oh = d_head.middleCols(i * dh, dh);

    const Matrix d_a = d_oh * vh.transpose();
    d_vp.middleCols(i * dh, dh) = a.transpose() * d_oh;

    // Row-wise softmax jacobian: dS = A .* (dA - rowsum(dA .* A)).
    Matrix d_scores(a.rows(), a.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      const double dot = (d_a.row(r).array() * a.row(r).array()).sum();
      d_scores.row(r) = a.row(r).array() * (d_a.row(r).array() - dot);
    }
    d_scores *= s;
    d_qp.middleCols(i * dh, dh) = d_scores * kh;
    d_kp.middleCols(i * dh, dh) = d_scores.transpose() * cache.qp.middleCols(i * dh, dh);
  }

  if (d_params) {
    d_params->w_o += cache.head_out.transpose() * d_out;
    d_params->w_q += cache.q_in.transpose() * d_qp;
    d_params->w_k += cache.c_in.transpose() * d_kp;
    d_params->w_v += cache.c_in.transpose() * d_vp;
  }
  if (d_queries) *d_queries = d_qp * p.w_q.transpose();
  if (d_context) *d_context = d_kp * p.w_k.transpose() + d_vp * p.w_v.transpose();
}

Embedding cross_attention(const Embedding& queries, const Embedding& context,
                          const CrossAttentionParams& p) {
  Matrix out = cross_attention_forward(queries.rows(), context.rows(), p);
  return Embedding(std::move(out), "xattn(" + queries.encoder_id() + ")");
}

Matrix project_forward(const Matrix& input, const LinearProjector& lp) {
  if (input.cols() != lp.d_in()) {
    std::ostringstream msg;
    msg << "project_image: input dim " << input.cols() << " != projector d_in " << lp.d_in();
    throw InvalidInputError(msg.str());
  }
  return (input * lp.w).rowwise() + lp.b.transpose();
}

void project_backward(const Matrix& input, const LinearProjector& lp, const Matrix& d_out,
                      Matrix* d_input, Matrix* d_w, Vector* d_b) {
  if (d_input) *d_input = d_out * lp.w.transpose();
  if (d_w) *d_w += input.transpose() * d_out;
  if (d_b) *d_b += d_out.colwise().sum().transpose();
}

Embedding project_image(const Embedding& img, const LinearProjector& lp) {
  return Embedding(project_forward(img.rows(), lp), "proj(" + img.encoder_id() + ")");
}

CrossAttentionGrads CrossAttentionGrads::zeros_like(const CrossAttentionParams& p) {
  CrossAttentionGrads g;
  g.w_q = Matrix::Zero(p.w_q.rows(), p.w_q.cols());
  g.w_k = Matrix::Zero(p.w_k.rows(), p.w_k.cols());
  g.w_v = Matrix::Zero(p.w_v.rows(), p.w_v.cols());
  g.w_o = Matrix::Zero(p.w_o.rows(), p.w_o.cols());
  return g;
}

void AdapterParams::validate() const {
  ca1.validate();
  ca2.validate();
  proj.validate();
  if (ca1.d_out() != ca2.d_in() || proj.d_out() != ca2.d_in())
    throw InvalidInputError("AdapterParams: CA1/CA2/projector dims do not chain");
}

AdapterParams AdapterParams::random(int d_text, int d_img, int d_attn, uint64_t seed,
                                    double stddev, int num_heads) {
  SeededRng rng(seed);
  AdapterParams p;
  p.ca1 = CrossAttentionParams::random(d_text, d_attn, d_text, rng, stddev, num_heads);
  p.ca2 = CrossAttentionParams::random(d_text, d_attn, d_text, rng, stddev, num_heads);
  p.proj = LinearProjector::random(d_img, d_text, rng, stddev);
  return p;
}

void AdapterParams::save(const std::string& path) const {
  NamedTensors t;
  nlohmann::json meta;
  meta["schema"] = "culgen-adapter";
  meta["version"] = 1;
  meta["d_text"] = d_text();
  meta["d_img"] = d_img();
  meta["d_attn"] = ca1.d_attn();
  meta["num_heads"] = ca1.num_heads;
  meta["residual"] = false;
  meta["layer_norm"] = false;
  t.meta_json = meta.dump();
  t.put_matrix("ca1.w_q", ca1.w_q);
  t.put_matrix("ca1.w_k", ca1.w_k);
  t.put_matrix("ca1.w_v", ca1.w_v);
  t.put_matrix("ca1.w_o", ca1.w_o);
  t.put_matrix("ca2.w_q", ca2.w_q);
  t.put_matrix("ca2.w_k", ca2.w_k);
  t.put_matrix("ca2.w_v", ca2.w_v);
  t.put_matrix("ca2.w_o", ca2.w_o);
  t.put_matrix("proj.w", proj.w);
  t.put_vector("proj.b", proj.b);
  t.save(path);
}

AdapterParams AdapterParams::load(const std::string& path) {
  const NamedTensors t = NamedTensors::load(path);
  const auto meta = nlohmann::json::parse(t.meta_json);
  if (meta.value("schema", "") != "culgen-adapter")
    throw ParseError("not an adapter checkpoint: " + path);
  AdapterParams p;
  p.ca1.w_q = t.get_matrix("ca1.w_q");
  p.ca1.w_k = t.get_matrix("ca1.w_k");
  p.ca1.w_v = t.get_matrix("ca1.w_v");
  p.ca1.w_o = t.get_matrix("ca1.w_o");
  p.ca2.w_q = t.get_matrix("ca2.w_q");
  p.ca2.w_k = t.get_matrix("ca2.w_k");
  p.ca2.w_v = t.get_matrix("ca2.w_v");
  p.ca2.w_o = t.get_matrix("ca2.w_o");
  p.proj.w = t.get_matrix("proj.w");
  p.proj.b = t.get_vector("proj.b");
  p.ca1.num_heads = meta.value("num_heads", 1);
  p.ca2.num_heads = p.ca1.num_heads;
  p.validate();
  return p;
}

uint32_t AdapterParams::checksum() const {
  std::vector<double> all;
  auto push = [&all](const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) all.push_back(m(r, c));
  };
  push(ca1.w_q);
  push(ca1.w_k);
  push(ca1.w_v);
  push(ca1.w_o);
  push(ca2.w_q);
  push(ca2.w_k);
  push(ca2.w_v);
  push(ca2.w_o);
  push(proj.w);
  for (Eigen::Index i = 0; i < proj.b.size(); ++i) all.push_back(proj.b[i]);
  return crc32_of(all.data(), all.size() * sizeof(double));
}

AdapterGrads AdapterGrads::zeros_like(const AdapterParams& p) {
  AdapterGrads g;
  g.ca1 = CrossAttentionGrads::zeros_like(p.ca1);
  g.ca2 = CrossAttentionGrads::zeros_like(p.ca2);
  g.proj_w = Matrix::Zero(p.proj.w.rows(), p.proj.w.cols());
  g.proj_b = Vector::Zero(p.proj.b.size());
  return g;
}

void AdapterGrads::add(const AdapterGrads& other) {
  ca1.w_q += other.ca1.w_q;
  ca1.w_k += other.ca1.w_k;
  ca1.w_v += other.ca1.w_v;
  ca1.w_o += other.ca1.w_o;
  ca2.w_q += other.ca2.w_q;
  ca2.w_k += other.ca2.w_k;
  ca2.w_v += other.ca2.w_v;
  ca2.w_o += other.ca2.w_o;
  proj_w += other.proj_w;
  proj_b += other.proj_b;
}

void AdapterGrads::scale(double s) {
  ca1.w_q *= s;
  ca1.w_k *= s;
  ca1.w_v *= s;
  ca1.w_o *= s;
  ca2.w_q *= s;
  ca2.w_k *= s;
  ca2.w_v *= s;
  ca2.w_o *= s;
  proj_w *= s;
  proj_b *= s;
}

bool AdapterGrads::is_zero(double tol) const {
  auto ok = [tol](const Matrix& m) { return m.cwiseAbs().maxCoeff() <= tol; };
  return ok(ca1.w_q) && ok(ca1.w_k) && ok(ca1.w_v) && ok(ca1.w_o) && ok(ca2.w_q) &&
         ok(ca2.w_k) && ok(ca2.w_v) && ok(ca2.w_o) && ok(proj_w) &&
         proj_b.cwiseAbs().maxCoeff() <= tol;
}

Embedding build_projected_image(const Embedding& cultural, const Embedding& reason,
                                const Embedding& image, const CrossAttentionParams& ca1,
                                const CrossAttentionParams& ca2, const LinearProjector& lp) {
  AdapterParams p{ca1, ca2, lp};
  Matrix out = build_projected_image_forward(cultural.rows(), reason.rows(), image.rows(), p);
  return Embedding(std::move(out), "projected-image");
}

Matrix build_projected_image_forward(const Matrix& cultural, const Matrix& reason,
                                     const Matrix& image, const AdapterParams& adapters,
                                     ProjectedImageCache* cache) {
  ProjectedImageCache local;
  ProjectedImageCache* c = cache ? cache : &local;
  c->image_in = image;
  c->projected = project_forward(image, adapters.proj);
  const Matrix pc = cross_attention_forward(cultural, reason, adapters.ca1, &c->ca1);
  return cross_attention_forward(pc, c->projected, adapters.ca2, &c->ca2);
}

void build_projected_image_backward(const AdapterParams& adapters, const ProjectedImageCache& cache,
                                    const Matrix& d_out, AdapterGrads* grads) {
  Matrix d_pc, d_projected;
  cross_attention_backward(adapters.ca2, cache.ca2, d_out, &d_pc, &d_projected, &grads->ca2);
  cross_attention_backward(adapters.ca1, cache.ca1, d_pc, nullptr, nullptr, &grads->ca1);
  project_backward(cache.image_in, adapters.proj, d_projected, nullptr, &grads->proj_w,
                   &grads->proj_b);
}

}  // namespace culgen
