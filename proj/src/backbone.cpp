#include "culgen/backbone.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "culgen/errors.hpp"
#include "culgen/image.hpp"
#include "culgen/rng.hpp"
#include "culgen/tensor_file.hpp"

namespace culgen {

Latent::Latent(LatentShape s, Vector v) : shape(s), values(std::move(v)) {
  if (values.size() != shape.size())
    throw InvalidInputError("Latent: value count does not match shape");
  if (!values.allFinite()) throw InvalidInputError("Latent: non-finite entries");
}

namespace flow {

namespace {
void check_shapes(const Latent& a, const Latent& b, const char* op) {
  if (!(a.shape == b.shape))
    throw InvalidInputError(std::string(op) + ": latent shapes differ");
}
}  // namespace

Latent add_noise(const Latent& x0, const Latent& eps, double tau) {
  check_shapes(x0, eps, "add_noise");
  if (tau < 0.0 || tau > 1.0)
    throw InvalidInputError("add_noise: tau must be in [0,1], got " + std::to_string(tau));
  Latent out(x0.shape);
  out.values = (1.0 - tau) * x0.values + tau * eps.values;
  return out;
}

Latent velocity_target(const Latent& x0, const Latent& eps) {
  check_shapes(x0, eps, "velocity_target");
  Latent out(x0.shape);
  out.values = eps.values - x0.values;
  return out;
}

Latent step(const Latent& x_t, const Latent& prediction, double tau, double tau_next) {
  check_shapes(x_t, prediction, "step");
  Latent out(x_t.shape);
  out.values = x_t.values + (tau_next - tau) * prediction.values;
  return out;
}

}  // namespace flow

// --- toy denoiser ---------------------------------------------------------

namespace {
Matrix init_matrix(int rows, int cols, SeededRng& rng) {
  // 1/sqrt(fan_in) keeps the frozen network's activations O(1).
  const double s = 1.0 / std::sqrt(static_cast<double>(rows));
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = s * rng.normal();
  return m;
}
}  // namespace

ToyDenoiser::ToyDenoiser(LatentShape shape, int model_dim, int cond_dim, uint64_t seed)
    : shape_(shape), model_dim_(model_dim), cond_dim_(cond_dim) {
  if (model_dim < 1 || cond_dim < 1) throw InvalidInputError("ToyDenoiser: bad dims");
  SeededRng rng(seed);
  const int tokens = shape.height * shape.width;
  token_embed_ = init_matrix(shape.channels, model_dim, rng);
  pos_embed_ = init_matrix(tokens, model_dim, rng) * std::sqrt(static_cast<double>(tokens));
  time_w_ = init_matrix(time_feats_, model_dim, rng);
  time_b_ = Vector::Zero(model_dim);
  cond_proj_ = init_matrix(cond_dim, model_dim, rng);
  for (int b = 0; b < 2; ++b) {
    Block blk;
    blk.attn = CrossAttentionParams::random(model_dim, model_dim, model_dim, rng,
                                            1.0 / std::sqrt(static_cast<double>(model_dim)));
    blk.mlp_w1 = init_matrix(model_dim, 2 * model_dim, rng);
    blk.mlp_b1 = Vector::Zero(2 * model_dim);
    blk.mlp_w2 = init_matrix(2 * model_dim, model_dim, rng);
    blk.mlp_b2 = Vector::Zero(model_dim);
    blocks_.push_back(std::move(blk));
  }
  out_w_ = init_matrix(model_dim, shape.channels, rng);
  out_b_ = Vector::Zero(shape.channels);
}

int ToyDenoiser::parameter_count() const {
  auto count = [](const Matrix& m) { return static_cast<int>(m.size()); };
  int n = count(token_embed_) + count(pos_embed_) + count(time_w_) +
          static_cast<int>(time_b_.size()) + count(cond_proj_) + count(out_w_) +
          static_cast<int>(out_b_.size());
  for (const auto& b : blocks_) {
    n += count(b.attn.w_q) + count(b.attn.w_k) + count(b.attn.w_v) + count(b.attn.w_o);
    n += count(b.mlp_w1) + static_cast<int>(b.mlp_b1.size()) + count(b.mlp_w2) +
         static_cast<int>(b.mlp_b2.size());
  }
  return n;
}

uint32_t ToyDenoiser::checksum() const {
  std::vector<double> all;
  auto push_m = [&all](const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) all.push_back(m(r, c));
  };
  auto push_v = [&all](const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) all.push_back(v[i]);
  };
  push_m(token_embed_);
  push_m(pos_embed_);
  push_m(time_w_);
  push_v(time_b_);
  push_m(cond_proj_);
  for (const auto& b : blocks_) {
    push_m(b.attn.w_q);
    push_m(b.attn.w_k);
    push_m(b.attn.w_v);
    push_m(b.attn.w_o);
    push_m(b.mlp_w1);
    push_v(b.mlp_b1);
    push_m(b.mlp_w2);
    push_v(b.mlp_b2);
  }
  push_m(out_w_);
  push_v(out_b_);
  return crc32_of(all.data(), all.size() * sizeof(double));
}

Matrix ToyDenoiser::tokens_of(const Latent& x) const {
  const int n = shape_.height * shape_.width;
  Matrix t(n, shape_.channels);
  for (int y = 0; y < shape_.height; ++y)
    for (int xx = 0; xx < shape_.width; ++xx)
      for (int c = 0; c < shape_.channels; ++c)
        t(y * shape_.width + xx, c) = x.at(c, y, xx);
  return t;
}

Matrix ToyDenoiser::time_features(double tau) const {
  Matrix f(1, time_feats_);
  for (int k = 0; k < time_feats_ / 2; ++k) {
    const double w = 2.0 * 3.14159265358979323846 * (k + 1) * tau;
    f(0, 2 * k) = std::sin(w);
    f(0, 2 * k + 1) = std::cos(w);
  }
  return f;
}

Latent ToyDenoiser::forward(const Latent& x, double tau, const Embedding& condition) const {
  DenoiserCache cache;
  return forward_cached(x, tau, condition.rows(), &cache);
}

Latent ToyDenoiser::forward_cached(const Latent& x, double tau, const Matrix& condition,
                                   DenoiserCache* cache) const {
  if (!(x.shape == shape_)) throw InvalidInputError("denoiser: latent shape mismatch");
  if (condition.cols() != cond_dim_) {
    std::ostringstream msg;
    msg << "denoiser: condition dim " << condition.cols() << " != " << cond_dim_;
    throw InvalidInputError(msg.str());
  }
  if (condition.rows() < 1) throw InvalidInputError("denoiser: empty condition");

  const Matrix tokens = tokens_of(x);
  const Eigen::RowVectorXd time_row = (time_features(tau) * time_w_).row(0) + time_b_.transpose();
  Matrix h = ((tokens * token_embed_) + pos_embed_).rowwise() + time_row;
  Matrix ctx = condition * cond_proj_;
  if (cache) {
    cache->ctx = ctx;
    cache->attn.resize(blocks_.size());
    cache->mlp_in.resize(blocks_.size());
    cache->mlp_hidden.resize(blocks_.size());
  }
  for (size_t b = 0; b < blocks_.size(); ++b) {
    const Block& blk = blocks_[b];
    Matrix attn_out =
        cross_attention_forward(h, ctx, blk.attn, cache ? &cache->attn[b] : nullptr);
    h += attn_out;
    Matrix hidden = ((h * blk.mlp_w1).rowwise() + blk.mlp_b1.transpose()).array().tanh();
    if (cache) {
      cache->mlp_in[b] = h;
      cache->mlp_hidden[b] = hidden;
    }
    h += ((hidden * blk.mlp_w2).rowwise() + blk.mlp_b2.transpose());
  }
  const Matrix out = (h * out_w_).rowwise() + out_b_.transpose();

  Latent pred(shape_);
  for (int y = 0; y < shape_.height; ++y)
    for (int xx = 0; xx < shape_.width; ++xx)
      for (int c = 0; c < shape_.channels; ++c)
        pred.at(c, y, xx) = out(y * shape_.width + xx, c);
  return pred;
}

Matrix ToyDenoiser::backward_condition(const DenoiserCache& cache,
                                       const Latent& d_prediction) const {
  const int n = shape_.height * shape_.width;
  Matrix d_out(n, shape_.channels);
  for (int y = 0; y < shape_.height; ++y)
    for (int xx = 0; xx < shape_.width; ++xx)
      for (int c = 0; c < shape_.channels; ++c)
        d_out(y * shape_.width + xx, c) = d_prediction.at(c, y, xx);

  Matrix d_h = d_out * out_w_.transpose();
  Matrix d_ctx = Matrix::Zero(cache.ctx.rows(), cache.ctx.cols());
  for (size_t bi = blocks_.size(); bi-- > 0;) {
    const Block& blk = blocks_[bi];
    // h_out = h_mid + mlp(h_mid), h_mid = h_in + attn(h_in, ctx)
    const Matrix& hidden = cache.mlp_hidden[bi];
    Matrix d_hidden = (d_h * blk.mlp_w2.transpose()).array() * (1.0 - hidden.array().square());
    Matrix d_mid = d_h + d_hidden * blk.mlp_w1.transpose();

    Matrix d_q, d_c;
    cross_attention_backward(blk.attn, cache.attn[bi], d_mid, &d_q, &d_c, nullptr);
    d_ctx += d_c;
    d_h = d_mid + d_q;
  }
  return d_ctx * cond_proj_.transpose();
}

// --- sampling ---------------------------------------------------------

Latent random_latent(LatentShape shape, SeededRng& rng) {
  Latent x(shape);
  for (Eigen::Index i = 0; i < x.values.size(); ++i) x.values[i] = rng.normal();
  return x;
}

SampleResult sample(const DenoiserBase& denoiser, const ConditionBundle& bundle,
                    const ScheduleConfig& cfg, const AdapterParams& adapters,
                    const AblationFlags& flags, uint64_t seed) {
  cfg.validate();
  flags.validate();
  const int T = cfg.total_steps;

  // Fail on configuration problems before the first denoiser call.
  for (Stage s : {Stage::kStage1, Stage::kStage2, Stage::kStage3})
    build_condition(s, bundle, adapters, flags);

  SeededRng rng(seed);
  Latent x = random_latent(denoiser.latent_shape(), rng);
  SampleResult result;
  for (int i = 0; i < T; ++i) {
    const Stage stage = stage_of(i, cfg);
    const Embedding condition = build_condition(stage, bundle, adapters, flags);
    result.trace.stages.push_back(stage);
    result.trace.condition_lengths.push_back(condition.length());
    const double tau = 1.0 - static_cast<double>(i) / T;
    const double tau_next = 1.0 - static_cast<double>(i + 1) / T;
    const Latent v = denoiser.forward(x, tau, condition);
    x = flow::step(x, v, tau, tau_next);
  }
  result.latent = std::move(x);
  return result;
}

Image visualize_latent(const Latent& latent, int upscale) {
  const auto& s = latent.shape;
  const double lo = latent.values.minCoeff();
  const double hi = latent.values.maxCoeff();
  const double span = (hi - lo) > 1e-12 ? (hi - lo) : 1.0;
  const int panel_w = s.width * upscale;
  Image img(panel_w * s.channels, s.height * upscale, 1);
  for (int c = 0; c < s.channels; ++c)
    for (int y = 0; y < s.height * upscale; ++y)
      for (int x = 0; x < panel_w; ++x) {
        const double v = latent.at(c, y / upscale, x / upscale);
        img.at(c * panel_w + x, y, 0) =
            static_cast<uint8_t>(std::lround(255.0 * (v - lo) / span));
      }
  return img;
}

Latent latent_from_image(const std::string& path, LatentShape shape) {
  const Image img = read_image(path);
  Latent x(shape);
  for (int y = 0; y < shape.height; ++y) {
    for (int xx = 0; xx < shape.width; ++xx) {
      const int sy = y * img.height / shape.height;
      const int sx = xx * img.width / shape.width;
      double rgb[3];
      for (int c = 0; c < 3; ++c)
        rgb[c] = img.at(sx, sy, img.channels == 1 ? 0 : c) / 255.0;
      for (int c = 0; c < std::min(shape.channels, 3); ++c)
        x.at(c, y, xx) = 2.0 * rgb[c] - 1.0;
      if (shape.channels > 3) {
        const double luma = 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2];
        x.at(3, y, xx) = 2.0 * luma - 1.0;
      }
    }
  }
  return x;
}

void save_latent(const std::string& path, const Latent& latent) {
  NamedTensors t;
  nlohmann::json meta;
  meta["schema"] = "culgen-latent";
  meta["channels"] = latent.shape.channels;
  meta["height"] = latent.shape.height;
  meta["width"] = latent.shape.width;
  t.meta_json = meta.dump();
  NamedTensors::Entry e;
  e.dims = {static_cast<uint64_t>(latent.shape.channels),
            static_cast<uint64_t>(latent.shape.height),
            static_cast<uint64_t>(latent.shape.width)};
  e.data.assign(latent.values.data(), latent.values.data() + latent.values.size());
  t.arrays["latent"] = std::move(e);
  t.save(path);
}

Latent load_latent(const std::string& path) {
  const NamedTensors t = NamedTensors::load(path);
  auto it = t.arrays.find("latent");
  if (it == t.arrays.end()) throw ParseError("no 'latent' array in " + path);
  const auto& e = it->second;
  if (e.dims.size() != 3) throw ParseError("latent array must be 3-d in " + path);
  LatentShape shape{static_cast<int>(e.dims[0]), static_cast<int>(e.dims[1]),
                    static_cast<int>(e.dims[2])};
  Vector v(static_cast<Eigen::Index>(e.data.size()));
  for (size_t i = 0; i < e.data.size(); ++i) v[static_cast<Eigen::Index>(i)] = e.data[i];
  return Latent(shape, std::move(v));
}

}  // namespace culgen
