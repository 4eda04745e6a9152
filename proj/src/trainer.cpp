#include "culgen/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "culgen/errors.hpp"
#include "culgen/log.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace culgen {

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw ConfigError("TrainConfig: learning_rate must be positive");
  if (batch_size < 1 || grad_accum < 1 || steps < 0)
    throw ConfigError("TrainConfig: batch_size/grad_accum must be >= 1 and steps >= 0");
}

TrainState::TrainState(AdapterParams params, uint64_t seed)
    : adapters(std::move(params)),
      opt{AdapterGrads::zeros_like(adapters), AdapterGrads::zeros_like(adapters)},
      accum(AdapterGrads::zeros_like(adapters)),
      rng(seed) {}

double adapter_loss(const TrainItem& item, double tau, const Latent& eps,
                    const ToyDenoiser& denoiser, const AdapterParams& adapters,
                    const ScheduleConfig& schedule, const AblationFlags& flags,
                    AdapterGrads* grads) {
  // tau = 1 is pure noise = the earliest denoising step.
  const Stage stage = stage_of_fraction(1.0 - tau, schedule);
  ConditionCache cond_cache;
  const Embedding condition =
      build_condition(stage, item.bundle, adapters, flags, grads ? &cond_cache : nullptr);

  const Latent x_t = flow::add_noise(item.x0, eps, tau);
  const Latent target = flow::velocity_target(item.x0, eps);

  DenoiserCache dcache;
  const Latent pred = denoiser.forward_cached(x_t, tau, condition.rows(),
                                              grads ? &dcache : nullptr);
  const double n = static_cast<double>(item.x0.shape.size());
  const double loss = (pred.values - target.values).squaredNorm() / n;

  if (grads && cond_cache.adapter_rows > 0) {
    Latent d_pred(pred.shape);
    d_pred.values = 2.0 / n * (pred.values - target.values);
    const Matrix d_condition = denoiser.backward_condition(dcache, d_pred);
    condition_backward(adapters, cond_cache, d_condition, grads);
  }
  return loss;
}

namespace {

// Elementwise Adam over every adapter tensor.
void adam_apply(AdapterParams& p, AdamState& opt, const AdapterGrads& g, double lr) {
  opt.t += 1;
  const double bc1 = 1.0 - std::pow(opt.beta1, opt.t);
  const double bc2 = 1.0 - std::pow(opt.beta2, opt.t);
  auto update = [&](double* w, const double* gv, double* m, double* v, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * gv[i];
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * gv[i] * gv[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + opt.eps);
    }
  };
  update(p.ca1.w_q.data(), g.ca1.w_q.data(), opt.m.ca1.w_q.data(), opt.v.ca1.w_q.data(), p.ca1.w_q.size());
  update(p.ca1.w_k.data(), g.ca1.w_k.data(), opt.m.ca1.w_k.data(), opt.v.ca1.w_k.data(), p.ca1.w_k.size());
  update(p.ca1.w_v.data(), g.ca1.w_v.data(), opt.m.ca1.w_v.data(), opt.v.ca1.w_v.data(), p.ca1.w_v.size());
  update(p.ca1.w_o.data(), g.ca1.w_o.data(), opt.m.ca1.w_o.data(), opt.v.ca1.w_o.data(), p.ca1.w_o.size());
  update(p.ca2.w_q.data(), g.ca2.w_q.data(), opt.m.ca2.w_q.data(), opt.v.ca2.w_q.data(), p.ca2.w_q.size());
  update(p.ca2.w_k.data(), g.ca2.w_k.data(), opt.m.ca2.w_k.data(), opt.v.ca2.w_k.data(), p.ca2.w_k.size());
  update(p.ca2.w_v.data(), g.ca2.w_v.data(), opt.m.ca2.w_v.data(), opt.v.ca2.w_v.data(), p.ca2.w_v.size());
  update(p.ca2.w_o.data(), g.ca2.w_o.data(), opt.m.ca2.w_o.data(), opt.v.ca2.w_o.data(), p.ca2.w_o.size());
  update(p.proj.w.data(), g.proj_w.data(), opt.m.proj_w.data(), opt.v.proj_w.data(), p.proj.w.size());
  update(p.proj.b.data(), g.proj_b.data(), opt.m.proj_b.data(), opt.v.proj_b.data(), p.proj.b.size());
}

}  // namespace

double train_step(const std::vector<TrainItem>& batch, TrainState& state,
                  const TrainConfig& cfg, const ToyDenoiser& denoiser,
                  const ScheduleConfig& schedule, const AblationFlags& flags) {
  cfg.validate();
  if (batch.empty()) throw InvalidInputError("train_step: empty batch");

  AdapterGrads batch_grads = AdapterGrads::zeros_like(state.adapters);
  double loss_sum = 0.0;
  for (const auto& item : batch) {
    const double tau = state.rng.uniform();
    Latent eps = random_latent(item.x0.shape, state.rng);
    const double loss =
        adapter_loss(item, tau, eps, denoiser, state.adapters, schedule, flags, &batch_grads);
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "train_step: non-finite loss at step " << state.step << " (tau=" << tau
          << ", condition length="
          << condition_length(stage_of_fraction(1.0 - tau, schedule),
                              item.bundle.prompt.length(),
                              item.bundle.cultural ? item.bundle.cultural->length() : 0,
                              item.bundle.reason ? item.bundle.reason->length() : 0, flags)
          << ", |ca1.w_q|=" << state.adapters.ca1.w_q.norm()
          << ", |ca2.w_q|=" << state.adapters.ca2.w_q.norm()
          << ", |proj.w|=" << state.adapters.proj.w.norm() << ")";
      throw Error(msg.str());
    }
    loss_sum += loss;
  }
  batch_grads.scale(1.0 / static_cast<double>(batch.size()));
  state.accum.add(batch_grads);
  state.accum_count += 1;
  state.step += 1;

  if (state.accum_count == cfg.grad_accum) {
    state.accum.scale(1.0 / static_cast<double>(cfg.grad_accum));
    adam_apply(state.adapters, state.opt, state.accum, cfg.learning_rate);
    state.accum = AdapterGrads::zeros_like(state.adapters);
    state.accum_count = 0;
    state.optimizer_steps += 1;
  }

  const double loss = loss_sum / static_cast<double>(batch.size());
  state.loss_history.push_back(loss);
  return loss;
}

namespace {
double window_mean(const std::vector<double>& losses, bool from_front) {
  if (losses.empty()) return 0.0;
  const size_t n = losses.size();
  const size_t w = std::max<size_t>(1, std::min<size_t>(50, n / 10 ? n / 10 : 1));
  double sum = 0.0;
  for (size_t i = 0; i < w; ++i) sum += from_front ? losses[i] : losses[n - 1 - i];
  return sum / static_cast<double>(w);
}
}  // namespace

double smoothed_initial(const std::vector<double>& losses) { return window_mean(losses, true); }
double smoothed_final(const std::vector<double>& losses) { return window_mean(losses, false); }

std::vector<TrainItem> load_train_items(const std::string& manifest_path, const CulturalDB& db,
                                        const TextEncoder& text_enc,
                                        const ImageEncoder& image_enc,
                                        const PromptTemplates& templates, LatentShape shape,
                                        uint64_t seed, int num_images, int* skipped) {
  std::ifstream is(manifest_path);
  if (!is) throw IoError("cannot open training manifest: " + manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();

  std::vector<TrainItem> items;
  int skipped_count = 0;
  std::string line;
  int line_no = 0;
  uint64_t index = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      std::ostringstream msg;
      msg << manifest_path << ":" << line_no << ": malformed line: " << e.what();
      throw ParseError(msg.str());
    }
    const auto country = j.at("country").get<std::string>();
    const ActionReason ar{j.at("action").get<std::string>(), j.at("reason").get<std::string>()};
    const std::string image = (base / j.at("image").get<std::string>()).string();
    if (db.count(country) == 0) {
      log_warn("training example at line " + std::to_string(line_no) + " targets country '" +
               country + "' absent from the db; skipping");
      ++skipped_count;
      ++index;
      continue;
    }
    const RetrievalResult retrieval = db.retrieve(country, derive_seed(seed, index));
    TrainItem item{latent_from_image(image, shape),
                   make_bundle(retrieval, country, ar, text_enc, image_enc, templates,
                               num_images),
                   j.value("id", country + ":" + std::to_string(line_no))};
    items.push_back(std::move(item));
    ++index;
  }
  if (skipped) *skipped = skipped_count;
  if (items.empty())
    throw Error("train: every example was skipped or the manifest is empty: " + manifest_path);
  return items;
}

TrainRunResult train(const TrainConfig& cfg, const CulturalDB& db,
                     const std::string& manifest_path, const ToyDenoiser& denoiser,
                     const TextEncoder& text_enc, const ImageEncoder& image_enc,
                     const PromptTemplates& templates, const ScheduleConfig& schedule,
                     const AblationFlags& flags, TrainState& state,
                     const std::string& checkpoint_path, const std::string& loss_csv_path) {
  cfg.validate();
  TrainRunResult result;
  const auto items =
      load_train_items(manifest_path, db, text_enc, image_enc, templates,
                       denoiser.latent_shape(), cfg.seed, flags.num_style_images,
                       &result.skipped_examples);

  const size_t n = items.size();
  for (int s = 0; s < cfg.steps; ++s) {
    std::vector<TrainItem> batch;
    for (int b = 0; b < cfg.batch_size; ++b)
      batch.push_back(items[(static_cast<size_t>(s) * cfg.batch_size + b) % n]);
    train_step(batch, state, cfg, denoiser, schedule, flags);
  }

  result.losses = state.loss_history;
  result.initial_smoothed = smoothed_initial(result.losses);
  result.final_smoothed = smoothed_final(result.losses);
  result.optimizer_steps = state.optimizer_steps;
  result.checkpoint_path = checkpoint_path;

  if (!checkpoint_path.empty()) state.adapters.save(checkpoint_path);
  if (!loss_csv_path.empty()) {
    std::ofstream os(loss_csv_path);
    if (!os) throw IoError("cannot open for write: " + loss_csv_path);
    os << "step,loss\n";
    for (size_t i = 0; i < result.losses.size(); ++i) {
      std::ostringstream row;
      row.precision(17);
      row << (i + 1) << "," << result.losses[i] << "\n";
      os << row.str();
    }
  }
  return result;
}

}  // namespace culgen
