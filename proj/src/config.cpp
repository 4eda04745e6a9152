#include "culgen/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "culgen/errors.hpp"

using json = nlohmann::json;

namespace culgen {

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }

  RunConfig cfg;
  try {
    if (j.contains("dims")) {
      const auto& d = j.at("dims");
      cfg.d_text = d.value("d_text", cfg.d_text);
      cfg.d_img = d.value("d_img", cfg.d_img);
      cfg.d_attn = d.value("d_attn", cfg.d_attn);
      cfg.num_heads = d.value("num_heads", cfg.num_heads);
      cfg.model_dim = d.value("model_dim", cfg.model_dim);
      if (d.contains("latent")) {
        const auto& l = d.at("latent");
        cfg.latent = LatentShape{l.at(0).get<int>(), l.at(1).get<int>(), l.at(2).get<int>()};
      }
    }
    if (j.contains("seeds")) {
      const auto& s = j.at("seeds");
      cfg.encoder_seed = s.value("encoder", cfg.encoder_seed);
      cfg.denoiser_seed = s.value("denoiser", cfg.denoiser_seed);
      cfg.adapter_seed = s.value("adapter", cfg.adapter_seed);
    }
    cfg.adapter_init_stddev = j.value("adapter_init_stddev", cfg.adapter_init_stddev);
    cfg.per_component_cultural = j.value("per_component_cultural", cfg.per_component_cultural);
    if (j.contains("schedule")) {
      const auto& s = j.at("schedule");
      cfg.schedule.b1 = s.value("b1", cfg.schedule.b1);
      cfg.schedule.b2 = s.value("b2", cfg.schedule.b2);
      cfg.schedule.total_steps = s.value("steps", cfg.schedule.total_steps);
      cfg.cfg_scale = s.value("cfg_scale", cfg.cfg_scale);
      if (s.contains("flags")) {
        const auto& f = s.at("flags");
        cfg.flags.include_cultural = f.value("include_cultural", cfg.flags.include_cultural);
        if (f.contains("cultural_start_stage"))
          cfg.flags.cultural_start =
              cultural_start_from_string(f.at("cultural_start_stage").get<std::string>());
        cfg.flags.include_style_image =
            f.value("include_style_image", cfg.flags.include_style_image);
        cfg.flags.num_style_images = f.value("num_style_images", cfg.flags.num_style_images);
        cfg.flags.include_reason_stage3 =
            f.value("include_reason_stage3", cfg.flags.include_reason_stage3);
      }
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
      cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
      cfg.train.grad_accum = t.value("grad_accum", cfg.train.grad_accum);
      cfg.train.steps = t.value("steps", cfg.train.steps);
      cfg.train.dataset_size = t.value("dataset_size", cfg.train.dataset_size);
      cfg.train.seed = t.value("seed", cfg.train.seed);
    }
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      if (e.contains("countries"))
        cfg.countries = e.at("countries").get<std::vector<std::string>>();
      cfg.eval_seed = e.value("seed", cfg.eval_seed);
      cfg.max_statements = e.value("max_statements", cfg.max_statements);
    }
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      cfg.data_dir = p.value("data_dir", cfg.data_dir);
      cfg.db_index = p.value("db_index", cfg.db_index);
      cfg.checkpoint = p.value("checkpoint", cfg.checkpoint);
      cfg.runs_dir = p.value("runs_dir", cfg.runs_dir);
    }
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  if (cfg.cfg_scale != 1.0)
    throw ConfigError("cfg_scale is a stub; classifier-free guidance is not implemented");
  cfg.schedule.validate();
  cfg.flags.validate();
  cfg.train.validate();
  return cfg;
}

void RunConfig::save(const std::string& path) const {
  json j;
  j["dims"] = {{"d_text", d_text},       {"d_img", d_img},
               {"d_attn", d_attn},       {"num_heads", num_heads},
               {"model_dim", model_dim}, {"latent", {latent.channels, latent.height, latent.width}}};
  j["seeds"] = {{"encoder", encoder_seed}, {"denoiser", denoiser_seed}, {"adapter", adapter_seed}};
  j["adapter_init_stddev"] = adapter_init_stddev;
  j["per_component_cultural"] = per_component_cultural;
  j["schedule"] = {{"b1", schedule.b1},
                   {"b2", schedule.b2},
                   {"steps", schedule.total_steps},
                   {"cfg_scale", cfg_scale},
                   {"flags",
                    {{"include_cultural", flags.include_cultural},
                     {"cultural_start_stage", to_string(flags.cultural_start)},
                     {"include_style_image", flags.include_style_image},
                     {"num_style_images", flags.num_style_images},
                     {"include_reason_stage3", flags.include_reason_stage3}}}};
  j["train"] = {{"learning_rate", train.learning_rate}, {"batch_size", train.batch_size},
                {"grad_accum", train.grad_accum},       {"steps", train.steps},
                {"dataset_size", train.dataset_size},   {"seed", train.seed}};
  j["eval"] = {{"countries", countries}, {"seed", eval_seed}, {"max_statements", max_statements}};
  j["paths"] = {{"data_dir", data_dir},
                {"db_index", db_index},
                {"checkpoint", checkpoint},
                {"runs_dir", runs_dir}};
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for write: " + path);
  os << j.dump(2) << "\n";
}

}  // namespace culgen
