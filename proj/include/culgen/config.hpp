#pragma once

#include <string>
#include <vector>

#include "culgen/backbone.hpp"
#include "culgen/scheduler.hpp"
#include "culgen/trainer.hpp"

namespace culgen {

// One structured run config (JSON, schema in docs/config.md); CLI flags
// override individual fields. Client credentials come from environment
// variables only.
struct RunConfig {
  // model dims
  int d_text = 16;
  int d_img = 12;
  int d_attn = 16;
  int num_heads = 1;
  int model_dim = 32;
  LatentShape latent{4, 8, 8};
  uint64_t encoder_seed = 0;
  uint64_t denoiser_seed = 7;
  uint64_t adapter_seed = 11;
  double adapter_init_stddev = 1.0;

  ScheduleConfig schedule;
  AblationFlags flags;
  TrainConfig train;
  bool per_component_cultural = false;
  // Stub: guidance is out of scope; any value other than 1.0 is rejected.
  double cfg_scale = 1.0;

  // eval protocol
  std::vector<std::string> countries = {"China", "France", "South Africa",
                                        "United Arab Emirates", "Mexico"};
  uint64_t eval_seed = 0;
  int max_statements = 0;  // 0 = all

  // paths (relative paths resolve against the process cwd)
  std::string data_dir = "data";
  std::string db_index;
  std::string checkpoint;
  std::string runs_dir = "runs";

  static RunConfig load(const std::string& path);
  void save(const std::string& path) const;
};

}  // namespace culgen
