// SPDX-License-Identifier: Apache-2.0

#include "beamcast/config.hpp"

#include <fstream>
#include <set>

#include "beamcast/errors.hpp"
#include "json_codec.hpp"

namespace beamcast {

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("config: unknown key '" + key + "' in " + where);
    }
  }
}

void to_json_run(json& j, const RunConfig& c) {
  j = json{{"seed", c.seed},       {"model_kind", c.model_kind}, {"scene", c.scene},
           {"geometry", c.geometry}, {"grid", c.grid},           {"render", c.render},
           {"data",
            json{{"ratios", c.data.ratios},
                 {"sample_interval", c.data.sample_interval},
                 {"trajectories", c.data.trajectories},
                 {"max_samples", c.data.max_samples}}},
           {"model", c.model},     {"baseline", c.baseline},
           {"train",
            json{{"batch_size", c.train.batch_size},
                 {"learning_rate", c.train.learning_rate},
                 {"epochs", c.train.epochs},
                 {"seed", c.train.seed},
                 {"few_shot_ratio", c.train.few_shot_ratio},
                 {"early_stop_val_top1", c.train.early_stop_val_top1},
                 {"eval_batch_size", c.train.eval_batch_size}}}};
}

}  // namespace

void RunConfig::validate() const {
  geometry.validate();
  grid.validate();
  model.validate();
  baseline.validate();
  train.validate();
  if (model_kind != "mlm-bp" && model_kind != "dnn-pos" && model_kind != "cnn-vis" &&
      model_kind != "fusion") {
    throw ConfigError("config: unknown model kind '" + model_kind + "'");
  }
  if (data.sample_interval <= 0.0) throw ConfigError("config: sample interval must be positive");
  if (model.n_beams != geometry.n_h * geometry.n_v) {
    throw ConfigError("config: model beam count must match the codebook size n_h * n_v");
  }
}

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  check_keys(j, {"seed", "model_kind", "scene", "geometry", "grid", "render", "data", "model",
                 "baseline", "train"},
             "config root");
  RunConfig cfg;
  try {
    get_if_present(j, "seed", cfg.seed);
    get_if_present(j, "model_kind", cfg.model_kind);
    if (j.contains("scene")) {
      check_keys(j["scene"],
                 {"extent_l", "extent_w", "n_buildings", "n_roads", "road_width", "road_margin",
                  "building_min_side", "building_max_side", "building_min_height",
                  "building_max_height", "building_clearance", "bs_position", "antenna_height",
                  "carrier_frequency", "reflection_loss", "ground_reflection",
                  "max_placement_attempts"},
                 "scene");
      j["scene"].get_to(cfg.scene);
    }
    if (j.contains("geometry")) {
      check_keys(j["geometry"], {"n_h", "n_v", "spacing"}, "geometry");
      j["geometry"].get_to(cfg.geometry);
    }
    if (j.contains("grid")) {
      check_keys(j["grid"], {"n_subcarriers", "center_frequency", "spacing"}, "grid");
      j["grid"].get_to(cfg.grid);
    }
    if (j.contains("render")) {
      check_keys(j["render"], {"width", "height", "fov_deg", "max_range"}, "render");
      j["render"].get_to(cfg.render);
    }
    if (j.contains("data")) {
      check_keys(j["data"], {"ratios", "sample_interval", "trajectories", "max_samples"}, "data");
      const json& d = j["data"];
      get_if_present(d, "ratios", cfg.data.ratios);
      get_if_present(d, "sample_interval", cfg.data.sample_interval);
      get_if_present(d, "trajectories", cfg.data.trajectories);
      get_if_present(d, "max_samples", cfg.data.max_samples);
    }
    if (j.contains("model")) {
      check_keys(j["model"],
                 {"d_m", "d_v", "n_heads", "n_encoder_blocks", "n_decoder_blocks", "text_len",
                  "patch_size", "n_views", "view_width", "view_height", "n_beams", "lora_rank",
                  "lora_alpha", "rope_base", "scale_by_model_dim", "warm_start_epochs", "vocab"},
                 "model");
      j["model"].get_to(cfg.model);
    }
    if (j.contains("baseline")) {
      check_keys(j["baseline"],
                 {"n_beams", "n_views", "view_width", "view_height", "dnn_width", "dnn_blocks",
                  "cnn_channels", "dropout_p", "fusion_hidden", "bn_momentum", "bn_eps"},
                 "baseline");
      j["baseline"].get_to(cfg.baseline);
    }
    if (j.contains("train")) {
      check_keys(j["train"],
                 {"batch_size", "learning_rate", "epochs", "seed", "few_shot_ratio",
                  "early_stop_val_top1", "eval_batch_size"},
                 "train");
      const json& t = j["train"];
      get_if_present(t, "batch_size", cfg.train.batch_size);
      get_if_present(t, "learning_rate", cfg.train.learning_rate);
      get_if_present(t, "epochs", cfg.train.epochs);
      get_if_present(t, "seed", cfg.train.seed);
      get_if_present(t, "few_shot_ratio", cfg.train.few_shot_ratio);
      get_if_present(t, "early_stop_val_top1", cfg.train.early_stop_val_top1);
      get_if_present(t, "eval_batch_size", cfg.train.eval_batch_size);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field error: ") + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path.string());
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return run_config_from_json(text);
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  to_json_run(j, cfg);
  return j.dump(2) + "\n";
}

std::string apply_override(const std::string& config_json, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like section.key=value, got '" + assignment + "'");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // unquoted strings
  }
  json j = json::parse(config_json);
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError("override has an empty key segment: '" + assignment + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
  return j.dump();
}

void apply_scene_preset(RunConfig& cfg, const std::string& name) {
  if (name == "urban") {
    return;  // defaults
  }
  if (name == "empty") {
    cfg.scene.n_buildings = 0;
    cfg.scene.ground_reflection = false;
    return;
  }
  if (name == "los") {
    // sparse, low buildings well away from roads: almost every pose keeps LoS
    cfg.scene.n_buildings = 2;
    cfg.scene.building_min_side = 12.0;
    cfg.scene.building_max_side = 20.0;
    cfg.scene.building_min_height = 6.0;
    cfg.scene.building_max_height = 10.0;
    return;
  }
  if (name == "blockage") {
    // dense tall blocks: a large share of poses lose LoS to the base station
    cfg.scene.n_buildings = 9;
    cfg.scene.building_min_side = 22.0;
    cfg.scene.building_max_side = 48.0;
    cfg.scene.building_min_height = 16.0;
    cfg.scene.building_max_height = 32.0;
    cfg.scene.building_clearance = 1.0;
    return;
  }
  throw ConfigError("unknown scene preset '" + name + "'");
}

}  // namespace beamcast
