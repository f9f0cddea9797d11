// SPDX-License-Identifier: Apache-2.0
//
// nlohmann/json bindings for configuration structs. Internal to core; public
// headers stay free of the vendored dependency.

#ifndef BEAMCAST_SRC_JSON_CODEC_HPP
#define BEAMCAST_SRC_JSON_CODEC_HPP

#include <json.hpp>

#include "beamcast/baselines.hpp"
#include "beamcast/channel.hpp"
#include "beamcast/dataset.hpp"
#include "beamcast/model.hpp"
#include "beamcast/scene.hpp"

namespace beamcast {

using json = nlohmann::json;

// Missing keys keep the struct's default; unknown keys are rejected by
// RunConfig loading (see config.cpp), not here.
template <typename T>
void get_if_present(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

inline void to_json(json& j, const Vec3& v) { j = json{{"x", v.x}, {"y", v.y}, {"z", v.z}}; }
inline void from_json(const json& j, Vec3& v) {
  get_if_present(j, "x", v.x);
  get_if_present(j, "y", v.y);
  get_if_present(j, "z", v.z);
}

inline void to_json(json& j, const ArrayGeometry& g) {
  j = json{{"n_h", g.n_h}, {"n_v", g.n_v}, {"spacing", g.spacing}};
}
inline void from_json(const json& j, ArrayGeometry& g) {
  get_if_present(j, "n_h", g.n_h);
  get_if_present(j, "n_v", g.n_v);
  get_if_present(j, "spacing", g.spacing);
}

inline void to_json(json& j, const SubcarrierGrid& g) {
  j = json{{"n_subcarriers", g.n_subcarriers},
           {"center_frequency", g.center_frequency},
           {"spacing", g.spacing}};
}
inline void from_json(const json& j, SubcarrierGrid& g) {
  get_if_present(j, "n_subcarriers", g.n_subcarriers);
  get_if_present(j, "center_frequency", g.center_frequency);
  get_if_present(j, "spacing", g.spacing);
}

inline void to_json(json& j, const SceneConfig& c) {
  j = json{{"extent_l", c.extent_l},
           {"extent_w", c.extent_w},
           {"n_buildings", c.n_buildings},
           {"n_roads", c.n_roads},
           {"road_width", c.road_width},
           {"road_margin", c.road_margin},
           {"building_min_side", c.building_min_side},
           {"building_max_side", c.building_max_side},
           {"building_min_height", c.building_min_height},
           {"building_max_height", c.building_max_height},
           {"building_clearance", c.building_clearance},
           {"bs_position", c.bs_position},
           {"antenna_height", c.antenna_height},
           {"carrier_frequency", c.carrier_frequency},
           {"reflection_loss", c.reflection_loss},
           {"ground_reflection", c.ground_reflection},
           {"max_placement_attempts", c.max_placement_attempts}};
}
inline void from_json(const json& j, SceneConfig& c) {
  get_if_present(j, "extent_l", c.extent_l);
  get_if_present(j, "extent_w", c.extent_w);
  get_if_present(j, "n_buildings", c.n_buildings);
  get_if_present(j, "n_roads", c.n_roads);
  get_if_present(j, "road_width", c.road_width);
  get_if_present(j, "road_margin", c.road_margin);
  get_if_present(j, "building_min_side", c.building_min_side);
  get_if_present(j, "building_max_side", c.building_max_side);
  get_if_present(j, "building_min_height", c.building_min_height);
  get_if_present(j, "building_max_height", c.building_max_height);
  get_if_present(j, "building_clearance", c.building_clearance);
  get_if_present(j, "bs_position", c.bs_position);
  get_if_present(j, "antenna_height", c.antenna_height);
  get_if_present(j, "carrier_frequency", c.carrier_frequency);
  get_if_present(j, "reflection_loss", c.reflection_loss);
  get_if_present(j, "ground_reflection", c.ground_reflection);
  get_if_present(j, "max_placement_attempts", c.max_placement_attempts);
}

inline void to_json(json& j, const RenderSettings& r) {
  j = json{{"width", r.width}, {"height", r.height}, {"fov_deg", r.fov_deg}, {"max_range", r.max_range}};
}
inline void from_json(const json& j, RenderSettings& r) {
  get_if_present(j, "width", r.width);
  get_if_present(j, "height", r.height);
  get_if_present(j, "fov_deg", r.fov_deg);
  get_if_present(j, "max_range", r.max_range);
}

inline void to_json(json& j, const SplitRatios& r) {
  j = json{{"train", r.train}, {"val", r.val}, {"test", r.test}};
}
inline void from_json(const json& j, SplitRatios& r) {
  get_if_present(j, "train", r.train);
  get_if_present(j, "val", r.val);
  get_if_present(j, "test", r.test);
}

inline void to_json(json& j, const Trajectory& t) {
  j = json{{"road_index", t.road_index}, {"speed", t.speed}};
}
inline void from_json(const json& j, Trajectory& t) {
  get_if_present(j, "road_index", t.road_index);
  get_if_present(j, "speed", t.speed);
}

inline void to_json(json& j, const ModelConfig& c) {
  j = json{{"d_m", c.d_m},
           {"d_v", c.d_v},
           {"n_heads", c.n_heads},
           {"n_encoder_blocks", c.n_encoder_blocks},
           {"n_decoder_blocks", c.n_decoder_blocks},
           {"text_len", c.text_len},
           {"patch_size", c.patch_size},
           {"n_views", c.n_views},
           {"view_width", c.view_width},
           {"view_height", c.view_height},
           {"n_beams", c.n_beams},
           {"lora_rank", c.lora_rank},
           {"lora_alpha", c.lora_alpha},
           {"rope_base", c.rope_base},
           {"scale_by_model_dim", c.scale_by_model_dim},
           {"warm_start_epochs", c.warm_start_epochs},
           {"vocab", c.vocab}};
}
inline void from_json(const json& j, ModelConfig& c) {
  get_if_present(j, "d_m", c.d_m);
  get_if_present(j, "d_v", c.d_v);
  get_if_present(j, "n_heads", c.n_heads);
  get_if_present(j, "n_encoder_blocks", c.n_encoder_blocks);
  get_if_present(j, "n_decoder_blocks", c.n_decoder_blocks);
  get_if_present(j, "text_len", c.text_len);
  get_if_present(j, "patch_size", c.patch_size);
  get_if_present(j, "n_views", c.n_views);
  get_if_present(j, "view_width", c.view_width);
  get_if_present(j, "view_height", c.view_height);
  get_if_present(j, "n_beams", c.n_beams);
  get_if_present(j, "lora_rank", c.lora_rank);
  get_if_present(j, "lora_alpha", c.lora_alpha);
  get_if_present(j, "rope_base", c.rope_base);
  get_if_present(j, "scale_by_model_dim", c.scale_by_model_dim);
  get_if_present(j, "warm_start_epochs", c.warm_start_epochs);
  get_if_present(j, "vocab", c.vocab);
}

inline void to_json(json& j, const BaselineConfig& c) {
  j = json{{"n_beams", c.n_beams},
           {"n_views", c.n_views},
           {"view_width", c.view_width},
           {"view_height", c.view_height},
           {"dnn_width", c.dnn_width},
           {"dnn_blocks", c.dnn_blocks},
           {"cnn_channels", c.cnn_channels},
           {"dropout_p", c.dropout_p},
           {"fusion_hidden", c.fusion_hidden},
           {"bn_momentum", c.bn_momentum},
           {"bn_eps", c.bn_eps}};
}
inline void from_json(const json& j, BaselineConfig& c) {
  get_if_present(j, "n_beams", c.n_beams);
  get_if_present(j, "n_views", c.n_views);
  get_if_present(j, "view_width", c.view_width);
  get_if_present(j, "view_height", c.view_height);
  get_if_present(j, "dnn_width", c.dnn_width);
  get_if_present(j, "dnn_blocks", c.dnn_blocks);
  get_if_present(j, "cnn_channels", c.cnn_channels);
  get_if_present(j, "dropout_p", c.dropout_p);
  get_if_present(j, "fusion_hidden", c.fusion_hidden);
  get_if_present(j, "bn_momentum", c.bn_momentum);
  get_if_present(j, "bn_eps", c.bn_eps);
}

inline void to_json(json& j, const DatasetStats& s) {
  j = json{{"view_mean", s.view_mean},
           {"view_std", s.view_std},
           {"pos_mean", s.pos_mean},
           {"pos_std", s.pos_std}};
}
inline void from_json(const json& j, DatasetStats& s) {
  get_if_present(j, "view_mean", s.view_mean);
  get_if_present(j, "view_std", s.view_std);
  get_if_present(j, "pos_mean", s.pos_mean);
  get_if_present(j, "pos_std", s.pos_std);
}

}  // namespace beamcast

#endif  // BEAMCAST_SRC_JSON_CODEC_HPP
