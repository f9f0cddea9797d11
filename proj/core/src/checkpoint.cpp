// SPDX-License-Identifier: Apache-2.0

#include "beamcast/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "beamcast/baselines.hpp"
#include "beamcast/errors.hpp"
#include "beamcast/hash.hpp"
#include "beamcast/model.hpp"
#include "beamcast/tensor_io.hpp"
#include "json_codec.hpp"

namespace beamcast {

namespace {

constexpr char kMagic[4] = {'B', 'C', 'P', 'T'};

json manifest_json(const CheckpointData& d) {
  json j;
  j["format"] = "beamcast-checkpoint-v1";
  j["model_kind"] = d.model_kind;
  j["config"] = json::parse(d.config_json);
  j["stats"] = d.stats;
  j["codebook_hash"] = hex_digest(d.codebook_hash);
  j["optimizer_steps"] = d.optimizer_steps;
  j["completed_epochs"] = d.completed_epochs;
  j["best_val_top1"] = d.best_val_top1;
  json params = json::array();
  for (const CheckpointParam& p : d.params) {
    params.push_back(json{{"name", p.name},
                          {"shape", p.tensor.shape()},
                          {"trainable", p.trainable},
                          {"stat", p.is_stat}});
  }
  j["params"] = params;
  json moments = json::array();
  for (const auto& [name, m, v] : d.moments) moments.push_back(name);
  j["moments"] = moments;
  return j;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataIntegrityError("cannot write checkpoint: " + path.string());
  const std::string manifest = manifest_json(data).dump();
  os.write(kMagic, 4);
  const auto len = static_cast<std::uint64_t>(manifest.size());
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  os.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  for (const CheckpointParam& p : data.params) write_bctn(os, p.tensor);
  for (const auto& [name, m, v] : data.moments) {
    write_bctn(os, m);
    write_bctn(os, v);
  }
  if (!os) throw DataIntegrityError("checkpoint write failed: " + path.string());
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataIntegrityError("cannot open checkpoint: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataIntegrityError("checkpoint: bad magic in " + path.string());
  }
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!is || len == 0 || len > (1ULL << 24)) {
    throw DataIntegrityError("checkpoint: implausible manifest length");
  }
  std::string manifest(len, '\0');
  is.read(manifest.data(), static_cast<std::streamsize>(len));
  if (!is) throw DataIntegrityError("checkpoint: truncated manifest");
  json j;
  try {
    j = json::parse(manifest);
  } catch (const json::exception& e) {
    throw DataIntegrityError(std::string("checkpoint manifest parse error: ") + e.what());
  }
  if (j.value("format", "") != std::string("beamcast-checkpoint-v1")) {
    throw DataIntegrityError("unknown checkpoint format tag");
  }
  CheckpointData d;
  try {
    d.model_kind = j.at("model_kind").get<std::string>();
    d.config_json = j.at("config").dump();
    d.stats = j.at("stats").get<DatasetStats>();
    d.codebook_hash = std::stoull(j.at("codebook_hash").get<std::string>(), nullptr, 16);
    d.optimizer_steps = j.at("optimizer_steps").get<std::int64_t>();
    d.completed_epochs = j.at("completed_epochs").get<int>();
    d.best_val_top1 = j.at("best_val_top1").get<double>();
    for (const json& pj : j.at("params")) {
      CheckpointParam p;
      p.name = pj.at("name").get<std::string>();
      p.trainable = pj.at("trainable").get<bool>();
      p.is_stat = pj.at("stat").get<bool>();
      p.tensor = read_bctn(is);
      const Shape expect = pj.at("shape").get<Shape>();
      if (p.tensor.shape() != expect) {
        throw DataIntegrityError("checkpoint: blob shape differs from manifest for " + p.name);
      }
      d.params.push_back(std::move(p));
    }
    for (const json& mj : j.at("moments")) {
      const auto name = mj.get<std::string>();
      Tensor m = read_bctn(is);
      Tensor v = read_bctn(is);
      d.moments.emplace_back(name, std::move(m), std::move(v));
    }
  } catch (const json::exception& e) {
    throw DataIntegrityError(std::string("checkpoint manifest field error: ") + e.what());
  }
  return d;
}

std::unique_ptr<BeamPredictor> predictor_from_checkpoint(const CheckpointData& data) {
  std::unique_ptr<BeamPredictor> model;
  const json cfg_json = json::parse(data.config_json);
  if (data.model_kind == "mlm-bp") {
    ModelConfig cfg = cfg_json.get<ModelConfig>();
    model = std::make_unique<MlmModel>(cfg, data.stats, 0);
  } else if (data.model_kind == "dnn-pos") {
    model = std::make_unique<PositionDnn>(cfg_json.get<BaselineConfig>(), data.stats, 0);
  } else if (data.model_kind == "cnn-vis") {
    model = std::make_unique<VisionCnn>(cfg_json.get<BaselineConfig>(), data.stats, 0);
  } else if (data.model_kind == "fusion") {
    model = std::make_unique<FusionModel>(cfg_json.get<BaselineConfig>(), data.stats, 0);
  } else {
    throw DataIntegrityError("checkpoint: unknown model kind '" + data.model_kind + "'");
  }
  ParamSet& ps = model->params();
  if (ps.entries().size() != data.params.size()) {
    throw DataIntegrityError("checkpoint: parameter count does not match the config");
  }
  bool any_frozen_weight = false;
  for (const CheckpointParam& stored : data.params) {
    if (!ps.contains(stored.name)) {
      throw DataIntegrityError("checkpoint: unexpected parameter " + stored.name);
    }
    Tensor& live = ps.at(stored.name);
    if (live.shape() != stored.tensor.shape()) {
      throw DataIntegrityError("checkpoint: shape mismatch for " + stored.name + ": config wants " +
                               shape_str(live.shape()) + ", file has " +
                               shape_str(stored.tensor.shape()));
    }
    std::copy_n(stored.tensor.data(), stored.tensor.numel(), live.data());
    live.set_requires_grad(stored.trainable);
    if (!stored.is_stat && !stored.trainable) any_frozen_weight = true;
  }
  if (data.model_kind == "mlm-bp" && any_frozen_weight) {
    static_cast<MlmModel*>(model.get())->freeze_base();
  }
  return model;
}

CheckpointData checkpoint_from_predictor(const BeamPredictor& model) {
  CheckpointData d;
  d.model_kind = model.kind();
  if (d.model_kind == "mlm-bp") {
    const auto& m = static_cast<const MlmModel&>(model);
    d.config_json = json(m.config()).dump();
    d.stats = m.stats();
  } else if (d.model_kind == "dnn-pos") {
    const auto& m = static_cast<const PositionDnn&>(model);
    d.config_json = json(m.config()).dump();
    d.stats = m.stats();
  } else if (d.model_kind == "cnn-vis") {
    const auto& m = static_cast<const VisionCnn&>(model);
    d.config_json = json(m.config()).dump();
    d.stats = m.stats();
  } else if (d.model_kind == "fusion") {
    const auto& m = static_cast<const FusionModel&>(model);
    d.config_json = json(m.config()).dump();
    d.stats = m.stats();
  } else {
    throw ContractError("checkpoint: unknown model kind '" + d.model_kind + "'");
  }
  for (const NamedParam& p : model.params().entries()) {
    Tensor copy(p.tensor.shape(),
                std::vector<double>(p.tensor.data(), p.tensor.data() + p.tensor.numel()));
    d.params.push_back({p.name, std::move(copy), p.tensor.requires_grad(), p.is_stat});
  }
  return d;
}

}  // namespace beamcast
