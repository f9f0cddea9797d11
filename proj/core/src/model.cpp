// SPDX-License-Identifier: Apache-2.0

#include "beamcast/model.hpp"

#include <cmath>
#include <cstdio>

#include "beamcast/errors.hpp"

namespace beamcast {

void ModelConfig::validate() const {
  if (d_m < 2 || d_v < 2) throw ConfigError("model: embedding dims must be >= 2");
  if (n_heads < 1 || d_m % n_heads != 0 || d_v % n_heads != 0) {
    throw ConfigError("model: head count must divide both embedding dims");
  }
  if ((d_m / n_heads) % 2 != 0 || (d_v / n_heads) % 2 != 0) {
    throw ConfigError("model: head dimension must be even");
  }
  if (n_encoder_blocks < 1 || n_decoder_blocks < 1) {
    throw ConfigError("model: need at least one block per stack");
  }
  if (text_len < 1) throw ConfigError("model: text length must be positive");
  if (patch_size < 1 || view_width % patch_size != 0 || view_height % patch_size != 0) {
    throw ConfigError("model: view resolution must be divisible by the patch size");
  }
  if (n_beams < 1) throw ConfigError("model: beam count must be positive");
  if (lora_rank < 1 || lora_rank >= d_v) {
    throw ConfigError("model: LoRA rank must satisfy 1 <= r < d_v");
  }
  if (rope_base <= 1.0) throw ConfigError("model: rope base must exceed 1");
  if (warm_start_epochs < 0) throw ConfigError("model: warm start epochs must be >= 0");
  if (vocab.empty()) throw ConfigError("model: empty vocab");
}

Tensor lora_linear(const Tensor& x, const LoraAdapter& adapter) {
  if (adapter.rank > adapter.base.dim(1)) {
    throw ConfigError("lora: rank exceeds the base input dimension");
  }
  Tensor y = linear(x, adapter.base);
  const Tensor bypass = linear(linear(x, adapter.a), adapter.b);
  return add(y, scale(bypass, adapter.alpha / static_cast<double>(adapter.rank)));
}

TokenSequence tokenize_position(const Vec3& g, const ModelConfig& cfg) {
  if (!std::isfinite(g.x) || !std::isfinite(g.y) || !std::isfinite(g.z)) {
    throw ContractError("tokenize: non-finite coordinate");
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "Position: %.2f, %.2f, %.2f", g.x, g.y, g.z);
  TokenSequence seq;
  seq.text = buf;
  if (static_cast<int>(seq.text.size()) > cfg.text_len) {
    throw ConfigError("tokenize: position string '" + seq.text + "' exceeds L_p = " +
                      std::to_string(cfg.text_len));
  }
  seq.ids.reserve(static_cast<std::size_t>(cfg.text_len));
  for (char c : seq.text) {
    const auto at = cfg.vocab.find(c);
    if (at == std::string::npos) {
      throw ConfigError(std::string("tokenize: character '") + c + "' missing from vocab");
    }
    seq.ids.push_back(static_cast<int>(at) + 1);
  }
  seq.ids.resize(static_cast<std::size_t>(cfg.text_len), 0);  // pad
  return seq;
}

std::string detokenize(std::span<const int> ids, const ModelConfig& cfg) {
  std::string out;
  for (int id : ids) {
    if (id == 0) continue;  // pad
    if (id < 0 || id > static_cast<int>(cfg.vocab.size())) {
      throw ContractError("detokenize: id out of vocab range");
    }
    out.push_back(cfg.vocab[static_cast<std::size_t>(id - 1)]);
  }
  return out;
}

Tensor preprocess_images(const std::vector<DepthView>& views, const DatasetStats& stats) {
  if (views.empty()) throw DimensionError("preprocess: no views");
  const int w = views[0].width;
  const int h = views[0].height;
  const auto nc = static_cast<int>(views.size());
  if (static_cast<std::size_t>(nc) != stats.view_mean.size()) {
    throw DimensionError("preprocess: stats cover " + std::to_string(stats.view_mean.size()) +
                         " channels, got " + std::to_string(nc) + " views");
  }
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(nc * w * h));
  for (int c = 0; c < nc; ++c) {
    const DepthView& v = views[static_cast<std::size_t>(c)];
    if (v.width != w || v.height != h) throw DimensionError("preprocess: view resolution mismatch");
    const double mean = stats.view_mean[static_cast<std::size_t>(c)];
    const double sd = std::max(stats.view_std[static_cast<std::size_t>(c)], 1e-12);
    for (float px : v.pixels) data.push_back((static_cast<double>(px) - mean) / sd);
  }
  return Tensor(Shape{nc, h, w}, std::move(data));
}

Tensor denormalize_images(const Tensor& normalized, const DatasetStats& stats) {
  if (normalized.rank() != 3) throw DimensionError("denormalize: expected [views, H, W]");
  const std::int64_t nc = normalized.dim(0);
  const std::int64_t per = normalized.numel() / nc;
  Tensor out(normalized.shape());
  for (std::int64_t c = 0; c < nc; ++c) {
    const double mean = stats.view_mean[static_cast<std::size_t>(c)];
    const double sd = std::max(stats.view_std[static_cast<std::size_t>(c)], 1e-12);
    for (std::int64_t i = 0; i < per; ++i) {
      out.data()[c * per + i] = normalized.data()[c * per + i] * sd + mean;
    }
  }
  return out;
}

Tensor extract_patches(const Tensor& images, int patch_size) {
  if (images.rank() < 3) throw DimensionError("extract_patches: expected [.., views, H, W]");
  if (images.requires_grad()) {
    throw ContractError("extract_patches: image input must not require gradients");
  }
  const std::int64_t w = images.dim(-1);
  const std::int64_t h = images.dim(-2);
  const std::int64_t nc = images.dim(-3);
  if (w % patch_size != 0 || h % patch_size != 0) {
    throw DimensionError("extract_patches: resolution not divisible by patch size");
  }
  const std::int64_t pw = w / patch_size;
  const std::int64_t ph = h / patch_size;
  const std::int64_t tokens_per_view = ph * pw;
  const std::int64_t n_tokens = nc * tokens_per_view;
  const std::int64_t patch_dim = static_cast<std::int64_t>(patch_size) * patch_size;
  const std::int64_t batch = images.numel() / (nc * h * w);
  Shape out_shape(images.shape().begin(), images.shape().end() - 3);
  out_shape.push_back(n_tokens);
  out_shape.push_back(patch_dim);
  Tensor out(out_shape);
  const double* src = images.data();
  double* dst = out.data();
  for (std::int64_t s = 0; s < batch; ++s) {
    for (std::int64_t c = 0; c < nc; ++c) {
      for (std::int64_t py = 0; py < ph; ++py) {
        for (std::int64_t px = 0; px < pw; ++px) {
          const std::int64_t token = c * tokens_per_view + py * pw + px;
          double* token_dst = dst + (s * n_tokens + token) * patch_dim;
          for (int r = 0; r < patch_size; ++r) {
            const double* row = src + ((s * nc + c) * h + py * patch_size + r) * w +
                                px * patch_size;
            for (int q = 0; q < patch_size; ++q) token_dst[r * patch_size + q] = row[q];
          }
        }
      }
    }
  }
  return out;
}

Tensor patch_embed(const Tensor& images, const Tensor& proj, const Tensor& pos, int patch_size) {
  Tensor patches = extract_patches(images, patch_size);
  return add(linear(patches, proj), pos);
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, bool causal,
                 double rope_base, double logit_scale) {
  const std::int64_t t = q.dim(-2);
  if (k.dim(-2) != t || v.dim(-2) != t) {
    throw DimensionError("attention: sequence lengths disagree");
  }
  Tensor qp = rope_base > 0.0 ? rope_apply(q, rope_base) : q;
  Tensor kp = rope_base > 0.0 ? rope_apply(k, rope_base) : k;
  Tensor logits = matmul_nt(qp, kp);
  if (logit_scale != 1.0) logits = scale(logits, logit_scale);
  if (causal) {
    // Finite stand-in for -inf keeps tensors NaN-free; exp underflows to 0.
    Tensor mask(Shape{t, t});
    for (std::int64_t i = 0; i < t; ++i) {
      for (std::int64_t j = i + 1; j < t; ++j) mask.data()[i * t + j] = -1e30;
    }
    logits = add(logits, mask);
  }
  return matmul(softmax_rows(logits), v);
}

namespace {

// Gaussian init scaled by the input fan.
Tensor fan_in_init(Shape shape, Rng& rng) {
  const double stddev = 1.0 / std::sqrt(static_cast<double>(shape.back()));
  return Tensor::randn(std::move(shape), rng, stddev);
}

}  // namespace

MlmModel::MlmModel(ModelConfig cfg, DatasetStats stats, std::uint64_t seed)
    : cfg_(std::move(cfg)), stats_(std::move(stats)) {
  cfg_.validate();
  Rng rng(splitmix64(seed ^ 0x6d6c6dULL));
  const int dv = cfg_.d_v;
  const int dm = cfg_.d_m;
  const int hv = cfg_.ffn_hidden(dv);
  const int hm = cfg_.ffn_hidden(dm);

  token_embedding_ = params_.add("token_embedding",
                                 Tensor::randn(Shape{cfg_.vocab_size(), dm}, rng, 0.02), true);
  patch_proj_ = params_.add("patch_proj", fan_in_init(Shape{dv, cfg_.patch_dim()}, rng), true);
  patch_pos_ = params_.add("patch_pos",
                           Tensor::randn(Shape{cfg_.n_image_tokens(), dv}, rng, 0.02), true);

  for (int i = 0; i < cfg_.n_encoder_blocks; ++i) {
    const std::string p = "enc" + std::to_string(i) + ".";
    EncoderBlock blk;
    blk.attn_norm = params_.add(p + "attn_norm", Tensor::ones(Shape{dv}), true);
    auto make_adapter = [&](const std::string& name) {
      LoraAdapter ad;
      ad.rank = cfg_.lora_rank;
      ad.alpha = cfg_.lora_alpha;
      ad.base = params_.add(p + name + ".base", fan_in_init(Shape{dv, dv}, rng), false);
      ad.a = params_.add(p + name + ".lora_a",
                         Tensor::randn(Shape{cfg_.lora_rank, dv}, rng, 1.0 / std::sqrt(dv)), true);
      ad.b = params_.add(p + name + ".lora_b", Tensor::zeros(Shape{dv, cfg_.lora_rank}), true);
      return ad;
    };
    blk.q = make_adapter("q");
    blk.k = make_adapter("k");
    blk.v = make_adapter("v");
    blk.attn_out = params_.add(p + "attn_out", fan_in_init(Shape{dv, dv}, rng), false);
    blk.ffn_norm = params_.add(p + "ffn_norm", Tensor::ones(Shape{dv}), true);
    blk.ffn_gate = params_.add(p + "ffn_gate", fan_in_init(Shape{dv, hv}, rng), false);
    blk.ffn_up = params_.add(p + "ffn_up", fan_in_init(Shape{dv, hv}, rng), false);
    blk.ffn_down = params_.add(p + "ffn_down", fan_in_init(Shape{hv, dv}, rng), false);
    encoder_.push_back(std::move(blk));
  }
  aligner_ = params_.add("aligner", fan_in_init(Shape{dm, dv}, rng), true);

  for (int i = 0; i < cfg_.n_decoder_blocks; ++i) {
    const std::string p = "dec" + std::to_string(i) + ".";
    DecoderBlock blk;
    blk.attn_norm = params_.add(p + "attn_norm", Tensor::ones(Shape{dm}), true);
    blk.wq = params_.add(p + "wq", fan_in_init(Shape{dm, dm}, rng), false);
    blk.wk = params_.add(p + "wk", fan_in_init(Shape{dm, dm}, rng), false);
    blk.wv = params_.add(p + "wv", fan_in_init(Shape{dm, dm}, rng), false);
    blk.wo = params_.add(p + "wo", fan_in_init(Shape{dm, dm}, rng), false);
    blk.ffn_norm = params_.add(p + "ffn_norm", Tensor::ones(Shape{dm}), true);
    blk.ffn_gate = params_.add(p + "ffn_gate", fan_in_init(Shape{dm, hm}, rng), false);
    blk.ffn_up = params_.add(p + "ffn_up", fan_in_init(Shape{dm, hm}, rng), false);
    blk.ffn_down = params_.add(p + "ffn_down", fan_in_init(Shape{hm, dm}, rng), false);
    decoder_.push_back(std::move(blk));
  }
  final_norm_ = params_.add("final_norm", Tensor::ones(Shape{dm}), true);

  head_w1_ = params_.add("head.w1", fan_in_init(Shape{dm, dm}, rng), true);
  head_b1_ = params_.add("head.b1", Tensor::zeros(Shape{dm}), true);
  head_w2_ = params_.add("head.w2", fan_in_init(Shape{dm / 2, dm}, rng), true);
  head_b2_ = params_.add("head.b2", Tensor::zeros(Shape{dm / 2}), true);
  head_w3_ = params_.add("head.w3", fan_in_init(Shape{dm / 4, dm / 2}, rng), true);
  head_b3_ = params_.add("head.b3", Tensor::zeros(Shape{dm / 4}), true);
  head_out_w_ = params_.add("head.out_w", fan_in_init(Shape{cfg_.n_beams, dm / 4}, rng), true);
  head_out_b_ = params_.add("head.out_b", Tensor::zeros(Shape{cfg_.n_beams}), true);

  if (cfg_.warm_start_epochs == 0) freeze_base();
}

void MlmModel::freeze_base() {
  params_.apply_steady_mask();
  base_frozen_ = true;
}

void MlmModel::begin_epoch(int epoch) {
  if (!base_frozen_ && epoch >= cfg_.warm_start_epochs) freeze_base();
}

Tensor MlmModel::project_qkv(const Tensor& x, const LoraAdapter& ad) {
  return lora_enabled_ ? lora_linear(x, ad) : linear(x, ad.base);
}

// q/k/v: projected [B, T, d]. Splits heads, runs attention, merges heads.
Tensor MlmModel::multi_head(const Tensor& q, const Tensor& k, const Tensor& v,
                            bool causal, bool use_rope) {
  const std::int64_t b = q.dim(0);
  const std::int64_t t = q.dim(1);
  const std::int64_t d = q.dim(2);
  const std::int64_t heads = cfg_.n_heads;
  const std::int64_t dh = d / heads;
  auto split = [&](const Tensor& m) {
    return permute(reshape(m, Shape{b, t, heads, dh}), {0, 2, 1, 3});  // [B, H, T, dh]
  };
  const double scale_dim = cfg_.scale_by_model_dim ? static_cast<double>(cfg_.d_m)
                                                   : static_cast<double>(dh);
  Tensor heads_out = attention(split(q), split(k), split(v), causal,
                               use_rope ? cfg_.rope_base : 0.0, 1.0 / std::sqrt(scale_dim));
  return reshape(permute(heads_out, {0, 2, 1, 3}), Shape{b, t, d});
}

Tensor MlmModel::encoder_attention(const Tensor& x, EncoderBlock& blk) {
  Tensor xn = rms_norm(x, blk.attn_norm);
  Tensor q = project_qkv(xn, blk.q);
  Tensor k = project_qkv(xn, blk.k);
  Tensor v = project_qkv(xn, blk.v);
  // bidirectional, no positional rotation in the image encoder
  Tensor merged = multi_head(q, k, v, /*causal=*/false, /*use_rope=*/false);
  return linear(merged, blk.attn_out);
}

Tensor MlmModel::encode(const Tensor& p_e) {
  Tensor x = p_e;
  for (EncoderBlock& blk : encoder_) {
    x = add(x, encoder_attention(x, blk));
    x = add(x, swiglu(rms_norm(x, blk.ffn_norm), blk.ffn_gate, blk.ffn_up, blk.ffn_down));
  }
  return linear(x, aligner_);
}

Tensor MlmModel::decode_sequence(const Tensor& seq) {
  Tensor x = seq;
  for (DecoderBlock& blk : decoder_) {
    Tensor xn = rms_norm(x, blk.attn_norm);
    Tensor q = linear(xn, blk.wq);
    Tensor k = linear(xn, blk.wk);
    Tensor v = linear(xn, blk.wv);
    Tensor merged = multi_head(q, k, v, /*causal=*/true, /*use_rope=*/true);
    x = add(x, linear(merged, blk.wo));
    x = add(x, swiglu(rms_norm(x, blk.ffn_norm), blk.ffn_gate, blk.ffn_up, blk.ffn_down));
  }
  return rms_norm(x, final_norm_);
}

Tensor MlmModel::image_tokens(const Tensor& images) {
  Tensor p_e = patch_embed(images, patch_proj_, patch_pos_, cfg_.patch_size);
  return encode(p_e);
}

Tensor MlmModel::text_tokens(std::span<const Sample* const> batch) {
  std::vector<int> ids;
  ids.reserve(batch.size() * static_cast<std::size_t>(cfg_.text_len));
  for (const Sample* s : batch) {
    const TokenSequence seq = tokenize_position(s->pose.position, cfg_);
    ids.insert(ids.end(), seq.ids.begin(), seq.ids.end());
  }
  Tensor flat = embedding(token_embedding_, ids);
  return reshape(flat, Shape{static_cast<std::int64_t>(batch.size()), cfg_.text_len, cfg_.d_m});
}

Tensor MlmModel::forward(std::span<const Sample* const> batch, bool training, Rng* rng) {
  (void)training;
  (void)rng;  // no dropout in this architecture
  if (batch.empty()) throw ContractError("forward: empty batch");
  const auto b = static_cast<std::int64_t>(batch.size());
  // assemble normalized images [B, n_views, H, W]
  std::vector<double> img_data;
  img_data.reserve(static_cast<std::size_t>(b) * static_cast<std::size_t>(cfg_.n_views) *
                   static_cast<std::size_t>(cfg_.view_height) *
                   static_cast<std::size_t>(cfg_.view_width));
  for (const Sample* s : batch) {
    Tensor one = preprocess_images(s->views, stats_);
    img_data.insert(img_data.end(), one.data(), one.data() + one.numel());
  }
  Tensor images(Shape{b, cfg_.n_views, cfg_.view_height, cfg_.view_width}, std::move(img_data));

  Tensor i_e = image_tokens(images);              // [B, n_img, d_m]
  Tensor t_e = text_tokens(batch);                // [B, L_p, d_m]
  Tensor seq = concat(i_e, t_e, 1);               // image tokens first
  Tensor l_o = decode_sequence(seq);              // [B, T, d_m]
  Tensor l_m = mean_axis(l_o, 1);                 // [B, d_m]

  Tensor h1 = swish(add(linear(l_m, head_w1_), head_b1_));
  Tensor h2 = swish(add(linear(h1, head_w2_), head_b2_));
  Tensor h3 = swish(add(linear(h2, head_w3_), head_b3_));
  Tensor logits = add(linear(h3, head_out_w_), head_out_b_);
  return softmax_rows(logits);
}

Tensor MlmModel::forward_one(const Sample& sample) {
  const Sample* ptr = &sample;
  Tensor p = forward(std::span<const Sample* const>(&ptr, 1), false, nullptr);
  return reshape(p, Shape{cfg_.n_beams});
}

}  // namespace beamcast
