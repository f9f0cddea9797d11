// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMCAST_MODEL_HPP
#define BEAMCAST_MODEL_HPP

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "beamcast/dataset.hpp"
#include "beamcast/ops.hpp"
#include "beamcast/params.hpp"
#include "beamcast/predictor.hpp"

namespace beamcast {

// Character table for position strings; id 0 is the pad token, characters map
// to index + 1.
inline constexpr const char* kPositionVocab = " ,-.:0123456789Positn";

struct ModelConfig {
  int d_m = 64;  // decoder embedding dim
  int d_v = 64;  // encoder embedding dim
  int n_heads = 4;
  int n_encoder_blocks = 2;
  int n_decoder_blocks = 2;
  int text_len = 32;  // L_p
  int patch_size = 8;
  int n_views = kNumCameras;
  int view_width = 32;
  int view_height = 32;
  int n_beams = 64;  // M
  int lora_rank = 8;
  double lora_alpha = 32.0;
  double rope_base = 10000.0;
  // Scale attention logits by 1/sqrt(d_m) instead of the per-head default.
  bool scale_by_model_dim = false;
  // Epochs during which the frozen-base set still trains (0 = frozen from
  // the start).
  int warm_start_epochs = 2;
  std::string vocab = kPositionVocab;

  int vocab_size() const { return static_cast<int>(vocab.size()) + 1; }  // + pad
  int patch_dim() const { return patch_size * patch_size; }
  int patches_per_view() const {
    return (view_width / patch_size) * (view_height / patch_size);
  }
  int n_image_tokens() const { return n_views * patches_per_view(); }
  int seq_len() const { return n_image_tokens() + text_len; }
  int ffn_hidden(int d) const { return 2 * d; }
  void validate() const;
};

// Frozen base weight with a trainable low-rank bypass:
// W = W0 + (alpha / rank) * B * A.
struct LoraAdapter {
  Tensor base;  // [d_out, d_in], frozen after warm start
  Tensor a;     // [rank, d_in], Gaussian init
  Tensor b;     // [d_out, rank], zero init
  int rank = 8;
  double alpha = 32.0;
};

// y = x (W0 + (alpha/r) B A)^T, computed without materializing the sum;
// gradients reach only A and B once the base is frozen.
Tensor lora_linear(const Tensor& x, const LoraAdapter& adapter);

struct TokenSequence {
  std::vector<int> ids;  // exactly L_p entries, right-padded with 0
  std::string text;
};

// "Position: <x>, <y>, <z>" with fixed two-decimal formatting, encoded
// character-by-character. Overflow past L_p or a character missing from the
// vocab is a ConfigError, never a silent truncation.
TokenSequence tokenize_position(const Vec3& g, const ModelConfig& cfg);
std::string detokenize(std::span<const int> ids, const ModelConfig& cfg);

// Normalizes one sample's depth views to a [n_views, H, W] tensor using the
// dataset statistics stored in the manifest.
Tensor preprocess_images(const std::vector<DepthView>& views, const DatasetStats& stats);
Tensor denormalize_images(const Tensor& normalized, const DatasetStats& stats);

// Raw (non-differentiable) patch extraction: [.., n_views, H, W] ->
// [.., n_image_tokens, patch_dim], view-major then row-major within a view.
Tensor extract_patches(const Tensor& images, int patch_size);

// Non-overlapping patches, linear projection, learned positional encoding.
Tensor patch_embed(const Tensor& images, const Tensor& proj, const Tensor& pos, int patch_size);

// Per-head attention: RoPE on q and k (rope_base > 0, positions = row index),
// scaled logits, optional causal mask, softmax, value mix.
// q, k, v: [.., T, d_head].
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, bool causal,
                 double rope_base, double logit_scale);

class MlmModel : public BeamPredictor {
 public:
  MlmModel(ModelConfig cfg, DatasetStats stats, std::uint64_t seed);

  Tensor forward(std::span<const Sample* const> batch, bool training, Rng* rng) override;
  Tensor forward_one(const Sample& sample);

  ParamSet& params() override { return params_; }
  const ParamSet& params() const override { return params_; }
  std::string kind() const override { return "mlm-bp"; }
  int n_beams() const override { return cfg_.n_beams; }
  void begin_epoch(int epoch) override;

  const ModelConfig& config() const { return cfg_; }
  const DatasetStats& stats() const { return stats_; }

  // Image branch: patch embeddings -> encoder blocks -> aligner.
  // p_e: [B, n_image_tokens, d_v] -> [B, n_image_tokens, d_m].
  Tensor encode(const Tensor& p_e);
  // Causal decoder stack incl. final norm: [B, T, d_m] -> L_o [B, T, d_m].
  Tensor decode_sequence(const Tensor& seq);
  // Full image branch from normalized images.
  Tensor image_tokens(const Tensor& images);
  // Text branch: token embedding lookup, [B, L_p, d_m].
  Tensor text_tokens(std::span<const Sample* const> batch);

  // Disables the LoRA bypass (base projections only); used to verify the
  // zero-init equivalence.
  void set_lora_enabled(bool on) { lora_enabled_ = on; }
  bool base_frozen() const { return base_frozen_; }
  void freeze_base();

 private:
  struct EncoderBlock {
    Tensor attn_norm;
    LoraAdapter q, k, v;
    Tensor attn_out;
    Tensor ffn_norm;
    Tensor ffn_gate, ffn_up, ffn_down;
  };
  struct DecoderBlock {
    Tensor attn_norm;
    Tensor wq, wk, wv, wo;
    Tensor ffn_norm;
    Tensor ffn_gate, ffn_up, ffn_down;
  };

  Tensor project_qkv(const Tensor& x, const LoraAdapter& ad);
  Tensor multi_head(const Tensor& q, const Tensor& k, const Tensor& v, bool causal,
                    bool use_rope);
  Tensor encoder_attention(const Tensor& x, EncoderBlock& blk);

  ModelConfig cfg_;
  DatasetStats stats_;
  ParamSet params_;
  bool lora_enabled_ = true;
  bool base_frozen_ = false;

  Tensor token_embedding_;
  Tensor patch_proj_;
  Tensor patch_pos_;
  std::vector<EncoderBlock> encoder_;
  Tensor aligner_;
  std::vector<DecoderBlock> decoder_;
  Tensor final_norm_;
  Tensor head_w1_, head_b1_, head_w2_, head_b2_, head_w3_, head_b3_, head_out_w_, head_out_b_;
};

}  // namespace beamcast

#endif  // BEAMCAST_MODEL_HPP
