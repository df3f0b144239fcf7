#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "convmamba/autodiff.hpp"
#include "convmamba/mamba.hpp"
#include "convmamba/ops.hpp"
#include "convmamba/param_binder.hpp"
#include "convmamba/rng.hpp"
#include "convmamba/tensor.hpp"

namespace convmamba {

struct ConvStage {
  std::size_t out_channels;
  std::size_t kernel;
  std::size_t pool;
};

struct AttentionConfig {
  bool enabled = false;
  std::size_t heads = 2;
};

// Temporal block between the CNN front-end and the classifier. kDense is a
// per-timestep MLP sized to match the Mamba block, used as a timing baseline.
enum class TemporalBlock { kMamba, kDense };

struct ModelConfig {
  std::size_t in_channels = 18;
  std::size_t window_len = 2048;
  std::size_t d_model = 16;
  // mamba.d_model is ignored; the block always runs at d_model.
  MambaConfig mamba;
  std::size_t n_mamba_layers = 1;
  AttentionConfig attention;
  std::vector<ConvStage> conv_stack = {{32, 7, 4}, {16, 5, 4}};
  std::size_t fc_hidden = 32;
  double dropout_p = 0.5;
  std::size_t n_classes = 2;
  TemporalBlock temporal = TemporalBlock::kMamba;

  MambaConfig ResolvedMamba() const;
  // Sequence length after the conv stack.
  std::size_t PooledLength() const;
  // Hidden width of the dense baseline block.
  std::size_t DenseHidden() const;
  void Validate() const;

  // Small configuration used for finite-difference checks: window 64,
  // d_model 4, d_state 4.
  static ModelConfig GradCheck();
};

struct ConvStageParams {
  Tensor w;  // [out x in x kernel]
  Tensor b;  // [out]
  Tensor gamma;
  Tensor beta;
  BatchNormStats stats;
};

struct AttentionParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;  // [d x d], [d]
};

struct DenseBlockParams {
  Tensor w1, b1, w2, b2;
};

struct ModelParams {
  std::vector<ConvStageParams> conv;
  std::vector<MambaParams> mamba;
  std::vector<DenseBlockParams> dense;
  std::optional<AttentionParams> attention;
  Tensor fc1_w, fc1_b;  // [d_model x fc_hidden], [fc_hidden]
  Tensor fc2_w, fc2_b;  // [fc_hidden x n_classes], [n_classes]
};

// Visits every tensor as (name, tensor, trainable) in checkpoint order.
// Batch-norm running statistics are the only non-trainable entries.
template <typename P, typename Fn>
  requires std::same_as<std::remove_const_t<P>, ModelParams>
void VisitParams(P& p, Fn&& fn) {
  for (std::size_t i = 0; i < p.conv.size(); ++i) {
    auto& s = p.conv[i];
    const std::string pre = "conv." + std::to_string(i) + ".";
    fn(pre + "w", s.w, true);
    fn(pre + "b", s.b, true);
    fn(pre + "gamma", s.gamma, true);
    fn(pre + "beta", s.beta, true);
    fn(pre + "running_mean", s.stats.running_mean, false);
    fn(pre + "running_var", s.stats.running_var, false);
  }
  for (std::size_t i = 0; i < p.mamba.size(); ++i) {
    VisitParams(p.mamba[i], "mamba." + std::to_string(i) + ".",
                [&](const std::string& name, auto& t) { fn(name, t, true); });
  }
  for (std::size_t i = 0; i < p.dense.size(); ++i) {
    auto& d = p.dense[i];
    const std::string pre = "dense." + std::to_string(i) + ".";
    fn(pre + "w1", d.w1, true);
    fn(pre + "b1", d.b1, true);
    fn(pre + "w2", d.w2, true);
    fn(pre + "b2", d.b2, true);
  }
  if (p.attention) {
    auto& a = *p.attention;
    fn("attn.wq", a.wq, true);
    fn("attn.bq", a.bq, true);
    fn("attn.wk", a.wk, true);
    fn("attn.bk", a.bk, true);
    fn("attn.wv", a.wv, true);
    fn("attn.bv", a.bv, true);
    fn("attn.wo", a.wo, true);
    fn("attn.bo", a.bo, true);
  }
  fn("fc1.w", p.fc1_w, true);
  fn("fc1.b", p.fc1_b, true);
  fn("fc2.w", p.fc2_w, true);
  fn("fc2.b", p.fc2_b, true);
}

// Conv: He normal, zero bias. Batch norm: gamma 1, beta 0, running mean 0,
// running var 1. Dense and attention projections: Glorot uniform, zero bias.
// Mamba layers: InitMamba.
ModelParams InitModel(const ModelConfig& config, Rng& rng);

// Number of trainable scalars.
std::size_t CountParams(const ModelParams& params);

struct ForwardContext {
  Mode mode = Mode::kEval;
  // Dropout masks in training mode; unused in evaluation mode.
  Rng* rng = nullptr;
  // Receives updated batch-norm running statistics in training mode.
  ModelParams* stats_sink = nullptr;
  ScanKind eval_scan = ScanKind::kSequential;
};

// x[B x in_channels x window_len] -> logits [B x n_classes].
Var Forward(const Var& x, const ModelParams& params, const ModelConfig& config,
            ParamBinder& bind, const ForwardContext& ctx);

// Untaped evaluation-mode forward.
Tensor PredictLogits(const Tensor& x, const ModelParams& params,
                     const ModelConfig& config,
                     ScanKind scan = ScanKind::kSequential);

// Multi-head scaled dot-product attention on projected q, k, v
// [B x L x d]; returns the concatenated head outputs [B x L x d].
Var MultiHeadAttention(const Var& q, const Var& k, const Var& v,
                       std::size_t heads);

// Attention weights [B x heads x L x L] for projected q, k.
Tensor AttentionWeights(const Tensor& q, const Tensor& k, std::size_t heads);

// h + out_proj(attention(q_proj(h), k_proj(h), v_proj(h))).
Var AttentionLayer(const Var& h, const AttentionParams& params,
                   std::size_t heads, ParamBinder& bind);

}  // namespace convmamba
