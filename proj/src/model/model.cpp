#include "convmamba/model.hpp"

#include <cmath>
#include <limits>

#include "convmamba/error.hpp"

namespace convmamba {
namespace {

Tensor HeNormal(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (double& v : t.data()) v = rng.Normal(0.0, std);
  return t;
}

Tensor GlorotUniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor t(Shape{fan_in, fan_out});
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.data()) v = rng.Uniform(-bound, bound);
  return t;
}

std::size_t MambaParamCount(const MambaConfig& m) {
  const std::size_t dm = m.d_model, di = m.d_inner(), ns = m.d_state,
                    r = m.resolved_dt_rank();
  return dm * 2 * di + di * m.d_conv + di + di * (r + 2 * ns) + r * di + di +
         di * ns + di + di * dm;
}

}  // namespace

MambaConfig ModelConfig::ResolvedMamba() const {
  MambaConfig m = mamba;
  m.d_model = d_model;
  return m;
}

std::size_t ModelConfig::PooledLength() const {
  std::size_t len = window_len;
  for (const auto& s : conv_stack) len = s.pool ? len / s.pool : 0;
  return len;
}

std::size_t ModelConfig::DenseHidden() const {
  const std::size_t target = MambaParamCount(ResolvedMamba());
  const std::size_t per_unit = 2 * d_model + 1;
  const std::size_t hidden = (target > d_model ? target - d_model : 0) / per_unit;
  return hidden ? hidden : 1;
}

void ModelConfig::Validate() const {
  if (in_channels == 0 || window_len == 0 || d_model == 0 || fc_hidden == 0 ||
      n_classes < 2) {
    Fail(ErrorKind::kConfig, "model sizes must be positive and n_classes >= 2");
  }
  if (conv_stack.empty()) Fail(ErrorKind::kConfig, "conv stack is empty");
  for (const auto& s : conv_stack) {
    if (s.out_channels == 0 || s.kernel == 0 || s.pool == 0) {
      Fail(ErrorKind::kConfig, "conv stage sizes must be positive");
    }
  }
  if (conv_stack.back().out_channels != d_model) {
    Fail(ErrorKind::kConfig, "final conv stage has " +
                                 std::to_string(conv_stack.back().out_channels) +
                                 " channels, d_model is " + std::to_string(d_model));
  }
  if (PooledLength() == 0) {
    Fail(ErrorKind::kConfig, "conv stack pools window_len " +
                                 std::to_string(window_len) + " to nothing");
  }
  if (attention.enabled && (attention.heads == 0 || d_model % attention.heads != 0)) {
    Fail(ErrorKind::kConfig, "attention heads " + std::to_string(attention.heads) +
                                 " must divide d_model " + std::to_string(d_model));
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    Fail(ErrorKind::kConfig, "dropout_p must lie in [0, 1)");
  }
  ResolvedMamba().Validate();
}

ModelConfig ModelConfig::GradCheck() {
  ModelConfig c;
  c.in_channels = 4;
  c.window_len = 64;
  c.d_model = 4;
  c.mamba.d_state = 4;
  c.conv_stack = {{8, 5, 2}, {4, 3, 2}};
  c.fc_hidden = 8;
  return c;
}

ModelParams InitModel(const ModelConfig& config, Rng& rng) {
  config.Validate();
  ModelParams p;
  std::size_t channels = config.in_channels;
  for (const auto& stage : config.conv_stack) {
    ConvStageParams s;
    s.w = HeNormal(Shape{stage.out_channels, channels, stage.kernel},
                   channels * stage.kernel, rng);
    s.b = Tensor(Shape{stage.out_channels});
    s.gamma = Tensor(Shape{stage.out_channels}, 1.0);
    s.beta = Tensor(Shape{stage.out_channels});
    s.stats.running_mean = Tensor(Shape{stage.out_channels});
    s.stats.running_var = Tensor(Shape{stage.out_channels}, 1.0);
    p.conv.push_back(std::move(s));
    channels = stage.out_channels;
  }
  const std::size_t dm = config.d_model;
  for (std::size_t i = 0; i < config.n_mamba_layers; ++i) {
    if (config.temporal == TemporalBlock::kMamba) {
      p.mamba.push_back(InitMamba(config.ResolvedMamba(), rng));
    } else {
      const std::size_t hidden = config.DenseHidden();
      DenseBlockParams d;
      d.w1 = GlorotUniform(dm, hidden, rng);
      d.b1 = Tensor(Shape{hidden});
      d.w2 = GlorotUniform(hidden, dm, rng);
      d.b2 = Tensor(Shape{dm});
      p.dense.push_back(std::move(d));
    }
  }
  if (config.attention.enabled) {
    AttentionParams a;
    a.wq = GlorotUniform(dm, dm, rng);
    a.bq = Tensor(Shape{dm});
    a.wk = GlorotUniform(dm, dm, rng);
    a.bk = Tensor(Shape{dm});
    a.wv = GlorotUniform(dm, dm, rng);
    a.bv = Tensor(Shape{dm});
    a.wo = GlorotUniform(dm, dm, rng);
    a.bo = Tensor(Shape{dm});
    p.attention = std::move(a);
  }
  p.fc1_w = GlorotUniform(dm, config.fc_hidden, rng);
  p.fc1_b = Tensor(Shape{config.fc_hidden});
  p.fc2_w = GlorotUniform(config.fc_hidden, config.n_classes, rng);
  p.fc2_b = Tensor(Shape{config.n_classes});
  return p;
}

std::size_t CountParams(const ModelParams& params) {
  std::size_t total = 0;
  VisitParams(params, [&](const std::string&, const Tensor& t, bool trainable) {
    if (trainable) total += t.numel();
  });
  return total;
}

Tensor AttentionWeights(const Tensor& q, const Tensor& k, std::size_t heads) {
  if (q.rank() != 3 || k.shape() != q.shape() || heads == 0 || q.dim(2) % heads) {
    Fail(ErrorKind::kDimension, "attention weights need matching [B x L x d] "
                                "with heads dividing d, got " +
                                    ShapeString(q.shape()));
  }
  const std::size_t nb = q.dim(0), len = q.dim(1), d = q.dim(2), dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor w(Shape{nb, heads, len, len});
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t i = 0; i < len; ++i) {
        double* row = &w[((b * heads + h) * len + i) * len];
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < len; ++j) {
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c)
            s += q[(b * len + i) * d + h * dh + c] * k[(b * len + j) * d + h * dh + c];
          row[j] = s * scale;
          mx = std::max(mx, row[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
          row[j] = std::exp(row[j] - mx);
          z += row[j];
        }
        for (std::size_t j = 0; j < len; ++j) row[j] /= z;
      }
  return w;
}

Var MultiHeadAttention(const Var& q, const Var& k, const Var& v,
                       std::size_t heads) {
  if (v.shape() != q.shape()) {
    Fail(ErrorKind::kDimension, "attention value shape " + ShapeString(v.shape()) +
                                    " differs from query " + ShapeString(q.shape()));
  }
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  Tensor probs = AttentionWeights(qv, kv, heads);
  const std::size_t nb = qv.dim(0), len = qv.dim(1), d = qv.dim(2), dh = d / heads;
  Tensor out(qv.shape());
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t i = 0; i < len; ++i) {
        const double* p = &probs[((b * heads + h) * len + i) * len];
        double* o = &out[(b * len + i) * d + h * dh];
        for (std::size_t j = 0; j < len; ++j)
          for (std::size_t c = 0; c < dh; ++c) o[c] += p[j] * vv[(b * len + j) * d + h * dh + c];
      }
  return q.tape()->Record(
      "multi_head_attention", std::move(out), {q, k, v},
      [qv, kv, vv, probs, nb, len, d, dh, heads](const Tensor& g,
                                                  std::span<Tensor* const> grads) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
        std::vector<double> dp(len), ds(len);
        for (std::size_t b = 0; b < nb; ++b)
          for (std::size_t h = 0; h < heads; ++h)
            for (std::size_t i = 0; i < len; ++i) {
              const double* p = probs.data().data() + ((b * heads + h) * len + i) * len;
              const double* go = g.data().data() + (b * len + i) * d + h * dh;
              double dot = 0.0;
              for (std::size_t j = 0; j < len; ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < dh; ++c) s += go[c] * vv[(b * len + j) * d + h * dh + c];
                dp[j] = s;
                dot += p[j] * s;
                if (grads[2]) {
                  double* gv = &(*grads[2])[(b * len + j) * d + h * dh];
                  for (std::size_t c = 0; c < dh; ++c) gv[c] += p[j] * go[c];
                }
              }
              for (std::size_t j = 0; j < len; ++j) ds[j] = p[j] * (dp[j] - dot) * scale;
              for (std::size_t j = 0; j < len; ++j)
                for (std::size_t c = 0; c < dh; ++c) {
                  const std::size_t qi = (b * len + i) * d + h * dh + c;
                  const std::size_t kj = (b * len + j) * d + h * dh + c;
                  if (grads[0]) (*grads[0])[qi] += ds[j] * kv[kj];
                  if (grads[1]) (*grads[1])[kj] += ds[j] * qv[qi];
                }
            }
      });
}

Var AttentionLayer(const Var& h, const AttentionParams& params,
                   std::size_t heads, ParamBinder& bind) {
  const Shape& hs = h.shape();
  if (hs.size() != 3 || heads == 0 || hs[2] % heads != 0) {
    Fail(ErrorKind::kConfig, "attention heads " + std::to_string(heads) +
                                 " must divide the feature width of " +
                                 ShapeString(hs));
  }
  Var q = Linear(h, bind(params.wq), bind(params.bq));
  Var k = Linear(h, bind(params.wk), bind(params.bk));
  Var v = Linear(h, bind(params.wv), bind(params.bv));
  Var attended = MultiHeadAttention(q, k, v, heads);
  return Add(h, Linear(attended, bind(params.wo), bind(params.bo)));
}

Var Forward(const Var& x, const ModelParams& params, const ModelConfig& config,
            ParamBinder& bind, const ForwardContext& ctx) {
  const Shape& xs = x.shape();
  if (xs.size() != 3 || xs[1] != config.in_channels || xs[2] != config.window_len) {
    Fail(ErrorKind::kDimension, "model input must be [B x " +
                                    std::to_string(config.in_channels) + " x " +
                                    std::to_string(config.window_len) + "], got " +
                                    ShapeString(xs));
  }
  if (params.conv.size() != config.conv_stack.size()) {
    Fail(ErrorKind::kConfig, "parameters do not match the conv stack");
  }
  Var h = x;
  for (std::size_t i = 0; i < params.conv.size(); ++i) {
    const ConvStageParams& s = params.conv[i];
    h = Conv1d(h, bind(s.w), bind(s.b));
    BatchNormStats* sink =
        ctx.mode == Mode::kTrain && ctx.stats_sink ? &ctx.stats_sink->conv[i].stats : nullptr;
    h = BatchNorm1d(h, bind(s.gamma), bind(s.beta), s.stats, ctx.mode, sink);
    h = Silu(h);
    h = MaxPool1d(h, config.conv_stack[i].pool);
  }
  h = SwapLastAxes(h);  // [B x L' x d_model]

  const MambaConfig mcfg = config.ResolvedMamba();
  const ScanKind scan = ctx.mode == Mode::kTrain ? ScanKind::kSequential : ctx.eval_scan;
  if (config.temporal == TemporalBlock::kMamba) {
    for (const MambaParams& m : params.mamba) {
      h = Add(h, MambaBlockForward(h, m, mcfg, bind, MambaForwardOptions{scan}));
    }
  } else {
    for (const DenseBlockParams& d : params.dense) {
      Var inner = Silu(Linear(h, bind(d.w1), bind(d.b1)));
      h = Add(h, Linear(inner, bind(d.w2), bind(d.b2)));
    }
  }
  if (config.attention.enabled) {
    if (!params.attention) Fail(ErrorKind::kConfig, "attention enabled without parameters");
    h = AttentionLayer(h, *params.attention, config.attention.heads, bind);
  }

  Var pooled = MeanOverTime(h);
  Var hidden = Silu(Linear(pooled, bind(params.fc1_w), bind(params.fc1_b)));
  if (ctx.mode == Mode::kTrain && config.dropout_p > 0.0) {
    if (!ctx.rng) Fail(ErrorKind::kContract, "training forward needs an Rng for dropout");
    hidden = Dropout(hidden, config.dropout_p, ctx.mode, *ctx.rng);
  }
  return Linear(hidden, bind(params.fc2_w), bind(params.fc2_b));
}

Tensor PredictLogits(const Tensor& x, const ModelParams& params,
                     const ModelConfig& config, ScanKind scan) {
  Tape tape;
  ParamBinder bind(tape, false);
  ForwardContext ctx;
  ctx.mode = Mode::kEval;
  ctx.eval_scan = scan;
  return Forward(tape.Constant(x), params, config, bind, ctx).value();
}

}  // namespace convmamba
