#include "convmamba/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "convmamba/error.hpp"
#include "convmamba/mamba.hpp"
#include "convmamba/model.hpp"
#include "convmamba/ops.hpp"
#include "convmamba/rng.hpp"

namespace convmamba {
namespace {

Tensor RandomTensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.Uniform(lo, hi);
  return t;
}

double Weighted(const Tensor& out, const Tensor& weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.numel(); ++i) s += out[i] * weights[i];
  return s;
}

double Evaluate(const GradFn& f, const Tensor& weights) {
  Tape tape;
  ParamBinder bind(tape, false);
  return Weighted(f(tape, bind).value(), weights);
}

// Per-check inputs kept alive for the duration of the check.
struct Inputs {
  std::deque<Tensor> tensors;  // stable references
  Tensor& Add(Tensor t) {
    tensors.push_back(std::move(t));
    return tensors.back();
  }
  std::vector<Tensor*> All() {
    std::vector<Tensor*> out;
    for (auto& t : tensors) out.push_back(&t);
    return out;
  }
};

}  // namespace

Tensor FiniteDiffGrad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                      double step) {
  Tensor probe = x;
  Tensor grad(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    probe[i] = x[i] + step;
    const double up = f(probe);
    probe[i] = x[i] - step;
    const double down = f(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

GradCheckRow CheckGradients(const std::string& name, std::uint64_t seed,
                            const std::vector<Tensor*>& wrt, const GradFn& f,
                            const GradCheckOptions& options) {
  GradCheckRow row;
  row.check = name;
  row.seed = seed;

  Tape tape;
  ParamBinder bind(tape);
  const Var out = f(tape, bind);
  Rng rng(seed ^ 0xC0FFEEull);
  const Tensor weights = RandomTensor(out.shape(), rng);
  const Var loss = Sum(Mul(out, tape.Constant(weights)));
  tape.Backward(loss);

  for (Tensor* t : wrt) {
    if (!bind.IsBound(*t)) Fail(ErrorKind::kContract, name + ": a checked tensor was never bound");
    const Tensor analytic = bind.Grad(*t);
    for (std::size_t i = 0; i < t->numel(); ++i) {
      const double saved = (*t)[i];
      auto central = [&](double step) {
        (*t)[i] = saved + step;
        const double up = Evaluate(f, weights);
        (*t)[i] = saved - step;
        const double down = Evaluate(f, weights);
        (*t)[i] = saved;
        return (up - down) / (2.0 * step);
      };
      auto rel_err = [&](double numeric) {
        const double scale = std::max(std::abs(analytic[i]), std::abs(numeric));
        return scale <= options.floor ? 0.0 : std::abs(analytic[i] - numeric) / scale;
      };
      double numeric = central(options.step);
      if (!std::isfinite(analytic[i]) || !std::isfinite(numeric)) {
        row.max_rel_err = INFINITY;
        continue;
      }
      if (std::max(std::abs(analytic[i]), std::abs(numeric)) <= options.floor) continue;
      double err = rel_err(numeric);
      // A max-pool argmax can switch inside [x - h, x + h]; the resulting error
      // disappears as the step shrinks while a wrong gradient does not.
      if (err >= options.tolerance / 10.0) {
        err = std::min({err, rel_err(central(options.step / 10.0)),
                        rel_err(central(options.step / 100.0))});
        ++row.refined;
      }
      row.max_rel_err = std::max(row.max_rel_err, err);
      ++row.compared;
    }
  }
  row.pass = row.max_rel_err < options.tolerance;
  return row;
}

std::vector<GradCheckRow> RunGradCheckSuite(const GradCheckOptions& options,
                                            std::uint64_t base_seed) {
  std::vector<GradCheckRow> rows;
  auto run = [&](const std::string& name, std::uint64_t seed, Inputs& in, const GradFn& f) {
    rows.push_back(CheckGradients(name, seed, in.All(), f, options));
  };

  for (std::size_t s = 0; s < options.op_seeds; ++s) {
    const std::uint64_t seed = base_seed + s;
    Rng rng(seed);
    {
      Inputs in;
      Tensor& a = in.Add(RandomTensor({2, 3, 4}, rng));
      Tensor& b = in.Add(RandomTensor({2, 3, 4}, rng));
      Tensor& row = in.Add(RandomTensor({4}, rng));
      Tensor& col = in.Add(RandomTensor({3, 1}, rng));
      run("add", seed, in, [&](Tape&, ParamBinder& p) {
        return Add(Add(Add(p(a), p(b)), p(row)), p(col));
      });
    }
    {
      Inputs in;
      Tensor& a = in.Add(RandomTensor({3, 4}, rng));
      Tensor& b = in.Add(RandomTensor({3, 4}, rng));
      Tensor& row = in.Add(RandomTensor({4}, rng));
      run("sub", seed, in, [&](Tape&, ParamBinder& p) {
        return Sub(Sub(p(a), p(b)), p(row));
      });
    }
    {
      Inputs in;
      Tensor& a = in.Add(RandomTensor({2, 3, 4}, rng));
      Tensor& b = in.Add(RandomTensor({2, 3, 4}, rng));
      Tensor& row = in.Add(RandomTensor({4}, rng));
      Tensor& col = in.Add(RandomTensor({3, 1}, rng));
      Tensor& scalar = in.Add(RandomTensor({1}, rng));
      run("mul", seed, in, [&](Tape&, ParamBinder& p) {
        return Mul(Mul(Mul(Mul(p(a), p(b)), p(row)), p(col)), p(scalar));
      });
    }
    {
      Inputs in;
      Tensor& x = in.Add(RandomTensor({3, 5}, rng, -2.0, 2.0));
      run("exp", seed, in, [&](Tape&, ParamBinder& p) { return Exp(p(x)); });
      run("softplus", seed, in, [&](Tape&, ParamBinder& p) { return Softplus(p(x)); });
      run("silu", seed, in, [&](Tape&, ParamBinder& p) { return Silu(p(x)); });
      run("sigmoid", seed, in, [&](Tape&, ParamBinder& p) { return Sigmoid(p(x)); });
      run("scale", seed, in, [&](Tape&, ParamBinder& p) { return Scale(p(x), -1.75); });
      run("sum", seed, in, [&](Tape&, ParamBinder& p) { return Sum(p(x)); });
    }
    {
      Inputs in;
      Tensor& a = in.Add(RandomTensor({3, 4}, rng));
      Tensor& b = in.Add(RandomTensor({4, 5}, rng));
      run("matmul", seed, in, [&](Tape&, ParamBinder& p) { return MatMul(p(a), p(b)); });
    }
    {
      Inputs in;
      Tensor& x = in.Add(RandomTensor({2, 3, 4}, rng));
      Tensor& w = in.Add(RandomTensor({4, 5}, rng));
      Tensor& b = in.Add(RandomTensor({5}, rng));
      run("linear", seed, in, [&](Tape&, ParamBinder& p) { return Linear(p(x), p(w), p(b)); });
    }
    {
      Inputs in;
      Tensor& x = in.Add(RandomTensor({2, 3, 4}, rng));
      run("reshape", seed, in, [&](Tape&, ParamBinder& p) {
        return Reshape(p(x), Shape{6, 4});
      });
      run("swap_last_axes", seed, in, [&](Tape&, ParamBinder& p) {
        return SwapLastAxes(p(x));
      });
      run("slice_last", seed, in, [&](Tape&, ParamBinder& p) {
        return SliceLast(p(x), 1, 2);
      });
      run("mean_over_time", seed, in, [&](Tape&, ParamBinder& p) {
        return MeanOverTime(p(x));
      });
    }
    {
      Inputs in;
      Tensor& x = in.Add(RandomTensor({2, 3, 9}, rng));
      Tensor& w = in.Add(RandomTensor({4, 3, 5}, rng));
      Tensor& b = in.Add(RandomTensor({4}, rng));
      run("conv1d", seed, in, [&](Tape&, ParamBinder& p) { return Conv1d(p(x), p(w), p(b)); });
    }
    {
      Inputs in;
      Tensor& x = in.Add(RandomTensor({2, 3, 7}, rng));
      Tensor& w = in.Add(RandomTensor({3, 4}, rng));
      Tensor& b = in.Add(RandomTensor({3}, rng));
      run("depthwise_conv1d", seed, in, [&](Tape&, ParamBinder& p) {
        return DepthwiseConv1d(p(x), p(w), p(b), 3);
      });
    }
    {
      Inputs in;
      Tensor& x = in.Add(RandomTensor({3, 2, 5}, rng));
      Tensor& gamma = in.Add(RandomTensor({2}, rng, 0.5, 1.5));
      Tensor& beta = in.Add(RandomTensor({2}, rng));
      BatchNormStats stats{RandomTensor({2}, rng), RandomTensor({2}, rng, 0.5, 2.0)};
      run("batchnorm1d_train", seed, in, [&, stats](Tape&, ParamBinder& p) {
        return BatchNorm1d(p(x), p(gamma), p(beta), stats, Mode::kTrain);
      });
      run("batchnorm1d_eval", seed, in, [&, stats](Tape&, ParamBinder& p) {
        return BatchNorm1d(p(x), p(gamma), p(beta), stats, Mode::kEval);
      });
    }
    {
      Inputs in;
      Tensor& x = in.Add(RandomTensor({2, 3, 10}, rng));
      run("maxpool1d", seed, in, [&](Tape&, ParamBinder& p) { return MaxPool1d(p(x), 3); });
      run("dropout", seed, in, [&, seed](Tape&, ParamBinder& p) {
        Rng mask(seed);
        return Dropout(p(x), 0.5, Mode::kTrain, mask);
      });
    }
    {
      Inputs in;
      Tensor& logits = in.Add(RandomTensor({5, 3}, rng, -3.0, 3.0));
      std::vector<int> labels;
      for (int i = 0; i < 5; ++i) labels.push_back(static_cast<int>(rng.UniformInt(3)));
      run("softmax_cross_entropy", seed, in, [&, labels](Tape&, ParamBinder& p) {
        return SoftmaxCrossEntropy(p(logits), labels);
      });
    }
    {
      const std::size_t nb = 2, len = 6, ni = 3, ns = 4;
      Inputs in;
      Tensor& u = in.Add(RandomTensor({nb, len, ni}, rng));
      Tensor& delta = in.Add(RandomTensor({nb, len, ni}, rng, 0.05, 1.0));
      Tensor& a = in.Add(RandomTensor({ni, ns}, rng, -2.0, -0.1));
      Tensor& b_t = in.Add(RandomTensor({nb, len, ns}, rng));
      Tensor& c_t = in.Add(RandomTensor({nb, len, ns}, rng));
      Tensor& skip = in.Add(RandomTensor({ni}, rng));
      run("selective_scan", seed, in, [&](Tape&, ParamBinder& p) {
        return SelectiveScan(p(u), p(delta), p(a), p(b_t), p(c_t), p(skip));
      });
    }
    {
      Inputs in;
      Tensor& q = in.Add(RandomTensor({2, 5, 4}, rng));
      Tensor& k = in.Add(RandomTensor({2, 5, 4}, rng));
      Tensor& v = in.Add(RandomTensor({2, 5, 4}, rng));
      run("multi_head_attention", seed, in, [&](Tape&, ParamBinder& p) {
        return MultiHeadAttention(p(q), p(k), p(v), 2);
      });
    }
    {
      Inputs in;
      Tensor& h = in.Add(RandomTensor({2, 5, 4}, rng));
      AttentionParams ap;
      for (Tensor* t : {&ap.wq, &ap.wk, &ap.wv, &ap.wo}) *t = RandomTensor({4, 4}, rng, -0.5, 0.5);
      for (Tensor* t : {&ap.bq, &ap.bk, &ap.bv, &ap.bo}) *t = RandomTensor({4}, rng, -0.5, 0.5);
      std::vector<Tensor*> wrt{&h,     &ap.wq, &ap.bq, &ap.wk, &ap.bk,
                               &ap.wv, &ap.bv, &ap.wo, &ap.bo};
      rows.push_back(CheckGradients(
          "attention_layer", seed, wrt,
          [&](Tape&, ParamBinder& p) { return AttentionLayer(p(h), ap, 2, p); }, options));
    }
  }

  for (std::size_t s = 0; s < options.model_seeds; ++s) {
    const std::uint64_t seed = base_seed + 1000 + s;
    Rng rng(seed);
    {
      MambaConfig mc;
      mc.d_model = 4;
      mc.d_state = 4;
      MambaParams mp = InitMamba(mc, rng);
      // Move the dt bias away from the init value so delta is not tiny.
      for (auto& v : mp.dt_proj_b.data()) v = rng.Uniform(-1.0, 0.5);
      Tensor x = RandomTensor({2, 7, 4}, rng);
      std::vector<Tensor*> wrt{&x};
      VisitParams(mp, "", [&](const std::string&, Tensor& t) { wrt.push_back(&t); });
      rows.push_back(CheckGradients(
          "mamba_block", seed, wrt,
          [&](Tape&, ParamBinder& p) { return MambaBlockForward(p(x), mp, mc, p); }, options));
    }
    for (const bool attention : {false, true}) {
      ModelConfig config = ModelConfig::GradCheck();
      config.attention.enabled = attention;
      ModelParams params = InitModel(config, rng);
      for (auto& m : params.mamba) {
        for (auto& v : m.dt_proj_b.data()) v = rng.Uniform(-1.0, 0.5);
      }
      Tensor x = RandomTensor({2, config.in_channels, config.window_len}, rng);
      std::vector<Tensor*> wrt{&x};
      VisitParams(params, [&](const std::string&, Tensor& t, bool trainable) {
        if (trainable) wrt.push_back(&t);
      });
      const std::vector<int> labels{0, 1};
      rows.push_back(CheckGradients(
          attention ? "model_attention" : "model", seed, wrt,
          [&, seed](Tape&, ParamBinder& p) {
            Rng mask(seed);
            ForwardContext ctx;
            ctx.mode = Mode::kTrain;
            ctx.rng = &mask;
            return SoftmaxCrossEntropy(Forward(p(x), params, config, p, ctx), labels);
          },
          options));
    }
  }
  return rows;
}

std::string GradCheckCsv(const std::vector<GradCheckRow>& rows) {
  std::ostringstream out;
  out.precision(6);
  out << "check,seed,compared,refined,max_rel_err,pass\n";
  for (const auto& r : rows) {
    out << r.check << ',' << r.seed << ',' << r.compared << ',' << r.refined << ',' << r.max_rel_err << ','
        << (r.pass ? "true" : "false") << '\n';
  }
  return out.str();
}

}  // namespace convmamba
