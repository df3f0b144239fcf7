#include "convmamba/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "convmamba/error.hpp"

namespace convmamba {

double Softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double InverseSoftplus(double y) {
  if (y <= 0.0) Fail(ErrorKind::kParameter, "softplus inverse needs y > 0");
  return y + std::log(-std::expm1(-y));
}

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double SiluScalar(double x) { return x * Sigmoid(x); }

namespace {

Tape& TapeOf(const Var& v) {
  if (!v.valid()) Fail(ErrorKind::kContract, "operation on an unbound Var");
  return *v.tape();
}

void RequireRank(const Var& v, std::size_t rank, const char* what) {
  if (v.shape().size() != rank) {
    Fail(ErrorKind::kDimension, std::string(what) + " expects rank " +
                                    std::to_string(rank) + ", got " +
                                    ShapeString(v.shape()));
  }
}

// ---- broadcasting ---------------------------------------------------------

enum class Bcast { kSame, kScalar, kTrailing, kChannel };

struct Side {
  Bcast kind = Bcast::kSame;
  std::size_t size = 1;      // numel of the operand
  std::size_t channels = 1;  // kChannel only
  std::size_t length = 1;    // kChannel only
};

std::size_t MapIndex(const Side& s, std::size_t i) {
  switch (s.kind) {
    case Bcast::kSame: return i;
    case Bcast::kScalar: return 0;
    case Bcast::kTrailing: return i % s.size;
    case Bcast::kChannel: return (i / s.length) % s.channels;
  }
  return i;
}

bool IsSuffix(const Shape& small, const Shape& full) {
  if (small.size() >= full.size()) return false;
  return std::equal(small.rbegin(), small.rend(), full.rbegin());
}

std::optional<Side> Classify(const Shape& operand, const Shape& full) {
  Side s;
  s.size = ShapeNumel(operand);
  if (operand == full) return s;
  if (s.size == 1) {
    s.kind = Bcast::kScalar;
    return s;
  }
  if (IsSuffix(operand, full)) {
    s.kind = Bcast::kTrailing;
    return s;
  }
  if (full.size() == 3 && operand.size() == 2 && operand[1] == 1 &&
      operand[0] == full[1]) {
    s.kind = Bcast::kChannel;
    s.channels = full[1];
    s.length = full[2];
    return s;
  }
  return std::nullopt;
}

struct BroadcastPlan {
  Shape out;
  Side a;
  Side b;
};

BroadcastPlan PlanBinary(const Shape& a, const Shape& b, const char* op) {
  const Shape& full = ShapeNumel(a) >= ShapeNumel(b) ? a : b;
  auto sa = Classify(a, full);
  auto sb = Classify(b, full);
  if (!sa || !sb) {
    Fail(ErrorKind::kDimension, std::string("cannot broadcast ") +
                                    ShapeString(a) + " with " +
                                    ShapeString(b) + " in " + op);
  }
  return {full, *sa, *sb};
}

Var BinaryOp(Elementwise op, const Var& a, const Var& b) {
  Tape& tape = TapeOf(a);
  const char* name = op == Elementwise::kAdd   ? "add"
                     : op == Elementwise::kSub ? "sub"
                                               : "mul";
  const BroadcastPlan plan = PlanBinary(a.shape(), b.shape(), name);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(plan.out);
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[MapIndex(plan.a, i)];
    const double y = bv[MapIndex(plan.b, i)];
    out[i] = op == Elementwise::kAdd ? x + y
             : op == Elementwise::kSub ? x - y
                                       : x * y;
  }
  return tape.Record(
      name, std::move(out), {a, b},
      [op, plan, av, bv](const Tensor& g, std::span<Tensor* const> grads) {
        const std::size_t n = g.numel();
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t ia = MapIndex(plan.a, i);
          const std::size_t ib = MapIndex(plan.b, i);
          double da = g[i];
          double db = op == Elementwise::kSub ? -g[i] : g[i];
          if (op == Elementwise::kMul) {
            da = g[i] * bv[ib];
            db = g[i] * av[ia];
          }
          if (grads[0]) (*grads[0])[ia] += da;
          if (grads[1]) (*grads[1])[ib] += db;
        }
      });
}

template <typename Fwd, typename Deriv>
Var UnaryOp(const char* name, const Var& x, Fwd fwd, Deriv deriv) {
  Tape& tape = TapeOf(x);
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) out[i] = fwd(xv[i]);
  return tape.Record(
      name, std::move(out), {x},
      [xv, deriv](const Tensor& g, std::span<Tensor* const> grads) {
        Tensor& gx = *grads[0];
        for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * deriv(xv[i]);
      });
}

}  // namespace

Var Apply(Elementwise op, const Var& a, std::optional<Var> b) {
  switch (op) {
    case Elementwise::kAdd:
    case Elementwise::kSub:
    case Elementwise::kMul:
      if (!b) Fail(ErrorKind::kContract, "binary elementwise op needs two operands");
      return BinaryOp(op, a, *b);
    case Elementwise::kExp:
      return UnaryOp(
          "exp", a, [](double x) { return std::exp(x); },
          [](double x) { return std::exp(x); });
    case Elementwise::kSoftplus:
      return UnaryOp(
          "softplus", a, [](double x) { return Softplus(x); },
          [](double x) { return Sigmoid(x); });
    case Elementwise::kSilu:
      return UnaryOp(
          "silu", a, [](double x) { return SiluScalar(x); },
          [](double x) {
            const double s = Sigmoid(x);
            return s * (1.0 + x * (1.0 - s));
          });
    case Elementwise::kSigmoid:
      return UnaryOp(
          "sigmoid", a, [](double x) { return Sigmoid(x); },
          [](double x) {
            const double s = Sigmoid(x);
            return s * (1.0 - s);
          });
  }
  Fail(ErrorKind::kContract, "unknown elementwise op");
}

Var Add(const Var& a, const Var& b) { return Apply(Elementwise::kAdd, a, b); }
Var Sub(const Var& a, const Var& b) { return Apply(Elementwise::kSub, a, b); }
Var Mul(const Var& a, const Var& b) { return Apply(Elementwise::kMul, a, b); }
Var Exp(const Var& x) { return Apply(Elementwise::kExp, x); }
Var Softplus(const Var& x) { return Apply(Elementwise::kSoftplus, x); }
Var Silu(const Var& x) { return Apply(Elementwise::kSilu, x); }
Var Sigmoid(const Var& x) { return Apply(Elementwise::kSigmoid, x); }

Var Scale(const Var& x, double factor) {
  return UnaryOp(
      "scale", x, [factor](double v) { return factor * v; },
      [factor](double) { return factor; });
}

Var MatMul(const Var& a, const Var& b) {
  RequireRank(a, 2, "matmul");
  RequireRank(b, 2, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    Fail(ErrorKind::kDimension, "matmul inner dimensions disagree: " +
                                    ShapeString(a.shape()) + " x " +
                                    ShapeString(b.shape()));
  }
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* row = &out[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double s = av[i * k + p];
      const double* brow = &bv[p * n];
      for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
    }
  }
  return TapeOf(a).Record(
      "matmul", std::move(out), {a, b},
      [av, bv, m, k, n](const Tensor& g, std::span<Tensor* const> grads) {
        if (grads[0]) {  // g * b^T
          Tensor& ga = *grads[0];
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
              ga[i * k + p] += acc;
            }
        }
        if (grads[1]) {  // a^T * g
          Tensor& gb = *grads[1];
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              const double s = av[i * k + p];
              for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += s * g[i * n + j];
            }
        }
      });
}

Var Linear(const Var& x, const Var& w, std::optional<Var> bias) {
  RequireRank(w, 2, "linear weight");
  const Shape& xs = x.shape();
  if (xs.empty() || xs.back() != w.shape()[0]) {
    Fail(ErrorKind::kDimension, "linear input " + ShapeString(xs) +
                                    " does not match weight " +
                                    ShapeString(w.shape()));
  }
  const std::size_t in = xs.back();
  const std::size_t rows = ShapeNumel(xs) / in;
  Var flat = xs.size() == 2 ? x : Reshape(x, Shape{rows, in});
  Var y = MatMul(flat, w);
  if (bias) y = Add(y, *bias);
  if (xs.size() == 2) return y;
  Shape out_shape = xs;
  out_shape.back() = w.shape()[1];
  return Reshape(y, std::move(out_shape));
}

Var Reshape(const Var& x, Shape shape) {
  const Shape in_shape = x.shape();
  Tensor out = x.value().Reshaped(std::move(shape));
  return TapeOf(x).Record(
      "reshape", std::move(out), {x},
      [](const Tensor& g, std::span<Tensor* const> grads) {
        Tensor& gx = *grads[0];
        for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
      });
}

Var SwapLastAxes(const Var& x) {
  RequireRank(x, 3, "swap_last_axes");
  const std::size_t b = x.shape()[0], p = x.shape()[1], q = x.shape()[2];
  const Tensor& xv = x.value();
  Tensor out(Shape{b, q, p});
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = 0; c < q; ++c)
        out[(i * q + c) * p + r] = xv[(i * p + r) * q + c];
  return TapeOf(x).Record(
      "swap_last_axes", std::move(out), {x},
      [b, p, q](const Tensor& g, std::span<Tensor* const> grads) {
        Tensor& gx = *grads[0];
        for (std::size_t i = 0; i < b; ++i)
          for (std::size_t r = 0; r < p; ++r)
            for (std::size_t c = 0; c < q; ++c)
              gx[(i * p + r) * q + c] += g[(i * q + c) * p + r];
      });
}

Var SliceLast(const Var& x, std::size_t begin, std::size_t count) {
  const Shape& xs = x.shape();
  if (xs.empty() || begin + count > xs.back() || count == 0) {
    Fail(ErrorKind::kDimension, "slice [" + std::to_string(begin) + ", " +
                                    std::to_string(begin + count) +
                                    ") outside " + ShapeString(xs));
  }
  const std::size_t width = xs.back();
  const std::size_t rows = ShapeNumel(xs) / width;
  Shape out_shape = xs;
  out_shape.back() = count;
  const Tensor& xv = x.value();
  Tensor out(out_shape);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < count; ++c)
      out[r * count + c] = xv[r * width + begin + c];
  return TapeOf(x).Record(
      "slice_last", std::move(out), {x},
      [rows, width, begin, count](const Tensor& g,
                                  std::span<Tensor* const> grads) {
        Tensor& gx = *grads[0];
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < count; ++c)
            gx[r * width + begin + c] += g[r * count + c];
      });
}

Var Conv1d(const Var& x, const Var& w, const Var& bias) {
  RequireRank(x, 3, "conv1d input");
  RequireRank(w, 3, "conv1d weight");
  const std::size_t nb = x.shape()[0], cin = x.shape()[1], len = x.shape()[2];
  const std::size_t cout = w.shape()[0], kw = w.shape()[2];
  if (w.shape()[1] != cin || bias.shape() != Shape{cout}) {
    Fail(ErrorKind::kDimension, "conv1d shapes disagree: input " +
                                    ShapeString(x.shape()) + ", weight " +
                                    ShapeString(w.shape()) + ", bias " +
                                    ShapeString(bias.shape()));
  }
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((kw - 1) / 2);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = bias.value();
  Tensor out(Shape{nb, cout, len});
  const auto slen = static_cast<std::ptrdiff_t>(len);
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t o = 0; o < cout; ++o) {
      double* yrow = &out[(b * cout + o) * len];
      for (std::size_t t = 0; t < len; ++t) yrow[t] = bv[o];
      for (std::size_t c = 0; c < cin; ++c) {
        const double* xrow = &xv[(b * cin + c) * len];
        const double* wrow = &wv[(o * cin + c) * kw];
        for (std::size_t j = 0; j < kw; ++j) {
          const double wj = wrow[j];
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
          const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
          const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(slen, slen - shift);
          for (std::ptrdiff_t t = t0; t < t1; ++t) yrow[t] += wj * xrow[t + shift];
        }
      }
    }
  return TapeOf(x).Record(
      "conv1d", std::move(out), {x, w, bias},
      [xv, wv, nb, cin, cout, len, kw, pad](const Tensor& g,
                                             std::span<Tensor* const> grads) {
        const auto slen = static_cast<std::ptrdiff_t>(len);
        for (std::size_t b = 0; b < nb; ++b)
          for (std::size_t o = 0; o < cout; ++o) {
            const double* grow = &g[(b * cout + o) * len];
            if (grads[2]) {
              double acc = 0.0;
              for (std::size_t t = 0; t < len; ++t) acc += grow[t];
              (*grads[2])[o] += acc;
            }
            for (std::size_t c = 0; c < cin; ++c) {
              const double* xrow = &xv[(b * cin + c) * len];
              for (std::size_t j = 0; j < kw; ++j) {
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
                const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
                const std::ptrdiff_t t1 =
                    std::min<std::ptrdiff_t>(slen, slen - shift);
                const std::size_t widx = (o * cin + c) * kw + j;
                if (grads[1]) {
                  double acc = 0.0;
                  for (std::ptrdiff_t t = t0; t < t1; ++t) acc += grow[t] * xrow[t + shift];
                  (*grads[1])[widx] += acc;
                }
                if (grads[0]) {
                  double* gx = &(*grads[0])[(b * cin + c) * len];
                  const double wj = wv[widx];
                  for (std::ptrdiff_t t = t0; t < t1; ++t) gx[t + shift] += wj * grow[t];
                }
              }
            }
          }
      });
}

Var DepthwiseConv1d(const Var& x, const Var& w, const Var& bias,
                    std::size_t left_pad) {
  RequireRank(x, 3, "depthwise_conv1d input");
  RequireRank(w, 2, "depthwise_conv1d weight");
  const std::size_t nb = x.shape()[0], ch = x.shape()[1], len = x.shape()[2];
  const std::size_t kw = w.shape()[1];
  if (w.shape()[0] != ch || bias.shape() != Shape{ch}) {
    Fail(ErrorKind::kDimension, "depthwise_conv1d shapes disagree: input " +
                                    ShapeString(x.shape()) + ", weight " +
                                    ShapeString(w.shape()) + ", bias " +
                                    ShapeString(bias.shape()));
  }
  if (kw > len + left_pad) {
    Fail(ErrorKind::kDegenerateInput,
         "kernel width " + std::to_string(kw) + " exceeds padded length " +
             std::to_string(len + left_pad));
  }
  const std::size_t out_len = len + left_pad - kw + 1;
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = bias.value();
  Tensor out(Shape{nb, ch, out_len});
  // Padded position p = t + j maps to input sample p - left_pad.
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t c = 0; c < ch; ++c) {
      const double* xrow = &xv[(b * ch + c) * len];
      double* yrow = &out[(b * ch + c) * out_len];
      for (std::size_t t = 0; t < out_len; ++t) {
        double acc = bv[c];
        for (std::size_t j = 0; j < kw; ++j) {
          const std::size_t p = t + j;
          if (p >= left_pad && p - left_pad < len) acc += wv[c * kw + j] * xrow[p - left_pad];
        }
        yrow[t] = acc;
      }
    }
  return TapeOf(x).Record(
      "depthwise_conv1d", std::move(out), {x, w, bias},
      [xv, wv, nb, ch, len, kw, left_pad, out_len](
          const Tensor& g, std::span<Tensor* const> grads) {
        for (std::size_t b = 0; b < nb; ++b)
          for (std::size_t c = 0; c < ch; ++c) {
            const double* xrow = &xv[(b * ch + c) * len];
            const double* grow = &g[(b * ch + c) * out_len];
            for (std::size_t t = 0; t < out_len; ++t) {
              if (grads[2]) (*grads[2])[c] += grow[t];
              for (std::size_t j = 0; j < kw; ++j) {
                const std::size_t p = t + j;
                if (p < left_pad || p - left_pad >= len) continue;
                const std::size_t src = p - left_pad;
                if (grads[1]) (*grads[1])[c * kw + j] += grow[t] * xrow[src];
                if (grads[0]) (*grads[0])[(b * ch + c) * len + src] += grow[t] * wv[c * kw + j];
              }
            }
          }
      });
}

Var BatchNorm1d(const Var& x, const Var& gamma, const Var& beta,
                const BatchNormStats& running, Mode mode,
                BatchNormStats* update) {
  RequireRank(x, 3, "batchnorm1d input");
  const std::size_t nb = x.shape()[0], ch = x.shape()[1], len = x.shape()[2];
  if (gamma.shape() != Shape{ch} || beta.shape() != Shape{ch} ||
      running.running_mean.shape() != Shape{ch} ||
      running.running_var.shape() != Shape{ch}) {
    Fail(ErrorKind::kDimension, "batchnorm1d affine shapes " +
                                    ShapeString(gamma.shape()) + "/" +
                                    ShapeString(beta.shape()) +
                                    " for input " + ShapeString(x.shape()));
  }
  const std::size_t count = nb * len;
  const Tensor& xv = x.value();
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();

  std::vector<double> mean(ch, 0.0), inv_std(ch, 0.0);
  if (mode == Mode::kTrain) {
    if (count < 2) {
      Fail(ErrorKind::kDegenerateInput,
           "batchnorm1d training needs at least 2 values per channel");
    }
    std::vector<double> var(ch, 0.0);
    for (std::size_t c = 0; c < ch; ++c) {
      double s = 0.0;
      for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t t = 0; t < len; ++t) s += xv[(b * ch + c) * len + t];
      mean[c] = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t t = 0; t < len; ++t) {
          const double d = xv[(b * ch + c) * len + t] - mean[c];
          ss += d * d;
        }
      var[c] = ss / static_cast<double>(count);
      inv_std[c] = 1.0 / std::sqrt(var[c] + kBatchNormEpsilon);
    }
    if (update) {
      const double unbias =
          static_cast<double>(count) / static_cast<double>(count - 1);
      Tensor new_mean(Shape{ch}), new_var(Shape{ch});
      for (std::size_t c = 0; c < ch; ++c) {
        new_mean[c] = (1.0 - kBatchNormMomentum) * running.running_mean[c] +
                      kBatchNormMomentum * mean[c];
        new_var[c] = (1.0 - kBatchNormMomentum) * running.running_var[c] +
                     kBatchNormMomentum * var[c] * unbias;
      }
      update->running_mean = std::move(new_mean);
      update->running_var = std::move(new_var);
    }
  } else {
    for (std::size_t c = 0; c < ch; ++c) {
      mean[c] = running.running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(running.running_var[c] + kBatchNormEpsilon);
    }
  }

  Tensor xhat(x.shape());
  Tensor out(x.shape());
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t t = 0; t < len; ++t) {
        const std::size_t i = (b * ch + c) * len + t;
        xhat[i] = (xv[i] - mean[c]) * inv_std[c];
        out[i] = gv[c] * xhat[i] + bv[c];
      }

  const bool batch_stats = mode == Mode::kTrain;
  return TapeOf(x).Record(
      "batchnorm1d", std::move(out), {x, gamma, beta},
      [xhat, gv, inv_std, nb, ch, len, count, batch_stats](
          const Tensor& g, std::span<Tensor* const> grads) {
        for (std::size_t c = 0; c < ch; ++c) {
          double sum_g = 0.0, sum_g_xhat = 0.0;
          for (std::size_t b = 0; b < nb; ++b)
            for (std::size_t t = 0; t < len; ++t) {
              const std::size_t i = (b * ch + c) * len + t;
              sum_g += g[i];
              sum_g_xhat += g[i] * xhat[i];
            }
          if (grads[1]) (*grads[1])[c] += sum_g_xhat;
          if (grads[2]) (*grads[2])[c] += sum_g;
          if (!grads[0]) continue;
          Tensor& gx = *grads[0];
          const double scale = gv[c] * inv_std[c];
          const double n = static_cast<double>(count);
          for (std::size_t b = 0; b < nb; ++b)
            for (std::size_t t = 0; t < len; ++t) {
              const std::size_t i = (b * ch + c) * len + t;
              if (batch_stats) {
                gx[i] += scale * (g[i] - sum_g / n - xhat[i] * sum_g_xhat / n);
              } else {
                gx[i] += scale * g[i];
              }
            }
        }
      });
}

Var MaxPool1d(const Var& x, std::size_t pool) {
  RequireRank(x, 3, "maxpool1d input");
  if (pool == 0) Fail(ErrorKind::kParameter, "pool width must be positive");
  const std::size_t rows = x.shape()[0] * x.shape()[1], len = x.shape()[2];
  const std::size_t out_len = len / pool;
  if (out_len == 0) {
    Fail(ErrorKind::kDegenerateInput, "pool width " + std::to_string(pool) +
                                          " exceeds length " + std::to_string(len));
  }
  const Tensor& xv = x.value();
  Tensor out(Shape{x.shape()[0], x.shape()[1], out_len});
  std::vector<std::size_t> argmax(rows * out_len);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t t = 0; t < out_len; ++t) {
      std::size_t best = r * len + t * pool;
      for (std::size_t j = 1; j < pool; ++j) {
        const std::size_t i = r * len + t * pool + j;
        if (xv[i] > xv[best]) best = i;
      }
      argmax[r * out_len + t] = best;
      out[r * out_len + t] = xv[best];
    }
  return TapeOf(x).Record(
      "maxpool1d", std::move(out), {x},
      [argmax = std::move(argmax)](const Tensor& g,
                                   std::span<Tensor* const> grads) {
        Tensor& gx = *grads[0];
        for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += g[i];
      });
}

Var MeanOverTime(const Var& x) {
  RequireRank(x, 3, "mean_over_time input");
  const std::size_t nb = x.shape()[0], len = x.shape()[1], d = x.shape()[2];
  const Tensor& xv = x.value();
  Tensor out(Shape{nb, d});
  const double inv = 1.0 / static_cast<double>(len);
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t k = 0; k < d; ++k) out[b * d + k] += xv[(b * len + t) * d + k] * inv;
  return TapeOf(x).Record(
      "mean_over_time", std::move(out), {x},
      [nb, len, d, inv](const Tensor& g, std::span<Tensor* const> grads) {
        Tensor& gx = *grads[0];
        for (std::size_t b = 0; b < nb; ++b)
          for (std::size_t t = 0; t < len; ++t)
            for (std::size_t k = 0; k < d; ++k) gx[(b * len + t) * d + k] += g[b * d + k] * inv;
      });
}

Var Sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return TapeOf(x).Record("sum", Tensor::Scalar(s), {x},
                          [](const Tensor& g, std::span<Tensor* const> grads) {
                            Tensor& gx = *grads[0];
                            for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += g[0];
                          });
}

Var Dropout(const Var& x, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    Fail(ErrorKind::kParameter, "dropout probability must lie in [0, 1), got " +
                                    std::to_string(p));
  }
  if (mode == Mode::kEval || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  const Tensor& xv = x.value();
  Tensor mask(xv.shape());
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) {
    mask[i] = rng.Uniform() < p ? 0.0 : keep_scale;
    out[i] = xv[i] * mask[i];
  }
  return TapeOf(x).Record("dropout", std::move(out), {x},
                          [mask](const Tensor& g, std::span<Tensor* const> grads) {
                            Tensor& gx = *grads[0];
                            for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * mask[i];
                          });
}

Tensor SoftmaxRows(const Tensor& logits) {
  if (logits.rank() != 2) {
    Fail(ErrorKind::kDimension, "softmax expects [N x K], got " +
                                    ShapeString(logits.shape()));
  }
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor out(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, logits[i * k + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(logits[i * k + j] - mx);
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = std::exp(logits[i * k + j] - mx) / z;
  }
  return out;
}

Var SoftmaxCrossEntropy(const Var& logits, std::span<const int> labels) {
  RequireRank(logits, 2, "softmax_cross_entropy logits");
  const std::size_t n = logits.shape()[0], k = logits.shape()[1];
  if (labels.size() != n) {
    Fail(ErrorKind::kDimension, "got " + std::to_string(labels.size()) +
                                    " labels for logits " +
                                    ShapeString(logits.shape()));
  }
  const Tensor& lv = logits.value();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      Fail(ErrorKind::kData, "label " + std::to_string(y) + " outside [0, " +
                                 std::to_string(k) + ")");
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, lv[i * k + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(lv[i * k + j] - mx);
    loss += mx + std::log(z) - lv[i * k + static_cast<std::size_t>(y)];
  }
  loss /= static_cast<double>(n);
  Tensor probs = SoftmaxRows(lv);
  std::vector<int> y(labels.begin(), labels.end());
  return TapeOf(logits).Record(
      "softmax_cross_entropy", Tensor::Scalar(loss), {logits},
      [probs, y, n, k](const Tensor& g, std::span<Tensor* const> grads) {
        Tensor& gl = *grads[0];
        const double s = g[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < k; ++j) {
            const double onehot = static_cast<std::size_t>(y[i]) == j ? 1.0 : 0.0;
            gl[i * k + j] += s * (probs[i * k + j] - onehot);
          }
      });
}

}  // namespace convmamba
