#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "convmamba/autodiff.hpp"
#include "convmamba/rng.hpp"
#include "convmamba/tensor.hpp"

namespace convmamba {

// Pointwise scalar functions shared by the taped ops and the plain kernels.
double Softplus(double x);
double InverseSoftplus(double y);
double Sigmoid(double x);
double SiluScalar(double x);

enum class Elementwise { kAdd, kSub, kMul, kExp, kSoftplus, kSilu, kSigmoid };

// Binary operands must have equal shapes, or the second (or first) operand
// may be a one-element scalar, a suffix of the other shape (broadcast over
// leading axes, e.g. a bias [N] over [M x N]), or a [C x 1] per-channel
// column over a [B x C x L] tensor.
Var Apply(Elementwise op, const Var& a, std::optional<Var> b = std::nullopt);

Var Add(const Var& a, const Var& b);
Var Sub(const Var& a, const Var& b);
Var Mul(const Var& a, const Var& b);
Var Exp(const Var& x);
Var Softplus(const Var& x);
Var Silu(const Var& x);
Var Sigmoid(const Var& x);
Var Scale(const Var& x, double factor);

Var MatMul(const Var& a, const Var& b);
// x[..., in] * w[in, out] (+ bias[out]); leading axes are flattened.
Var Linear(const Var& x, const Var& w, std::optional<Var> bias = std::nullopt);

Var Reshape(const Var& x, Shape shape);
// [B x X x Y] -> [B x Y x X].
Var SwapLastAxes(const Var& x);
// Slice [begin, begin + count) of the last axis.
Var SliceLast(const Var& x, std::size_t begin, std::size_t count);

// Full 1-D convolution, stride 1, zero "same" padding ((K-1)/2 on the left).
// x[B x Cin x L], w[Cout x Cin x K], bias[Cout] -> [B x Cout x L].
Var Conv1d(const Var& x, const Var& w, const Var& bias);

// Per-channel convolution over a left-zero-padded input:
// y[b,c,t] = bias[c] + sum_j w[c,j] * xpad[b,c,t+j], output length
// L + left_pad - K + 1 (equal to L when left_pad = K - 1).
Var DepthwiseConv1d(const Var& x, const Var& w, const Var& bias,
                    std::size_t left_pad);

struct BatchNormStats {
  Tensor running_mean;
  Tensor running_var;
};

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

// Normalizes each channel of x[B x C x L]. Training mode uses batch
// statistics over (B, L) and, when update is non-null, folds them into
// *update (momentum 0.1, unbiased variance); evaluation mode uses running.
Var BatchNorm1d(const Var& x, const Var& gamma, const Var& beta,
                const BatchNormStats& running, Mode mode,
                BatchNormStats* update = nullptr);

// Non-overlapping max pooling along the last axis, trailing remainder dropped.
Var MaxPool1d(const Var& x, std::size_t pool);

// [B x L x D] -> [B x D], mean over L.
Var MeanOverTime(const Var& x);

Var Sum(const Var& x);

// Inverted dropout.
Var Dropout(const Var& x, double p, Mode mode, Rng& rng);

// Mean over the batch of -log softmax(logits)[label].
Var SoftmaxCrossEntropy(const Var& logits, std::span<const int> labels);

// Row-wise softmax of a plain [N x K] tensor.
Tensor SoftmaxRows(const Tensor& logits);

}  // namespace convmamba
