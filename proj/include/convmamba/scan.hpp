#pragma once

#include "convmamba/autodiff.hpp"
#include "convmamba/tensor.hpp"

namespace convmamba {

// Inputs of one selective scan.
//   u, delta: [B x L x D]   (delta > 0)
//   b_t, c_t: [B x L x N]
//   a:        [D x N]       (a <= 0)
//   skip:     [D]
struct ScanInputs {
  Tensor u;
  Tensor delta;
  Tensor b_t;
  Tensor c_t;
  Tensor a;
  Tensor skip;
};

struct Discretized {
  Tensor a_bar;  // [B x L x D x N], exp(delta * a)
  Tensor b_bar;  // [B x L x D x N], delta * b_t
};

// Zero-order hold for the state matrix, Euler step for the input matrix.
Discretized Discretize(const Tensor& delta, const Tensor& a, const Tensor& b_t);

void ValidateScanInputs(const ScanInputs& in);

// h_t = a_bar_t * h_{t-1} + b_bar_t * u_t,  y_t = <c_t, h_t> + skip * u_t,
// with h_0 = 0, evaluated step by step. Output [B x L x D].
Tensor SelectiveScanSequential(const ScanInputs& in);

// Same recurrence evaluated with a Blelloch (up-sweep / down-sweep) prefix
// scan over the affine maps h -> a_bar_t * h + b_bar_t * u_t. Forward only.
Tensor SelectiveScanParallel(const ScanInputs& in);

// Exclusive-then-inclusive Blelloch scan of affine pairs in place; on return
// coeff[t], offset[t] hold the composition of elements 0..t. Sizes must be
// equal; any length is accepted (padded internally to a power of two).
void AffinePrefixScan(std::vector<double>& coeff, std::vector<double>& offset);

enum class ScanKind { kSequential, kParallel };

// Taped sequential scan. Stores the state trajectory and back-propagates
// through the unrolled recurrence in reverse time.
Var SelectiveScan(const Var& u, const Var& delta, const Var& a, const Var& b_t,
                  const Var& c_t, const Var& skip);

}  // namespace convmamba
