#include "convmamba/mamba.hpp"

#include <cmath>

#include "convmamba/error.hpp"
#include "convmamba/ops.hpp"

namespace convmamba {
namespace {

Tensor NormalTensor(Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.Normal(0.0, stddev);
  return t;
}

}  // namespace

void MambaConfig::Validate() const {
  if (d_model == 0 || d_state == 0 || d_conv == 0 || expand == 0) {
    Fail(ErrorKind::kConfig,
         "mamba config sizes must be positive (d_model, d_state, d_conv, expand)");
  }
}

MambaParams InitMamba(const MambaConfig& config, Rng& rng) {
  config.Validate();
  const std::size_t dm = config.d_model;
  const std::size_t di = config.d_inner();
  const std::size_t ns = config.d_state;
  const std::size_t rank = config.resolved_dt_rank();

  MambaParams p;
  p.in_proj = NormalTensor(Shape{dm, 2 * di}, std::sqrt(2.0 / static_cast<double>(dm)), rng);
  p.conv_w = NormalTensor(Shape{di, config.d_conv},
                          std::sqrt(2.0 / static_cast<double>(config.d_conv)), rng);
  p.conv_b = Tensor(Shape{di});

  p.x_proj = Tensor(Shape{di, rank + 2 * ns});
  const double dt_std = std::sqrt(1.0 / static_cast<double>(di));
  const double bc_std = std::pow(static_cast<double>(ns), -0.25);
  const std::size_t cols = rank + 2 * ns;
  for (std::size_t r = 0; r < di; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      p.x_proj[r * cols + c] = rng.Normal(0.0, c < rank ? dt_std : bc_std);

  p.dt_proj_w = NormalTensor(Shape{rank, di}, kDtWeightScale, rng);
  p.dt_proj_b = Tensor(Shape{di}, InverseSoftplus(kDtInitTarget));

  p.a_log = Tensor(Shape{di, ns});
  for (std::size_t d = 0; d < di; ++d)
    for (std::size_t n = 0; n < ns; ++n)
      p.a_log[d * ns + n] = std::log(static_cast<double>(n + 1));

  p.d_skip = Tensor(Shape{di}, 1.0);
  p.out_proj = NormalTensor(Shape{di, dm}, std::sqrt(2.0 / static_cast<double>(di)), rng);
  return p;
}

Tensor StateMatrix(const Tensor& a_log) {
  Tensor a(a_log.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] = -Softplus(a_log[i]);
  return a;
}

Var MambaBlockForward(const Var& x, const MambaParams& params,
                      const MambaConfig& config, ParamBinder& bind,
                      const MambaForwardOptions& options) {
  const Shape& xs = x.shape();
  if (xs.size() != 3 || xs[2] != config.d_model) {
    Fail(ErrorKind::kDimension, "mamba block expects [B x L x " +
                                    std::to_string(config.d_model) + "], got " +
                                    ShapeString(xs));
  }
  const std::size_t di = config.d_inner();
  const std::size_t ns = config.d_state;
  const std::size_t rank = config.resolved_dt_rank();

  Var xz = Linear(x, bind(params.in_proj));
  Var u = SliceLast(xz, 0, di);
  Var z = SliceLast(xz, di, di);

  Var conv = DepthwiseConv1d(SwapLastAxes(u), bind(params.conv_w),
                             bind(params.conv_b), config.d_conv - 1);
  Var uc = Silu(SwapLastAxes(conv));

  Var proj = Linear(uc, bind(params.x_proj));
  Var dt_pre = SliceLast(proj, 0, rank);
  Var b_t = SliceLast(proj, rank, ns);
  Var c_t = SliceLast(proj, rank + ns, ns);
  Var delta = Softplus(Linear(dt_pre, bind(params.dt_proj_w), bind(params.dt_proj_b)));
  Var a = Scale(Softplus(bind(params.a_log)), -1.0);
  Var skip = bind(params.d_skip);

  Var y;
  if (options.scan == ScanKind::kParallel) {
    for (const Var& v : {uc, delta, a, b_t, c_t, skip}) {
      if (v.requires_grad()) {
        Fail(ErrorKind::kContract,
             "parallel scan is forward-only; use the sequential scan for training");
      }
    }
    ScanInputs in{uc.value(), delta.value(), b_t.value(),
                  c_t.value(), a.value(),     skip.value()};
    y = x.tape()->Constant(SelectiveScanParallel(in));
  } else {
    y = SelectiveScan(uc, delta, a, b_t, c_t, skip);
  }
  Var gated = Mul(y, Silu(z));
  return Linear(gated, bind(params.out_proj));
}

Tensor MambaBlockForward(const Tensor& x, const MambaParams& params,
                         const MambaConfig& config, ScanKind scan) {
  Tape tape;
  ParamBinder bind(tape, false);
  Var out = MambaBlockForward(tape.Constant(x), params, config, bind,
                              MambaForwardOptions{scan});
  return out.value();
}

}  // namespace convmamba
