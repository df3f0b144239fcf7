#include "convmamba/adam.hpp"

#include <cmath>

#include "convmamba/error.hpp"

namespace convmamba {

void AdamStep(std::span<Tensor* const> params, std::span<const Tensor> grads,
              AdamState& state, const AdamConfig& config) {
  if (params.size() != grads.size()) {
    Fail(ErrorKind::kContract, std::to_string(grads.size()) + " gradients for " +
                                   std::to_string(params.size()) + " parameters");
  }
  if (state.m.empty() && state.step == 0) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size()) {
    Fail(ErrorKind::kContract, "optimizer state tracks a different parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i]->shape() || state.m[i].shape() != params[i]->shape()) {
      Fail(ErrorKind::kContract, "gradient shape " + ShapeString(grads[i].shape()) +
                                     " does not match parameter " +
                                     ShapeString(params[i]->shape()));
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(config.beta1, t);
  const double correct2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < p.numel(); ++k) {
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correct1;
      const double v_hat = v[k] / correct2;
      p[k] -= config.lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

}  // namespace convmamba
