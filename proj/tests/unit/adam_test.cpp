#include "convmamba/adam.hpp"

#include <cmath>

#include "test_util.hpp"

namespace convmamba {
namespace {

double OneStep(double theta, double g, const AdamConfig& c = {}) {
  Tensor p = Tensor::FromVector({theta});
  std::vector<Tensor*> params{&p};
  std::vector<Tensor> grads{Tensor::FromVector({g})};
  AdamState state;
  AdamStep(params, grads, state, c);
  return p[0];
}

TEST(Adam, SingleStepClosedForm) {
  EXPECT_NEAR(OneStep(0.0, 2.0), -1e-3 * 2.0 / (2.0 + 1e-8), 1e-12);
  EXPECT_NEAR(OneStep(0.0, 2.0), -9.99999995e-4, 1e-12);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const double theta = rng.Uniform(-5, 5), g = rng.Uniform(-3, 3);
    // m_hat = g, v_hat = g^2 at t = 1.
    EXPECT_NEAR(OneStep(theta, g), theta - 1e-3 * g / (std::abs(g) + 1e-8), 1e-12);
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Rng rng(2);
  Tensor a(Shape{3, 4}), b(Shape{5});
  for (auto& v : a.data()) v = rng.Normal();
  const Tensor a0 = a, b0 = b;
  std::vector<Tensor*> params{&a, &b};
  std::vector<Tensor> grads{Tensor(Shape{3, 4}), Tensor(Shape{5})};
  AdamState state;
  for (int i = 0; i < 3; ++i) AdamStep(params, grads, state, {});
  EXPECT_EQ(a, a0);
  EXPECT_EQ(b, b0);
  EXPECT_EQ(state.step, 3u);
}

TEST(Adam, OddSymmetry) {
  Tensor a(Shape{1}), b(Shape{1});
  std::vector<Tensor*> params{&a, &b};
  std::vector<Tensor> grads{Tensor::FromVector({0.7}), Tensor::FromVector({-0.7})};
  AdamState state;
  AdamStep(params, grads, state, {});
  EXPECT_EQ(a[0], -b[0]);
  EXPECT_LT(a[0], 0.0);
}

TEST(Adam, SecondStepUsesBiasCorrection) {
  Tensor p = Tensor::FromVector({0.0});
  std::vector<Tensor*> params{&p};
  AdamState state;
  AdamStep(params, std::vector<Tensor>{Tensor::FromVector({1.0})}, state, {});
  AdamStep(params, std::vector<Tensor>{Tensor::FromVector({3.0})}, state, {});
  const double m = (0.9 * 0.1 * 1.0 + 0.1 * 3.0) / (1 - 0.81);
  const double v = (0.999 * 0.001 * 1.0 + 0.001 * 9.0) / (1 - 0.999 * 0.999);
  EXPECT_NEAR(p[0], -1e-3 * 1.0 / (1.0 + 1e-8) - 1e-3 * m / (std::sqrt(v) + 1e-8), 1e-12);
}

TEST(Adam, ShapeMismatch) {
  Tensor p(Shape{2});
  std::vector<Tensor*> params{&p};
  AdamState state;
  EXPECT_ERROR_KIND(AdamStep(params, std::vector<Tensor>{Tensor(Shape{3})}, state, {}),
                    ErrorKind::kContract);
}

}  // namespace
}  // namespace convmamba
