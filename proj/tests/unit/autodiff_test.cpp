#include "convmamba/autodiff.hpp"

#include <cmath>

#include "convmamba/gradcheck.hpp"
#include "convmamba/ops.hpp"
#include "test_util.hpp"

namespace convmamba {
namespace {

using testing::RandomTensor;

TEST(Tape, SumGradientIsOnes) {
  Rng rng(1);
  Tape tape;
  const Var x = tape.Leaf(RandomTensor({3, 4}, rng));
  tape.Backward(Sum(x));
  EXPECT_EQ(tape.Grad(x), Tensor(Shape{3, 4}, 1.0));
}

TEST(Tape, SquareGradientIsTwiceInput) {
  Rng rng(2);
  const Tensor xv = RandomTensor({5}, rng);
  Tape tape;
  const Var x = tape.Leaf(xv);
  tape.Backward(Sum(Mul(x, x)));
  const Tensor g = tape.Grad(x);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(g[i], 2.0 * xv[i]);
}

TEST(Tape, FanOutAccumulates) {
  Tape tape;
  const Var x = tape.Leaf(Tensor::FromVector({3.0}));
  tape.Backward(Sum(Add(Scale(x, 2.0), Exp(x))));
  EXPECT_DOUBLE_EQ(tape.Grad(x)[0], 2.0 + std::exp(3.0));
}

TEST(Tape, NonScalarRootIsContractError) {
  Tape tape;
  const Var x = tape.Leaf(Tensor(Shape{2}));
  EXPECT_ERROR_KIND(tape.Backward(x), ErrorKind::kContract);
}

TEST(Tape, ConstantsGetNoGradient) {
  Tape tape;
  const Var c = tape.Constant(Tensor::FromVector({1.0, 2.0}));
  const Var x = tape.Leaf(Tensor::FromVector({3.0, 4.0}));
  tape.Backward(Sum(Mul(c, x)));
  EXPECT_FALSE(c.requires_grad());
  EXPECT_EQ(tape.Grad(x).values(), (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(tape.Grad(c), Tensor(Shape{2}));
}

TEST(Tape, ReplayIsDeterministic) {
  Rng rng(3);
  const Tensor a = RandomTensor({4, 6}, rng), b = RandomTensor({6, 2}, rng);
  auto run = [&] {
    Tape tape;
    const Var va = tape.Leaf(a), vb = tape.Leaf(b);
    tape.Backward(Sum(Silu(MatMul(va, vb))));
    return std::pair{tape.Grad(va), tape.Grad(vb)};
  };
  EXPECT_EQ(run(), run());
}

TEST(FiniteDiff, SumAndSquare) {
  const Tensor x = Tensor::FromVector({1.0, -2.0, 0.5});
  const Tensor g = FiniteDiffGrad(
      [](const Tensor& t) {
        double s = 0.0;
        for (double v : t.data()) s += v;
        return s;
      },
      x);
  for (double v : g.data()) EXPECT_NEAR(v, 1.0, 1e-9);
  const Tensor three = Tensor::FromVector({3.0});
  EXPECT_NEAR(FiniteDiffGrad([](const Tensor& t) { return t[0] * t[0]; }, three)[0], 6.0, 1e-8);
}

TEST(GradCheck, DetectsWrongGradient) {
  // Record a node whose backward deliberately doubles the true gradient.
  Tensor x = Tensor::FromVector({0.3, -0.7});
  const auto row = CheckGradients("broken", 0, {&x}, [&](Tape& tape, ParamBinder& bind) {
    const Var v = bind(x);
    return tape.Record("broken", v.value(), {v},
                       [](const Tensor& g, std::span<Tensor* const> grads) {
                         for (std::size_t i = 0; i < g.numel(); ++i) (*grads[0])[i] += 2.0 * g[i];
                       });
  });
  EXPECT_FALSE(row.pass);
  EXPECT_GT(row.max_rel_err, 0.1);
}

}  // namespace
}  // namespace convmamba
