#include "convmamba/scan.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "convmamba/gradcheck.hpp"
#include "test_util.hpp"

namespace convmamba {
namespace {

using testing::RandomTensor;

ScanInputs RandomInputs(std::size_t nb, std::size_t len, std::size_t ni, std::size_t ns,
                        Rng& rng) {
  ScanInputs in;
  in.u = RandomTensor({nb, len, ni}, rng);
  in.delta = RandomTensor({nb, len, ni}, rng, 0.01, 1.0);
  in.b_t = RandomTensor({nb, len, ns}, rng);
  in.c_t = RandomTensor({nb, len, ns}, rng);
  in.a = RandomTensor({ni, ns}, rng, -2.0, 0.0);
  in.skip = RandomTensor({ni}, rng);
  return in;
}

ScanInputs Integrator(std::vector<double> u) {
  const std::size_t len = u.size();
  ScanInputs in;
  in.u = Tensor(Shape{1, len, 1}, std::move(u));
  in.delta = Tensor(Shape{1, len, 1}, 1.0);
  in.b_t = Tensor(Shape{1, len, 1}, 1.0);
  in.c_t = Tensor(Shape{1, len, 1}, 1.0);
  in.a = Tensor(Shape{1, 1}, 0.0);
  in.skip = Tensor(Shape{1}, 0.0);
  return in;
}

double MaxAbsDiff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TEST(Discretize, ClosedForms) {
  const Tensor delta(Shape{1, 1, 3}, std::vector<double>{1.0, std::numbers::ln2, 0.1});
  const Tensor a(Shape{3, 1}, std::vector<double>{0.0, -1.0, -1.0});
  const Tensor b(Shape{1, 1, 1}, 3.0);
  const Discretized d = Discretize(delta, a, b);
  EXPECT_EQ(d.a_bar[0], 1.0);
  EXPECT_NEAR(d.a_bar[1], 0.5, 1e-15);
  EXPECT_NEAR(d.b_bar[2], 0.3, 1e-15);
}

TEST(Discretize, NonPositiveDelta) {
  EXPECT_ERROR_KIND(Discretize(Tensor(Shape{1, 1, 1}, 0.0), Tensor(Shape{1, 1}), Tensor(Shape{1, 1, 1})),
                    ErrorKind::kContract);
}

TEST(Discretize, StableForNonPositiveA) {
  Rng rng(1);
  const ScanInputs in = RandomInputs(2, 50, 3, 4, rng);
  const Discretized d = Discretize(in.delta, in.a, in.b_t);
  for (double v : d.a_bar.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(SequentialScan, IntegratorIsRunningSum) {
  EXPECT_EQ(SelectiveScanSequential(Integrator({1, 2})).values(), (std::vector<double>{1, 3}));
  EXPECT_EQ(SelectiveScanParallel(Integrator({1, 2})).values(), (std::vector<double>{1, 3}));
}

TEST(SequentialScan, SingleStepClosedForm) {
  Rng rng(2);
  const ScanInputs in = RandomInputs(1, 1, 2, 3, rng);
  const Tensor y = SelectiveScanSequential(in);
  for (std::size_t d = 0; d < 2; ++d) {
    double want = 0.0;
    for (std::size_t n = 0; n < 3; ++n) want += in.c_t[n] * in.delta[d] * in.b_t[n];
    want = want * in.u[d] + in.skip[d] * in.u[d];
    EXPECT_NEAR(y[d], want, 1e-15);
  }
  EXPECT_EQ(SelectiveScanParallel(in), y);
}

TEST(SequentialScan, ZeroInputMatrixLeavesSkipPath) {
  Rng rng(3);
  ScanInputs in = RandomInputs(2, 10, 3, 4, rng);
  in.b_t = Tensor(in.b_t.shape());
  const Tensor y = SelectiveScanSequential(in);
  for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_EQ(y[i], in.skip[i % 3] * in.u[i]);
}

TEST(SequentialScan, EmptySequence) {
  Rng rng(4);
  const ScanInputs in = RandomInputs(2, 0, 3, 4, rng);
  EXPECT_EQ(SelectiveScanSequential(in).shape(), (Shape{2, 0, 3}));
  EXPECT_TRUE(SelectiveScanParallel(in).empty());
}

TEST(SequentialScan, ShapeErrors) {
  Rng rng(5);
  ScanInputs in = RandomInputs(1, 4, 3, 2, rng);
  in.skip = Tensor(Shape{4});
  EXPECT_ERROR_KIND(SelectiveScanSequential(in), ErrorKind::kDimension);
  in = RandomInputs(1, 4, 3, 2, rng);
  in.a[0] = 0.5;
  EXPECT_ERROR_KIND(SelectiveScanSequential(in), ErrorKind::kContract);
}

TEST(SequentialScan, Causality) {
  Rng rng(6);
  ScanInputs in = RandomInputs(1, 40, 3, 4, rng);
  const Tensor before = SelectiveScanSequential(in);
  const std::size_t t0 = 17;
  for (std::size_t d = 0; d < 3; ++d) in.u.at({0, t0, d}) += 5.0;
  const Tensor after = SelectiveScanSequential(in);
  for (std::size_t t = 0; t < 40; ++t)
    for (std::size_t d = 0; d < 3; ++d) {
      if (t < t0) {
        EXPECT_EQ(after.at({0, t, d}), before.at({0, t, d}));
      }
    }
  EXPECT_NE(after.at({0, t0, 0}), before.at({0, t0, 0}));
}

TEST(SequentialScan, BoundedForLongConstantInput) {
  const std::size_t len = 100000;
  ScanInputs in;
  in.u = Tensor(Shape{1, len, 1}, 1.0);
  in.delta = Tensor(Shape{1, len, 1}, 1.0);
  in.b_t = Tensor(Shape{1, len, 2}, 1.0);
  in.c_t = Tensor(Shape{1, len, 2}, 1.0);
  in.a = Tensor(Shape{1, 2}, std::vector<double>{0.0, -0.5});
  in.skip = Tensor(Shape{1}, 1.0);
  const Tensor y = SelectiveScanSequential(in);
  for (std::size_t t = 0; t < len; ++t) {
    ASSERT_TRUE(std::isfinite(y[t]));
    // |h| <= sup|B_bar u| * t per state, plus the skip term.
    ASSERT_LE(std::abs(y[t]), 2.0 * static_cast<double>(t + 1) + 1.0);
  }
}

TEST(ParallelScan, MatchesSequential) {
  Rng rng(7);
  const std::vector<std::size_t> lengths{1, 2, 3, 17, 64, 1000};
  for (int i = 0; i < 100; ++i) {
    const std::size_t len = i < 6 ? lengths[i] : 1 + rng.UniformInt(300);
    const ScanInputs in = RandomInputs(1 + rng.UniformInt(2), len, 1 + rng.UniformInt(4),
                                       1 + rng.UniformInt(5), rng);
    EXPECT_LE(MaxAbsDiff(SelectiveScanParallel(in), SelectiveScanSequential(in)), 1e-10)
        << "instance " << i << " L=" << len;
  }
}

TEST(ParallelScan, AffinePrefixOfAnyLength) {
  for (std::size_t len : {1u, 2u, 5u, 8u, 13u}) {
    std::vector<double> a(len), b(len);
    for (std::size_t t = 0; t < len; ++t) {
      a[t] = 0.5 + 0.1 * static_cast<double>(t);
      b[t] = static_cast<double>(t) - 2.0;
    }
    std::vector<double> ca = a, cb = b;
    AffinePrefixScan(ca, cb);
    double pa = 1.0, pb = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      pb = a[t] * pb + b[t];
      pa *= a[t];
      EXPECT_NEAR(ca[t], pa, 1e-14 * std::abs(pa));
      EXPECT_NEAR(cb[t], pb, 1e-14 * (1.0 + std::abs(pb)));
    }
  }
}

TEST(TapedScan, ForwardMatchesPlainScan) {
  Rng rng(8);
  const ScanInputs in = RandomInputs(2, 9, 3, 4, rng);
  Tape t;
  const Var y = SelectiveScan(t.Constant(in.u), t.Constant(in.delta), t.Constant(in.a),
                              t.Constant(in.b_t), t.Constant(in.c_t), t.Constant(in.skip));
  EXPECT_EQ(y.value(), SelectiveScanSequential(in));
}

TEST(TapedScan, GradientMatchesFiniteDifferences) {
  Rng rng(9);
  ScanInputs in = RandomInputs(2, 7, 3, 2, rng);
  GradCheckOptions opt;
  const auto row = CheckGradients(
      "scan", 9, {&in.u, &in.delta, &in.a, &in.b_t, &in.c_t, &in.skip},
      [&](Tape&, ParamBinder& p) {
        return SelectiveScan(p(in.u), p(in.delta), p(in.a), p(in.b_t), p(in.c_t), p(in.skip));
      },
      opt);
  EXPECT_TRUE(row.pass) << row.max_rel_err;
}

}  // namespace
}  // namespace convmamba
