#include "convmamba/mamba.hpp"

#include <cmath>

#include "convmamba/gradcheck.hpp"
#include "convmamba/ops.hpp"
#include "test_util.hpp"

namespace convmamba {
namespace {

using testing::RandomTensor;

// softplus(b) = target solved by bisection, independent of InverseSoftplus.
double BisectSoftplus(double target) {
  double lo = -50.0, hi = 50.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (std::log1p(std::exp(mid)) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

TEST(MambaBlock, PreservesShape) {
  Rng rng(1);
  const MambaConfig config;
  const MambaParams p = InitMamba(config, rng);
  const Tensor y = MambaBlockForward(RandomTensor({2, 64, 16}, rng), p, config);
  EXPECT_EQ(y.shape(), (Shape{2, 64, 16}));
  const Tensor one = MambaBlockForward(RandomTensor({1, 1, 16}, rng), p, config);
  EXPECT_EQ(one.shape(), (Shape{1, 1, 16}));
  for (double v : one.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(MambaBlock, WrongFeatureWidth) {
  Rng rng(2);
  const MambaConfig config;
  const MambaParams p = InitMamba(config, rng);
  EXPECT_ERROR_KIND(MambaBlockForward(Tensor(Shape{1, 4, 15}), p, config), ErrorKind::kDimension);
}

TEST(MambaBlock, ParallelEvaluationMatchesSequential) {
  Rng rng(3);
  const MambaConfig config;
  const MambaParams p = InitMamba(config, rng);
  const Tensor x = RandomTensor({2, 37, 16}, rng);
  const Tensor a = MambaBlockForward(x, p, config, ScanKind::kSequential);
  const Tensor b = MambaBlockForward(x, p, config, ScanKind::kParallel);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], 1e-10);
}

TEST(MambaBlock, ParallelScanRefusesGradientPath) {
  Rng rng(4);
  const MambaConfig config;
  const MambaParams p = InitMamba(config, rng);
  Tape tape;
  ParamBinder bind(tape);
  EXPECT_ERROR_KIND(MambaBlockForward(tape.Leaf(Tensor(Shape{1, 3, 16})), p, config, bind,
                                      MambaForwardOptions{ScanKind::kParallel}),
                    ErrorKind::kContract);
}

TEST(MambaBlock, IsCausal) {
  Rng rng(5);
  const MambaConfig config;
  const MambaParams p = InitMamba(config, rng);
  Tensor x = RandomTensor({1, 20, 16}, rng);
  const Tensor before = MambaBlockForward(x, p, config);
  for (std::size_t d = 0; d < 16; ++d) x.at({0, 12, d}) += 1.0;
  const Tensor after = MambaBlockForward(x, p, config);
  for (std::size_t t = 0; t < 12; ++t)
    for (std::size_t d = 0; d < 16; ++d) EXPECT_EQ(after.at({0, t, d}), before.at({0, t, d}));
}

TEST(MambaInit, Audit) {
  Rng rng(6);
  MambaConfig config;
  config.d_model = 64;
  const MambaParams p = InitMamba(config, rng);
  const std::size_t di = config.d_inner(), ns = config.d_state, rank = config.resolved_dt_rank();
  EXPECT_EQ(rank, 4u);
  const Tensor a = StateMatrix(p.a_log);
  for (double v : a.data()) EXPECT_LT(v, 0.0);
  for (double v : p.conv_b.data()) EXPECT_EQ(v, 0.0);
  for (double v : p.d_skip.data()) EXPECT_EQ(v, 1.0);
  const double bias = BisectSoftplus(0.001);
  for (double v : p.dt_proj_b.data()) EXPECT_NEAR(v, bias, 1e-9);
  EXPECT_LT(bias, 0.0);

  // B/C columns of x_proj: variance 1/sqrt(d_state).
  const std::size_t cols = rank + 2 * ns;
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < di; ++r)
    for (std::size_t c = rank; c < cols; ++c) {
      const double v = p.x_proj[r * cols + c];
      sum += v;
      sq += v * v;
      ++n;
    }
  const double mean = sum / static_cast<double>(n);
  const double var = sq / static_cast<double>(n) - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.05);
  EXPECT_NEAR(var, 1.0 / std::sqrt(static_cast<double>(ns)), 0.02);

  double wmax = 0.0;
  for (double v : p.dt_proj_w.data()) wmax = std::max(wmax, std::abs(v));
  EXPECT_LT(wmax, 0.06);
}

TEST(MambaInit, DefaultDtBias) {
  Rng rng(7);
  const MambaParams p = InitMamba(MambaConfig{}, rng);
  EXPECT_EQ(p.dt_proj_b.numel(), 32u);
  EXPECT_NEAR(p.dt_proj_b[0], -6.907255, 1e-6);
}

TEST(MambaInit, SameSeedIdentical) {
  Rng a(42), b(42);
  const MambaParams pa = InitMamba(MambaConfig{}, a), pb = InitMamba(MambaConfig{}, b);
  std::vector<Tensor> ta, tb;
  VisitParams(pa, "", [&](const std::string&, const Tensor& t) { ta.push_back(t); });
  VisitParams(pb, "", [&](const std::string&, const Tensor& t) { tb.push_back(t); });
  EXPECT_EQ(ta, tb);
}

TEST(MambaInit, RejectsZeroSizes) {
  Rng rng(8);
  MambaConfig config;
  config.d_state = 0;
  EXPECT_ERROR_KIND(InitMamba(config, rng), ErrorKind::kConfig);
}

TEST(MambaBlock, GradientMatchesFiniteDifferences) {
  Rng rng(9);
  MambaConfig config;
  config.d_model = 4;
  config.d_state = 3;
  MambaParams p = InitMamba(config, rng);
  for (double& v : p.dt_proj_b.data()) v = rng.Uniform(-1.0, 0.5);
  Tensor x = RandomTensor({2, 6, 4}, rng);
  std::vector<Tensor*> wrt{&x};
  VisitParams(p, "", [&](const std::string&, Tensor& t) { wrt.push_back(&t); });
  const auto row = CheckGradients(
      "mamba", 9, wrt,
      [&](Tape&, ParamBinder& bind) { return MambaBlockForward(bind(x), p, config, bind); });
  EXPECT_TRUE(row.pass) << row.max_rel_err;
}

}  // namespace
}  // namespace convmamba
