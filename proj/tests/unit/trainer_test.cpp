#include "convmamba/trainer.hpp"

#include <cmath>
#include <filesystem>

#include "convmamba/bench.hpp"
#include "convmamba/checkpoint.hpp"
#include "convmamba/synth.hpp"
#include "test_util.hpp"

namespace convmamba {
namespace {

std::vector<std::size_t> All(const WindowedDataset& ds) {
  std::vector<std::size_t> v(ds.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
  return v;
}

std::vector<Tensor> Trainable(const ModelParams& p) {
  std::vector<Tensor> out;
  VisitParams(p, [&](const std::string&, const Tensor& t, bool trainable) {
    if (trainable) out.push_back(t);
  });
  return out;
}

TEST(Synthetic, DeterministicAndBalanced) {
  const WindowedDataset a = MakeSynthetic(SynthSpec{}, 3), b = MakeSynthetic(SynthSpec{}, 3);
  EXPECT_EQ(a.data, b.data);
  EXPECT_EQ(a.size(), 64u);
  EXPECT_EQ(a.positives(), 32u);
  EXPECT_EQ(a.labels[0], 1);
  EXPECT_EQ(a.labels[63], 0);
  EXPECT_NE(MakeSynthetic(SynthSpec{}, 4).data, a.data);
  SynthSpec bad;
  bad.n_positive = 65;
  EXPECT_ERROR_KIND(bad.Validate(), ErrorKind::kConfig);
}

TEST(Trainer, ZeroLearningRateKeepsTrainableParameters) {
  const WindowedDataset ds = MakeSynthetic(SynthSpec{}, 1);
  const ModelConfig config = SynthModelConfig();
  TrainConfig tc;
  tc.epochs = 2;
  tc.lr = 0.0;
  tc.seed = 5;
  Rng rng(tc.seed * 0x9E3779B97F4A7C15ull + 1);
  const ModelParams init = InitModel(config, rng);
  const TrainResult r = Train(config, ds, All(ds), {}, tc);
  EXPECT_EQ(Trainable(r.params), Trainable(init));
  EXPECT_TRUE(std::isnan(r.log.rows[0].val_loss));
}

TEST(Trainer, SameSeedSameLog) {
  const WindowedDataset ds = MakeSynthetic(SynthSpec{}, 2);
  const ModelConfig config = SynthModelConfig();
  TrainConfig tc;
  tc.epochs = 3;
  tc.seed = 9;
  std::vector<std::size_t> train, val;
  for (std::size_t i = 0; i < ds.size(); ++i) (i % 5 == 0 ? val : train).push_back(i);
  const TrainResult a = Train(config, ds, train, val, tc);
  const TrainResult b = Train(config, ds, train, val, tc);
  ASSERT_EQ(a.log.rows.size(), 3u);
  for (std::size_t e = 0; e < 3; ++e) {
    EXPECT_EQ(a.log.rows[e].train_loss, b.log.rows[e].train_loss);
    EXPECT_EQ(a.log.rows[e].val_loss, b.log.rows[e].val_loss);
    EXPECT_EQ(a.log.rows[e].train_acc, b.log.rows[e].train_acc);
  }
  EXPECT_EQ(EncodeCheckpoint(a.params), EncodeCheckpoint(b.params));
  tc.seed = 10;
  EXPECT_NE(Train(config, ds, train, val, tc).log.rows[0].train_loss, a.log.rows[0].train_loss);
}

TEST(Trainer, OverfitsSeparableData) {
  const WindowedDataset ds = MakeSynthetic(SynthSpec{}, 0);
  TrainConfig tc;
  tc.epochs = 60;
  tc.seed = 0;
  const TrainResult r = Train(SynthModelConfig(), ds, All(ds), {}, tc);
  double best = 0.0;
  for (const auto& row : r.log.rows) best = std::max(best, row.train_acc);
  EXPECT_GE(best, 0.95);
  EXPECT_GE(Evaluate(r.params, SynthModelConfig(), ds, All(ds)).accuracy, 0.95);
  // Smoothed loss after epoch 20 rarely rises by more than 5%.
  std::size_t regressions = 0, steps = 0;
  for (std::size_t e = 22; e + 2 < r.log.rows.size(); ++e) {
    auto avg = [&](std::size_t c) {
      return (r.log.rows[c - 1].train_loss + r.log.rows[c].train_loss + r.log.rows[c + 1].train_loss) / 3;
    };
    ++steps;
    if (avg(e) > avg(e - 1) * 1.05) ++regressions;
  }
  EXPECT_LE(regressions, steps / 20 + 1);
}

TEST(Trainer, NonFiniteLossNamesEpochAndBatch) {
  WindowedDataset ds = MakeSynthetic(SynthSpec{}, 1);
  ds.data[5] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  tc.epochs = 1;
  const Error e = testing::CaptureError([&] { Train(SynthModelConfig(), ds, All(ds), {}, tc); });
  EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
  EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos) << e.what();
  EXPECT_NE(std::string(e.what()).find("batch"), std::string::npos);
}

TEST(Trainer, RejectsSingleClassAndMismatchedDims) {
  const WindowedDataset ds = MakeSynthetic(SynthSpec{}, 1);
  TrainConfig tc;
  tc.epochs = 1;
  EXPECT_ERROR_KIND(Train(SynthModelConfig(), ds, {40, 41, 42}, {}, tc), ErrorKind::kSampler);
  ModelConfig wrong = SynthModelConfig();
  wrong.in_channels = 17;
  EXPECT_ERROR_KIND(Train(wrong, ds, All(ds), {}, tc), ErrorKind::kConfig);
}

TEST(Trainer, WritesCheckpointsAndLog) {
  const auto dir = std::filesystem::temp_directory_path() / "convmamba_trainer_test";
  std::filesystem::remove_all(dir);
  const WindowedDataset ds = MakeSynthetic(SynthSpec{}, 1);
  TrainConfig tc;
  tc.epochs = 2;
  tc.checkpoint_dir = dir;
  std::vector<std::size_t> seen;
  const TrainResult r =
      Train(SynthModelConfig(), ds, All(ds), {}, tc, [&](const EpochLog& l) { seen.push_back(l.epoch); });
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2}));
  EXPECT_TRUE(std::filesystem::exists(dir / "epoch_001.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "epoch_002.ckpt"));
  const ModelParams back = LoadCheckpoint(dir / "model.ckpt", SynthModelConfig());
  EXPECT_EQ(EncodeCheckpoint(back), EncodeCheckpoint(r.params));
  const std::string csv = TrainLogCsv(r.log);
  EXPECT_EQ(csv.rfind("epoch,train_loss,train_acc,val_loss,val_acc,seconds\n1,", 0), 0u);
  std::filesystem::remove_all(dir);
}

TEST(Bench, RepetitionsAndSummary) {
  SynthSpec data;
  data.n_windows = 16;
  data.n_positive = 8;
  BenchOptions opt;
  opt.repetitions = 3;
  const BenchReport r = BenchEpoch(SynthModelConfig(), data, opt);
  ASSERT_EQ(r.summaries.size(), 2u);
  for (const auto& s : r.summaries) {
    EXPECT_EQ(s.samples, 3u);
    EXPECT_GE(s.mean, s.min);
    EXPECT_LE(s.mean, s.max);
  }
  EXPECT_EQ(r.samples.size(), 6u);
  EXPECT_EQ(BenchCsv(r).rfind("model,params,n_windows,repetition,seconds\nmamba,", 0), 0u);
}

TEST(Bench, SummaryStatistics) {
  const BenchSummary s = Summarize("m", {1.0, 2.0, 3.0});
  EXPECT_EQ(s.mean, 2.0);
  EXPECT_EQ(s.stddev, 1.0);
  EXPECT_EQ(s.min, 1.0);
  EXPECT_EQ(s.max, 3.0);
  EXPECT_EQ(Summarize("m", {4.0}).stddev, 0.0);
}

TEST(Bench, DoublingDatasetDoublesEpochTime) {
  auto best = [](std::size_t n) {
    SynthSpec data;
    data.n_windows = n;
    data.n_positive = n / 2;
    BenchOptions opt;
    opt.repetitions = 5;
    opt.baseline = false;
    return BenchEpoch(SynthModelConfig(), data, opt).summaries[0].min;
  };
  const double ratio = best(128) / best(64);
  EXPECT_GE(ratio, 1.6);
  EXPECT_LE(ratio, 2.5);
}

TEST(Bench, SinglePrecisionScanAgrees) {
  Rng rng(4);
  ScanInputs in;
  in.u = testing::RandomTensor({1, 50, 3}, rng);
  in.delta = testing::RandomTensor({1, 50, 3}, rng, 0.01, 1.0);
  in.b_t = testing::RandomTensor({1, 50, 2}, rng);
  in.c_t = testing::RandomTensor({1, 50, 2}, rng);
  in.a = testing::RandomTensor({3, 2}, rng, -1.0, 0.0);
  in.skip = testing::RandomTensor({3}, rng);
  const Tensor ref = SelectiveScanSequential(in);
  const std::vector<float> f = SelectiveScanSequentialF32(in);
  ASSERT_EQ(f.size(), ref.numel());
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(f[i], ref[i], 1e-4);
}

}  // namespace
}  // namespace convmamba
