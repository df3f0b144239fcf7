#include "convmamba/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "test_util.hpp"

namespace convmamba {
namespace {

WindowSpec Spec(double threshold = 0.0) {
  WindowSpec s;
  s.threshold = threshold;
  return s;
}

TEST(Windows, TwentySecondRecording) {
  const WindowSpec spec = Spec();
  EXPECT_EQ(spec.window_len(), 2048u);
  EXPECT_EQ(spec.stride_len(), 1024u);
  EXPECT_EQ(MakeWindows(5120, spec), (std::vector<std::size_t>{0, 1024, 2048, 3072}));
  EXPECT_EQ(MakeWindows(2048, spec), (std::vector<std::size_t>{0}));
  EXPECT_TRUE(MakeWindows(2047, spec).empty());
  EXPECT_TRUE(MakeWindows(0, spec).empty());
}

TEST(Windows, CountFormulaMatchesEnumeration) {
  WindowSpec spec;
  spec.window_s = 3.0;
  spec.stride_s = 2.0;
  spec.sample_rate = 1.0;
  Rng rng(1);
  std::vector<std::size_t> ns{0, 1, 2, 3, 4, 5, 1000000};
  for (int i = 0; i < 200; ++i) ns.push_back(rng.UniformInt(1000001));
  for (std::size_t n : ns) {
    std::vector<std::size_t> direct;
    for (std::size_t o = 0; o + 3 <= n; o += 2) direct.push_back(o);
    const std::size_t formula = n >= 3 ? (n - 3) / 2 + 1 : 0;
    const auto got = MakeWindows(n, spec);
    ASSERT_EQ(got.size(), formula) << n;
    ASSERT_EQ(got, direct) << n;
  }
}

TEST(Windows, InvalidSpec) {
  WindowSpec s;
  s.stride_s = 0.0;
  EXPECT_ERROR_KIND(s.Validate(), ErrorKind::kConfig);
  s = WindowSpec{};
  s.threshold = 1.0;
  EXPECT_ERROR_KIND(s.Validate(), ErrorKind::kConfig);
}

TEST(Labels, SeizureAtTenSeconds) {
  const WindowSpec spec = Spec();
  const auto offsets = MakeWindows(5120, spec);
  EXPECT_EQ(LabelWindows(offsets, spec, {{10.0, 12.0, ""}}, 5120),
            (std::vector<int>{0, 1, 1, 0}));
  EXPECT_EQ(LabelWindows(offsets, spec, {}, 5120), (std::vector<int>{0, 0, 0, 0}));
  EXPECT_EQ(LabelWindows(offsets, spec, {{0.0, 20.0, ""}}, 5120), (std::vector<int>{1, 1, 1, 1}));
}

TEST(Labels, ThresholdOnOverlap) {
  const WindowSpec spec = Spec(0.25);
  const auto offsets = MakeWindows(5120, spec);
  // [10 s, 12 s) is 512 samples: exactly 0.25 * 2048, which does not exceed.
  EXPECT_EQ(LabelWindows(offsets, spec, {{10.0, 12.0, ""}}, 5120), (std::vector<int>{0, 0, 0, 0}));
  EXPECT_EQ(LabelWindows(offsets, spec, {{9.5, 12.5, ""}}, 5120), (std::vector<int>{0, 1, 1, 0}));
}

TEST(Labels, InvariantToOrderAndSplitting) {
  const WindowSpec spec = Spec(0.1);
  Rng rng(2);
  const std::size_t n = 256 * 120;
  const auto offsets = MakeWindows(n, spec);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<SeizureInterval> ivs;
    for (int k = 0; k < 3; ++k) {
      const double s = rng.Uniform(0.0, 110.0);
      ivs.push_back({s, s + rng.Uniform(0.5, 10.0), ""});
    }
    const auto base = LabelWindows(offsets, spec, ivs, n);
    auto reversed = ivs;
    std::reverse(reversed.begin(), reversed.end());
    EXPECT_EQ(LabelWindows(offsets, spec, reversed, n), base);
    std::vector<SeizureInterval> split;
    for (const auto& iv : ivs) {
      const double mid = std::floor(0.5 * (iv.start_s + iv.end_s) * 256.0) / 256.0;
      split.push_back({iv.start_s, mid, ""});
      split.push_back({mid, iv.end_s, ""});
    }
    EXPECT_EQ(LabelWindows(offsets, spec, split, n), base);
  }
}

TEST(Labels, IntervalClampedToRecording) {
  EXPECT_EQ(IntervalSamples({-5.0, 2.0, ""}, 256.0, 1000), (std::pair<std::size_t, std::size_t>{0, 512}));
  EXPECT_EQ(IntervalSamples({3.0, 99.0, ""}, 256.0, 1000),
            (std::pair<std::size_t, std::size_t>{768, 1000}));
}

TEST(Split, WindowStratifiedCounts) {
  std::vector<int> labels(100, 0);
  for (int i = 0; i < 20; ++i) labels[i * 5] = 1;
  const std::vector<std::string> groups(100, "r");
  const SplitResult s = StratifiedSplit(labels, groups, 0.2, SplitMode::kWindowStratified, 7);
  EXPECT_EQ(s.test.size(), 20u);
  std::size_t pos = 0;
  for (auto i : s.test) pos += labels[i];
  EXPECT_EQ(pos, 4u);
  std::vector<std::size_t> all = s.train;
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(all[i], i);
  EXPECT_LE(std::abs(s.test_positive_fraction - s.overall_positive_fraction), 1.0 / 20.0);
}

TEST(Split, ZeroTestFraction) {
  const std::vector<int> labels{0, 1, 0, 1};
  const std::vector<std::string> groups{"a", "b", "c", "d"};
  for (SplitMode mode : {SplitMode::kWindowStratified, SplitMode::kRecordGrouped}) {
    const SplitResult s = StratifiedSplit(labels, groups, 0.0, mode, 1);
    EXPECT_TRUE(s.test.empty());
    EXPECT_EQ(s.train.size(), 4u);
  }
}

TEST(Split, RatioBoundHoldsForRandomSets) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 20 + rng.UniformInt(500);
    std::vector<int> labels(n);
    for (auto& l : labels) l = rng.Uniform() < 0.2 ? 1 : 0;
    labels[0] = 0;
    labels[1] = 1;
    const SplitResult s =
        StratifiedSplit(labels, std::vector<std::string>(n, "r"), 0.2, SplitMode::kWindowStratified, trial);
    ASSERT_FALSE(s.test.empty());
    EXPECT_LE(std::abs(s.test_positive_fraction - s.overall_positive_fraction),
              1.0 / static_cast<double>(s.test.size()) + 1e-12);
  }
}

TEST(Split, RecordGroupedKeepsFilesDisjoint) {
  std::vector<int> labels;
  std::vector<std::string> groups;
  for (int f = 0; f < 10; ++f)
    for (int w = 0; w < 5 + f; ++w) {
      labels.push_back(f % 3 == 0 ? 1 : 0);
      groups.push_back("file" + std::to_string(f));
    }
  const SplitResult s = StratifiedSplit(labels, groups, 0.2, SplitMode::kRecordGrouped, 4);
  std::set<std::string> train, test;
  for (auto i : s.train) train.insert(groups[i]);
  for (auto i : s.test) test.insert(groups[i]);
  for (const auto& g : test) EXPECT_EQ(train.count(g), 0u) << g;
  EXPECT_EQ(s.train.size() + s.test.size(), labels.size());
  EXPECT_FALSE(s.test.empty());
}

TEST(Split, EmptyClassIsError) {
  EXPECT_ERROR_KIND(StratifiedSplit({0, 0, 0}, {"a", "a", "a"}, 0.2, SplitMode::kWindowStratified, 0),
                    ErrorKind::kSplit);
  EXPECT_ERROR_KIND(StratifiedSplit({0, 1}, {"a", "b"}, 1.5, SplitMode::kRecordGrouped, 0),
                    ErrorKind::kSplit);
}

TEST(Split, SeedDeterminism) {
  std::vector<int> labels(60, 0);
  for (int i = 0; i < 15; ++i) labels[i * 4] = 1;
  std::vector<std::string> groups;
  for (int i = 0; i < 60; ++i) groups.push_back("g" + std::to_string(i / 6));
  for (SplitMode mode : {SplitMode::kWindowStratified, SplitMode::kRecordGrouped}) {
    const auto a = StratifiedSplit(labels, groups, 0.2, mode, 9);
    const auto b = StratifiedSplit(labels, groups, 0.2, mode, 9);
    EXPECT_EQ(a.test, b.test);
    EXPECT_EQ(a.train, b.train);
  }
  EXPECT_EQ(ParseSplitMode(SplitModeName(SplitMode::kRecordGrouped)), SplitMode::kRecordGrouped);
  EXPECT_ERROR_KIND(ParseSplitMode("random"), ErrorKind::kConfig);
}

std::vector<std::size_t> Iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

TEST(Sampler, OversamplesMinority) {
  std::vector<int> labels(100, 0);
  for (int i = 80; i < 100; ++i) labels[i] = 1;
  const BalancedSampler sampler(Iota(100), labels, 32, 5);
  EXPECT_EQ(sampler.epoch_length(), 160u);
  const auto order = sampler.EpochOrder(0);
  ASSERT_EQ(order.size(), 160u);
  std::map<std::size_t, int> seen;
  std::size_t pos = 0;
  for (auto i : order) {
    pos += labels[i];
    ++seen[i];
  }
  EXPECT_EQ(pos, 80u);
  for (std::size_t i = 0; i < 80; ++i) EXPECT_EQ(seen[i], 1);
  for (std::size_t i = 80; i < 100; ++i) EXPECT_EQ(seen[i], 4);
}

TEST(Sampler, BalancedInputVisitsEachOnce) {
  std::vector<int> labels{0, 1, 0, 1, 0, 1};
  const BalancedSampler sampler(Iota(6), labels, 4, 1);
  auto order = sampler.EpochOrder(3);
  std::sort(order.begin(), order.end());
  EXPECT_EQ(order, Iota(6));
  const auto batches = sampler.Batches(3);
  ASSERT_EQ(batches.size(), 2u);
  EXPECT_EQ(batches[0].size(), 4u);
  EXPECT_EQ(batches[1].size(), 2u);
}

TEST(Sampler, DeterministicPerEpoch) {
  std::vector<int> labels(50, 0);
  for (int i = 0; i < 7; ++i) labels[i] = 1;
  const BalancedSampler a(Iota(50), labels, 8, 11), b(Iota(50), labels, 8, 11);
  EXPECT_EQ(a.Batches(0), b.Batches(0));
  EXPECT_EQ(a.Batches(1), b.Batches(1));
  EXPECT_NE(a.EpochOrder(0), a.EpochOrder(1));
}

TEST(Sampler, SingleClassIsError) {
  EXPECT_ERROR_KIND(BalancedSampler(Iota(3), {0, 0, 0}, 2, 0), ErrorKind::kSampler);
}

TEST(Npy, RoundTrip) {
  Rng rng(6);
  std::vector<double> values(3 * 4 * 5);
  for (auto& v : values) v = rng.Normal();
  const NpyArray a = DecodeNpy(EncodeNpy(Shape{3, 4, 5}, values));
  EXPECT_EQ(a.descr, "<f8");
  EXPECT_EQ(a.shape, (Shape{3, 4, 5}));
  EXPECT_EQ(a.f64, values);
  const std::vector<std::int64_t> ints{1, -2, 3};
  const NpyArray b = DecodeNpy(EncodeNpy(Shape{3}, ints));
  EXPECT_EQ(b.descr, "<i8");
  EXPECT_EQ(b.i64, ints);
}

TEST(Npy, HeaderLayout) {
  const auto bytes = EncodeNpy(Shape{2}, std::vector<double>{1.0, 2.0});
  EXPECT_EQ(bytes[0], 0x93);
  EXPECT_EQ(std::string(bytes.begin() + 1, bytes.begin() + 6), "NUMPY");
  EXPECT_EQ(bytes[6], 1);
  EXPECT_EQ(bytes[7], 0);
  const std::size_t header_len = bytes[8] | (bytes[9] << 8);
  EXPECT_EQ((10 + header_len) % 64, 0u);
  EXPECT_EQ(bytes[10 + header_len - 1], '\n');
  const std::string header(bytes.begin() + 10, bytes.begin() + 10 + static_cast<long>(header_len));
  EXPECT_NE(header.find("'fortran_order': False"), std::string::npos);
  EXPECT_NE(header.find("'shape': (2,)"), std::string::npos);
  EXPECT_EQ(bytes.size(), 10 + header_len + 16);
}

TEST(Npy, EmptyArray) {
  const NpyArray a = DecodeNpy(EncodeNpy(Shape{0, 18, 2048}, std::vector<double>{}));
  EXPECT_EQ(a.shape, (Shape{0, 18, 2048}));
  EXPECT_TRUE(a.f64.empty());
}

TEST(Npy, CorruptInput) {
  auto bytes = EncodeNpy(Shape{2}, std::vector<double>{1.0, 2.0});
  auto magic = bytes;
  magic[1] = 'X';
  EXPECT_ERROR_KIND(DecodeNpy(magic), ErrorKind::kFormat);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_ERROR_KIND(DecodeNpy(truncated), ErrorKind::kFormat);
}

TEST(WindowedDataset, AppendAndBatch) {
  WindowedDataset ds;
  ds.channels = 2;
  ds.window_len = 3;
  ds.Append(std::vector<double>{1, 2, 3, 4, 5, 6}, 1, {"a.edf", "p", 0});
  ds.Append(std::vector<double>{7, 8, 9, 10, 11, 12}, 0, {"a.edf", "p", 3});
  EXPECT_EQ(ds.positives(), 1u);
  const Tensor b = ds.Batch({1, 0});
  EXPECT_EQ(b.shape(), (Shape{2, 2, 3}));
  EXPECT_EQ(b[0], 7.0);
  EXPECT_EQ(b[6], 1.0);
  EXPECT_EQ(ds.BatchLabels({1, 0}), (std::vector<int>{0, 1}));
  EXPECT_ERROR_KIND(ds.Append(std::vector<double>{1, 2}, 0, {}), ErrorKind::kDimension);
}

TEST(WindowedDataset, AppendWindowsFromRecording) {
  Recording rec;
  rec.sample_rate = 256.0;
  rec.labels.assign(2, "x");
  rec.data = Tensor(Shape{2, 5120});
  for (std::size_t t = 0; t < 5120; ++t) rec.data.at({1, t}) = static_cast<double>(t);
  rec.source = "chb01_03.edf";
  WindowedDataset ds;
  EXPECT_EQ(AppendWindows(rec, WindowSpec{}, {{10.0, 12.0, ""}}, "chb01", ds), 4u);
  EXPECT_EQ(ds.labels, (std::vector<int>{0, 1, 1, 0}));
  EXPECT_EQ(ds.info[2], (WindowInfo{"chb01_03.edf", "chb01", 2048}));
  EXPECT_EQ(ds.Batch({2}).at({0, 1, 0}), 2048.0);
}

}  // namespace
}  // namespace convmamba
