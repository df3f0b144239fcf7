#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "convmamba/annotations.hpp"
#include "convmamba/edf.hpp"
#include "convmamba/tensor.hpp"

namespace convmamba {

struct WindowSpec {
  double window_s = 8.0;
  double stride_s = 4.0;
  double sample_rate = 256.0;
  // A window is a seizure window when its seizure overlap (in samples)
  // exceeds threshold * window_len; 0 means any overlap.
  double threshold = 0.0;

  std::size_t window_len() const;
  std::size_t stride_len() const;
  void Validate() const;
};

// Window start offsets {0, S, 2S, ...} with o + W <= n_samples.
std::vector<std::size_t> MakeWindows(std::size_t n_samples, const WindowSpec& spec);

// Half-open sample range [first, last) covered by an interval, clamped to
// [0, n_samples). Sample t is inside when start_s <= t / rate < end_s.
std::pair<std::size_t, std::size_t> IntervalSamples(const SeizureInterval& iv,
                                                    double sample_rate,
                                                    std::size_t n_samples);

std::vector<int> LabelWindows(const std::vector<std::size_t>& offsets,
                              const WindowSpec& spec,
                              const std::vector<SeizureInterval>& intervals,
                              std::size_t n_samples);

struct WindowInfo {
  std::string source;
  std::string patient;
  std::size_t start_sample = 0;

  bool operator==(const WindowInfo&) const = default;
};

// Windows stored contiguously as [n x channels x window_len].
struct WindowedDataset {
  std::size_t channels = 0;
  std::size_t window_len = 0;
  std::vector<double> data;
  std::vector<int> labels;
  std::vector<WindowInfo> info;

  std::size_t size() const { return labels.size(); }
  std::size_t positives() const;
  // Stacks the selected windows into [k x channels x window_len].
  Tensor Batch(const std::vector<std::size_t>& indices) const;
  std::vector<int> BatchLabels(const std::vector<std::size_t>& indices) const;
  void Append(std::span<const double> window, int label, WindowInfo info);
  void Validate() const;
};

// Cuts rec into labeled windows and appends them to out. Returns the number
// of windows added.
std::size_t AppendWindows(const Recording& rec, const WindowSpec& spec,
                          const std::vector<SeizureInterval>& intervals,
                          const std::string& patient, WindowedDataset& out);

enum class SplitMode { kWindowStratified, kRecordGrouped };

const char* SplitModeName(SplitMode mode);
SplitMode ParseSplitMode(const std::string& name);

struct SplitResult {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  SplitMode mode = SplitMode::kRecordGrouped;
  std::uint64_t seed = 0;
  double achieved_test_fraction = 0.0;
  double test_positive_fraction = 0.0;
  double overall_positive_fraction = 0.0;
};

// Window-stratified: per class, a seeded shuffle sends round(count * frac)
// windows to test. Record-grouped: whole recordings (by source) are assigned
// greedily, in seeded order, to approach the target per-class test counts.
SplitResult StratifiedSplit(const std::vector<int>& labels,
                            const std::vector<std::string>& groups,
                            double test_frac, SplitMode mode, std::uint64_t seed);

// Epoch streams with a 1:1 class ratio. The majority class appears exactly
// once per epoch; the minority class is repeated in whole shuffled passes
// plus a seeded sample without replacement for the remainder.
class BalancedSampler {
 public:
  BalancedSampler(const std::vector<std::size_t>& indices,
                  const std::vector<int>& labels, std::size_t batch_size,
                  std::uint64_t seed);

  std::size_t epoch_length() const { return 2 * majority_count_; }
  std::vector<std::size_t> EpochOrder(std::size_t epoch) const;
  std::vector<std::vector<std::size_t>> Batches(std::size_t epoch) const;

 private:
  std::vector<std::size_t> positives_;
  std::vector<std::size_t> negatives_;
  std::size_t majority_count_ = 0;
  std::size_t batch_size_;
  std::uint64_t seed_;
};

// NPY v1.0 container.
struct NpyArray {
  std::string descr;  // "<f8" or "<i8"
  Shape shape;
  std::vector<double> f64;
  std::vector<std::int64_t> i64;
};

std::vector<std::uint8_t> EncodeNpy(const Shape& shape, std::span<const double> values);
std::vector<std::uint8_t> EncodeNpy(const Shape& shape, std::span<const std::int64_t> values);
NpyArray DecodeNpy(std::span<const std::uint8_t> bytes);

// Writes data.npy [n x C x W] (<f8), labels.npy [n] (<i8) and windows.csv
// (index,source,patient,start_sample,label) into dir.
void SaveWindows(const std::filesystem::path& dir, const WindowedDataset& ds);
WindowedDataset LoadWindows(const std::filesystem::path& dir);

}  // namespace convmamba
