#include <algorithm>
#include <cmath>

#include "convmamba/dataset.hpp"
#include "convmamba/error.hpp"

namespace convmamba {
namespace {

std::size_t ExactSamples(double seconds, double rate, const char* what) {
  const double n = seconds * rate;
  const double rounded = std::round(n);
  if (n <= 0.0 || std::abs(n - rounded) > 1e-9) {
    Fail(ErrorKind::kConfig, std::string(what) + " of " + std::to_string(seconds) +
                                 " s is not a whole number of samples at " +
                                 std::to_string(rate) + " Hz");
  }
  return static_cast<std::size_t>(rounded);
}

}  // namespace

std::size_t WindowSpec::window_len() const {
  return ExactSamples(window_s, sample_rate, "window");
}

std::size_t WindowSpec::stride_len() const {
  return ExactSamples(stride_s, sample_rate, "stride");
}

void WindowSpec::Validate() const {
  if (!(sample_rate > 0.0)) Fail(ErrorKind::kConfig, "sample rate must be positive");
  if (stride_len() > window_len()) Fail(ErrorKind::kConfig, "stride exceeds window length");
  if (!(threshold >= 0.0 && threshold < 1.0)) {
    Fail(ErrorKind::kConfig, "label threshold must lie in [0, 1)");
  }
}

std::vector<std::size_t> MakeWindows(std::size_t n_samples, const WindowSpec& spec) {
  const std::size_t w = spec.window_len();
  const std::size_t s = spec.stride_len();
  std::vector<std::size_t> offsets;
  if (n_samples < w) return offsets;
  offsets.reserve((n_samples - w) / s + 1);
  for (std::size_t o = 0; o + w <= n_samples; o += s) offsets.push_back(o);
  return offsets;
}

std::pair<std::size_t, std::size_t> IntervalSamples(const SeizureInterval& iv,
                                                    double sample_rate,
                                                    std::size_t n_samples) {
  const double n = static_cast<double>(n_samples);
  const double first = std::clamp(std::ceil(iv.start_s * sample_rate), 0.0, n);
  const double last = std::clamp(std::ceil(iv.end_s * sample_rate), 0.0, n);
  return {static_cast<std::size_t>(first), static_cast<std::size_t>(std::max(first, last))};
}

std::vector<int> LabelWindows(const std::vector<std::size_t>& offsets,
                              const WindowSpec& spec,
                              const std::vector<SeizureInterval>& intervals,
                              std::size_t n_samples) {
  // Union of intervals as sorted disjoint sample ranges.
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (const auto& iv : intervals) {
    auto r = IntervalSamples(iv, spec.sample_rate, n_samples);
    if (r.first < r.second) ranges.push_back(r);
  }
  std::sort(ranges.begin(), ranges.end());
  std::vector<std::pair<std::size_t, std::size_t>> merged;
  for (const auto& r : ranges) {
    if (!merged.empty() && r.first <= merged.back().second) {
      merged.back().second = std::max(merged.back().second, r.second);
    } else {
      merged.push_back(r);
    }
  }

  const std::size_t w = spec.window_len();
  const double min_overlap = spec.threshold * static_cast<double>(w);
  std::vector<int> labels;
  labels.reserve(offsets.size());
  for (std::size_t o : offsets) {
    std::size_t overlap = 0;
    for (const auto& [a, b] : merged) {
      const std::size_t lo = std::max(a, o);
      const std::size_t hi = std::min(b, o + w);
      if (lo < hi) overlap += hi - lo;
    }
    labels.push_back(overlap > 0 && static_cast<double>(overlap) > min_overlap ? 1 : 0);
  }
  return labels;
}

std::size_t WindowedDataset::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

Tensor WindowedDataset::Batch(const std::vector<std::size_t>& indices) const {
  const std::size_t stride = channels * window_len;
  Tensor out(Shape{indices.size(), channels, window_len});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= size()) Fail(ErrorKind::kData, "window index out of range");
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(indices[k] * stride), stride,
                out.data().begin() + static_cast<std::ptrdiff_t>(k * stride));
  }
  return out;
}

std::vector<int> WindowedDataset::BatchLabels(const std::vector<std::size_t>& indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels.at(i));
  return out;
}

void WindowedDataset::Append(std::span<const double> window, int label, WindowInfo window_info) {
  if (window.size() != channels * window_len) {
    Fail(ErrorKind::kDimension, "window has " + std::to_string(window.size()) +
                                    " values, dataset expects " +
                                    std::to_string(channels * window_len));
  }
  if (label != 0 && label != 1) Fail(ErrorKind::kData, "window label must be 0 or 1");
  data.insert(data.end(), window.begin(), window.end());
  labels.push_back(label);
  info.push_back(std::move(window_info));
}

void WindowedDataset::Validate() const {
  if (data.size() != labels.size() * channels * window_len || info.size() != labels.size()) {
    Fail(ErrorKind::kData, "dataset arrays disagree in length");
  }
  for (int l : labels) {
    if (l != 0 && l != 1) Fail(ErrorKind::kData, "window label must be 0 or 1");
  }
}

std::size_t AppendWindows(const Recording& rec, const WindowSpec& spec,
                          const std::vector<SeizureInterval>& intervals,
                          const std::string& patient, WindowedDataset& out) {
  const std::size_t n = rec.n_samples();
  const std::size_t w = spec.window_len();
  if (out.size() == 0 && out.data.empty()) {
    out.channels = rec.n_channels();
    out.window_len = w;
  }
  if (out.channels != rec.n_channels() || out.window_len != w) {
    Fail(ErrorKind::kDimension, "recording '" + rec.source + "' does not match dataset layout");
  }
  const auto offsets = MakeWindows(n, spec);
  const auto labels = LabelWindows(offsets, spec, intervals, n);
  std::vector<double> window(out.channels * w);
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    for (std::size_t c = 0; c < out.channels; ++c) {
      std::copy_n(rec.data.data().begin() + static_cast<std::ptrdiff_t>(c * n + offsets[k]), w,
                  window.begin() + static_cast<std::ptrdiff_t>(c * w));
    }
    out.Append(window, labels[k], WindowInfo{rec.source, patient, offsets[k]});
  }
  return offsets.size();
}

}  // namespace convmamba
