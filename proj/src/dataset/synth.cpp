#include "convmamba/synth.hpp"

#include <cmath>
#include <numbers>

#include "convmamba/error.hpp"
#include "convmamba/rng.hpp"

namespace convmamba {

void SynthSpec::Validate() const {
  if (n_windows == 0 || channels == 0 || window_len == 0) {
    Fail(ErrorKind::kConfig, "synthetic dataset dimensions must be positive");
  }
  if (n_positive > n_windows) Fail(ErrorKind::kConfig, "n_positive exceeds n_windows");
  if (!(sample_rate > 0.0) || !(burst_s > 0.0) || !(noise_std >= 0.0)) {
    Fail(ErrorKind::kConfig, "sample_rate and burst_s must be positive, noise_std non-negative");
  }
}

WindowedDataset MakeSynthetic(const SynthSpec& spec, std::uint64_t seed) {
  spec.Validate();
  Rng rng(seed);
  WindowedDataset ds;
  ds.channels = spec.channels;
  ds.window_len = spec.window_len;
  const auto burst_len = std::min(
      spec.window_len, static_cast<std::size_t>(std::lround(spec.burst_s * spec.sample_rate)));
  std::vector<double> window(spec.channels * spec.window_len);
  for (std::size_t w = 0; w < spec.n_windows; ++w) {
    const int label = w < spec.n_positive ? 1 : 0;
    for (auto& v : window) v = rng.Normal(0.0, spec.noise_std);
    if (label == 1) {
      const std::size_t onset = rng.UniformInt(spec.window_len - burst_len + 1);
      for (std::size_t c = 0; c < spec.channels; ++c) {
        const double phase = rng.Uniform(0.0, 2.0 * std::numbers::pi);
        for (std::size_t t = onset; t < onset + burst_len; ++t) {
          window[c * spec.window_len + t] +=
              spec.amplitude *
              std::sin(2.0 * std::numbers::pi * spec.burst_hz *
                           static_cast<double>(t) / spec.sample_rate + phase);
        }
      }
    }
    ds.Append(window, label, {"synthetic", "synthetic", w * spec.window_len});
  }
  return ds;
}

ModelConfig SynthModelConfig() {
  ModelConfig c;
  c.in_channels = 18;
  c.window_len = 256;
  c.d_model = 16;
  c.mamba.d_state = 8;
  c.conv_stack = {{16, 7, 4}, {16, 5, 4}};
  c.fc_hidden = 16;
  return c;
}

}  // namespace convmamba
