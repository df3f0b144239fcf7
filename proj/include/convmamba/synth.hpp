#pragma once

#include <cstddef>
#include <cstdint>

#include "convmamba/dataset.hpp"
#include "convmamba/model.hpp"

namespace convmamba {

// Separable two-class windows: class 1 carries a sinusoid burst on every
// channel on top of the noise that makes up class 0.
struct SynthSpec {
  std::size_t n_windows = 64;
  std::size_t n_positive = 32;
  std::size_t channels = 18;
  std::size_t window_len = 256;
  double sample_rate = 256.0;
  double burst_hz = 10.0;
  double burst_s = 0.5;
  double amplitude = 1.0;
  double noise_std = 0.5;

  void Validate() const;
};

// Positives are the first n_positive windows. Deterministic in seed.
WindowedDataset MakeSynthetic(const SynthSpec& spec, std::uint64_t seed);

// Model sized for SynthSpec defaults: 18 x 256 input, pooled length 16.
ModelConfig SynthModelConfig();

}  // namespace convmamba
