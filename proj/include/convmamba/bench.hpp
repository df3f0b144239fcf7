#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "convmamba/model.hpp"
#include "convmamba/scan.hpp"
#include "convmamba/synth.hpp"

namespace convmamba {

struct BenchOptions {
  std::size_t repetitions = 3;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  // Also time the same pipeline with the Mamba block replaced by the
  // parameter-matched dense block.
  bool baseline = true;
};

struct BenchSample {
  std::string model;  // "mamba" or "dense"
  std::size_t params = 0;
  std::size_t n_windows = 0;
  std::size_t repetition = 0;
  double seconds = 0.0;
};

struct BenchSummary {
  std::string model;
  std::size_t samples = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for one sample
  double min = 0.0;
  double max = 0.0;
};

struct BenchReport {
  std::vector<BenchSample> samples;
  std::vector<BenchSummary> summaries;
};

// Wall-clock time of one training epoch on fixed synthetic data, repeated
// from the same initial state.
BenchReport BenchEpoch(const ModelConfig& config, const SynthSpec& data,
                       const BenchOptions& options);

BenchSummary Summarize(const std::string& model, const std::vector<double>& seconds);

// model,params,n_windows,repetition,seconds
std::string BenchCsv(const BenchReport& report);

// Only the benchmarks offer single precision; everything else runs in double.
enum class Precision { kF64, kF32 };

struct ScanTiming {
  Precision precision = Precision::kF64;
  std::size_t length = 0;
  double seconds = 0.0;  // best of the repetitions
};

// Times the sequential selective scan on one random [1 x L x d_inner]
// sequence per length.
std::vector<ScanTiming> ScanBench(const std::vector<std::size_t>& lengths,
                                  std::size_t d_inner = 32, std::size_t d_state = 16,
                                  std::size_t repetitions = 5, std::uint64_t seed = 0,
                                  Precision precision = Precision::kF64);

// Single-precision copy of the sequential scan recurrence, for timing.
std::vector<float> SelectiveScanSequentialF32(const ScanInputs& in);

// time(2L) / time(L) for the sequential scan. The two lengths are timed
// alternately and each keeps its best run, so background load affects both.
double ScanScalingRatio(std::size_t length, std::size_t repetitions = 9,
                        std::size_t d_inner = 16, std::size_t d_state = 16,
                        std::uint64_t seed = 0);

// precision,length,seconds
std::string ScanBenchCsv(const std::vector<ScanTiming>& timings);

}  // namespace convmamba
