#include "convmamba/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "convmamba/error.hpp"
#include "convmamba/scan.hpp"
#include "convmamba/trainer.hpp"

namespace convmamba {
namespace {

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

ScanInputs RandomScan(std::size_t len, std::size_t d_inner, std::size_t d_state, Rng& rng) {
  ScanInputs in{Tensor(Shape{1, len, d_inner}), Tensor(Shape{1, len, d_inner}),
                Tensor(Shape{1, len, d_state}), Tensor(Shape{1, len, d_state}),
                Tensor(Shape{d_inner, d_state}), Tensor(Shape{d_inner}, 1.0)};
  for (auto& v : in.u.data()) v = rng.Normal();
  for (auto& v : in.delta.data()) v = rng.Uniform(0.001, 0.1);
  for (auto& v : in.b_t.data()) v = rng.Normal();
  for (auto& v : in.c_t.data()) v = rng.Normal();
  for (auto& v : in.a.data()) v = -rng.Uniform(0.5, 4.0);
  return in;
}

double TimeScan(const ScanInputs& in, Precision precision = Precision::kF64) {
  const auto started = std::chrono::steady_clock::now();
  double last = 0.0;
  if (precision == Precision::kF64) {
    const Tensor y = SelectiveScanSequential(in);
    last = y[y.numel() - 1];
  } else {
    const std::vector<float> y = SelectiveScanSequentialF32(in);
    last = y.back();
  }
  const double s = Seconds(started);
  volatile double sink = last;
  (void)sink;
  return s;
}

}  // namespace

BenchSummary Summarize(const std::string& model, const std::vector<double>& seconds) {
  BenchSummary s;
  s.model = model;
  s.samples = seconds.size();
  if (seconds.empty()) return s;
  const double n = static_cast<double>(seconds.size());
  s.mean = std::accumulate(seconds.begin(), seconds.end(), 0.0) / n;
  s.min = *std::min_element(seconds.begin(), seconds.end());
  s.max = *std::max_element(seconds.begin(), seconds.end());
  if (seconds.size() > 1) {
    double ss = 0.0;
    for (double v : seconds) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

BenchReport BenchEpoch(const ModelConfig& config, const SynthSpec& data,
                       const BenchOptions& options) {
  if (options.repetitions == 0) Fail(ErrorKind::kConfig, "repetitions must be positive");
  if (data.channels != config.in_channels || data.window_len != config.window_len) {
    Fail(ErrorKind::kConfig, "synthetic windows do not match the model input");
  }
  const WindowedDataset ds = MakeSynthetic(data, options.seed);
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), 0);

  std::vector<ModelConfig> variants{config};
  if (options.baseline) {
    variants.push_back(config);
    variants.back().temporal = TemporalBlock::kDense;
  }
  BenchReport report;
  for (const ModelConfig& variant : variants) {
    const std::string name = variant.temporal == TemporalBlock::kMamba ? "mamba" : "dense";
    Rng init(options.seed);
    const ModelParams initial = InitModel(variant, init);
    TrainConfig train;
    train.epochs = 1;
    train.batch_size = options.batch_size;
    train.seed = options.seed;
    std::vector<double> seconds;
    for (std::size_t rep = 0; rep < options.repetitions; ++rep) {
      ModelParams params = initial;
      const auto started = std::chrono::steady_clock::now();
      TrainFrom(params, variant, ds, all, {}, train);
      seconds.push_back(Seconds(started));
      report.samples.push_back({name, CountParams(initial), ds.size(), rep + 1, seconds.back()});
    }
    report.summaries.push_back(Summarize(name, seconds));
  }
  return report;
}

std::string BenchCsv(const BenchReport& report) {
  std::ostringstream out;
  out << "model,params,n_windows,repetition,seconds\n";
  for (const auto& s : report.samples) {
    out << s.model << ',' << s.params << ',' << s.n_windows << ',' << s.repetition << ','
        << s.seconds << '\n';
  }
  return out.str();
}

std::vector<ScanTiming> ScanBench(const std::vector<std::size_t>& lengths, std::size_t d_inner,
                                  std::size_t d_state, std::size_t repetitions,
                                  std::uint64_t seed, Precision precision) {
  if (repetitions == 0) Fail(ErrorKind::kConfig, "repetitions must be positive");
  Rng rng(seed);
  std::vector<ScanTiming> out;
  for (std::size_t len : lengths) {
    const ScanInputs in = RandomScan(len, d_inner, d_state, rng);
    double best = INFINITY;
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
      best = std::min(best, TimeScan(in, precision));
    }
    out.push_back({precision, len, best});
  }
  return out;
}

std::vector<float> SelectiveScanSequentialF32(const ScanInputs& in) {
  ValidateScanInputs(in);
  const std::size_t nb = in.u.dim(0), len = in.u.dim(1), ni = in.u.dim(2), ns = in.a.dim(1);
  auto narrow = [](const Tensor& t) { return std::vector<float>(t.data().begin(), t.data().end()); };
  const auto u = narrow(in.u), delta = narrow(in.delta), bt = narrow(in.b_t), ct = narrow(in.c_t),
             a = narrow(in.a), skip = narrow(in.skip);
  std::vector<float> y(nb * len * ni), h(ni * ns);
  for (std::size_t b = 0; b < nb; ++b) {
    std::fill(h.begin(), h.end(), 0.0f);
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t row = b * len + t;
      for (std::size_t d = 0; d < ni; ++d) {
        const float dt = delta[row * ni + d], ut = u[row * ni + d];
        float acc = 0.0f;
        for (std::size_t n = 0; n < ns; ++n) {
          float& hn = h[d * ns + n];
          hn = std::exp(dt * a[d * ns + n]) * hn + dt * bt[row * ns + n] * ut;
          acc += ct[row * ns + n] * hn;
        }
        y[row * ni + d] = acc + skip[d] * ut;
      }
    }
  }
  return y;
}

double ScanScalingRatio(std::size_t length, std::size_t repetitions, std::size_t d_inner,
                        std::size_t d_state, std::uint64_t seed) {
  if (repetitions == 0 || length == 0) {
    Fail(ErrorKind::kConfig, "length and repetitions must be positive");
  }
  Rng rng(seed);
  const ScanInputs shorter = RandomScan(length, d_inner, d_state, rng);
  const ScanInputs longer = RandomScan(2 * length, d_inner, d_state, rng);
  double best_short = INFINITY, best_long = INFINITY;
  TimeScan(shorter);  // warm-up
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    best_short = std::min(best_short, TimeScan(shorter));
    best_long = std::min(best_long, TimeScan(longer));
  }
  return best_long / best_short;
}

std::string ScanBenchCsv(const std::vector<ScanTiming>& timings) {
  std::ostringstream out;
  out << "precision,length,seconds\n";
  for (const auto& t : timings) {
    out << (t.precision == Precision::kF64 ? "f64" : "f32") << ',' << t.length << ','
        << t.seconds << '\n';
  }
  return out.str();
}

}  // namespace convmamba
