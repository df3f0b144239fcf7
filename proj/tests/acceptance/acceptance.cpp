// Acceptance checks. Prints one PASS / FAIL / SKIP line per criterion and
// exits non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "convmamba/annotations.hpp"
#include "convmamba/bench.hpp"
#include "convmamba/binary_io.hpp"
#include "convmamba/channels.hpp"
#include "convmamba/commands.hpp"
#include "convmamba/dataset.hpp"
#include "convmamba/edf.hpp"
#include "convmamba/error.hpp"
#include "convmamba/gradcheck.hpp"
#include "convmamba/log.hpp"
#include "convmamba/mamba.hpp"
#include "convmamba/metrics.hpp"
#include "convmamba/model.hpp"
#include "convmamba/ops.hpp"
#include "convmamba/scan.hpp"
#include "json.hpp"

namespace convmamba {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  enum { kPass, kFail, kSkip } status;
  std::string detail;
};

Outcome Pass(std::string d) { return {Outcome::kPass, std::move(d)}; }
Outcome Fail(std::string d) { return {Outcome::kFail, std::move(d)}; }
Outcome Check(bool ok, std::string d) { return {ok ? Outcome::kPass : Outcome::kFail, std::move(d)}; }

double Since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string Fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

Tensor Random(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.Uniform(lo, hi);
  return t;
}

fs::path ScratchDir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("convmamba_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Outcome GradientSuite() {
  const auto t0 = Clock::now();
  const auto rows = RunGradCheckSuite();
  const double secs = Since(t0);
  std::size_t failed = 0, model_seeds = 0;
  double worst = 0.0;
  for (const auto& r : rows) {
    failed += !r.pass;
    worst = std::max(worst, r.max_rel_err);
    model_seeds += r.check == "model";
  }
  return Check(failed == 0 && model_seeds >= 5 && secs < 120.0,
               std::to_string(rows.size()) + " checks, " + std::to_string(failed) +
                   " failed, worst rel err " + Fmt(worst) + ", " + std::to_string(model_seeds) +
                   " model seeds, " + Fmt(secs) + " s");
}

Outcome ScanEquivalence() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  const std::size_t fixed[] = {1, 2, 3, 17, 64, 1000};
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t len = i < 6 ? fixed[i] : 1 + rng.UniformInt(500);
    const std::size_t nb = 1 + rng.UniformInt(2), ni = 1 + rng.UniformInt(8), ns = 1 + rng.UniformInt(8);
    ScanInputs in;
    in.u = Random({nb, len, ni}, rng);
    in.delta = Random({nb, len, ni}, rng, 1e-3, 1.0);
    in.b_t = Random({nb, len, ns}, rng);
    in.c_t = Random({nb, len, ns}, rng);
    in.a = Random({ni, ns}, rng, -3.0, 0.0);
    in.skip = Random({ni}, rng);
    const Tensor s = SelectiveScanSequential(in), p = SelectiveScanParallel(in);
    for (std::size_t k = 0; k < s.numel(); ++k) worst = std::max(worst, std::abs(s[k] - p[k]));
  }
  const double secs = Since(t0);
  return Check(worst <= 1e-10 && secs < 30.0,
               "100 instances, max |par - seq| " + Fmt(worst) + ", " + Fmt(secs) + " s");
}

Outcome ShapeContract() {
  Rng rng(3);
  MambaConfig config;  // d_model 16, d_state 16, d_conv 4, expand 2
  const MambaParams p = InitMamba(config, rng);
  const std::pair<std::size_t, std::size_t> cases[] = {{2, 64}, {1, 1}, {4, 128}, {3, 7}};
  for (auto [b, l] : cases) {
    const Tensor y = MambaBlockForward(Random({b, l, 16}, rng), p, config);
    if (y.shape() != Shape{b, l, 16}) return Fail("got " + ShapeString(y.shape()));
    for (double v : y.data())
      if (!std::isfinite(v)) return Fail("non-finite output");
  }
  return Pass("(B, L, 16) preserved for (2,64) (1,1) (4,128) (3,7)");
}

// softplus(b) = 0.001 solved by bisection.
double DtBiasOracle() {
  double lo = -50.0, hi = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (std::log1p(std::exp(mid)) < 0.001 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Outcome InitAudit() {
  ModelConfig config;
  config.attention.enabled = true;
  config.n_mamba_layers = 2;
  Rng rng(4);
  const ModelParams p = InitModel(config, rng);
  std::vector<std::string> problems;
  for (const auto& m : p.mamba) {
    const Tensor a = StateMatrix(m.a_log);
    for (double v : a.data())
      if (!(v < 0.0)) problems.push_back("A not negative");
    for (double v : m.conv_b.data())
      if (v != 0.0) problems.push_back("mamba conv bias");
    for (double v : m.dt_proj_b.data())
      if (std::abs(v - DtBiasOracle()) > 1e-6) problems.push_back("dt bias");
  }
  for (const auto& s : p.conv) {
    for (double v : s.b.data())
      if (v != 0.0) problems.push_back("conv bias");
    for (double v : s.gamma.data())
      if (v != 1.0) problems.push_back("gamma");
    for (double v : s.beta.data())
      if (v != 0.0) problems.push_back("beta");
  }
  auto glorot = [&](const Tensor& w, const char* name) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w.dim(0) + w.dim(1)));
    for (double v : w.data())
      if (std::abs(v) > bound) problems.push_back(name);
  };
  glorot(p.fc1_w, "fc1");
  glorot(p.fc2_w, "fc2");
  for (const Tensor* w : {&p.attention->wq, &p.attention->wk, &p.attention->wv, &p.attention->wo})
    glorot(*w, "attention");
  if (!problems.empty()) return Fail("violations, first: " + problems.front());
  std::ostringstream d;
  d.precision(10);
  d << "A < 0, biases 0, gamma 1, beta 0, Glorot bounds hold, dt bias " << p.mamba[0].dt_proj_b[0]
    << " vs softplus^-1(0.001) " << DtBiasOracle();
  return Pass(d.str());
}

struct LogRow {
  double loss, acc;
};

std::vector<LogRow> ReadTrainLog(const fs::path& path) {
  std::istringstream in(ReadTextFile(path));
  std::string line;
  std::getline(in, line);
  std::vector<LogRow> rows;
  while (std::getline(in, line)) {
    std::istringstream f(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(f, cell, ',')) cells.push_back(cell);
    rows.push_back({std::stod(cells[1]), std::stod(cells[2])});
  }
  return rows;
}

Outcome SyntheticOverfit() {
  const auto t0 = Clock::now();
  const fs::path dir = ScratchDir("overfit");
  RunConfig c;
  c.Set("seed", "11");
  c.out = (dir / "data").string();
  CmdSynth(c);
  c.dataset = c.out;
  c.test_frac = 0.0;
  c.train.epochs = 200;
  c.out = (dir / "full").string();
  CmdTrain(c);
  const auto full = ReadTrainLog(dir / "full" / "train_log.csv");
  std::size_t reached = 0;
  for (std::size_t e = 0; e < full.size() && !reached; ++e)
    if (full[e].acc >= 0.95) reached = e + 1;

  // A shorter run with the same seed must reproduce the first epochs exactly.
  c.train.epochs = 20;
  c.out = (dir / "short").string();
  CmdTrain(c);
  const auto part = ReadTrainLog(dir / "short" / "train_log.csv");
  bool same = part.size() == 20;
  for (std::size_t e = 0; same && e < part.size(); ++e)
    same = part[e].loss == full[e].loss && part[e].acc == full[e].acc;
  same = same && ReadFileBytes(dir / "short" / "model.ckpt") ==
                     ReadFileBytes(dir / "full" / "epoch_020.ckpt");
  fs::remove_all(dir);
  const double secs = Since(t0);
  return Check(reached > 0 && same && secs < 600.0,
               std::string(reached ? "train accuracy >= 0.95 at epoch " + std::to_string(reached)
                                   : "never reached 0.95") +
                   ", final " + Fmt(full.back().acc) + ", same-seed rerun " +
                   (same ? "identical" : "differs") + ", " + Fmt(secs) + " s");
}

Outcome PreprocessFixture() {
  // 20 s recording written as EDF and read back through the full path.
  EdfHeader h;
  h.n_records = 20;
  std::vector<std::vector<std::int16_t>> samples;
  Rng rng(6);
  for (const auto& label : ChannelMap::Standard().required) {
    EdfSignalHeader s;
    s.label = label;
    s.physical_min = -500;
    s.physical_max = 500;
    s.digital_min = -32768;
    s.digital_max = 32767;
    s.samples_per_record = 256;
    h.signals.push_back(s);
    std::vector<std::int16_t> v(5120);
    for (auto& x : v) x = static_cast<std::int16_t>(static_cast<int>(rng.UniformInt(2001)) - 1000);
    samples.push_back(std::move(v));
  }
  const Recording rec =
      MapChannels(ToRecording(ParseEdf(WriteEdf(h, samples)), "fixture.edf"), ChannelMap::Standard());
  const auto files = ParseSummary(
      "File Name: fixture.edf\nNumber of Seizures in File: 1\n"
      "Seizure Start Time: 10 seconds\nSeizure End Time: 12 seconds\n");
  WindowedDataset ds;
  AppendWindows(rec, WindowSpec{}, files.at(0).intervals, "p", ds);
  const bool windows_ok = ds.size() == 4 && ds.labels == std::vector<int>{0, 1, 1, 0};

  std::vector<int> labels(100, 0);
  for (int i = 0; i < 20; ++i) labels[i * 5] = 1;
  const SplitResult split =
      StratifiedSplit(labels, std::vector<std::string>(100, "r"), 0.2, SplitMode::kWindowStratified, 6);
  std::size_t pos = 0;
  for (auto i : split.test) pos += static_cast<std::size_t>(labels[i]);
  const bool split_ok = split.test.size() == 20 && pos == 4;
  std::ostringstream d;
  d << ds.size() << " windows, labels [";
  for (std::size_t i = 0; i < ds.labels.size(); ++i) d << (i ? "," : "") << ds.labels[i];
  d << "]; stratified split test " << split.test.size() << " with " << pos << " positive";
  return Check(windows_ok && split_ok, d.str());
}

template <typename Fn>
bool RaisesStructured(Fn&& fn, ErrorKind kind) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind() == kind && (e.byte_offset() || e.line() || kind == ErrorKind::kFormat);
  }
  return false;
}

Outcome ParserRoundTrips() {
  Rng rng(7);
  std::size_t edf_ok = 0, npy_ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    EdfHeader h;
    h.patient_id = "P" + std::to_string(trial);
    h.n_records = static_cast<std::int64_t>(rng.UniformInt(4));
    const std::size_t ns = 1 + rng.UniformInt(6);
    std::vector<std::vector<std::int16_t>> samples(ns);
    for (std::size_t i = 0; i < ns; ++i) {
      EdfSignalHeader s;
      s.label = "S" + std::to_string(i);
      s.physical_min = -static_cast<double>(1 + rng.UniformInt(999));
      s.physical_max = static_cast<double>(1 + rng.UniformInt(999));
      s.digital_min = -32768;
      s.digital_max = 32767;
      s.samples_per_record = 1 + static_cast<std::int64_t>(rng.UniformInt(64));
      for (std::int64_t k = 0; k < s.samples_per_record * h.n_records; ++k)
        samples[i].push_back(static_cast<std::int16_t>(rng.NextU64()));
      h.signals.push_back(s);
    }
    h.header_bytes = static_cast<std::int64_t>(256 * (ns + 1));
    const auto bytes = WriteEdf(h, samples);
    const EdfFile back = ParseEdf(bytes);
    edf_ok += back.header == h && back.samples == samples && WriteEdf(back.header, back.samples) == bytes;

    Shape shape{rng.UniformInt(4), 1 + rng.UniformInt(5), 1 + rng.UniformInt(9)};
    std::vector<double> values(ShapeNumel(shape));
    for (auto& v : values) v = rng.Normal() * std::pow(10.0, rng.Uniform(-300, 300));
    const auto npy = EncodeNpy(shape, values);
    const NpyArray a = DecodeNpy(npy);
    npy_ok += a.shape == shape && a.f64 == values && EncodeNpy(a.shape, a.f64) == npy;
  }

  const auto files = ParseSummary(
      "File Name: chb01_03.edf\nNumber of Seizures in File: 1\n"
      "Seizure Start Time: 2996 seconds\nSeizure End Time: 3036 seconds\n\n"
      "File Name: chb01_04.edf\nNumber of Seizures in File: 0\n");
  const bool summary_ok = files.size() == 2 && files[0].intervals.size() == 1 &&
                          files[0].intervals[0].start_s == 2996.0 &&
                          files[0].intervals[0].end_s == 3036.0 && files[1].intervals.empty();

  auto edf = WriteEdf([] {
    EdfHeader h;
    h.n_records = 2;
    EdfSignalHeader s;
    s.label = "A";
    s.physical_min = -1;
    s.physical_max = 1;
    s.digital_min = -100;
    s.digital_max = 100;
    s.samples_per_record = 4;
    h.signals.push_back(s);
    return h;
  }(), {{1, 2, 3, 4, 5, 6, 7, 8}});
  auto truncated = edf;
  truncated.resize(truncated.size() - 1);
  auto bad_npy = EncodeNpy(Shape{2}, std::vector<double>{1, 2});
  bad_npy[0] = 0;
  const bool errors_ok =
      RaisesStructured([&] { ParseEdf(truncated); }, ErrorKind::kParse) &&
      RaisesStructured([&] { ParseEdf(std::vector<std::uint8_t>(edf.begin(), edf.begin() + 100)); },
                       ErrorKind::kParse) &&
      RaisesStructured([&] { DecodeNpy(bad_npy); }, ErrorKind::kFormat) &&
      RaisesStructured(
          [] { ParseSummary("File Name: a.edf\nNumber of Seizures in File: 2\nSeizure Start Time: 1 seconds\nSeizure End Time: 2 seconds\n"); },
          ErrorKind::kParse) &&
      RaisesStructured(
          [] { ParseSummary("File Name: a.edf\nNumber of Seizures in File: 1\nSeizure End Time: 2 seconds\nSeizure Start Time: 1 seconds\n"); },
          ErrorKind::kParse);
  return Check(edf_ok == 100 && npy_ok == 100 && summary_ok && errors_ok,
               "EDF " + std::to_string(edf_ok) + "/100, NPY " + std::to_string(npy_ok) +
                   "/100 bitwise, summary fixtures " + (summary_ok ? "ok" : "wrong") +
                   ", malformed inputs " + (errors_ok ? "raise structured errors" : "NOT rejected"));
}

Outcome MetricsOracle() {
  Rng rng(8);
  double worst_auc = 0.0, worst_transform = 0.0;
  std::size_t cm_mismatch = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.UniformInt(300);
    std::vector<int> labels(n), preds(n);
    std::vector<double> scores(n), affine(n), expo(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = rng.Uniform() < 0.35;
      preds[i] = rng.Uniform() < 0.5;
      scores[i] = std::round(rng.Uniform() * 30.0) / 30.0;
      affine[i] = 2.0 * scores[i] + 1.0;
      expo[i] = std::exp(scores[i]);
    }
    labels[0] = 0;
    labels[1] = 1;
    double wins = 0.0, pairs = 0.0;
    std::size_t cm[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < n; ++i) {
      ++cm[labels[i]][preds[i]];
      for (std::size_t j = 0; j < n; ++j)
        if (labels[i] == 1 && labels[j] == 0) {
          pairs += 1.0;
          wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
        }
    }
    const MetricsReport r = ComputeMetrics(labels, preds, scores);
    worst_auc = std::max({worst_auc, std::abs(r.auc - wins / pairs),
                          std::abs(TrapezoidArea(r.roc) - wins / pairs)});
    worst_transform = std::max({worst_transform, std::abs(MannWhitneyAuc(labels, affine) - r.auc),
                                std::abs(MannWhitneyAuc(labels, expo) - r.auc)});
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) cm_mismatch += r.confusion[a][b] != cm[a][b];
  }
  return Check(worst_auc <= 1e-12 && worst_transform <= 1e-12 && cm_mismatch == 0,
               "50 sets: max AUC error " + Fmt(worst_auc) + ", transform drift " +
                   Fmt(worst_transform) + ", confusion mismatches " + std::to_string(cm_mismatch));
}

Outcome ScanLinearity() {
  const auto t0 = Clock::now();
  const double r14 = ScanScalingRatio(std::size_t{1} << 14);
  const double r15 = ScanScalingRatio(std::size_t{1} << 15);
  const double secs = Since(t0);
  auto in = [](double r) { return r >= 1.5 && r <= 2.6; };
  return Check(in(r14) && in(r15) && secs < 120.0,
               "time(2L)/time(L) " + Fmt(r14) + " at L=2^14, " + Fmt(r15) + " at L=2^15, " +
                   Fmt(secs) + " s");
}

Outcome FullCorpus() {
  const char* root = std::getenv("CONVMAMBA_CHBMIT_DIR");
  if (!root || !*root) return {Outcome::kSkip, "set CONVMAMBA_CHBMIT_DIR to a CHB-MIT copy to run"};
  const fs::path out = ScratchDir("corpus");
  RunConfig c;
  c.data_dir = root;
  c.out = out.string();
  c.threads = std::max(1u, std::thread::hardware_concurrency());
  CmdPreprocess(c);
  const auto manifest = nlohmann::json::parse(ReadTextFile(out / "manifest.json"));
  const long n = manifest["n_windows"], pos = manifest["n_seizure_windows"];
  fs::remove_all(out);
  return Pass(std::to_string(n) + " windows (reference 9505, diff " + std::to_string(n - 9505) + "), " +
              std::to_string(pos) + " seizure windows (reference 2581, diff " +
              std::to_string(pos - 2581) + "); informational");
}

}  // namespace
}  // namespace convmamba

int main() {
  using namespace convmamba;
  SetLogSink([](const std::string&) {});
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient suite", GradientSuite},
      {"scan equivalence", ScanEquivalence},
      {"block shape contract", ShapeContract},
      {"initialization audit", InitAudit},
      {"synthetic overfit", SyntheticOverfit},
      {"preprocessing fixture", PreprocessFixture},
      {"parser round trips", ParserRoundTrips},
      {"metrics oracle", MetricsOracle},
      {"scan linearity", ScanLinearity},
      {"full corpus counts (optional)", FullCorpus},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Outcome::kFail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Outcome::kPass ? "PASS" : o.status == Outcome::kFail ? "FAIL" : "SKIP";
    failures += o.status == Outcome::kFail;
    std::printf("criterion %zu %s %s: %s\n", i + 1, tag, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
