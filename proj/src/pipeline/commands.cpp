#include "convmamba/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "convmamba/annotations.hpp"
#include "convmamba/bench.hpp"
#include "convmamba/binary_io.hpp"
#include "convmamba/channels.hpp"
#include "convmamba/checkpoint.hpp"
#include "convmamba/edf.hpp"
#include "convmamba/error.hpp"
#include "convmamba/gradcheck.hpp"
#include "convmamba/log.hpp"
#include "convmamba/metrics.hpp"
#include "convmamba/plots.hpp"
#include "convmamba/synth.hpp"
#include "convmamba/trainer.hpp"

namespace convmamba {
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string Lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool EndsWith(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

fs::path PrepareOut(const RunConfig& config) {
  if (config.out.empty()) Fail(ErrorKind::kUsage, "an output directory is required (--out)");
  const fs::path out(config.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create output directory '" + config.out + "': " + ec.message());
  return out;
}

void WriteRunConfig(const fs::path& out, const RunConfig& config) {
  WriteTextFile(out / "run_config.toml", config.ToToml());
}

const fs::path& RequireDir(const std::string& path, const char* what, const char* flag,
                           fs::path& storage) {
  if (path.empty()) Fail(ErrorKind::kUsage, std::string("missing ") + what + " (" + flag + ")");
  storage = path;
  if (!fs::is_directory(storage)) {
    Fail(ErrorKind::kUsage, std::string(what) + " '" + path + "' is not a directory");
  }
  return storage;
}

void RequireFile(const std::string& path, const char* what, const char* flag) {
  if (path.empty()) Fail(ErrorKind::kUsage, std::string("missing ") + what + " (" + flag + ")");
  if (!fs::is_regular_file(path)) {
    Fail(ErrorKind::kUsage, std::string(what) + " '" + path + "' does not exist");
  }
}

WindowedDataset LoadDataset(const RunConfig& config) {
  fs::path dir;
  RequireDir(config.dataset, "dataset directory", "--dataset", dir);
  WindowedDataset ds = LoadWindows(dir);
  ds.Validate();
  if (ds.size() == 0) Fail(ErrorKind::kData, "dataset '" + config.dataset + "' holds no windows");
  return ds;
}

ModelConfig ModelForDataset(ModelConfig model, const WindowedDataset& ds) {
  model.in_channels = ds.channels;
  model.window_len = ds.window_len;
  model.Validate();
  return model;
}

void CheckIndices(const std::vector<std::size_t>& indices, std::size_t n, const char* part) {
  for (auto i : indices) {
    if (i >= n) {
      Fail(ErrorKind::kData, std::string("split ") + part + " index " + std::to_string(i) +
                                 " is outside the dataset (" + std::to_string(n) + " windows)");
    }
  }
}

SplitResult SplitFor(const RunConfig& config, const WindowedDataset& ds) {
  if (!config.split.empty()) {
    RequireFile(config.split, "split file", "--split");
    SplitResult s = LoadSplit(config.split).split;
    CheckIndices(s.train, ds.size(), "train");
    CheckIndices(s.test, ds.size(), "test");
    return s;
  }
  std::vector<std::string> groups;
  for (const auto& info : ds.info) groups.push_back(info.source);
  return StratifiedSplit(ds.labels, groups, config.test_frac, config.split_mode, config.seed);
}

std::string DatasetManifest(const WindowedDataset& ds, ordered_json extra) {
  ordered_json j;
  j["n_windows"] = ds.size();
  j["n_seizure_windows"] = ds.positives();
  j["class_counts"] = {{"non_seizure", ds.size() - ds.positives()}, {"seizure", ds.positives()}};
  j["channels"] = ds.channels;
  j["window_len"] = ds.window_len;
  for (auto& [k, v] : extra.items()) j[k] = v;
  return j.dump(2) + "\n";
}

struct PreprocessJob {
  std::string patient;
  fs::path path;
  std::string source;
};

struct PreprocessResult {
  std::optional<WindowedDataset> windows;
  std::size_t n_samples = 0;
  std::string skip_reason;
};

std::vector<fs::path> SortedEntries(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (directories ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::string SplitJson(const SplitResult& split, double test_frac) {
  ordered_json j;
  j["mode"] = SplitModeName(split.mode);
  j["seed"] = split.seed;
  j["test_frac"] = test_frac;
  j["achieved_test_fraction"] = split.achieved_test_fraction;
  j["test_positive_fraction"] = split.test_positive_fraction;
  j["overall_positive_fraction"] = split.overall_positive_fraction;
  j["n_train"] = split.train.size();
  j["n_test"] = split.test.size();
  j["train"] = split.train;
  j["test"] = split.test;
  return j.dump(1) + "\n";
}

SplitFile LoadSplit(const fs::path& path) {
  SplitFile f;
  try {
    const auto j = nlohmann::json::parse(ReadTextFile(path));
    f.split.mode = ParseSplitMode(j.at("mode").get<std::string>());
    f.split.seed = j.at("seed").get<std::uint64_t>();
    f.test_frac = j.at("test_frac").get<double>();
    f.split.achieved_test_fraction = j.at("achieved_test_fraction").get<double>();
    f.split.test_positive_fraction = j.at("test_positive_fraction").get<double>();
    f.split.overall_positive_fraction = j.at("overall_positive_fraction").get<double>();
    f.split.train = j.at("train").get<std::vector<std::size_t>>();
    f.split.test = j.at("test").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat, "split file '" + path.string() + "': " + e.what());
  }
  return f;
}

void CmdPreprocess(const RunConfig& config) {
  fs::path root;
  RequireDir(config.data_dir, "data directory", "--data", root);
  config.window.Validate();
  const fs::path out = PrepareOut(config);
  WriteRunConfig(out, config);

  std::map<std::string, std::vector<SeizureInterval>> seizures;  // by EDF file name
  if (!config.annotations.empty()) {
    RequireFile(config.annotations, "annotations file", "--annotations");
    for (auto& f : ParseAnnotationCsv(ReadTextFile(config.annotations))) {
      auto& list = seizures[f.file_name];
      list.insert(list.end(), f.intervals.begin(), f.intervals.end());
    }
  }

  std::vector<fs::path> patient_dirs = SortedEntries(root, true);
  std::vector<PreprocessJob> jobs;
  auto add_patient = [&](const fs::path& dir, const std::string& patient) {
    for (const auto& file : SortedEntries(dir, false)) {
      const std::string name = file.filename().string();
      if (EndsWith(Lower(name), "-summary.txt")) {
        try {
          for (auto& f : ParseSummary(ReadTextFile(file))) {
            auto& list = seizures[f.file_name];
            list.insert(list.end(), f.intervals.begin(), f.intervals.end());
          }
        } catch (const Error& e) {
          Log("skipping summary " + file.string() + ": " + e.what());
        }
      } else if (EndsWith(Lower(name), ".edf")) {
        jobs.push_back({patient, file, patient + "/" + name});
      }
    }
  };
  add_patient(root, root.filename().string());
  for (const auto& dir : patient_dirs) add_patient(dir, dir.filename().string());

  // Recordings are parsed and windowed independently, then merged in
  // directory order, so the output does not depend on the thread count.
  std::vector<PreprocessResult> results(jobs.size());
  const ChannelMap montage = ChannelMap::Standard();
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      const auto& job = jobs[k];
      auto& r = results[k];
      try {
        const EdfFile edf = ReadEdf(job.path);
        const Recording rec = MapChannels(ToRecording(edf, job.source), montage);
        if (rec.sample_rate != config.window.sample_rate) {
          r.skip_reason = "sample rate " + std::to_string(rec.sample_rate) + " Hz, expected " +
                          std::to_string(config.window.sample_rate) + " Hz";
          continue;
        }
        const auto it = seizures.find(job.path.filename().string());
        WindowedDataset ds;
        AppendWindows(rec, config.window, it == seizures.end() ? std::vector<SeizureInterval>{}
                                                                : it->second,
                      job.patient, ds);
        r.n_samples = rec.n_samples();
        r.windows = std::move(ds);
      } catch (const std::exception& e) {
        r.skip_reason = e.what();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(config.threads, 1, std::max<std::size_t>(1, jobs.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  WindowedDataset all;
  ordered_json recordings = ordered_json::array();
  ordered_json skipped = ordered_json::array();
  std::map<std::string, std::array<std::size_t, 3>> per_patient;  // recordings, windows, seizure
  std::vector<std::string> patient_order;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const auto& job = jobs[k];
    const auto& r = results[k];
    if (!r.windows) {
      Log("skipping " + job.path.string() + ": " + r.skip_reason);
      skipped.push_back({{"file", job.source}, {"reason", r.skip_reason}});
      continue;
    }
    const WindowedDataset& ds = *r.windows;
    if (all.size() == 0) {
      all.channels = ds.channels;
      all.window_len = ds.window_len;
    }
    for (std::size_t i = 0; i < ds.size(); ++i) {
      all.Append(std::span<const double>(ds.data).subspan(i * ds.channels * ds.window_len,
                                                          ds.channels * ds.window_len),
                 ds.labels[i], ds.info[i]);
    }
    ordered_json ivs = ordered_json::array();
    if (const auto it = seizures.find(job.path.filename().string()); it != seizures.end()) {
      for (const auto& iv : it->second) ivs.push_back({iv.start_s, iv.end_s});
    }
    recordings.push_back({{"patient", job.patient},
                          {"file", job.source},
                          {"n_samples", r.n_samples},
                          {"n_windows", ds.size()},
                          {"n_seizure_windows", ds.positives()},
                          {"seizures", ivs}});
    if (!per_patient.count(job.patient)) patient_order.push_back(job.patient);
    auto& counts = per_patient[job.patient];
    counts[0] += 1;
    counts[1] += ds.size();
    counts[2] += ds.positives();
  }
  if (recordings.empty()) {
    Fail(ErrorKind::kData, "no recordings found under '" + config.data_dir + "'");
  }
  for (const auto& p : patient_order) {
    const auto& c = per_patient[p];
    Log(p + ": " + std::to_string(c[0]) + " recordings, " + std::to_string(c[1]) + " windows, " +
        std::to_string(c[2]) + " seizure windows");
  }
  Log("total: " + std::to_string(all.size()) + " windows, " + std::to_string(all.positives()) +
      " seizure windows");

  SaveWindows(out, all);
  ordered_json extra;
  extra["window_s"] = config.window.window_s;
  extra["stride_s"] = config.window.stride_s;
  extra["sample_rate"] = config.window.sample_rate;
  extra["threshold"] = config.window.threshold;
  extra["split_mode"] = SplitModeName(config.split_mode);
  extra["seed"] = config.seed;
  extra["stride_len"] = config.window.stride_len();
  extra["montage"] = montage.required;
  extra["recordings"] = recordings;
  extra["skipped"] = skipped;
  WriteTextFile(out / "manifest.json", DatasetManifest(all, extra));
}

void CmdSplit(const RunConfig& config) {
  const WindowedDataset ds = LoadDataset(config);
  const fs::path out = PrepareOut(config);
  WriteRunConfig(out, config);
  std::vector<std::string> groups;
  for (const auto& info : ds.info) groups.push_back(info.source);
  const SplitResult split =
      StratifiedSplit(ds.labels, groups, config.test_frac, config.split_mode, config.seed);
  WriteTextFile(out / "split.json", SplitJson(split, config.test_frac));
  Log(std::string(SplitModeName(split.mode)) + " split: " + std::to_string(split.train.size()) +
      " train, " + std::to_string(split.test.size()) + " test (test fraction " +
      std::to_string(split.achieved_test_fraction) + ", positive fraction " +
      std::to_string(split.test_positive_fraction) + " vs " +
      std::to_string(split.overall_positive_fraction) + " overall)");
}

void CmdTrain(const RunConfig& config) {
  const WindowedDataset ds = LoadDataset(config);
  RunConfig effective = config;
  effective.model = ModelForDataset(config.model, ds);
  const SplitResult split = SplitFor(config, ds);
  const fs::path out = PrepareOut(config);
  WriteRunConfig(out, effective);

  TrainConfig train = config.train;
  train.seed = config.seed;
  train.checkpoint_dir = out;
  Log("training " + std::to_string(CountParams([&] {
        Rng probe(0);
        return InitModel(effective.model, probe);
      }())) + " parameters on " + std::to_string(split.train.size()) + " windows, validating on " +
      std::to_string(split.test.size()));
  const TrainResult result =
      Train(effective.model, ds, split.train, split.test, train, [](const EpochLog& e) {
        std::ostringstream line;
        line << "epoch " << e.epoch << ": train_loss " << e.train_loss << " train_acc "
             << e.train_acc << " val_loss " << e.val_loss << " val_acc " << e.val_acc << " ("
             << e.seconds << " s)";
        Log(line.str());
      });
  WriteTextFile(out / "train_log.csv", TrainLogCsv(result.log));
  WriteTextFile(out / "loss.svg", LossPlot(result.log));
  WriteTextFile(out / "accuracy.svg", AccuracyPlot(result.log));
}

void CmdEval(const RunConfig& config) {
  RequireFile(config.checkpoint, "checkpoint", "--checkpoint");
  const WindowedDataset ds = LoadDataset(config);
  RunConfig effective = config;
  const fs::path sibling = fs::path(config.checkpoint).parent_path() / "run_config.toml";
  if (fs::is_regular_file(sibling)) {
    const RunConfig trained = LoadRunConfig(sibling.string());
    for (const auto& key : RunConfig::Keys()) {
      if (key.rfind("model.", 0) == 0) effective.Set(key, trained.Get(key));
    }
  }
  effective.model = ModelForDataset(effective.model, ds);
  const ModelParams params = LoadCheckpoint(config.checkpoint, effective.model);

  std::vector<std::size_t> indices;
  if (!config.split.empty()) {
    indices = SplitFor(config, ds).test;
  } else {
    indices.resize(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) indices[i] = i;
  }
  if (indices.empty()) Fail(ErrorKind::kData, "nothing to evaluate");
  const fs::path out = PrepareOut(config);
  WriteRunConfig(out, effective);

  const EvalResult r = Evaluate(params, effective.model, ds, indices, config.train.eval_scan);
  const MetricsReport m = ComputeMetrics(r.labels, r.predictions, r.scores);
  WriteTextFile(out / "metrics.json", MetricsJson(m));
  WriteTextFile(out / "roc.csv", RocCsv(m.roc));
  WriteTextFile(out / "roc.svg", RocPlot(m.roc, m.auc));
  std::ostringstream preds;
  preds.precision(17);
  preds << "index,label,prediction,score\n";
  for (std::size_t i = 0; i < indices.size(); ++i) {
    preds << indices[i] << ',' << r.labels[i] << ',' << r.predictions[i] << ',' << r.scores[i]
          << '\n';
  }
  WriteTextFile(out / "predictions.csv", preds.str());
  std::ostringstream line;
  line << "evaluated " << indices.size() << " windows: accuracy " << m.accuracy << ", AUC "
       << m.auc << ", weighted F1 " << m.weighted_f1 << ", loss " << r.loss;
  Log(line.str());
}

bool CmdGradcheck(const RunConfig& config) {
  const fs::path out = PrepareOut(config);
  WriteRunConfig(out, config);
  GradCheckOptions options;
  options.op_seeds = config.gradcheck_op_seeds;
  options.model_seeds = config.gradcheck_model_seeds;
  const auto rows = RunGradCheckSuite(options, config.seed);
  WriteTextFile(out / "gradcheck.csv", GradCheckCsv(rows));
  std::size_t failed = 0;
  double worst = 0.0;
  for (const auto& r : rows) {
    if (!r.pass) {
      ++failed;
      std::ostringstream line;
      line << "FAIL " << r.check << " seed " << r.seed << ": max relative error "
           << r.max_rel_err;
      Log(line.str());
    }
    worst = std::max(worst, r.max_rel_err);
  }
  std::ostringstream line;
  line << rows.size() << " checks, " << failed << " failed, worst relative error " << worst;
  Log(line.str());
  return failed == 0;
}

void CmdBench(const RunConfig& config) {
  const fs::path out = PrepareOut(config);
  ModelConfig model = config.model;
  model.in_channels = config.synth.channels;
  model.window_len = config.synth.window_len;
  model.Validate();
  RunConfig effective = config;
  effective.model = model;
  WriteRunConfig(out, effective);

  BenchOptions options;
  options.repetitions = config.bench_repetitions;
  options.batch_size = config.train.batch_size;
  options.seed = config.seed;
  options.baseline = config.bench_baseline;
  const BenchReport report = BenchEpoch(model, config.synth, options);
  WriteTextFile(out / "bench.csv", BenchCsv(report));
  for (const auto& s : report.summaries) {
    std::ostringstream line;
    line << s.model << ": " << s.mean << " s/epoch (std " << s.stddev << ", min " << s.min
         << ", max " << s.max << ", " << s.samples << " runs)";
    Log(line.str());
  }

  const std::size_t len = config.bench_scan_length;
  auto timings = ScanBench({len, 2 * len}, 32, 16, 5, config.seed);
  const auto timings_f32 = ScanBench({len, 2 * len}, 32, 16, 5, config.seed, Precision::kF32);
  timings.insert(timings.end(), timings_f32.begin(), timings_f32.end());
  const double ratio = ScanScalingRatio(len);
  WriteTextFile(out / "scan.csv", ScanBenchCsv(timings));
  ordered_json j;
  j["epoch"] = ordered_json::array();
  for (const auto& s : report.summaries) {
    j["epoch"].push_back({{"model", s.model}, {"samples", s.samples}, {"mean", s.mean},
                          {"stddev", s.stddev}, {"min", s.min}, {"max", s.max}});
  }
  j["scan_length"] = len;
  j["scan_ratio_2l_over_l"] = ratio;
  WriteTextFile(out / "bench_summary.json", j.dump(2) + "\n");
  Log("scan time(2L)/time(L) at L = " + std::to_string(len) + ": " + std::to_string(ratio));
}

void CmdSynth(const RunConfig& config) {
  const fs::path out = PrepareOut(config);
  WriteRunConfig(out, config);
  const WindowedDataset ds = MakeSynthetic(config.synth, config.seed);
  SaveWindows(out, ds);
  ordered_json extra;
  extra["synthetic"] = true;
  extra["seed"] = config.seed;
  extra["sample_rate"] = config.synth.sample_rate;
  extra["burst_hz"] = config.synth.burst_hz;
  WriteTextFile(out / "manifest.json", DatasetManifest(ds, extra));
  Log("wrote " + std::to_string(ds.size()) + " synthetic windows (" +
      std::to_string(ds.positives()) + " positive) to " + out.string());
}

}  // namespace convmamba
