// Command-line front end. Talks to the library only through convmamba.h.
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "convmamba/convmamba.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct ConfigHandle {
  cm_config* ptr = nullptr;
  ~ConfigHandle() { cm_config_destroy(ptr); }
};

int ExitFor(cm_status status) {
  if (status == CM_OK) return kExitOk;
  const char* message = cm_last_error();
  std::fprintf(stderr, "convmamba: error: %s\n", *message ? message : cm_status_name(status));
  return status == CM_ERR_USAGE || status == CM_ERR_CONFIG ? kExitUsage : kExitFailure;
}

// Flag value (as text) keyed by the config key it overrides.
using Overrides = std::map<std::string, std::string>;

template <typename T>
void Flag(CLI::App* app, Overrides& overrides, const std::string& name, const std::string& key,
          const std::string& help) {
  app->add_option_function<T>(
      name,
      [&overrides, key](const T& v) {
        if constexpr (std::is_same_v<T, std::string>) {
          overrides[key] = v;
        } else {
          overrides[key] = CLI::detail::to_string(v);
        }
      },
      help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ConvMambaNet EEG seizure detection"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cm_version()));

  std::string config_file;
  std::vector<std::string> sets;
  Overrides overrides;
  app.add_option("--config", config_file, "TOML-style config file");
  app.add_option("--set", sets, "Config override key=value (repeatable)");
  Flag<std::string>(&app, overrides, "--seed", "seed", "Seed for all randomness");
  Flag<std::string>(&app, overrides, "--out", "paths.out", "Output directory");
  Flag<std::string>(&app, overrides, "--threads", "threads", "Worker threads (preprocess)");

  auto* preprocess = app.add_subcommand("preprocess", "EDF recordings -> labeled windows");
  Flag<std::string>(preprocess, overrides, "--data", "paths.data_dir", "Directory of patient folders");
  Flag<std::string>(preprocess, overrides, "--annotations", "paths.annotations",
                    "Extra seizure CSV (file,start_s,end_s)");
  Flag<std::string>(preprocess, overrides, "--window-s", "window.window_s", "Window length in seconds");
  Flag<std::string>(preprocess, overrides, "--stride-s", "window.stride_s", "Stride in seconds");
  Flag<std::string>(preprocess, overrides, "--sample-rate", "window.sample_rate", "Expected sample rate");
  Flag<std::string>(preprocess, overrides, "--threshold", "window.threshold",
                    "Seizure overlap fraction needed for a positive window");

  auto* split = app.add_subcommand("split", "Train/test split of a dataset");
  Flag<std::string>(split, overrides, "--dataset", "paths.dataset", "Dataset directory");
  Flag<std::string>(split, overrides, "--test-frac", "split.test_frac", "Test fraction");
  Flag<std::string>(split, overrides, "--mode", "split.mode", "record-grouped or window-stratified");

  auto* train = app.add_subcommand("train", "Train a model");
  Flag<std::string>(train, overrides, "--dataset", "paths.dataset", "Dataset directory");
  Flag<std::string>(train, overrides, "--split", "paths.split", "split.json from the split command");
  Flag<std::string>(train, overrides, "--epochs", "train.epochs", "Epochs");
  Flag<std::string>(train, overrides, "--batch-size", "train.batch_size", "Batch size");
  Flag<std::string>(train, overrides, "--lr", "train.lr", "Adam learning rate");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  Flag<std::string>(eval, overrides, "--dataset", "paths.dataset", "Dataset directory");
  Flag<std::string>(eval, overrides, "--checkpoint", "paths.checkpoint", "Checkpoint file");
  Flag<std::string>(eval, overrides, "--split", "paths.split", "Evaluate the test part of this split");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  Flag<std::string>(gradcheck, overrides, "--op-seeds", "gradcheck.op_seeds", "Seeds per operation");
  Flag<std::string>(gradcheck, overrides, "--model-seeds", "gradcheck.model_seeds", "Seeds for block and model");

  auto* bench = app.add_subcommand("bench", "Epoch timing and scan scaling");
  Flag<std::string>(bench, overrides, "--reps", "bench.repetitions", "Timed epochs per model");
  Flag<std::string>(bench, overrides, "--scan-length", "bench.scan_length", "Scan micro-benchmark length L");
  Flag<std::string>(bench, overrides, "--baseline", "bench.baseline", "Time the dense baseline (true/false)");

  auto* synth = app.add_subcommand("synth", "Separable synthetic dataset");
  Flag<std::string>(synth, overrides, "--n-windows", "synth.n_windows", "Number of windows");
  Flag<std::string>(synth, overrides, "--n-positive", "synth.n_positive", "Number of positive windows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  ConfigHandle config;
  if (cm_status s = cm_config_create(&config.ptr); s != CM_OK) return ExitFor(s);
  if (!config_file.empty()) {
    if (cm_status s = cm_config_load_file(config.ptr, config_file.c_str()); s != CM_OK) {
      return ExitFor(s);
    }
  }
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "convmamba: error: --set expects key=value, got '%s'\n", kv.c_str());
      return kExitUsage;
    }
    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if (cm_status s = cm_config_set(config.ptr, key.c_str(), value.c_str()); s != CM_OK) {
      return ExitFor(s);
    }
  }
  for (const auto& [key, value] : overrides) {
    if (cm_status s = cm_config_set(config.ptr, key.c_str(), value.c_str()); s != CM_OK) {
      return ExitFor(s);
    }
  }

  const std::map<CLI::App*, cm_status (*)(const cm_config*)> commands = {
      {preprocess, cm_run_preprocess}, {split, cm_run_split},     {train, cm_run_train},
      {eval, cm_run_eval},             {gradcheck, cm_run_gradcheck}, {bench, cm_run_bench},
      {synth, cm_run_synth}};
  for (const auto& [sub, run] : commands) {
    if (sub->parsed()) return ExitFor(run(config.ptr));
  }
  return kExitUsage;
}
