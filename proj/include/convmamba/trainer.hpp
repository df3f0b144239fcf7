#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "convmamba/adam.hpp"
#include "convmamba/dataset.hpp"
#include "convmamba/model.hpp"

namespace convmamba {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double lr = 1e-3;
  ScanKind eval_scan = ScanKind::kSequential;
  // When set, epoch_NNN.ckpt and model.ckpt are written here after every
  // epoch.
  std::filesystem::path checkpoint_dir;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;  // NaN without a validation split
  double val_acc = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochLog> rows;
};

// epoch,train_loss,train_acc,val_loss,val_acc,seconds
std::string TrainLogCsv(const TrainLog& log);

struct EvalResult {
  std::vector<int> labels;
  std::vector<int> predictions;  // argmax of the logits
  std::vector<double> scores;    // softmax probability of class 1
  double loss = 0.0;             // mean cross-entropy
  double accuracy = 0.0;
};

EvalResult Evaluate(const ModelParams& params, const ModelConfig& config,
                    const WindowedDataset& ds, const std::vector<std::size_t>& indices,
                    ScanKind scan = ScanKind::kSequential, std::size_t batch_size = 64);

struct TrainResult {
  ModelParams params;
  TrainLog log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Trains from a fresh InitModel. train_idx must contain both classes;
// val_idx may be empty.
TrainResult Train(const ModelConfig& config, const WindowedDataset& ds,
                  const std::vector<std::size_t>& train_idx,
                  const std::vector<std::size_t>& val_idx, const TrainConfig& train,
                  const EpochCallback& on_epoch = {});

// Continues training the given parameters.
TrainLog TrainFrom(ModelParams& params, const ModelConfig& config,
                   const WindowedDataset& ds, const std::vector<std::size_t>& train_idx,
                   const std::vector<std::size_t>& val_idx, const TrainConfig& train,
                   const EpochCallback& on_epoch = {});

}  // namespace convmamba
