#include "convmamba/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "convmamba/checkpoint.hpp"
#include "convmamba/error.hpp"
#include "convmamba/ops.hpp"

namespace convmamba {
namespace {

// Distinct streams for initialization, sampling and dropout.
constexpr std::uint64_t kInitStream = 0x1;
constexpr std::uint64_t kSamplerStream = 0x2;
constexpr std::uint64_t kDropoutStream = 0x3;

std::uint64_t StreamSeed(std::uint64_t seed, std::uint64_t stream) {
  return seed * 0x9E3779B97F4A7C15ull + stream;
}

int Argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return static_cast<int>(best);
}

std::string EpochName(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%03zu.ckpt", epoch);
  return buf;
}

}  // namespace

std::string TrainLogCsv(const TrainLog& log) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,train_loss,train_acc,val_loss,val_acc,seconds\n";
  for (const auto& r : log.rows) {
    out << r.epoch << ',' << r.train_loss << ',' << r.train_acc << ',' << r.val_loss << ','
        << r.val_acc << ',' << r.seconds << '\n';
  }
  return out.str();
}

EvalResult Evaluate(const ModelParams& params, const ModelConfig& config,
                    const WindowedDataset& ds, const std::vector<std::size_t>& indices,
                    ScanKind scan, std::size_t batch_size) {
  if (batch_size == 0) Fail(ErrorKind::kConfig, "batch_size must be positive");
  EvalResult r;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < indices.size(); begin += batch_size) {
    const std::size_t end = std::min(indices.size(), begin + batch_size);
    const std::vector<std::size_t> batch(indices.begin() + static_cast<std::ptrdiff_t>(begin),
                                         indices.begin() + static_cast<std::ptrdiff_t>(end));
    const Tensor logits = PredictLogits(ds.Batch(batch), params, config, scan);
    const Tensor probs = SoftmaxRows(logits);
    const std::size_t k = config.n_classes;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const int label = ds.labels[batch[i]];
      const auto row = logits.data().subspan(i * k, k);
      double mx = row[0];
      for (double v : row) mx = std::max(mx, v);
      double se = 0.0;
      for (double v : row) se += std::exp(v - mx);
      loss_sum += std::log(se) + mx - row[static_cast<std::size_t>(label)];
      const int pred = Argmax(row);
      correct += pred == label ? 1 : 0;
      r.labels.push_back(label);
      r.predictions.push_back(pred);
      r.scores.push_back(probs[i * k + 1]);
    }
  }
  if (!indices.empty()) {
    const double n = static_cast<double>(indices.size());
    r.loss = loss_sum / n;
    r.accuracy = static_cast<double>(correct) / n;
  } else {
    r.loss = r.accuracy = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

TrainLog TrainFrom(ModelParams& params, const ModelConfig& config,
                   const WindowedDataset& ds, const std::vector<std::size_t>& train_idx,
                   const std::vector<std::size_t>& val_idx, const TrainConfig& train,
                   const EpochCallback& on_epoch) {
  config.Validate();
  ds.Validate();
  if (ds.channels != config.in_channels || ds.window_len != config.window_len) {
    Fail(ErrorKind::kConfig, "dataset windows are " + std::to_string(ds.channels) + "x" +
                                 std::to_string(ds.window_len) + " but the model expects " +
                                 std::to_string(config.in_channels) + "x" +
                                 std::to_string(config.window_len));
  }
  if (train.batch_size == 0) Fail(ErrorKind::kConfig, "batch_size must be positive");
  if (!(train.lr >= 0.0)) Fail(ErrorKind::kConfig, "lr must be non-negative");

  const BalancedSampler sampler(train_idx, ds.labels, train.batch_size,
                                StreamSeed(train.seed, kSamplerStream));
  Rng dropout_rng(StreamSeed(train.seed, kDropoutStream));
  AdamConfig adam;
  adam.lr = train.lr;
  AdamState state;
  TrainLog log;

  for (std::size_t epoch = 1; epoch <= train.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0;
    const auto batches = sampler.Batches(epoch - 1);
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& batch = batches[bi];
      const std::vector<int> labels = ds.BatchLabels(batch);
      Tape tape;
      ParamBinder bind(tape);
      ForwardContext ctx;
      ctx.mode = Mode::kTrain;
      ctx.rng = &dropout_rng;
      ctx.stats_sink = &params;
      const Var logits = Forward(tape.Constant(ds.Batch(batch)), params, config, bind, ctx);
      const Var loss = SoftmaxCrossEntropy(logits, labels);
      const double loss_value = loss.value().item();
      if (!std::isfinite(loss_value)) {
        Fail(ErrorKind::kNumeric, "non-finite loss at epoch " + std::to_string(epoch) +
                                      ", batch " + std::to_string(bi + 1));
      }
      tape.Backward(loss);

      std::vector<Tensor*> ptrs;
      std::vector<Tensor> grads;
      VisitParams(params, [&](const std::string&, Tensor& t, bool trainable) {
        if (!trainable) return;
        ptrs.push_back(&t);
        grads.push_back(bind.Grad(t));
      });
      AdamStep(ptrs, grads, state, adam);

      const std::size_t k = config.n_classes;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto row = logits.value().data().subspan(i * k, k);
        correct += Argmax(row) == labels[i] ? 1 : 0;
      }
      loss_sum += loss_value * static_cast<double>(batch.size());
      seen += batch.size();
    }

    EpochLog row;
    row.epoch = epoch;
    row.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    row.train_acc = seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
    const EvalResult val = Evaluate(params, config, ds, val_idx, train.eval_scan);
    row.val_loss = val.loss;
    row.val_acc = val.accuracy;
    if (!train.checkpoint_dir.empty()) {
      SaveCheckpoint(train.checkpoint_dir / EpochName(epoch), params);
      SaveCheckpoint(train.checkpoint_dir / "model.ckpt", params);
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    log.rows.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return log;
}

TrainResult Train(const ModelConfig& config, const WindowedDataset& ds,
                  const std::vector<std::size_t>& train_idx,
                  const std::vector<std::size_t>& val_idx, const TrainConfig& train,
                  const EpochCallback& on_epoch) {
  Rng init(StreamSeed(train.seed, kInitStream));
  TrainResult result{InitModel(config, init), {}};
  result.log = TrainFrom(result.params, config, ds, train_idx, val_idx, train, on_epoch);
  return result;
}

}  // namespace convmamba
