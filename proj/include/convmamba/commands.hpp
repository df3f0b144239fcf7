#pragma once

#include <filesystem>
#include <string>

#include "convmamba/dataset.hpp"
#include "convmamba/run_config.hpp"

namespace convmamba {

// Each command reads its inputs from the config, writes into config.out
// (created if needed) together with run_config.toml, and logs progress.
// Missing inputs raise usage errors.

// Walks the patient subdirectories of data_dir (sorted). Seizure intervals
// come from each patient's *-summary.txt and, when set, the annotations CSV.
// Writes data.npy, labels.npy, windows.csv and manifest.json.
void CmdPreprocess(const RunConfig& config);

// Splits the dataset by config.split_mode; writes split.json.
void CmdSplit(const RunConfig& config);

// Trains on the split's train part (or a fresh split when no split file is
// given) and validates on its test part. The model input dimensions come
// from the dataset. Writes epoch checkpoints, model.ckpt, train_log.csv,
// loss.svg and accuracy.svg.
void CmdTrain(const RunConfig& config);

// Evaluates a checkpoint on the split's test part, or on every window when
// no split is given. When the checkpoint directory holds a run_config.toml,
// its model section is used. Writes metrics.json, roc.csv, roc.svg and
// predictions.csv.
void CmdEval(const RunConfig& config);

// Runs the finite-difference suite; writes gradcheck.csv. Returns whether
// every row passed.
bool CmdGradcheck(const RunConfig& config);

// Epoch timing of the Mamba model and the dense baseline on synthetic data,
// plus the scan scaling micro-benchmark. Writes bench.csv and scan.csv.
void CmdBench(const RunConfig& config);

// Writes the separable synthetic dataset in the preprocess layout.
void CmdSynth(const RunConfig& config);

struct SplitFile {
  SplitResult split;
  double test_frac = 0.0;
};

std::string SplitJson(const SplitResult& split, double test_frac);
SplitFile LoadSplit(const std::filesystem::path& path);

}  // namespace convmamba
