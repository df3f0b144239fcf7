#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "convmamba/dataset.hpp"
#include "convmamba/gradcheck.hpp"
#include "convmamba/model.hpp"
#include "convmamba/synth.hpp"
#include "convmamba/trainer.hpp"

namespace convmamba {

// Everything a command needs, loadable from a TOML-style file:
//
//   seed = 7
//   [model]
//   d_model = 16
//   conv_stack = "32:7:4,16:5:4"
//
// Keys are addressed as "section.key" (top-level keys have no section).
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  ModelConfig model;
  WindowSpec window;
  TrainConfig train;

  double test_frac = 0.2;
  SplitMode split_mode = SplitMode::kRecordGrouped;

  std::string data_dir;
  std::string annotations;  // optional CSV (file,start_s,end_s)
  std::string dataset;      // directory written by preprocess or synth
  std::string split;        // split.json written by split
  std::string checkpoint;
  std::string out = "out";

  SynthSpec synth;
  std::size_t bench_repetitions = 3;
  bool bench_baseline = true;
  std::size_t bench_scan_length = 1 << 14;
  std::size_t gradcheck_op_seeds = 20;
  std::size_t gradcheck_model_seeds = 5;

  // Sets one key from its text form; unknown keys and malformed values are
  // config errors.
  void Set(std::string_view key, std::string_view value);
  std::string Get(std::string_view key) const;
  static const std::vector<std::string>& Keys();

  // Applies every assignment of a config file on top of this one. Errors
  // carry the line number.
  void Merge(std::string_view text);
  static RunConfig Parse(std::string_view text);
  std::string ToToml() const;
};

RunConfig LoadRunConfig(const std::string& path);

}  // namespace convmamba
