#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "convmamba/autodiff.hpp"
#include "convmamba/param_binder.hpp"

namespace convmamba {

struct GradCheckOptions {
  double step = 1e-5;        // central-difference step
  double tolerance = 1e-4;   // on |a - n| / max(|a|, |n|)
  double floor = 1e-6;       // entries with max(|a|, |n|) below this are skipped
  std::size_t op_seeds = 20;
  std::size_t model_seeds = 5;
};

struct GradCheckRow {
  std::string check;
  std::uint64_t seed = 0;
  std::size_t compared = 0;
  // Entries re-measured with smaller steps.
  std::size_t refined = 0;
  double max_rel_err = 0.0;
  bool pass = false;
};

// Builds the checked expression. Every tensor in the checked set must be put
// on the tape through bind; the function is called repeatedly with perturbed
// values, so any randomness inside it must be reseeded on each call.
using GradFn = std::function<Var(Tape& tape, ParamBinder& bind)>;

// Compares reverse-mode gradients of sum(f * R), R a fixed random weighting,
// against central differences for every element of every tensor in wrt.
// An entry whose error exceeds tolerance / 10 is re-measured at step/10 and
// step/100 and keeps its smallest error.
GradCheckRow CheckGradients(const std::string& name, std::uint64_t seed,
                            const std::vector<Tensor*>& wrt, const GradFn& f,
                            const GradCheckOptions& options = {});

// Central-difference gradient of a scalar function at x.
Tensor FiniteDiffGrad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                      double step = 1e-5);

// Every differentiable operation, the selective scan, attention, the Mamba
// block and the reduced end-to-end model.
std::vector<GradCheckRow> RunGradCheckSuite(const GradCheckOptions& options = {},
                                            std::uint64_t base_seed = 0);

// check,seed,compared,refined,max_rel_err,pass
std::string GradCheckCsv(const std::vector<GradCheckRow>& rows);

}  // namespace convmamba
