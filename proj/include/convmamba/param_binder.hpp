#pragma once

#include <unordered_map>

#include "convmamba/autodiff.hpp"

namespace convmamba {

// Puts parameter tensors on a tape as leaves, once per tensor, and looks up
// their gradients after the backward sweep. Parameters are identified by
// address, so the bound tensors must outlive the binder.
class ParamBinder {
 public:
  explicit ParamBinder(Tape& tape, bool requires_grad = true)
      : tape_(tape), requires_grad_(requires_grad) {}

  Var operator()(const Tensor& param) {
    auto it = bound_.find(&param);
    if (it != bound_.end()) return it->second;
    Var v = tape_.Leaf(param, requires_grad_);
    bound_.emplace(&param, v);
    return v;
  }

  Tensor Grad(const Tensor& param) const {
    auto it = bound_.find(&param);
    if (it == bound_.end()) return Tensor(param.shape());
    return tape_.Grad(it->second);
  }

  bool IsBound(const Tensor& param) const { return bound_.count(&param) != 0; }

  Tape& tape() { return tape_; }
  bool requires_grad() const { return requires_grad_; }

 private:
  Tape& tape_;
  bool requires_grad_;
  std::unordered_map<const Tensor*, Var> bound_;
};

}  // namespace convmamba
