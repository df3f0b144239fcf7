#include "convmamba/autodiff.hpp"

#include "convmamba/error.hpp"

namespace convmamba {

const Tensor& Var::value() const {
  if (!tape_) Fail(ErrorKind::kContract, "use of an unbound Var");
  return tape_->nodes_[id_].value;
}

bool Var::requires_grad() const {
  return tape_ && tape_->nodes_[id_].requires_grad;
}

Var Tape::Leaf(Tensor value, bool requires_grad) {
  nodes_.push_back(TapeNode{"leaf", {}, std::move(value), requires_grad, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::Record(const char* op, Tensor value, std::span<const Var> inputs,
                 BackwardFn backward) {
  TapeNode node{op, {}, std::move(value), false, {}};
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (in.tape_ != this) {
      Fail(ErrorKind::kContract,
           std::string("operand of '") + op + "' belongs to another tape");
    }
    node.inputs.push_back(in.id_);
    node.requires_grad = node.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::Backward(const Var& root) {
  if (root.tape_ != this) Fail(ErrorKind::kContract, "root from another tape");
  const Tensor& root_value = nodes_[root.id_].value;
  if (root_value.numel() != 1) {
    Fail(ErrorKind::kContract, "backward needs a scalar root, got shape " +
                                   ShapeString(root_value.shape()));
  }
  grads_.assign(nodes_.size(), Tensor());
  grads_[root.id_] = Tensor(root_value.shape(), 1.0);

  std::vector<Tensor*> slots;
  for (std::size_t i = root.id_ + 1; i-- > 0;) {
    TapeNode& node = nodes_[i];
    if (!node.requires_grad || !node.backward || grads_[i].empty()) continue;
    slots.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const std::size_t in = node.inputs[k];
      if (!nodes_[in].requires_grad) continue;
      if (grads_[in].empty()) grads_[in] = Tensor(nodes_[in].value.shape());
      slots[k] = &grads_[in];
    }
    node.backward(grads_[i], slots);
  }
}

Tensor Tape::Grad(const Var& v) const {
  if (HasGrad(v)) return grads_[v.id_];
  return Tensor(v.shape());
}

bool Tape::HasGrad(const Var& v) const {
  return v.tape_ == this && v.id_ < grads_.size() && !grads_[v.id_].empty();
}

}  // namespace convmamba
