#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "convmamba/tensor.hpp"

namespace convmamba {

enum class Mode { kTrain, kEval };

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
// that produced it is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool requires_grad() const;
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Receives the gradient of the node's output and accumulates (+=) into the
// gradients of its inputs. Input slots that do not require a gradient are
// null.
using BackwardFn =
    std::function<void(const Tensor& grad_out, std::span<Tensor* const> grads)>;

struct TapeNode {
  const char* op;
  std::vector<std::size_t> inputs;
  Tensor value;
  bool requires_grad;
  BackwardFn backward;
};

// Append-only record of one forward evaluation. Node ids are assigned in
// evaluation order, so every node's inputs have smaller ids than the node
// itself and a reverse sweep is a valid topological order.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var Leaf(Tensor value, bool requires_grad = true);
  Var Constant(Tensor value) { return Leaf(std::move(value), false); }

  // Appends an operation node. The backward closure is dropped when no input
  // requires a gradient.
  Var Record(const char* op, Tensor value, std::span<const Var> inputs,
             BackwardFn backward);
  Var Record(const char* op, Tensor value, std::initializer_list<Var> inputs,
             BackwardFn backward) {
    return Record(op, std::move(value),
                  std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(backward));
  }

  // Reverse-mode sweep from a scalar root. Replaces any earlier gradients.
  void Backward(const Var& root);

  // Gradient of the root with respect to v after Backward(); zeros when v
  // did not influence the root.
  Tensor Grad(const Var& v) const;
  bool HasGrad(const Var& v) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  const TapeNode& node(std::size_t id) const { return nodes_.at(id); }

 private:
  friend class Var;
  std::deque<TapeNode> nodes_;  // stable addresses across appends
  std::vector<Tensor> grads_;
};

}  // namespace convmamba
