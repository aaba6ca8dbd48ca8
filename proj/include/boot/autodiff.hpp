#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "boot/tensor.hpp"

namespace boot {

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;
};

/// Per-node gradients produced by Tape::backward. Nodes the loss does not
/// depend on (or that sit behind stop_gradient) have no entry.
class Gradients {
 public:
  explicit Gradients(std::vector<Tensor> by_node) : by_node_(std::move(by_node)) {}

  bool has(Var v) const { return v.id < by_node_.size() && by_node_[v.id].size() != 0; }
  /// Gradient of `v`, or a zero tensor shaped like `like` when none reached it.
  Tensor of(Var v, const Tensor& like) const;

 private:
  std::vector<Tensor> by_node_;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so their ids
/// are already a topological order and backward is a single reverse sweep.
class Tape {
 public:
  using BackwardFn = std::function<void(const Tensor& out_grad, std::vector<Tensor>& grads)>;

  Tape() = default;
  // Recorded closures refer back to this tape.
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Appends an op result. `backward` is dropped when no input needs gradients.
  Var record(Tensor value, bool requires_grad, BackwardFn backward);

  /// Reverse sweep from a scalar loss; visits each node at most once.
  Gradients backward(Var loss) const;

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// Primitive ops. All operands must live on the same tape.
Var matmul_nt(Var x, Var w);    // (B,I) x (O,I)^T -> (B,O)
Var add_bias(Var x, Var bias);  // (B,O) + (O) broadcast over rows
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var scale_rows(Var a, std::span<const double> row_scale);
Var silu(Var a);
Var square(Var a);
Var sum(Var a);
Var stop_gradient(Var a);

/// Accumulates `g` into `slot`, allocating on first touch.
void accumulate(Tensor& slot, const Tensor& g);

}  // namespace boot
