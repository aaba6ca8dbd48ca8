#include "boot/autodiff.hpp"

#include <cmath>
#include <string>

#include <Eigen/Core>

namespace boot {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

ConstMapMat as_matrix(const Tensor& t) {
  return ConstMapMat(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}

MapMat as_matrix(Tensor& t) {
  return MapMat(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

Tape& same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw ContractError("operands recorded on different tapes");
  return *a.tape;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor Gradients::of(Var v, const Tensor& like) const {
  if (has(v)) return by_node_[v.id];
  return Tensor(like.shape());
}

void accumulate(Tensor& slot, const Tensor& g) {
  if (slot.size() == 0) {
    slot = g;
  } else {
    slot += g;
  }
}

Var Tape::constant(Tensor value) { return record(std::move(value), false, nullptr); }

Var Tape::variable(Tensor value) { return record(std::move(value), true, nullptr); }

Var Tape::record(Tensor value, bool requires_grad, BackwardFn backward) {
  nodes_.push_back(Node{std::move(value), requires_grad, requires_grad ? std::move(backward) : nullptr});
  return Var{this, nodes_.size() - 1};
}

Gradients Tape::backward(Var loss) const {
  if (loss.tape != this) throw ContractError("backward: loss belongs to another tape");
  const Tensor& lv = value(loss);
  if (lv.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_string(lv.shape()));
  }
  std::vector<Tensor> grads(nodes_.size());
  grads[loss.id] = Tensor(lv.shape(), 1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!node.backward || grads[i].size() == 0) continue;
    // The callee only touches slots of earlier nodes, so the reference stays valid.
    const Tensor out_grad = grads[i];
    node.backward(out_grad, grads);
  }
  return Gradients(std::move(grads));
}

Var matmul_nt(Var x, Var w) {
  Tape& tape = same_tape(x, w);
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(w);
  if (xv.cols() != wv.cols()) {
    throw DimensionError("matmul_nt: input has " + std::to_string(xv.cols()) + " features, weight expects " +
                         std::to_string(wv.cols()));
  }
  Tensor out = Tensor::zeros(xv.rows(), wv.rows());
  as_matrix(out).noalias() = as_matrix(xv) * as_matrix(wv).transpose();
  const bool rg = tape.requires_grad(x) || tape.requires_grad(w);
  return tape.record(std::move(out), rg, [x, w, &tape](const Tensor& g, std::vector<Tensor>& grads) {
    const Tensor& xv = tape.value(x);
    const Tensor& wv = tape.value(w);
    if (tape.requires_grad(x)) {
      Tensor gx = Tensor::zeros(xv.rows(), xv.cols());
      as_matrix(gx).noalias() = as_matrix(g) * as_matrix(wv);
      accumulate(grads[x.id], gx);
    }
    if (tape.requires_grad(w)) {
      Tensor gw(wv.shape());
      as_matrix(gw).noalias() = as_matrix(g).transpose() * as_matrix(xv);
      accumulate(grads[w.id], gw);
    }
  });
}

Var add_bias(Var x, Var bias) {
  Tape& tape = same_tape(x, bias);
  const Tensor& xv = tape.value(x);
  const Tensor& bv = tape.value(bias);
  if (bv.size() != xv.cols()) {
    throw DimensionError("add_bias: bias of size " + std::to_string(bv.size()) + " for " +
                         std::to_string(xv.cols()) + " features");
  }
  Tensor out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv[c];
  }
  const bool rg = tape.requires_grad(x) || tape.requires_grad(bias);
  return tape.record(std::move(out), rg, [x, bias, &tape](const Tensor& g, std::vector<Tensor>& grads) {
    if (tape.requires_grad(x)) accumulate(grads[x.id], g);
    if (tape.requires_grad(bias)) {
      Tensor gb(tape.value(bias).shape());
      for (std::size_t r = 0; r < g.rows(); ++r) {
        auto row = g.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) gb[c] += row[c];
      }
      accumulate(grads[bias.id], gb);
    }
  });
}

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape(tape.value(a), tape.value(b), "add");
  Tensor out = tape.value(a) + tape.value(b);
  const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  return tape.record(std::move(out), rg, [a, b, &tape](const Tensor& g, std::vector<Tensor>& grads) {
    if (tape.requires_grad(a)) accumulate(grads[a.id], g);
    if (tape.requires_grad(b)) accumulate(grads[b.id], g);
  });
}

Var sub(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape(tape.value(a), tape.value(b), "sub");
  Tensor out = tape.value(a) - tape.value(b);
  const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  return tape.record(std::move(out), rg, [a, b, &tape](const Tensor& g, std::vector<Tensor>& grads) {
    if (tape.requires_grad(a)) accumulate(grads[a.id], g);
    if (tape.requires_grad(b)) accumulate(grads[b.id], g * -1.0);
  });
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  require_same_shape(av, bv, "mul");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  return tape.record(std::move(out), rg, [a, b, &tape](const Tensor& g, std::vector<Tensor>& grads) {
    const Tensor& av = tape.value(a);
    const Tensor& bv = tape.value(b);
    if (tape.requires_grad(a)) {
      Tensor ga = g;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= bv[i];
      accumulate(grads[a.id], ga);
    }
    if (tape.requires_grad(b)) {
      Tensor gb = g;
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= av[i];
      accumulate(grads[b.id], gb);
    }
  });
}

Var scale(Var a, double s) {
  Tape& tape = *a.tape;
  Tensor out = tape.value(a) * s;
  return tape.record(std::move(out), tape.requires_grad(a),
                     [a, s](const Tensor& g, std::vector<Tensor>& grads) { accumulate(grads[a.id], g * s); });
}

Var scale_rows(Var a, std::span<const double> row_scale) {
  Tape& tape = *a.tape;
  const Tensor& av = tape.value(a);
  if (row_scale.size() != av.rows()) {
    throw DimensionError("scale_rows: " + std::to_string(row_scale.size()) + " scales for " +
                         std::to_string(av.rows()) + " rows");
  }
  std::vector<double> scales(row_scale.begin(), row_scale.end());
  auto apply = [](Tensor t, const std::vector<double>& s) {
    for (std::size_t r = 0; r < t.rows(); ++r) {
      for (double& v : t.row(r)) v *= s[r];
    }
    return t;
  };
  Tensor out = apply(av, scales);
  return tape.record(std::move(out), tape.requires_grad(a),
                     [a, scales = std::move(scales), apply](const Tensor& g, std::vector<Tensor>& grads) {
                       accumulate(grads[a.id], apply(g, scales));
                     });
}

Var silu(Var a) {
  Tape& tape = *a.tape;
  Tensor out = tape.value(a);
  for (double& v : out.data()) v = v * sigmoid(v);
  return tape.record(std::move(out), tape.requires_grad(a), [a, &tape](const Tensor& g, std::vector<Tensor>& grads) {
    const Tensor& av = tape.value(a);
    Tensor ga = g;
    for (std::size_t i = 0; i < ga.size(); ++i) {
      const double s = sigmoid(av[i]);
      ga[i] *= s * (1.0 + av[i] * (1.0 - s));
    }
    accumulate(grads[a.id], ga);
  });
}

Var square(Var a) {
  Tape& tape = *a.tape;
  Tensor out = tape.value(a);
  for (double& v : out.data()) v = v * v;
  return tape.record(std::move(out), tape.requires_grad(a), [a, &tape](const Tensor& g, std::vector<Tensor>& grads) {
    const Tensor& av = tape.value(a);
    Tensor ga = g;
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= 2.0 * av[i];
    accumulate(grads[a.id], ga);
  });
}

Var sum(Var a) {
  Tape& tape = *a.tape;
  double total = 0.0;
  for (double v : tape.value(a).data()) total += v;
  return tape.record(Tensor::scalar(total), tape.requires_grad(a),
                     [a, &tape](const Tensor& g, std::vector<Tensor>& grads) {
                       accumulate(grads[a.id], Tensor(tape.value(a).shape(), g[0]));
                     });
}

Var stop_gradient(Var a) { return a.tape->constant(a.tape->value(a)); }

}  // namespace boot
