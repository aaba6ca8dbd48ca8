#include "boot/mlp.hpp"

#include <algorithm>
#include <cmath>

namespace boot {

namespace {

Tensor uniform_init(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  Tensor w = Tensor::zeros(rows, cols);
  for (double& v : w.data()) v = rng.uniform(-bound, bound);
  return w;
}

Tensor bias_init(std::size_t n, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor b({n});
  for (double& v : b.data()) v = rng.uniform(-bound, bound);
  return b;
}

std::string hidden_name(std::size_t k) { return "hidden" + std::to_string(k); }

void check_width(const Tensor& t, std::size_t expected, const std::string& layer) {
  if (t.rank() != 2 || t.cols() != expected) {
    throw DimensionError("layer '" + layer + "': expected " + std::to_string(expected) +
                         " input features, got shape " + shape_string(t.shape()));
  }
}

}  // namespace

ParamSet init_mlp(const LayerPlan& plan, Rng& rng) {
  ParamSet p;
  if (plan.depth == 0) {
    p.add("out.weight", uniform_init(plan.output_dim, plan.input_dim, rng));
    p.add("out.bias", bias_init(plan.output_dim, plan.input_dim, rng));
    return p;
  }
  p.add("in.weight", uniform_init(plan.hidden, plan.input_dim, rng));
  p.add("in.bias", bias_init(plan.hidden, plan.input_dim, rng));
  for (const auto& slot : plan.embeddings) {
    Tensor w = uniform_init(plan.hidden, slot.dim, rng);
    if (slot.zero_init) w = Tensor(w.shape());
    p.add(slot.name + ".weight", std::move(w));
    if (slot.bias) {
      Tensor b = bias_init(plan.hidden, slot.dim, rng);
      if (slot.zero_init) b = Tensor(b.shape());
      p.add(slot.name + ".bias", std::move(b));
    }
  }
  for (std::size_t k = 1; k < plan.depth; ++k) {
    p.add(hidden_name(k) + ".weight", uniform_init(plan.hidden, plan.hidden, rng));
    p.add(hidden_name(k) + ".bias", bias_init(plan.hidden, plan.hidden, rng));
  }
  p.add("out.weight", uniform_init(plan.output_dim, plan.hidden, rng));
  p.add("out.bias", bias_init(plan.output_dim, plan.hidden, rng));
  return p;
}

Var forward_mlp(const BoundParams& params, const LayerPlan& plan, Var input, std::span<const Var> embeddings) {
  Tape& tape = params.tape();
  check_width(tape.value(input), plan.input_dim, plan.depth == 0 ? "out" : "in");
  if (plan.depth == 0) {
    if (!embeddings.empty()) throw DimensionError("linear plan takes no embeddings");
    return add_bias(matmul_nt(input, params["out.weight"]), params["out.bias"]);
  }
  if (embeddings.size() != plan.embeddings.size()) {
    throw DimensionError("forward_mlp: plan has " + std::to_string(plan.embeddings.size()) +
                         " embedding slots, got " + std::to_string(embeddings.size()));
  }
  const std::size_t batch = tape.value(input).rows();
  Var h = add_bias(matmul_nt(input, params["in.weight"]), params["in.bias"]);
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    const auto& slot = plan.embeddings[i];
    const Tensor& ev = tape.value(embeddings[i]);
    check_width(ev, slot.dim, slot.name);
    if (ev.rows() != batch) {
      throw DimensionError("layer '" + slot.name + "': " + std::to_string(ev.rows()) + " rows for batch of " +
                           std::to_string(batch));
    }
    Var e = matmul_nt(embeddings[i], params[slot.name + ".weight"]);
    if (slot.bias) e = add_bias(e, params[slot.name + ".bias"]);
    h = add(h, e);
  }
  h = silu(h);
  for (std::size_t k = 1; k < plan.depth; ++k) {
    h = silu(add_bias(matmul_nt(h, params[hidden_name(k) + ".weight"]), params[hidden_name(k) + ".bias"]));
  }
  return add_bias(matmul_nt(h, params["out.weight"]), params["out.bias"]);
}

Tensor forward_mlp(const ParamSet& params, const LayerPlan& plan, const Tensor& input,
                   std::span<const Tensor> embeddings) {
  Tape tape;
  BoundParams bound(tape, params);
  std::vector<Var> evars;
  evars.reserve(embeddings.size());
  for (const auto& e : embeddings) evars.push_back(tape.constant(e));
  return tape.value(forward_mlp(bound, plan, tape.constant(input), evars));
}

Tensor sinusoidal_features(std::span<const double> values, std::size_t dim, double scale) {
  if (dim == 0 || dim % 2 != 0) throw DimensionError("sinusoidal_features: dim must be positive and even");
  const std::size_t half = dim / 2;
  std::vector<double> freq(half);
  for (std::size_t k = 0; k < half; ++k) {
    freq[k] = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
  }
  Tensor out = Tensor::zeros(values.size(), dim);
  for (std::size_t r = 0; r < values.size(); ++r) {
    auto row = out.row(r);
    if (r > 0 && values[r] == values[r - 1]) {
      auto prev = out.row(r - 1);
      std::copy(prev.begin(), prev.end(), row.begin());
      continue;
    }
    const double v = values[r] * scale;
    for (std::size_t k = 0; k < half; ++k) {
      row[k] = std::sin(v * freq[k]);
      row[half + k] = std::cos(v * freq[k]);
    }
  }
  return out;
}

Tensor one_hot(std::span<const int> labels, std::size_t width) {
  Tensor out = Tensor::zeros(labels.size(), width);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const int l = labels[r];
    if (l < -1 || l >= static_cast<int>(width) - 1) {
      throw DomainError("one_hot: label " + std::to_string(l) + " outside vocabulary of " +
                        std::to_string(width - 1));
    }
    out.at(r, l < 0 ? width - 1 : static_cast<std::size_t>(l)) = 1.0;
  }
  return out;
}

}  // namespace boot
