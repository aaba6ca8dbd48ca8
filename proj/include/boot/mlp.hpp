#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "boot/autodiff.hpp"
#include "boot/params.hpp"
#include "boot/rng.hpp"

namespace boot {

/// An extra input projected into the first hidden layer, e.g. time
/// features or a one-hot class code.
struct EmbeddingSlot {
  std::string name;
  std::size_t dim = 0;
  bool bias = true;
  /// Start the projection at zero so the slot initially has no effect.
  bool zero_init = false;

  friend bool operator==(const EmbeddingSlot&, const EmbeddingSlot&) = default;
};

/// Shape of an MLP: input plus additive embeddings feed `depth` SiLU
/// hidden layers of width `hidden`, then a linear output layer.
/// depth == 0 means a single linear map from input to output.
struct LayerPlan {
  std::size_t input_dim = 0;
  std::vector<EmbeddingSlot> embeddings;
  std::size_t hidden = 128;
  std::size_t depth = 3;
  std::size_t output_dim = 0;

  friend bool operator==(const LayerPlan&, const LayerPlan&) = default;
};

/// Allocates parameters for `plan` with fan-in scaled uniform weights.
ParamSet init_mlp(const LayerPlan& plan, Rng& rng);

/// Records the forward pass on the params' tape. `embeddings` must align
/// with plan.embeddings.
Var forward_mlp(const BoundParams& params, const LayerPlan& plan, Var input, std::span<const Var> embeddings);

/// Tape-free convenience: evaluates the same arithmetic and returns values.
Tensor forward_mlp(const ParamSet& params, const LayerPlan& plan, const Tensor& input,
                   std::span<const Tensor> embeddings);

/// Sinusoidal features of scalar inputs: [sin(k_i v), cos(k_i v)] with
/// geometric frequencies, v pre-multiplied by `scale`. Shape (n, dim).
Tensor sinusoidal_features(std::span<const double> values, std::size_t dim, double scale = 1000.0);

/// One-hot rows of width `width`; label -1 maps to the last column (null).
Tensor one_hot(std::span<const int> labels, std::size_t width);

}  // namespace boot
