#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "boot/rng.hpp"
#include "boot/teacher.hpp"

namespace boot {

/// Conditioning request: condition c, negative condition n (null when
/// absent) and either a fixed guidance weight or a range to draw from.
struct GuidanceSpec {
  std::optional<int> condition;
  std::optional<int> negative;
  double weight = 1.0;
  std::optional<std::pair<double, double>> weight_range;

  /// Throws ContractError on negative weights or an empty range.
  void validate() const;
};

/// Per-row guidance for one batch. Empty `condition` means unconditional.
struct GuidanceBatch {
  std::vector<int> condition;
  std::vector<int> negative;
  std::vector<double> weight;

  bool conditional() const { return !condition.empty(); }
  std::size_t rows() const { return condition.size(); }

  /// Every row gets the same condition/negative/weight.
  static GuidanceBatch fixed(std::size_t rows, int condition, int negative, double weight);
};

/// f~ = f(x, t, n) + w (f(x, t, c) - f(x, t, n)), then optional clip to
/// [-clip, clip]. Unguided (null `guidance`) queries are passed through.
Tensor cfg_combine(const Denoiser& teacher, const Tensor& x, std::span<const double> t, const GuidanceBatch* guidance,
                   std::optional<double> clip = std::nullopt);

/// Bundles a frozen teacher with its guidance and clipping so samplers
/// see a single signal predictor.
struct TeacherQuery {
  const Denoiser* teacher = nullptr;
  const GuidanceBatch* guidance = nullptr;
  std::optional<double> clip;

  Tensor operator()(const Tensor& x, std::span<const double> t) const;
  Tensor operator()(const Tensor& x, double t) const;
};

}  // namespace boot
