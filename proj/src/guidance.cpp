#include "boot/guidance.hpp"

#include <algorithm>
#include <string>

namespace boot {

void GuidanceSpec::validate() const {
  if (weight < 0.0) throw ContractError("guidance weight must be >= 0");
  if (weight_range) {
    const auto [lo, hi] = *weight_range;
    if (lo < 0.0 || hi < lo) throw ContractError("guidance weight range must satisfy 0 <= lo <= hi");
  }
}

GuidanceBatch GuidanceBatch::fixed(std::size_t rows, int condition, int negative, double weight) {
  return GuidanceBatch{std::vector<int>(rows, condition), std::vector<int>(rows, negative),
                       std::vector<double>(rows, weight)};
}

Tensor cfg_combine(const Denoiser& teacher, const Tensor& x, std::span<const double> t, const GuidanceBatch* guidance,
                   std::optional<double> clip) {
  Tensor out;
  if (guidance == nullptr || !guidance->conditional()) {
    out = teacher.predict_signal(x, t);
  } else {
    const GuidanceBatch& g = *guidance;
    if (teacher.num_classes() == 0) throw ContractError("cfg_combine: conditional query on an unconditional teacher");
    if (g.rows() != x.rows() || g.weight.size() != x.rows() || (!g.negative.empty() && g.negative.size() != x.rows())) {
      throw DimensionError("cfg_combine: guidance rows do not match the batch");
    }
    const std::vector<int> negative = g.negative.empty() ? std::vector<int>(x.rows(), kNullLabel) : g.negative;
    const Tensor f_neg = teacher.predict_signal(x, t, negative);
    const Tensor f_cond = teacher.predict_signal(x, t, g.condition);
    out = f_neg;
    for (std::size_t r = 0; r < out.rows(); ++r) {
      auto o = out.row(r);
      auto c = f_cond.row(r);
      for (std::size_t j = 0; j < o.size(); ++j) o[j] += g.weight[r] * (c[j] - o[j]);
    }
  }
  if (clip) {
    for (double& v : out.data()) v = std::clamp(v, -*clip, *clip);
  }
  return out;
}

Tensor TeacherQuery::operator()(const Tensor& x, std::span<const double> t) const {
  if (teacher == nullptr) throw ContractError("TeacherQuery: no teacher");
  return cfg_combine(*teacher, x, t, guidance, clip);
}

Tensor TeacherQuery::operator()(const Tensor& x, double t) const {
  const std::vector<double> ts(x.rows(), t);
  return (*this)(x, ts);
}

}  // namespace boot
