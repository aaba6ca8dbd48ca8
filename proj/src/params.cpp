#include "boot/params.hpp"

#include <cmath>

namespace boot {

void ParamSet::add(const std::string& name, Tensor init) {
  if (contains(name)) throw ContractError("ParamSet: duplicate parameter '" + name + "'");
  Entry e{name, init, Tensor(init.shape()), Tensor(init.shape()), init};
  index_.emplace(name, entries_.size());
  entries_.push_back(std::move(e));
}

const Tensor& ParamSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("ParamSet: no parameter '" + name + "'");
  return entries_[it->second].value;
}

Tensor& ParamSet::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("ParamSet: no parameter '" + name + "'");
  return entries_[it->second].value;
}

const Tensor& ParamSet::shadow(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("ParamSet: no parameter '" + name + "'");
  return entries_[it->second].shadow;
}

ParamSet ParamSet::ema_copy() const {
  ParamSet out;
  for (const auto& e : entries_) out.add(e.name, e.shadow);
  out.step_ = step_;
  return out;
}

void ParamSet::sync_shadow() {
  for (auto& e : entries_) e.shadow = e.value;
}

std::size_t ParamSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

BoundParams::BoundParams(Tape& tape, const ParamSet& params) : tape_(&tape), params_(&params) {
  for (const auto& e : params.entries()) vars_.emplace(e.name, tape.variable(e.value));
}

Var BoundParams::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw ContractError("BoundParams: no parameter '" + name + "'");
  return it->second;
}

GradMap BoundParams::gradients(const Gradients& grads) const {
  GradMap out;
  for (const auto& e : params_->entries()) out.emplace(e.name, grads.of(vars_.at(e.name), e.value));
  return out;
}

void adamw_step(ParamSet& params, const GradMap& grads, double lr, double weight_decay,
                const AdamConstants& c) {
  for (const auto& e : params.entries()) {
    auto it = grads.find(e.name);
    if (it == grads.end()) throw ContractError("adamw_step: no gradient for '" + e.name + "'");
    if (!it->second.same_shape(e.value)) {
      throw DimensionError("adamw_step: gradient shape mismatch for '" + e.name + "'");
    }
    if (!it->second.all_finite()) throw ContractError("adamw_step: non-finite gradient in '" + e.name + "'");
  }
  const std::uint64_t step = params.step() + 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  for (auto& e : params.entries()) {
    const Tensor& g = grads.at(e.name);
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      e.first_moment[i] = c.beta1 * e.first_moment[i] + (1.0 - c.beta1) * g[i];
      e.second_moment[i] = c.beta2 * e.second_moment[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = e.first_moment[i] / bc1;
      const double v_hat = e.second_moment[i] / bc2;
      e.value[i] *= 1.0 - lr * weight_decay;
      e.value[i] -= lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
  params.set_step(step);
}

void ema_update(ParamSet& params, double decay) {
  if (!(decay >= 0.0 && decay < 1.0)) throw ContractError("ema_update: decay must lie in [0, 1)");
  for (auto& e : params.entries()) {
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      e.shadow[i] = decay * e.shadow[i] + (1.0 - decay) * e.value[i];
    }
  }
}

}  // namespace boot
