#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "boot/autodiff.hpp"
#include "boot/tensor.hpp"

namespace boot {

using GradMap = std::map<std::string, Tensor>;

struct AdamConstants {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Named trainable tensors together with their AdamW moments and an EMA
/// shadow copy. Entries keep insertion order, which fixes the order of
/// every reduction and of serialization.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor first_moment;
    Tensor second_moment;
    Tensor shadow;
  };

  void add(const std::string& name, Tensor init);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  const Tensor& shadow(const std::string& name) const;

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }

  /// Copy whose live values are the EMA shadow (moments reset).
  ParamSet ema_copy() const;
  /// Resets the shadow to the current live values.
  void sync_shadow();

  std::size_t parameter_count() const;

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
  std::uint64_t step_ = 0;
};

/// All parameters of a ParamSet recorded as trainable leaves on one tape.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ParamSet& params);

  Var operator[](const std::string& name) const;
  Tape& tape() const { return *tape_; }

  /// Collects per-parameter gradients, zero-filled where nothing flowed.
  GradMap gradients(const Gradients& grads) const;

 private:
  Tape* tape_;
  const ParamSet* params_;
  std::map<std::string, Var> vars_;
};

/// Decoupled-weight-decay Adam. Throws ContractError naming the parameter
/// on a missing or non-finite gradient.
void adamw_step(ParamSet& params, const GradMap& grads, double lr, double weight_decay,
                const AdamConstants& constants = {});

/// shadow <- decay * shadow + (1 - decay) * live
void ema_update(ParamSet& params, double decay);

}  // namespace boot
