#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "boot/distill.hpp"
#include "boot/guidance.hpp"
#include "boot/student.hpp"
#include "boot/teacher.hpp"

namespace boot {

// Comparison baselines. Neither is data-free in the same cheap way as
// BOOT: direct distillation runs the full teacher sampler per update and
// the consistency baseline needs real data.

struct DirectDistillConfig {
  std::size_t steps = 1000;
  std::size_t n_ode_steps = 64;
  std::size_t batch = 128;
  double lr = 1e-3;
};

struct BaselineLog {
  std::vector<double> loss;
  /// Teacher NFEs spent per update.
  std::vector<std::uint64_t> teacher_nfe;
};

/// Regresses y_theta(eps, t_min) onto the n_ode_steps-step solver output
/// (expressed in signal space) for fresh eps every update.
BaselineLog direct_distill_baseline(const TeacherQuery& teacher, StudentNet& student, const DirectDistillConfig& cfg,
                                    Rng& rng);

/// g(x, t) = c_skip(t) x + (1 - c_skip(t)) F(x, t), c_skip = (sigma_{t_min}/sigma_t)^2,
/// so g(x, t_min) = x.
class ConsistencyNet {
 public:
  /// F starts from the teacher weights when the teacher predicts signals.
  ConsistencyNet(const DenoiserNet& teacher, Rng& rng);

  Var forward(const BoundParams& params, const Tensor& x, std::span<const double> t) const;
  Tensor predict(const Tensor& x, std::span<const double> t) const;
  /// Same map evaluated with the EMA (target) weights.
  Tensor predict_target(const Tensor& x, std::span<const double> t) const;
  /// One NFE: g(eps, t_max).
  Tensor sample(const Tensor& eps) const;

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  const NoiseSchedule& schedule() const { return sched_; }

  double skip_weight(double t) const;

 private:
  DenoiserArch arch_;
  NoiseSchedule sched_;
  LayerPlan plan_;
  ParamSet params_;

  Tensor evaluate(const ParamSet& params, const Tensor& x, std::span<const double> t) const;
  std::vector<Tensor> embeddings(std::span<const double> t, std::size_t rows) const;
};

struct ConsistencyConfig {
  std::size_t steps = 1000;
  std::size_t batch = 128;
  double delta = 0.04;
  double lr = 1e-4;
  /// Decay of the target network theta^-.
  double target_decay = 0.999;
};

/// Minimizes |g_theta(x_t, t) - g_theta^-(x_s, s)|^2 with x_t drawn from
/// real data and x_s one DDIM step from x_t. theta^- is the EMA of theta.
BaselineLog consistency_baseline(const Denoiser& teacher, const DataSampler& data, ConsistencyNet& student,
                                 const ConsistencyConfig& cfg, Rng& rng);

}  // namespace boot
