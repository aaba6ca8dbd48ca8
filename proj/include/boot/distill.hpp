#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "boot/guidance.hpp"
#include "boot/params.hpp"
#include "boot/rng.hpp"
#include "boot/schedule.hpp"
#include "boot/student.hpp"

namespace boot {

enum class LossWeighting { uniform, inv_lambda_prime_sq };
enum class TimeSampling { uniform, progressive };
enum class TargetSolver { euler, heun };

std::string to_string(LossWeighting w);
std::string to_string(TimeSampling s);
std::string to_string(TargetSolver s);
LossWeighting loss_weighting_from_string(const std::string& s);
TimeSampling time_sampling_from_string(const std::string& s);
TargetSolver target_solver_from_string(const std::string& s);

struct BootConfig {
  double delta = 0.04;
  double beta = 1.0;
  double t_min = 0.02;
  double t_max = 0.98;
  LossWeighting weighting = LossWeighting::uniform;
  TimeSampling time_sampling = TimeSampling::uniform;
  TargetSolver target_solver = TargetSolver::euler;
  std::size_t boundary_period = 4;
  std::optional<double> clip;
  double ema_decay = 0.9999;
  double lr = 1e-4;
  double weight_decay = 0.0;
  std::size_t batch = 128;
  std::size_t steps = 1000;
  std::optional<GuidanceSpec> guidance;

  void validate() const;
  NoiseSchedule schedule() const { return NoiseSchedule{ScheduleKind::cosine, t_min, t_max}; }
};

/// s = max(t - delta, t_min). Requires t > t_min so that s < t.
double clamp_previous_time(double t, const BootConfig& cfg);

/// Regression target for y_theta(eps, s) built from the current estimate
/// y_t. Euler: y_t + h (f~(x^_t, t) - y_t) with h = 1 - alpha_t sigma_s /
/// (sigma_t alpha_s). Heun: predictor-corrector over the same interval.
/// The result carries no gradient.
Tensor bootstrap_target(const TeacherQuery& teacher, const Tensor& y_t, const Tensor& eps, std::span<const double> t,
                        std::span<const double> s, const BootConfig& cfg);

/// Per-row conditioning fed to both teacher (via guidance) and student.
struct BootContext {
  std::vector<int> labels;     // empty when unconditional
  std::vector<double> weights; // empty when the student is not w-conditioned
  GuidanceBatch guidance;      // empty condition when unguided
};

/// Bootstrapping loss recorded on the tape: mean_i w_i |y_theta(eps_i, s_i) - SG(target_i)|^2,
/// with w_i = 1/delta^2 (uniform) or 1/h_i^2 (inv_lambda_prime_sq).
Var bootstrap_loss(const BoundParams& params, const StudentNet& student, const Denoiser& teacher, const Tensor& eps,
                   std::span<const double> t, const BootContext& ctx, const BootConfig& cfg);

/// Boundary loss mean_i |f~(eps_i, t_max) - y_theta(eps_i, t_max)|^2.
Var boundary_loss(const BoundParams& params, const StudentNet& student, const Denoiser& teacher, const Tensor& eps,
                  const BootContext& ctx, const BootConfig& cfg);

struct LossReport {
  double loss_bs = 0.0;
  double loss_bc = 0.0;
  GradMap grads;  // of loss_bs + beta * loss_bc
};

LossReport boot_losses(const StudentNet& student, const Denoiser& teacher, const Tensor& eps, std::span<const double> t,
                       const BootContext& ctx, const BootConfig& cfg, bool with_boundary);

struct StepLog {
  std::size_t step = 0;
  double loss_bs = 0.0;
  double loss_bc = 0.0;
  double ema_decay = 0.0;
  double wall_ms = 0.0;
};

using StepCallback = std::function<void(const StepLog&)>;
using ContextSampler = std::function<std::vector<int>(std::size_t n, Rng& rng)>;

/// Draws the conditioning for one batch: labels (after eps), then guidance
/// weights, in that order.
BootContext sample_context(const BootConfig& cfg, const Denoiser& teacher, const StudentNet& student, std::size_t n,
                           Rng& rng, const ContextSampler& contexts);

/// Training times for one batch at `step` of `cfg.steps`.
std::vector<double> sample_times(const BootConfig& cfg, std::size_t step, std::size_t n, Rng& rng);

/// Data-free distillation loop. Resumes from student.params().step(), so a
/// student restored from a checkpoint (with `rng` restored alongside)
/// continues the original run exactly. Per step the random stream yields
/// eps, then context labels, then guidance weights, then t. Updates
/// `student` in place and returns its EMA copy.
/// `stop_at` ends the loop early (after that many total steps) without
/// changing the schedule of a full run.
StudentNet distill(const Denoiser& teacher, StudentNet& student, const BootConfig& cfg, Rng& rng,
                   const StepCallback& on_step = {}, const ContextSampler& contexts = {},
                   std::size_t stop_at = std::numeric_limits<std::size_t>::max());

}  // namespace boot
