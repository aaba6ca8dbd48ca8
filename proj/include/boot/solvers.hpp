#pragma once

#include <span>
#include <vector>

#include "boot/guidance.hpp"
#include "boot/schedule.hpp"
#include "boot/tensor.hpp"

namespace boot {

enum class TrajectorySpace { x_space, y_space };

/// States visited by a deterministic sampler from one fixed noise batch.
struct TrajectoryRecord {
  std::vector<double> times;  // strictly decreasing
  std::vector<Tensor> states;
  TrajectorySpace space = TrajectorySpace::x_space;
  Tensor noise;
};

/// Starting value of the signal state y at t_max.
enum class SignalInit {
  /// y_{t_max} = eps, as suggested for the truncated range.
  epsilon,
  /// y_{t_max} = (eps - sigma eps) / alpha, so that x_{t_max} = eps exactly
  /// and the y-trajectory reproduces DDIM started from eps.
  match_ddim,
  /// y_{t_max} = f~(eps, t_max): the state the boundary loss teaches the
  /// student. Costs one teacher query.
  teacher_prediction,
};

enum class SignalSolver { euler, heun };

/// Uniform grid t_max = t_0 > t_1 > ... > t_n = t_min.
std::vector<double> uniform_grid(const NoiseSchedule& sched, std::size_t n_steps);

/// DDIM update x_s = (sigma_s/sigma_t) x_t + (alpha_s - alpha_t sigma_s/sigma_t) f(x_t, t).
/// s == t returns x_t unchanged; s > t is a contract violation.
Tensor ddim_step(const TeacherQuery& teacher, const Tensor& x_t, double t, double s, const NoiseSchedule& sched);
Tensor ddim_step(const TeacherQuery& teacher, const Tensor& x_t, std::span<const double> t, std::span<const double> s,
                 const NoiseSchedule& sched);

struct SampleResult {
  Tensor final_state;
  TrajectoryRecord trajectory;
};

SampleResult ddim_sample(const TeacherQuery& teacher, const Tensor& eps, std::size_t n_steps,
                         const NoiseSchedule& sched);

/// Discrete signal update y_s = (1 - e^{l_s - l_t}) f(x^_t, t) + e^{l_s - l_t} y_t
/// with x^_t = alpha_t y_t + sigma_t eps. Per-row times.
Tensor signal_ode_step(const TeacherQuery& teacher, const Tensor& y_t, const Tensor& eps, std::span<const double> t,
                       std::span<const double> s, const NoiseSchedule& sched);
Tensor signal_ode_step(const TeacherQuery& teacher, const Tensor& y_t, const Tensor& eps, double t, double s,
                       const NoiseSchedule& sched);

/// Explicit Euler on dy/dt = -lambda'_t (f - y): y_s = y_t + delta lambda'_t (f - y_t).
/// Throws ContractError when t - delta falls below t_min.
Tensor euler_signal_ode_step(const TeacherQuery& teacher, const Tensor& y_t, const Tensor& eps, double t, double delta,
                             const NoiseSchedule& sched);

/// Heun predictor-corrector. The predictor is the Euler step; the corrector
/// averages the slope at t with the slope at s evaluated on the predicted
/// state, each scaled by lambda' at its own time. Two teacher queries.
Tensor heun_signal_ode_step(const TeacherQuery& teacher, const Tensor& y_t, const Tensor& eps, double t, double delta,
                            const NoiseSchedule& sched);
/// Per-row variant used for bootstrap targets.
Tensor heun_signal_ode_step(const TeacherQuery& teacher, const Tensor& y_t, const Tensor& eps,
                            std::span<const double> t, std::span<const double> s, const NoiseSchedule& sched);

Tensor signal_init(const TeacherQuery& teacher, const Tensor& eps, const NoiseSchedule& sched, SignalInit init);

/// Integrates the discrete signal update (exact DDIM equivalent) on a uniform grid.
SampleResult signal_ode_sample(const TeacherQuery& teacher, const Tensor& eps, std::size_t n_steps,
                               const NoiseSchedule& sched, SignalInit init = SignalInit::match_ddim);

/// Integrates the continuous Signal-ODE with Euler or Heun on a uniform grid.
SampleResult integrate_signal_ode(const TeacherQuery& teacher, const Tensor& eps, std::size_t n_steps,
                                  const NoiseSchedule& sched, SignalSolver solver,
                                  SignalInit init = SignalInit::match_ddim);

/// x-space reconstruction alpha_t y + sigma_t eps.
Tensor to_x_space(const Tensor& y, const Tensor& eps, double t, const NoiseSchedule& sched);

}  // namespace boot
