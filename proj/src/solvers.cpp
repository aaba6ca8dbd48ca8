#include "boot/solvers.hpp"

#include <cmath>
#include <string>

namespace boot {

namespace {

// Tolerance for grid points that land a rounding error below t_min.
constexpr double kTimeSlack = 1e-12;

void require_pair(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": state " + shape_string(a.shape()) + " vs noise " +
                         shape_string(b.shape()));
  }
}

// x = alpha y + sigma eps, row-wise.
Tensor reconstruct(const Tensor& y, const Tensor& eps, std::span<const double> t, const NoiseSchedule& sched) {
  Tensor x = y;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto [a, s] = sched.alpha_sigma(t[r]);
    auto xr = x.row(r);
    auto er = eps.row(r);
    for (std::size_t c = 0; c < xr.size(); ++c) xr[c] = a * xr[c] + s * er[c];
  }
  return x;
}

}  // namespace

std::vector<double> uniform_grid(const NoiseSchedule& sched, std::size_t n_steps) {
  if (n_steps == 0) throw ContractError("sampler: n_steps must be >= 1");
  std::vector<double> grid(n_steps + 1);
  const double span = sched.t_max - sched.t_min;
  for (std::size_t i = 0; i <= n_steps; ++i) {
    grid[i] = sched.t_max - span * static_cast<double>(i) / static_cast<double>(n_steps);
  }
  grid.back() = sched.t_min;
  return grid;
}

Tensor to_x_space(const Tensor& y, const Tensor& eps, double t, const NoiseSchedule& sched) {
  require_pair(y, eps, "to_x_space");
  const std::vector<double> ts(y.rows(), t);
  return reconstruct(y, eps, ts, sched);
}

Tensor ddim_step(const TeacherQuery& teacher, const Tensor& x_t, double t, double s, const NoiseSchedule& sched) {
  if (s > t) throw ContractError("ddim_step: need s <= t, got s=" + std::to_string(s) + " t=" + std::to_string(t));
  if (s == t) return x_t;
  const Tensor f = teacher(x_t, t);
  const auto [at, st] = sched.alpha_sigma(t);
  const auto [as, ss] = sched.alpha_sigma(s);
  const double cx = ss / st;
  const double cf = as - at * ss / st;
  Tensor out = x_t;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = cx * out[i] + cf * f[i];
  return out;
}

Tensor ddim_step(const TeacherQuery& teacher, const Tensor& x_t, std::span<const double> t, std::span<const double> s,
                 const NoiseSchedule& sched) {
  if (t.size() != x_t.rows() || s.size() != x_t.rows()) throw DimensionError("ddim_step: need one t, s per row");
  for (std::size_t r = 0; r < t.size(); ++r) {
    if (s[r] > t[r]) throw ContractError("ddim_step: need s <= t");
  }
  const Tensor f = teacher(x_t, t);
  Tensor out = x_t;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    if (s[r] == t[r]) continue;
    const auto [at, st] = sched.alpha_sigma(t[r]);
    const auto [as, ss] = sched.alpha_sigma(s[r]);
    const double cx = ss / st;
    const double cf = as - at * ss / st;
    auto o = out.row(r);
    auto fr = f.row(r);
    for (std::size_t c = 0; c < o.size(); ++c) o[c] = cx * o[c] + cf * fr[c];
  }
  return out;
}

SampleResult ddim_sample(const TeacherQuery& teacher, const Tensor& eps, std::size_t n_steps,
                         const NoiseSchedule& sched) {
  const auto grid = uniform_grid(sched, n_steps);
  SampleResult res{eps, {{grid[0]}, {eps}, TrajectorySpace::x_space, eps}};
  for (std::size_t i = 0; i < n_steps; ++i) {
    res.final_state = ddim_step(teacher, res.final_state, grid[i], grid[i + 1], sched);
    res.trajectory.times.push_back(grid[i + 1]);
    res.trajectory.states.push_back(res.final_state);
  }
  return res;
}

Tensor signal_ode_step(const TeacherQuery& teacher, const Tensor& y_t, const Tensor& eps, std::span<const double> t,
                       std::span<const double> s, const NoiseSchedule& sched) {
  require_pair(y_t, eps, "signal_ode_step");
  if (t.size() != y_t.rows() || s.size() != y_t.rows()) throw DimensionError("signal_ode_step: need one t, s per row");
  for (std::size_t r = 0; r < t.size(); ++r) {
    if (s[r] > t[r]) throw ContractError("signal_ode_step: need s <= t");
  }
  const Tensor f = teacher(reconstruct(y_t, eps, t, sched), t);
  Tensor out = y_t;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const double keep = sched.decay_factor(t[r], s[r]);
    auto o = out.row(r);
    auto fr = f.row(r);
    for (std::size_t c = 0; c < o.size(); ++c) o[c] = (1.0 - keep) * fr[c] + keep * o[c];
  }
  return out;
}

Tensor signal_ode_step(const TeacherQuery& teacher, const Tensor& y_t, const Tensor& eps, double t, double s,
                       const NoiseSchedule& sched) {
  const std::vector<double> ts(y_t.rows(), t), ss(y_t.rows(), s);
  return signal_ode_step(teacher, y_t, eps, ts, ss, sched);
}

Tensor euler_signal_ode_step(const TeacherQuery& teacher, const Tensor& y_t, const Tensor& eps, double t, double delta,
                             const NoiseSchedule& sched) {
  require_pair(y_t, eps, "euler_signal_ode_step");
  if (!(delta > 0.0)) throw ContractError("euler_signal_ode_step: delta must be > 0");
  if (t - delta < sched.t_min - kTimeSlack) {
    throw ContractError("euler_signal_ode_step: step from t=" + std::to_string(t) + " crosses t_min");
  }
  const std::vector<double> ts(y_t.rows(), t);
  const Tensor f = teacher(reconstruct(y_t, eps, ts, sched), ts);
  const double h = delta * sched.lambda_prime(t);
  Tensor out = y_t;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += h * (f[i] - out[i]);
  return out;
}

Tensor heun_signal_ode_step(const TeacherQuery& teacher, const Tensor& y_t, const Tensor& eps,
                            std::span<const double> t, std::span<const double> s, const NoiseSchedule& sched) {
  require_pair(y_t, eps, "heun_signal_ode_step");
  if (t.size() != y_t.rows() || s.size() != y_t.rows()) throw DimensionError("heun_signal_ode_step: need one t, s per row");
  const Tensor f_t = teacher(reconstruct(y_t, eps, t, sched), t);
  std::vector<double> slope_t(t.size()), slope_s(t.size());
  for (std::size_t r = 0; r < t.size(); ++r) {
    if (!(s[r] < t[r])) throw ContractError("heun_signal_ode_step: need s < t");
    const double delta = t[r] - s[r];
    slope_t[r] = delta * sched.lambda_prime(t[r]);
    slope_s[r] = delta * sched.lambda_prime(s[r]);
  }
  Tensor y_pred = y_t;
  for (std::size_t r = 0; r < y_pred.rows(); ++r) {
    auto p = y_pred.row(r);
    auto fr = f_t.row(r);
    for (std::size_t c = 0; c < p.size(); ++c) p[c] += slope_t[r] * (fr[c] - p[c]);
  }
  const Tensor f_s = teacher(reconstruct(y_pred, eps, s, sched), s);
  Tensor out = y_t;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto o = out.row(r);
    auto p = y_pred.row(r);
    auto ft = f_t.row(r);
    auto fs = f_s.row(r);
    for (std::size_t c = 0; c < o.size(); ++c) {
      o[c] += 0.5 * (slope_t[r] * (ft[c] - o[c]) + slope_s[r] * (fs[c] - p[c]));
    }
  }
  return out;
}

Tensor heun_signal_ode_step(const TeacherQuery& teacher, const Tensor& y_t, const Tensor& eps, double t, double delta,
                            const NoiseSchedule& sched) {
  if (!(delta > 0.0)) throw ContractError("heun_signal_ode_step: delta must be > 0");
  if (t - delta < sched.t_min - kTimeSlack) {
    throw ContractError("heun_signal_ode_step: step from t=" + std::to_string(t) + " crosses t_min");
  }
  const std::vector<double> ts(y_t.rows(), t), ss(y_t.rows(), t - delta);
  return heun_signal_ode_step(teacher, y_t, eps, ts, ss, sched);
}

Tensor signal_init(const TeacherQuery& teacher, const Tensor& eps, const NoiseSchedule& sched, SignalInit init) {
  if (init == SignalInit::epsilon) return eps;
  if (init == SignalInit::teacher_prediction) return teacher(eps, sched.t_max);
  const auto [a, s] = sched.alpha_sigma(sched.t_max);
  Tensor y = eps;
  for (double& v : y.data()) v = (v - s * v) / a;
  return y;
}

SampleResult signal_ode_sample(const TeacherQuery& teacher, const Tensor& eps, std::size_t n_steps,
                               const NoiseSchedule& sched, SignalInit init) {
  const auto grid = uniform_grid(sched, n_steps);
  Tensor y = signal_init(teacher, eps, sched, init);
  SampleResult res{y, {{grid[0]}, {y}, TrajectorySpace::y_space, eps}};
  for (std::size_t i = 0; i < n_steps; ++i) {
    res.final_state = signal_ode_step(teacher, res.final_state, eps, grid[i], grid[i + 1], sched);
    res.trajectory.times.push_back(grid[i + 1]);
    res.trajectory.states.push_back(res.final_state);
  }
  return res;
}

SampleResult integrate_signal_ode(const TeacherQuery& teacher, const Tensor& eps, std::size_t n_steps,
                                  const NoiseSchedule& sched, SignalSolver solver, SignalInit init) {
  const auto grid = uniform_grid(sched, n_steps);
  Tensor y = signal_init(teacher, eps, sched, init);
  SampleResult res{y, {{grid[0]}, {y}, TrajectorySpace::y_space, eps}};
  for (std::size_t i = 0; i < n_steps; ++i) {
    const double delta = grid[i] - grid[i + 1];
    res.final_state = solver == SignalSolver::euler
                          ? euler_signal_ode_step(teacher, res.final_state, eps, grid[i], delta, sched)
                          : heun_signal_ode_step(teacher, res.final_state, eps, grid[i], delta, sched);
    res.trajectory.times.push_back(grid[i + 1]);
    res.trajectory.states.push_back(res.final_state);
  }
  return res;
}

}  // namespace boot
