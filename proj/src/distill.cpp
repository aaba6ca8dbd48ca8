#include "boot/distill.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "boot/solvers.hpp"

namespace boot {

std::string to_string(LossWeighting w) { return w == LossWeighting::uniform ? "uniform" : "inv_lambda_prime_sq"; }
std::string to_string(TimeSampling s) { return s == TimeSampling::uniform ? "uniform" : "progressive"; }
std::string to_string(TargetSolver s) { return s == TargetSolver::euler ? "euler" : "heun"; }

LossWeighting loss_weighting_from_string(const std::string& s) {
  if (s == "uniform") return LossWeighting::uniform;
  if (s == "inv_lambda_prime_sq") return LossWeighting::inv_lambda_prime_sq;
  throw ContractError("unknown weighting '" + s + "'");
}

TimeSampling time_sampling_from_string(const std::string& s) {
  if (s == "uniform") return TimeSampling::uniform;
  if (s == "progressive") return TimeSampling::progressive;
  throw ContractError("unknown time_sampling '" + s + "'");
}

TargetSolver target_solver_from_string(const std::string& s) {
  if (s == "euler") return TargetSolver::euler;
  if (s == "heun") return TargetSolver::heun;
  throw ContractError("unknown target_solver '" + s + "'");
}

void BootConfig::validate() const {
  schedule().validate();
  if (!(delta > 0.0 && delta < t_max - t_min)) throw ContractError("boot config: need 0 < delta < t_max - t_min");
  if (!(beta >= 0.0)) throw ContractError("boot config: beta must be >= 0");
  if (boundary_period < 1) throw ContractError("boot config: boundary_period must be >= 1");
  if (batch < 1) throw ContractError("boot config: batch must be >= 1");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ContractError("boot config: ema_decay must lie in [0, 1)");
  if (!(lr >= 0.0)) throw ContractError("boot config: lr must be >= 0");
  if (clip && !(*clip > 0.0)) throw ContractError("boot config: clip must be > 0");
  if (guidance) guidance->validate();
}

double clamp_previous_time(double t, const BootConfig& cfg) {
  if (!(t > cfg.t_min)) throw ContractError("bootstrap: t=" + std::to_string(t) + " must exceed t_min");
  return std::max(t - cfg.delta, cfg.t_min);
}

Tensor bootstrap_target(const TeacherQuery& teacher, const Tensor& y_t, const Tensor& eps, std::span<const double> t,
                        std::span<const double> s, const BootConfig& cfg) {
  const NoiseSchedule sched = cfg.schedule();
  for (std::size_t r = 0; r < t.size(); ++r) {
    if (!(t[r] > cfg.t_min)) throw ContractError("bootstrap_target: t must exceed t_min");
  }
  if (cfg.target_solver == TargetSolver::heun) return heun_signal_ode_step(teacher, y_t, eps, t, s, sched);
  // Discrete step weight: the update then equals one DDIM step from t to s.
  return signal_ode_step(teacher, y_t, eps, t, s, sched);
}

namespace {

std::vector<double> previous_times(std::span<const double> t, const BootConfig& cfg) {
  std::vector<double> s(t.size());
  for (std::size_t r = 0; r < t.size(); ++r) s[r] = clamp_previous_time(t[r], cfg);
  return s;
}

const GuidanceBatch* guidance_of(const BootContext& ctx) {
  return ctx.guidance.conditional() ? &ctx.guidance : nullptr;
}

[[noreturn]] void report_non_finite(const Tensor& pred, const Tensor& target, std::span<const double> t) {
  for (std::size_t r = 0; r < pred.rows(); ++r) {
    for (std::size_t c = 0; c < pred.cols(); ++c) {
      if (!std::isfinite(pred.at(r, c)) || !std::isfinite(target.at(r, c))) {
        throw std::runtime_error("bootstrap loss is non-finite at t=" + std::to_string(t[r]));
      }
    }
  }
  throw std::runtime_error("bootstrap loss is non-finite");
}

}  // namespace

Var bootstrap_loss(const BoundParams& params, const StudentNet& student, const Denoiser& teacher, const Tensor& eps,
                   std::span<const double> t, const BootContext& ctx, const BootConfig& cfg) {
  Tape& tape = params.tape();
  const NoiseSchedule sched = cfg.schedule();
  const std::vector<double> s = previous_times(t, cfg);
  const TeacherQuery query{&teacher, guidance_of(ctx), cfg.clip};

  Var y_t = stop_gradient(student.forward(params, eps, t, ctx.labels, ctx.weights));
  Var target = tape.constant(bootstrap_target(query, tape.value(y_t), eps, t, s, cfg));
  Var y_s = student.forward(params, eps, s, ctx.labels, ctx.weights);

  const double n = static_cast<double>(eps.rows());
  std::vector<double> w(t.size());
  for (std::size_t r = 0; r < t.size(); ++r) {
    const double h = cfg.weighting == LossWeighting::uniform ? cfg.delta : sched.step_weight(t[r], s[r]);
    w[r] = 1.0 / (h * h * n);
  }
  Var loss = sum(scale_rows(square(sub(y_s, target)), w));
  if (!std::isfinite(tape.value(loss)[0])) report_non_finite(tape.value(y_s), tape.value(target), t);
  return loss;
}

Var boundary_loss(const BoundParams& params, const StudentNet& student, const Denoiser& teacher, const Tensor& eps,
                  const BootContext& ctx, const BootConfig& cfg) {
  Tape& tape = params.tape();
  const TeacherQuery query{&teacher, guidance_of(ctx), cfg.clip};
  Var target = tape.constant(query(eps, cfg.t_max));
  const std::vector<double> ts(eps.rows(), cfg.t_max);
  Var y = student.forward(params, eps, ts, ctx.labels, ctx.weights);
  return scale(sum(square(sub(target, y))), 1.0 / static_cast<double>(eps.rows()));
}

LossReport boot_losses(const StudentNet& student, const Denoiser& teacher, const Tensor& eps, std::span<const double> t,
                       const BootContext& ctx, const BootConfig& cfg, bool with_boundary) {
  Tape tape;
  BoundParams bound(tape, student.params());
  Var total = bootstrap_loss(bound, student, teacher, eps, t, ctx, cfg);
  LossReport report;
  report.loss_bs = tape.value(total)[0];
  if (with_boundary) {
    Var bc = boundary_loss(bound, student, teacher, eps, ctx, cfg);
    report.loss_bc = tape.value(bc)[0];
    total = add(total, scale(bc, cfg.beta));
  }
  report.grads = bound.gradients(tape.backward(total));
  return report;
}

BootContext sample_context(const BootConfig& cfg, const Denoiser& teacher, const StudentNet& student, std::size_t n,
                           Rng& rng, const ContextSampler& contexts) {
  BootContext ctx;
  const GuidanceSpec spec = cfg.guidance.value_or(GuidanceSpec{});
  if (teacher.num_classes() > 0 || spec.condition) {
    if (spec.condition) {
      ctx.labels.assign(n, *spec.condition);
    } else if (contexts) {
      ctx.labels = contexts(n, rng);
    } else {
      ctx.labels.resize(n);
      for (int& l : ctx.labels) l = static_cast<int>(rng.index(teacher.num_classes()));
    }
    ctx.guidance.condition = ctx.labels;
    ctx.guidance.negative.assign(n, spec.negative.value_or(kNullLabel));
    ctx.guidance.weight.assign(n, spec.weight);
    if (spec.weight_range) {
      for (double& w : ctx.guidance.weight) w = rng.uniform(spec.weight_range->first, spec.weight_range->second);
    }
  } else if (spec.weight_range) {
    throw ContractError("guidance weight range requires a conditional teacher");
  }
  if (student.arch().weight_conditioned) {
    ctx.weights = ctx.guidance.weight.empty() ? std::vector<double>(n, 1.0) : ctx.guidance.weight;
  }
  if (student.arch().num_classes == 0) ctx.labels.clear();
  return ctx;
}

std::vector<double> sample_times(const BootConfig& cfg, std::size_t step, std::size_t n, Rng& rng) {
  double lo = cfg.t_min;
  if (cfg.time_sampling == TimeSampling::progressive) {
    const double progress = cfg.steps == 0 ? 1.0 : static_cast<double>(step + 1) / static_cast<double>(cfg.steps);
    lo = cfg.t_max - (cfg.t_max - cfg.t_min) * std::min(progress, 1.0);
  }
  std::vector<double> t(n);
  // Draw from (lo, t_max]; the open end keeps t > t_min.
  for (double& v : t) v = cfg.t_max - (cfg.t_max - lo) * rng.uniform(0.0, 1.0);
  return t;
}

StudentNet distill(const Denoiser& teacher, StudentNet& student, const BootConfig& cfg, Rng& rng,
                   const StepCallback& on_step, const ContextSampler& contexts, std::size_t stop_at) {
  cfg.validate();
  if (teacher.dim() != student.dim()) throw DimensionError("distill: teacher and student dimensions differ");
  for (std::size_t step = student.params().step(); step < std::min(cfg.steps, stop_at); ++step) {
    const auto start = std::chrono::steady_clock::now();
    Tensor eps = rng.normal_tensor(cfg.batch, student.dim());
    BootContext ctx = sample_context(cfg, teacher, student, cfg.batch, rng, contexts);
    const std::vector<double> t = sample_times(cfg, step, cfg.batch, rng);
    const bool with_boundary = cfg.beta > 0.0 && step % cfg.boundary_period == 0;
    LossReport report = boot_losses(student, teacher, eps, t, ctx, cfg, with_boundary);
    const double total = report.loss_bs + cfg.beta * report.loss_bc;
    if (!std::isfinite(total) || total > 1e6) {
      std::ostringstream os;
      os << "distill diverged at step " << step << ": loss_bs=" << report.loss_bs << " loss_bc=" << report.loss_bc;
      throw std::runtime_error(os.str());
    }
    adamw_step(student.params(), report.grads, cfg.lr, cfg.weight_decay);
    ema_update(student.params(), cfg.ema_decay);
    if (on_step) {
      const std::chrono::duration<double, std::milli> ms = std::chrono::steady_clock::now() - start;
      on_step(StepLog{step, report.loss_bs, report.loss_bc, cfg.ema_decay, ms.count()});
    }
  }
  return student.ema();
}

}  // namespace boot
