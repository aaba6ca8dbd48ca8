#include "boot/baselines.hpp"

#include <cmath>
#include <stdexcept>

#include "boot/solvers.hpp"

namespace boot {

BaselineLog direct_distill_baseline(const TeacherQuery& teacher, StudentNet& student, const DirectDistillConfig& cfg,
                                    Rng& rng) {
  if (teacher.teacher == nullptr) throw ContractError("direct_distill_baseline: no teacher");
  const NoiseSchedule& sched = student.schedule();
  BaselineLog log;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const Tensor eps = rng.normal_tensor(cfg.batch, student.dim());
    const std::uint64_t before = teacher.teacher->nfe();
    // Signal-space end state; equals the DDIM end state under x = alpha y + sigma eps.
    const Tensor target = signal_ode_sample(teacher, eps, cfg.n_ode_steps, sched).final_state;
    log.teacher_nfe.push_back(teacher.teacher->nfe() - before);

    Tape tape;
    BoundParams bound(tape, student.params());
    const std::vector<double> ts(cfg.batch, sched.t_min);
    Var y = student.forward(bound, eps, ts);
    Var loss = scale(sum(square(sub(y, tape.constant(target)))), 1.0 / static_cast<double>(cfg.batch));
    const double lv = tape.value(loss)[0];
    if (!std::isfinite(lv)) throw std::runtime_error("direct_distill_baseline: non-finite loss at step " + std::to_string(step));
    log.loss.push_back(lv);
    adamw_step(student.params(), bound.gradients(tape.backward(loss)), cfg.lr, 0.0);
  }
  return log;
}

// ---- consistency baseline ---------------------------------------------------

ConsistencyNet::ConsistencyNet(const DenoiserNet& teacher, Rng& rng)
    : arch_(teacher.arch()), sched_(teacher.schedule()) {
  arch_.kind = PredictionKind::signal;
  arch_.num_classes = 0;
  plan_ = DenoiserNet::make_plan(arch_);
  params_ = init_mlp(plan_, rng);
  if (teacher.kind() == PredictionKind::signal) {
    for (auto& e : params_.entries()) {
      if (teacher.params().contains(e.name)) e.value = teacher.params().get(e.name);
    }
    params_.sync_shadow();
  }
}

double ConsistencyNet::skip_weight(double t) const {
  const double r = sched_.sigma(sched_.t_min) / sched_.sigma(t);
  return r * r;
}

std::vector<Tensor> ConsistencyNet::embeddings(std::span<const double> t, std::size_t) const {
  return {sinusoidal_features(t, arch_.time_features)};
}

Var ConsistencyNet::forward(const BoundParams& params, const Tensor& x, std::span<const double> t) const {
  Tape& tape = params.tape();
  std::vector<Var> emb;
  for (auto& e : embeddings(t, x.rows())) emb.push_back(tape.constant(std::move(e)));
  Var xv = tape.constant(x);
  Var body = forward_mlp(params, plan_, xv, emb);
  std::vector<double> skip(t.size()), out(t.size());
  for (std::size_t r = 0; r < t.size(); ++r) {
    skip[r] = skip_weight(t[r]);
    out[r] = 1.0 - skip[r];
  }
  return add(scale_rows(xv, skip), scale_rows(body, out));
}

Tensor ConsistencyNet::evaluate(const ParamSet& params, const Tensor& x, std::span<const double> t) const {
  Tape tape;
  BoundParams bound(tape, params);
  return tape.value(forward(bound, x, t));
}

Tensor ConsistencyNet::predict(const Tensor& x, std::span<const double> t) const { return evaluate(params_, x, t); }

Tensor ConsistencyNet::predict_target(const Tensor& x, std::span<const double> t) const {
  return evaluate(params_.ema_copy(), x, t);
}

Tensor ConsistencyNet::sample(const Tensor& eps) const {
  const std::vector<double> ts(eps.rows(), sched_.t_max);
  return predict(eps, ts);
}

BaselineLog consistency_baseline(const Denoiser& teacher, const DataSampler& data, ConsistencyNet& student,
                                 const ConsistencyConfig& cfg, Rng& rng) {
  const NoiseSchedule& sched = student.schedule();
  const TeacherQuery query{&teacher, nullptr, std::nullopt};
  BaselineLog log;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    DataBatch batch = data(cfg.batch, rng);
    std::vector<double> t(cfg.batch), s(cfg.batch);
    for (std::size_t r = 0; r < cfg.batch; ++r) {
      t[r] = sched.t_max - (sched.t_max - sched.t_min) * rng.uniform(0.0, 1.0);
      s[r] = std::max(t[r] - cfg.delta, sched.t_min);
    }
    Tensor x_t = batch.x;
    const Tensor z = rng.normal_tensor(cfg.batch, batch.x.cols());
    for (std::size_t r = 0; r < cfg.batch; ++r) {
      const auto [a, sg] = sched.alpha_sigma(t[r]);
      auto xr = x_t.row(r);
      auto zr = z.row(r);
      for (std::size_t c = 0; c < xr.size(); ++c) xr[c] = a * xr[c] + sg * zr[c];
    }
    const Tensor x_s = ddim_step(query, x_t, t, s, sched);
    const Tensor target = student.predict_target(x_s, s);

    Tape tape;
    BoundParams bound(tape, student.params());
    Var g = student.forward(bound, x_t, t);
    Var loss = scale(sum(square(sub(g, tape.constant(target)))), 1.0 / static_cast<double>(cfg.batch));
    const double lv = tape.value(loss)[0];
    if (!std::isfinite(lv) || lv > 1e6) {
      throw std::runtime_error("consistency_baseline diverged at step " + std::to_string(step));
    }
    log.loss.push_back(lv);
    adamw_step(student.params(), bound.gradients(tape.backward(loss)), cfg.lr, 0.0);
    ema_update(student.params(), cfg.target_decay);
  }
  return log;
}

}  // namespace boot
