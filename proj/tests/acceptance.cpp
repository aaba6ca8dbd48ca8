// Acceptance run: one PASS/FAIL line per criterion with measured values and
// pinned tolerances. Optional arguments select criteria by number.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>
#include <vector>

#include "boot/checkpoint.hpp"
#include "boot/config.hpp"
#include "boot/experiments.hpp"
#include "boot/solvers.hpp"

using namespace boot;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

class Timer {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct Line {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string measured;
  std::string tolerance;
  double seconds = 0.0;
};

std::string num(double v, int digits = 4) {
  std::ostringstream os;
  if (v != 0.0 && (std::abs(v) < 1e-3 || std::abs(v) >= 1e5)) {
    os << std::scientific << std::setprecision(digits - 1) << v;
  } else {
    os << std::setprecision(digits) << v;
  }
  return os.str();
}

std::string list(const std::vector<double>& v, int digits = 3) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + num(v[i], digits);
  return s + "]";
}

void print(const Line& l) {
  std::cout << "criterion " << std::setw(2) << l.id << "  " << (l.pass ? "PASS" : "FAIL") << "  " << l.name
            << "  measured: " << l.measured << "  tolerance: " << l.tolerance << "  (" << std::fixed
            << std::setprecision(1) << l.seconds << " s)" << std::defaultfloat << std::endl;
}

void info(const std::string& s) { std::cout << "    " << s << std::endl; }

std::size_t worker_count() { return std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 4); }

// Runs jobs on up to four threads; every job owns its random streams, so
// results do not depend on scheduling.
void run_parallel(std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(worker_count(), jobs); ++w) {
    pool.emplace_back([&] {
      for (std::size_t j = next++; j < jobs; j = next++) fn(j);
    });
  }
  for (auto& th : pool) th.join();
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// ---- independent oracles ------------------------------------------------------------

double oracle_alpha(double t) { return std::cos(0.5 * kPi * t); }
double oracle_sigma(double t) { return std::sin(0.5 * kPi * t); }
double oracle_lambda(double t) { return std::log(std::tan(0.5 * kPi * t)); }

// f~ = f(x, n) + w (f(x, c) - f(x, n)) row by row.
Tensor oracle_cfg(const Denoiser& teacher, const Tensor& x, std::span<const double> t, const GuidanceBatch& g) {
  if (!g.conditional()) return teacher.predict_signal(x, t);
  const Tensor fc = teacher.predict_signal(x, t, g.condition);
  const Tensor fn = teacher.predict_signal(x, t, g.negative);
  Tensor out = fn;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) out.at(r, c) += g.weight[r] * (fc.at(r, c) - fn.at(r, c));
  }
  return out;
}

double rel_err(const Tensor& a, const Tensor& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

std::vector<Tensor> central_differences(std::vector<Tensor> in, const std::function<double(const std::vector<Tensor>&)>& f,
                                        double h = 1e-6) {
  std::vector<Tensor> out;
  for (auto& x : in) {
    Tensor g(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double keep = x[i];
      x[i] = keep + h;
      const double up = f(in);
      x[i] = keep - h;
      const double down = f(in);
      x[i] = keep;
      g[i] = (up - down) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

// ---- 1: DDIM vs Signal-ODE ---------------------------------------------------------------

Line criterion_equivalence() {
  Timer clock;
  const NoiseSchedule sched;
  Rng rng(11);
  const PredictionKind kinds[] = {PredictionKind::signal, PredictionKind::noise, PredictionKind::v};
  double worst = 0.0, worst_loop = 0.0;
  for (std::size_t k = 0; k < 20; ++k) {
    DenoiserArch arch;
    arch.dim = 1 + k % 3;
    arch.hidden = 16 + 8 * (k % 4);
    arch.depth = 1 + k % 3;
    arch.time_features = k % 2 ? 8 : 16;
    arch.kind = kinds[k % 3];
    DenoiserNet net(arch, sched, rng);
    const Tensor eps = rng.normal_tensor(20, arch.dim);
    const TeacherQuery q{&net, nullptr, std::nullopt};
    const SampleResult ddim = ddim_sample(q, eps, 64, sched);
    const SampleResult sig = signal_ode_sample(q, eps, 64, sched, SignalInit::match_ddim);
    for (std::size_t i = 0; i < sig.trajectory.states.size(); ++i) {
      const double t = sig.trajectory.times[i];
      worst = std::max(worst, max_abs_diff(to_x_space(sig.trajectory.states[i], eps, t, sched),
                                           ddim.trajectory.states[i]));
    }
    // Plain DDIM recursion written out here.
    Tensor x = eps;
    for (std::size_t i = 0; i < 64; ++i) {
      const double t = 0.98 - 0.96 * static_cast<double>(i) / 64.0;
      const double s = 0.98 - 0.96 * static_cast<double>(i + 1) / 64.0;
      const Tensor f = net.predict_signal(x, t);
      const double ratio = oracle_sigma(s) / oracle_sigma(t);
      for (std::size_t j = 0; j < x.size(); ++j) x[j] = ratio * x[j] + (oracle_alpha(s) - oracle_alpha(t) * ratio) * f[j];
    }
    worst_loop = std::max(worst_loop, max_abs_diff(x, to_x_space(sig.final_state, eps, sched.t_min, sched)));
  }
  const double secs = clock.seconds();
  return {1, "signal-ODE vs DDIM, 20 MLP teachers x 20 noises, 64 steps",
          worst <= 1e-10 && worst_loop <= 1e-10 && secs < 5.0,
          "max |dx| on trajectory " + num(worst) + ", vs explicit DDIM loop " + num(worst_loop) + ", runtime " +
              num(secs, 3) + " s",
          "<= 1e-10, < 5 s", secs};
}

// ---- 2: decay identity -------------------------------------------------------------------

Line criterion_identity() {
  Timer clock;
  const NoiseSchedule sched;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    for (int j = 0; j < 100; ++j) {
      const double t = sched.t_min + (sched.t_max - sched.t_min) * i / 99.0;
      const double s = sched.t_min + (sched.t_max - sched.t_min) * j / 99.0;
      const double rhs = oracle_alpha(t) * oracle_sigma(s) / (oracle_sigma(t) * oracle_alpha(s));
      const double lhs = std::exp(sched.half_log_snr(s) - sched.half_log_snr(t));
      const double lhs_oracle = std::exp(oracle_lambda(s) - oracle_lambda(t));
      worst = std::max({worst, std::abs(lhs - rhs), std::abs(sched.decay_factor(t, s) - rhs),
                        std::abs(lhs_oracle - sched.decay_factor(t, s))});
    }
  }
  return {2, "exp(lambda_s - lambda_t) = alpha_t sigma_s / (sigma_t alpha_s) on 100 x 100 pairs", worst <= 1e-12,
          "max abs error " + num(worst), "<= 1e-12", clock.seconds()};
}

// ---- 3: convergence orders ----------------------------------------------------------------

Line criterion_orders() {
  Timer clock;
  const NoiseSchedule sched;
  const double mu[2] = {1.0, -0.5};
  const double cov[2][2] = {{0.5, 0.15}, {0.15, 0.2}};
  // Posterior mean of a Gaussian: mu + a S (a^2 S + s^2 I)^{-1} (x - a mu).
  FunctionDenoiser gaussian(2, [&](const Tensor& x, std::span<const double> t, std::span<const int>) {
    Tensor out = x;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const double a = oracle_alpha(t[r]), s = oracle_sigma(t[r]);
      const double m00 = a * a * cov[0][0] + s * s, m01 = a * a * cov[0][1], m11 = a * a * cov[1][1] + s * s;
      const double det = m00 * m11 - m01 * m01;
      const double d0 = x.at(r, 0) - a * mu[0], d1 = x.at(r, 1) - a * mu[1];
      const double v0 = (m11 * d0 - m01 * d1) / det, v1 = (m00 * d1 - m01 * d0) / det;
      out.at(r, 0) = mu[0] + a * (cov[0][0] * v0 + cov[0][1] * v1);
      out.at(r, 1) = mu[1] + a * (cov[0][1] * v0 + cov[1][1] * v1);
    }
    return out;
  });
  const TeacherQuery q{&gaussian, nullptr, std::nullopt};
  Rng rng(23);
  const Tensor eps = rng.normal_tensor(16, 2);
  const std::size_t n = 128;
  auto run = [&](std::size_t steps, SignalSolver solver) {
    return integrate_signal_ode(q, eps, steps, sched, solver).final_state;
  };
  const Tensor ref = run(64 * n, SignalSolver::heun);
  auto ratio = [&](SignalSolver solver) { return max_abs_diff(run(n, solver), ref) / max_abs_diff(run(2 * n, solver), ref); };
  const double euler = ratio(SignalSolver::euler);
  const double heun = ratio(SignalSolver::heun);
  return {3, "solver order on the analytic Gaussian teacher, delta = 0.96/128 vs delta/2, delta/64 reference",
          euler >= 1.7 && euler <= 2.3 && heun >= 3.3 && heun <= 4.7,
          "Euler ratio " + num(euler) + ", Heun ratio " + num(heun), "Euler in [1.7, 2.3], Heun in [3.3, 4.7]",
          clock.seconds()};
}

// ---- 4, 5: gradients -------------------------------------------------------------------------

double primitive_gradcheck(std::string& worst_name) {
  Rng rng(31);
  auto r = [&](std::size_t a, std::size_t b) { return rng.normal_tensor(a, b); };
  using Op = std::function<Var(const std::vector<Var>&)>;
  struct Case {
    const char* name;
    Op op;
    std::vector<Tensor> in;
  };
  Tensor bias({5});
  for (double& v : bias.data()) v = rng.normal();
  const std::vector<double> rows{0.3, -2.0, 1.25};
  const std::vector<Case> cases = {
      {"matmul_nt", [](const std::vector<Var>& v) { return matmul_nt(v[0], v[1]); }, {r(3, 4), r(5, 4)}},
      {"add_bias", [](const std::vector<Var>& v) { return add_bias(v[0], v[1]); }, {r(3, 5), bias}},
      {"add", [](const std::vector<Var>& v) { return add(v[0], v[1]); }, {r(3, 4), r(3, 4)}},
      {"sub", [](const std::vector<Var>& v) { return sub(v[0], v[1]); }, {r(3, 4), r(3, 4)}},
      {"mul", [](const std::vector<Var>& v) { return mul(v[0], v[1]); }, {r(3, 4), r(3, 4)}},
      {"scale", [](const std::vector<Var>& v) { return scale(v[0], 1.7); }, {r(3, 4)}},
      {"scale_rows", [&](const std::vector<Var>& v) { return scale_rows(v[0], rows); }, {r(3, 4)}},
      {"silu", [](const std::vector<Var>& v) { return silu(v[0]); }, {r(3, 4)}},
      {"square", [](const std::vector<Var>& v) { return square(v[0]); }, {r(3, 4)}},
      {"sum", [](const std::vector<Var>& v) { return sum(v[0]); }, {r(3, 4)}},
  };
  double worst = 0.0;
  for (const auto& c : cases) {
    // Contract each output with a fixed random probe to get a scalar.
    Tensor probe;
    auto scalar = [&](Tape& tape, const std::vector<Tensor>& in, std::vector<Var>* vars) {
      std::vector<Var> v;
      for (const auto& x : in) v.push_back(tape.variable(x));
      if (vars) *vars = v;
      Var out = c.op(v);
      if (probe.size() == 0) {
        probe = Tensor(tape.value(out).shape());
        for (double& p : probe.data()) p = rng.normal();
      }
      return sum(mul(out, tape.constant(probe)));
    };
    Tape tape;
    std::vector<Var> vars;
    const Gradients g = tape.backward(scalar(tape, c.in, &vars));
    const auto fd = central_differences(c.in, [&](const std::vector<Tensor>& in) {
      Tape t2;
      return t2.value(scalar(t2, in, nullptr))[0];
    });
    for (std::size_t k = 0; k < c.in.size(); ++k) {
      const double e = rel_err(g.of(vars[k], c.in[k]), fd[k]);
      if (e >= worst) {
        worst = e;
        worst_name = c.name;
      }
    }
  }
  return worst;
}

struct LossCase {
  std::shared_ptr<DenoiserNet> teacher;
  std::shared_ptr<StudentNet> student;
  Tensor eps;
  std::vector<double> t;
  BootContext ctx;
  BootConfig cfg;
};

LossCase make_loss_case(std::uint64_t seed, TargetSolver solver, LossWeighting weighting) {
  Rng rng(seed);
  const NoiseSchedule sched;
  DenoiserArch arch;
  arch.dim = 2;
  arch.hidden = 8;
  arch.depth = 2;
  arch.time_features = 8;
  arch.num_classes = 2;
  auto teacher = std::make_shared<DenoiserNet>(arch, sched, rng);
  auto student = std::make_shared<StudentNet>(StudentNet::from_teacher(*teacher, true));
  for (auto& e : student->params().entries()) {
    for (double& v : e.value.data()) v += 0.1 * rng.normal();
  }
  BootConfig cfg;
  cfg.batch = 5;
  cfg.beta = 0.6;
  cfg.target_solver = solver;
  cfg.weighting = weighting;
  GuidanceSpec g;
  g.condition = 1;
  g.weight_range = std::make_pair(1.0, 3.0);
  cfg.guidance = g;
  Tensor eps = rng.normal_tensor(cfg.batch, 2);
  BootContext ctx = sample_context(cfg, *teacher, *student, cfg.batch, rng, {});
  std::vector<double> t = sample_times(cfg, 0, cfg.batch, rng);
  return {teacher, student, std::move(eps), std::move(t), std::move(ctx), cfg};
}

// L_BS + beta L_BC with the regressed branch evaluated at `live` and the
// bootstrap target built from `frozen`.
double oracle_loss(const LossCase& c, const ParamSet& live, const ParamSet& frozen) {
  const NoiseSchedule sched;
  const StudentNet a(c.student->arch(), sched, live);
  const StudentNet b(c.student->arch(), sched, frozen);
  const std::size_t n = c.eps.rows();
  std::vector<double> s(n), tmax(n, c.cfg.t_max);
  for (std::size_t r = 0; r < n; ++r) s[r] = std::max(c.t[r] - c.cfg.delta, c.cfg.t_min);
  const Tensor y_t = b.predict(c.eps, c.t, c.ctx.labels, c.ctx.weights);
  auto reconstruct = [&](const Tensor& y, std::span<const double> times) {
    Tensor x = y;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t k = 0; k < x.cols(); ++k) {
        x.at(r, k) = oracle_alpha(times[r]) * y.at(r, k) + oracle_sigma(times[r]) * c.eps.at(r, k);
      }
    }
    return x;
  };
  const Tensor f_t = oracle_cfg(*c.teacher, reconstruct(y_t, c.t), c.t, c.ctx.guidance);
  Tensor target = y_t;
  std::vector<double> h(n);
  for (std::size_t r = 0; r < n; ++r) h[r] = 1.0 - std::exp(oracle_lambda(s[r]) - oracle_lambda(c.t[r]));
  if (c.cfg.target_solver == TargetSolver::euler) {
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t k = 0; k < target.cols(); ++k) target.at(r, k) += h[r] * (f_t.at(r, k) - y_t.at(r, k));
    }
  } else {
    auto lp = [](double t) { return kPi / std::sin(kPi * t); };
    Tensor pred = y_t;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t k = 0; k < pred.cols(); ++k) {
        pred.at(r, k) += (c.t[r] - s[r]) * lp(c.t[r]) * (f_t.at(r, k) - y_t.at(r, k));
      }
    }
    const Tensor f_s = oracle_cfg(*c.teacher, reconstruct(pred, s), s, c.ctx.guidance);
    for (std::size_t r = 0; r < n; ++r) {
      const double d = c.t[r] - s[r];
      for (std::size_t k = 0; k < target.cols(); ++k) {
        target.at(r, k) += 0.5 * d * (lp(c.t[r]) * (f_t.at(r, k) - y_t.at(r, k)) + lp(s[r]) * (f_s.at(r, k) - pred.at(r, k)));
      }
    }
  }
  const Tensor y_s = a.predict(c.eps, s, c.ctx.labels, c.ctx.weights);
  double bs = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double w = c.cfg.weighting == LossWeighting::uniform ? c.cfg.delta : h[r];
    for (std::size_t k = 0; k < y_s.cols(); ++k) bs += std::pow(y_s.at(r, k) - target.at(r, k), 2) / (w * w * n);
  }
  const Tensor f_b = oracle_cfg(*c.teacher, c.eps, tmax, c.ctx.guidance);
  const Tensor y_b = a.predict(c.eps, tmax, c.ctx.labels, c.ctx.weights);
  double bc = 0.0;
  for (std::size_t i = 0; i < f_b.size(); ++i) bc += std::pow(f_b[i] - y_b[i], 2) / static_cast<double>(n);
  return bs + c.cfg.beta * bc;
}

std::vector<Tensor> values_of(const ParamSet& p) {
  std::vector<Tensor> v;
  for (const auto& e : p.entries()) v.push_back(e.value);
  return v;
}

ParamSet with_values(ParamSet p, const std::vector<Tensor>& v) {
  for (std::size_t k = 0; k < v.size(); ++k) p.entries()[k].value = v[k];
  return p;
}

struct LossGradResult {
  double frozen_err = 0.0;     // autodiff vs branch-frozen differences
  double full_gap = 0.0;       // autodiff vs differences through both branches
  double loss_err = 0.0;       // library loss value vs oracle value
};

std::vector<LossGradResult> loss_gradchecks() {
  std::vector<LossGradResult> out;
  std::uint64_t seed = 41;
  for (TargetSolver solver : {TargetSolver::euler, TargetSolver::heun}) {
    for (LossWeighting weighting : {LossWeighting::uniform, LossWeighting::inv_lambda_prime_sq}) {
      const LossCase c = make_loss_case(seed++, solver, weighting);
      const ParamSet& base = c.student->params();
      const LossReport rep = boot_losses(*c.student, *c.teacher, c.eps, c.t, c.ctx, c.cfg, true);
      const auto frozen = central_differences(values_of(base), [&](const std::vector<Tensor>& v) {
        return oracle_loss(c, with_values(base, v), base);
      });
      const auto full = central_differences(values_of(base), [&](const std::vector<Tensor>& v) {
        const ParamSet p = with_values(base, v);
        return oracle_loss(c, p, p);
      });
      LossGradResult r;
      const double value = oracle_loss(c, base, base);
      r.loss_err = std::abs(rep.loss_bs + c.cfg.beta * rep.loss_bc - value) / std::abs(value);
      for (std::size_t k = 0; k < base.entries().size(); ++k) {
        const Tensor& g = rep.grads.at(base.entries()[k].name);
        r.frozen_err = std::max(r.frozen_err, rel_err(g, frozen[k]));
        r.full_gap = std::max(r.full_gap, rel_err(g, full[k]));
      }
      out.push_back(r);
    }
  }
  return out;
}

Line criterion_gradcheck(const std::vector<LossGradResult>& losses, double seconds) {
  Timer clock;
  std::string worst_op;
  const double prim = primitive_gradcheck(worst_op);
  double loss = 0.0, value = 0.0;
  for (const auto& r : losses) {
    loss = std::max(loss, r.frozen_err);
    value = std::max(value, r.loss_err);
  }
  return {4, "gradcheck of every primitive and of L_BS + beta L_BC (Euler/Heun x both weightings)",
          prim < 1e-5 && loss < 1e-5 && value < 1e-12,
          "primitives " + num(prim) + " (worst " + worst_op + "), loss " + num(loss) + ", loss value " + num(value),
          "relative error < 1e-5 (loss value < 1e-12)", seconds + clock.seconds()};
}

Line criterion_stop_gradient(const std::vector<LossGradResult>& losses, double seconds) {
  double frozen = 0.0, gap = 1e300;
  for (const auto& r : losses) {
    frozen = std::max(frozen, r.frozen_err);
    gap = std::min(gap, r.full_gap);
  }
  return {5, "no gradient through the target branch (branch-frozen differences)", frozen < 1e-5 && gap > 1e-3,
          "autodiff vs frozen-target FD " + num(frozen) + ", vs FD through the target " + num(gap),
          "frozen < 1e-5 while the target branch is live (> 1e-3)", seconds};
}

// ---- 6: linear student on a 1-D Gaussian teacher ----------------------------------------------

Line criterion_linear() {
  Timer clock;
  const NoiseSchedule sched;
  AnalyticGaussianTeacher teacher(Eigen::VectorXd::Constant(1, 0.5), Eigen::MatrixXd::Constant(1, 1, 0.25), sched);
  StudentNet student = StudentNet::linear(1, 8, sched);
  BootConfig cfg;
  cfg.steps = 20000;
  cfg.lr = 1e-3;
  cfg.ema_decay = 0.999;
  cfg.batch = 128;
  cfg.target_solver = TargetSolver::heun;
  Rng rng(61);
  const StudentNet ema = distill(teacher, student, cfg, rng);
  const double train_secs = clock.seconds();
  Rng held(62);
  const Tensor eps = held.normal_tensor(1000, 1);
  const TeacherQuery q{&teacher, nullptr, std::nullopt};
  const Tensor x_ref = ddim_sample(q, eps, 256, sched).final_state;
  const Tensor y = sample_student(ema, eps, sched.t_min);
  const Tensor x = to_x_space(y, eps, sched.t_min, sched);
  double se = 0.0, se_y = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    se += std::pow(x[i] - x_ref[i], 2);
    se_y += std::pow(y[i] - x_ref[i], 2);
  }
  const double rmse = std::sqrt(se / 1000.0);
  info("y_theta(eps, t_min) itself vs DDIM x: rmse " + num(std::sqrt(se_y / 1000.0)) +
       " (includes the sigma_tmin eps term)");
  return {6, "linear student, N(0.5, 0.5^2) teacher, 20k steps, 1-NFE vs DDIM-256 on 1000 held-out noises",
          rmse < 0.02 && train_secs < 120.0, "rmse " + num(rmse) + ", runtime " + num(train_secs, 3) + " s",
          "rmse < 0.02, < 120 s single-threaded", clock.seconds()};
}

// ---- 7-9: 8-Gaussian toy ---------------------------------------------------------------------

ExperimentConfig toy_config() {
  ExperimentConfig cfg;
  cfg.teacher.train.steps = 20000;
  cfg.boot.steps = 20000;
  cfg.boot.delta = 0.04;
  cfg.boot.beta = 1.0;
  cfg.boot.lr = 1e-4;
  cfg.boot.ema_decay = 0.999;
  cfg.boot.batch = 128;
  return cfg;
}

struct ToySeed {
  std::uint64_t seed = 0;
  std::unique_ptr<DenoiserNet> teacher;
  SampleSet ref, ref2;
  double baseline = 0.0;
  std::map<std::string, SampleSet> arms;
  std::map<std::string, double> ed;
  std::map<std::string, ModeCoverage> coverage;
  double teacher_secs = 0.0, student_secs = 0.0;
  std::unique_ptr<StudentNet> uniform_student;
};

void run_arm(ToySeed& s, const std::string& name, const BootConfig& bc, const ExperimentConfig& cfg) {
  Timer clock;
  StudentNet st = run_distill(*s.teacher, bc, s.seed);
  if (name == "uniform") s.student_secs = clock.seconds();
  SampleSet samples = student_samples(st, cfg.eval.n_samples, stream_seed(s.seed, Stream::student_noise));
  s.ed[name] = energy_distance(samples, s.ref);
  s.coverage[name] = mode_coverage(samples.points, cfg.teacher.dataset.centers(), cfg.eval.mode_radius);
  s.arms[name] = std::move(samples);
  if (name == "uniform") s.uniform_student = std::make_unique<StudentNet>(std::move(st));
}

std::vector<Line> criteria_toy(const std::set<int>& want) {
  const ExperimentConfig cfg = toy_config();
  const NoiseSchedule& sched = cfg.schedule;
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<ToySeed> runs(seeds.size());
  std::vector<Line> out;

  Timer phase;
  run_parallel(seeds.size(), [&](std::size_t j) {
    ToySeed& s = runs[j];
    s.seed = seeds[j];
    Timer clock;
    s.teacher = std::make_unique<DenoiserNet>(train_toy_teacher(cfg.teacher, sched, s.seed));
    s.teacher_secs = clock.seconds();
    s.ref = teacher_samples(*s.teacher, sched, 2000, 64, stream_seed(s.seed, Stream::reference_noise));
    s.ref2 = teacher_samples(*s.teacher, sched, 2000, 64, stream_seed(s.seed, Stream::second_reference_noise));
    s.baseline = energy_distance(s.ref, s.ref2);
    run_arm(s, "uniform", cfg.boot, cfg);
  });
  const double c7_secs = phase.seconds();

  bool ok7 = true;
  std::vector<double> ratios;
  for (const auto& s : runs) {
    const double r = s.ed.at("uniform") / s.baseline;
    ratios.push_back(r);
    ok7 = ok7 && r <= 3.0;
    info("seed " + std::to_string(s.seed) + ": ED(student, teacher) " + num(s.ed.at("uniform")) +
         ", ED(teacher, teacher) " + num(s.baseline) + ", ratio " + num(r, 3) + "; teacher " +
         num(s.teacher_secs, 3) + " s, student " + num(s.student_secs, 3) + " s");
  }
  if (want.count(7)) {
    out.push_back({7, "8-Gaussian toy, BOOT 1-NFE vs teacher DDIM-64, n = 2000, 3 seeds",
                   ok7 && c7_secs < 900.0,
                   "ED ratios " + list(ratios) + ", wall " + num(c7_secs, 4) + " s on " +
                       std::to_string(worker_count()) + " worker(s)",
                   "every ratio <= 3, wall < 900 s", c7_secs});
  }

  if (want.count(8) || want.count(9)) {
    phase = Timer();
    std::vector<std::pair<std::size_t, std::string>> jobs;
    for (std::size_t j = 0; j < runs.size(); ++j) {
      if (want.count(8)) jobs.emplace_back(j, "beta0");
      if (want.count(9)) jobs.emplace_back(j, "progressive");
    }
    std::mutex mu;
    run_parallel(jobs.size(), [&](std::size_t k) {
      const auto& [j, name] = jobs[k];
      BootConfig bc = cfg.boot;
      if (name == "beta0") bc.beta = 0.0;
      if (name == "progressive") bc.time_sampling = TimeSampling::progressive;
      ToySeed local;
      local.seed = runs[j].seed;
      local.teacher = std::make_unique<DenoiserNet>(*runs[j].teacher);
      local.ref = runs[j].ref;
      run_arm(local, name, bc, cfg);
      std::lock_guard<std::mutex> lock(mu);
      runs[j].ed[name] = local.ed[name];
      runs[j].coverage[name] = local.coverage[name];
    });
    const double secs = phase.seconds();

    if (want.count(8)) {
      bool ok = true;
      std::string measured;
      for (const auto& s : runs) {
        const auto& with = s.coverage.at("uniform");
        const auto& without = s.coverage.at("beta0");
        ok = ok && with.covered >= without.covered;
        measured += (measured.empty() ? "" : ", ") + std::to_string(with.covered) + " vs " +
                    std::to_string(without.covered);
        info("seed " + std::to_string(s.seed) + " mode fractions beta=1 " + list(with.fractions, 2));
        info("seed " + std::to_string(s.seed) + " mode fractions beta=0 " + list(without.fractions, 2));
      }
      out.push_back({8, "mode coverage beta = 1 vs beta = 0, same budget, 3 seeds", ok,
                     "modes covered (beta=1 vs beta=0) " + measured, "beta=1 >= beta=0 on every seed", secs});
    }
    if (want.count(9)) {
      std::vector<double> uni, prog;
      for (const auto& s : runs) {
        uni.push_back(s.ed.at("uniform"));
        prog.push_back(s.ed.at("progressive"));
      }
      const double mu_ = median3(uni), mp = median3(prog);
      out.push_back({9, "uniform vs progressive time sampling, median ED over 3 seeds", mu_ <= mp,
                     "uniform " + num(mu_) + " " + list(uni) + ", progressive " + num(mp) + " " + list(prog),
                     "uniform <= progressive", secs});
    }
  }

  if (want.count(11)) {
    Timer clock;
    const ToySeed& s = runs.front();
    const StudentNet student = s.uniform_student->ema();
    Rng rng(stream_seed(s.seed, Stream::evaluation));
    const Tensor eps = rng.normal_tensor(1000, 2);
    const SpeedReport sp = speed_report(TeacherQuery{s.teacher.get(), nullptr, std::nullopt}, student, eps, 64);
    info("teacher body " + std::to_string(s.teacher->arch().hidden) + "x" + std::to_string(s.teacher->arch().depth) +
         ", student body " + std::to_string(student.arch().hidden) + "x" + std::to_string(student.arch().depth) +
         "; teacher " + num(sp.teacher_ms, 4) + " ms, student " + num(sp.student_ms, 4) + " ms for 1000 samples");
    out.push_back({11, "sampling cost, student 1 NFE vs teacher DDIM 64 NFE on 1000 samples",
                   sp.teacher_nfe_per_sample == 64 && sp.student_nfe_per_sample == 1 && sp.ratio >= 30.0,
                   "NFE " + std::to_string(sp.teacher_nfe_per_sample) + " vs " +
                       std::to_string(sp.student_nfe_per_sample) + ", wall-clock ratio " + num(sp.ratio, 4),
                   "NFE 64 vs 1 exactly, ratio >= 30", clock.seconds()});
  }
  return out;
}

// ---- 10: guidance sweep ------------------------------------------------------------------------

Line criterion_guidance() {
  Timer clock;
  ExperimentConfig cfg = toy_config();
  cfg.teacher.dataset.labeled = true;
  GuidanceSpec g;
  g.condition = 1;
  g.weight_range = std::make_pair(1.0, 3.0);
  cfg.boot.guidance = g;
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const std::vector<double> weights{1.0, 2.0, 3.0};
  std::vector<std::vector<GuidanceRow>> rows(seeds.size());
  run_parallel(seeds.size(), [&](std::size_t j) {
    const DenoiserNet teacher = train_toy_teacher(cfg.teacher, cfg.schedule, seeds[j]);
    const StudentNet student = run_distill(teacher, cfg.boot, seeds[j]);
    Rng rng(stream_seed(seeds[j], Stream::student_noise));
    const Tensor eps = rng.normal_tensor(2000, 2);
    rows[j] = guidance_sweep(student, weights, 1, cfg.teacher.dataset.centers(), eps, g.weight_range);
  });
  std::vector<double> dist, trace;
  for (std::size_t w = 0; w < weights.size(); ++w) {
    std::vector<double> d, tr;
    for (const auto& r : rows) {
      d.push_back(r[w].nearest_mode_distance);
      tr.push_back(r[w].covariance_trace);
    }
    dist.push_back(median3(d));
    trace.push_back(median3(tr));
    info("w = " + num(weights[w], 2) + ": nearest-mode distance per seed " + list(d) + ", covariance trace per seed " +
         list(tr));
  }
  const bool ok = dist[1] <= dist[0] && dist[2] <= dist[1] && trace[1] <= trace[0] && trace[2] <= trace[1];
  return {10, "w-conditioned student on the 2-class toy, w in {1, 2, 3}, medians over 3 seeds", ok,
          "nearest-mode distance " + list(dist) + ", covariance trace " + list(trace),
          "both non-increasing in w", clock.seconds()};
}

// ---- 12: reproducibility -----------------------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(BOOT_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Line criterion_reproducible() {
  Timer clock;
  const fs::path root = fs::temp_directory_path() / ("boot_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  ExperimentConfig cfg;
  cfg.seed = 5;
  cfg.teacher.dataset.labeled = true;
  cfg.teacher.arch.hidden = 16;
  cfg.teacher.arch.depth = 2;
  cfg.teacher.arch.time_features = 8;
  cfg.teacher.train.steps = 200;
  cfg.boot.steps = 30;
  cfg.boot.batch = 32;
  cfg.boot.lr = 1e-3;
  cfg.eval.n_samples = 200;
  const fs::path config = root / "config.json";
  write_json(config, to_json(cfg));

  bool exits_ok = true;
  std::vector<std::string> compared;
  for (const char* tag : {"a", "b"}) {
    const fs::path d = root / tag;
    fs::create_directories(d);
    const std::string c = " --config " + config.string() + " --threads 1";
    auto step = [&](const std::string& args) {
      const int code = run_cli(args, d / "log.txt");
      exits_ok = exits_ok && code == 0;
      std::ofstream(d / "stdout.txt", std::ios::app) << slurp(d / "log.txt");
    };
    step("train-teacher" + c + " --out " + (d / "teacher").string());
    const std::string teacher = (d / "teacher" / "teacher.json").string();
    step("distill --fixed-clock" + c + " --teacher " + teacher + " --out " + (d / "student.json").string() +
         " --log " + (d / "metrics.csv").string());
    step("sample" + c + " --checkpoint " + (d / "student.json").string() + " --out " + (d / "student.csv").string());
    step("sample" + c + " --checkpoint " + teacher + " --steps 16 --out " + (d / "teacher.csv").string());
    step("eval" + c + " --samples " + (d / "student.csv").string() + " --reference " + (d / "teacher.csv").string() +
         " --teacher " + teacher + " --svg " + (d / "plot.svg").string() + " --out " + (d / "metrics.json").string());
    step("eval" + c + " --samples " + (d / "student.csv").string() + " --teacher " + teacher + " --student " +
         (d / "student.json").string() + " --out " + (d / "speed.json").string());
    step("verify --threads 1 --out " + (d / "verify.json").string());
    step("ablate boundary" + c + " --steps 10 --teacher " + teacher + " --out " + (d / "ablate").string());
  }
  std::size_t files = 0, mismatched = 0;
  std::string first_bad;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), root / "a");
    if (rel == "log.txt" || rel == "stdout.txt") continue;
    ++files;
    std::string a = slurp(entry.path()), b = slurp(root / "b" / rel);
    if (rel == "speed.json") {
      // Only the wall-clock timings may differ.
      json ja = json::parse(a), jb = json::parse(b);
      for (json* j : {&ja, &jb}) {
        for (const char* k : {"teacher_ms", "student_ms", "ratio"}) j->at("speed").erase(k);
      }
      a = ja.dump();
      b = jb.dump();
    }
    if (a != b) {
      ++mismatched;
      if (first_bad.empty()) first_bad = rel.string();
    }
  }
  fs::remove_all(root);
  return {12, "identical seed/config/threads=1 reruns of every command", exits_ok && mismatched == 0 && files >= 10,
          std::to_string(files) + " output files compared, " + std::to_string(mismatched) + " differ" +
              (first_bad.empty() ? "" : " (first: " + first_bad + ")") + (exits_ok ? "" : ", a command failed"),
          "byte-identical (speed timings excluded)", clock.seconds()};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> want;
  for (int i = 1; i < argc; ++i) want.insert(std::atoi(argv[i]));
  if (want.empty()) {
    for (int i = 1; i <= 12; ++i) want.insert(i);
  }
  std::cout << "acceptance: " << worker_count() << " worker thread(s), hardware concurrency "
            << std::thread::hardware_concurrency() << std::endl;
  std::vector<Line> lines;
  auto emit = [&](Line l) {
    print(l);
    lines.push_back(std::move(l));
  };
  try {
    if (want.count(1)) emit(criterion_equivalence());
    if (want.count(2)) emit(criterion_identity());
    if (want.count(3)) emit(criterion_orders());
    if (want.count(4) || want.count(5)) {
      Timer clock;
      const auto losses = loss_gradchecks();
      const double secs = clock.seconds();
      if (want.count(4)) emit(criterion_gradcheck(losses, secs));
      if (want.count(5)) emit(criterion_stop_gradient(losses, secs));
    }
    if (want.count(6)) emit(criterion_linear());
    if (want.count(12)) emit(criterion_reproducible());
    if (want.count(7) || want.count(8) || want.count(9) || want.count(11)) {
      for (auto& l : criteria_toy(want)) emit(std::move(l));
    }
    if (want.count(10)) emit(criterion_guidance());
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.id < b.id; });
  std::size_t passed = 0;
  std::cout << "\nsummary" << std::endl;
  for (const auto& l : lines) {
    std::cout << "  criterion " << l.id << ": " << (l.pass ? "PASS" : "FAIL") << std::endl;
    passed += l.pass ? 1 : 0;
  }
  std::cout << passed << "/" << lines.size() << " criteria passed" << std::endl;
  return passed == lines.size() ? 0 : 1;
}
