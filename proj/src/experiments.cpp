#include "boot/experiments.hpp"

#include "boot/log.hpp"
#include "boot/solvers.hpp"

namespace boot {

std::uint64_t stream_seed(std::uint64_t master, Stream s) {
  return derive_seed(master, static_cast<std::uint64_t>(s));
}

DenoiserNet train_toy_teacher(const TeacherConfig& cfg, const NoiseSchedule& sched, std::uint64_t seed,
                              TrainLog* log) {
  DenoiserArch arch = cfg.arch;
  arch.dim = cfg.dataset.dim();
  arch.num_classes = cfg.dataset.num_classes();
  Rng init_rng(stream_seed(seed, Stream::teacher_init));
  DenoiserNet net(arch, sched, init_rng);
  Rng train_rng(stream_seed(seed, Stream::teacher_train));
  TrainLog l = train_teacher(cfg.dataset.sampler(), net, cfg.train, train_rng);
  if (log) *log = std::move(l);
  return net;
}

StudentNet init_student(const DenoiserNet& teacher, const BootConfig& cfg) {
  const bool weight_conditioned = cfg.guidance && cfg.guidance->weight_range.has_value();
  return StudentNet::from_teacher(teacher, weight_conditioned);
}

StudentNet run_distill(const DenoiserNet& teacher, const BootConfig& cfg, std::uint64_t seed,
                       const StepCallback& on_step) {
  StudentNet student = init_student(teacher, cfg);
  Rng rng(stream_seed(seed, Stream::distill));
  return distill(teacher, student, cfg, rng, on_step);
}

std::string to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::ddim: return "ddim";
    case SamplerKind::signal_euler: return "signal-euler";
    case SamplerKind::signal_heun: return "signal-heun";
  }
  return "?";
}

SamplerKind sampler_from_string(const std::string& s) {
  if (s == "ddim") return SamplerKind::ddim;
  if (s == "signal-euler") return SamplerKind::signal_euler;
  if (s == "signal-heun") return SamplerKind::signal_heun;
  throw ConfigError("unknown solver '" + s + "' (expected ddim, signal-euler or signal-heun)");
}

SampleSet teacher_samples(const Denoiser& teacher, const NoiseSchedule& sched, std::size_t n, std::size_t steps,
                          std::uint64_t noise_seed, SamplerKind sampler, const GuidanceBatch* guidance) {
  Rng rng(noise_seed);
  const Tensor eps = rng.normal_tensor(n, teacher.dim());
  const TeacherQuery query{&teacher, guidance, std::nullopt};
  SampleSet out;
  out.seed = noise_seed;
  out.generator = "teacher-" + to_string(sampler) + "-" + std::to_string(steps);
  switch (sampler) {
    case SamplerKind::ddim: out.points = ddim_sample(query, eps, steps, sched).final_state; break;
    case SamplerKind::signal_euler:
      out.points = integrate_signal_ode(query, eps, steps, sched, SignalSolver::euler).final_state;
      break;
    case SamplerKind::signal_heun:
      out.points = integrate_signal_ode(query, eps, steps, sched, SignalSolver::heun).final_state;
      break;
  }
  if (guidance && guidance->conditional()) out.labels = guidance->condition;
  return out;
}

SampleSet student_samples(const StudentNet& student, std::size_t n, std::uint64_t noise_seed,
                          std::span<const int> labels, std::span<const double> weights) {
  Rng rng(noise_seed);
  const Tensor eps = rng.normal_tensor(n, student.dim());
  SampleSet out;
  out.seed = noise_seed;
  out.generator = "student-1nfe";
  out.points = sample_student(student, eps, student.schedule().t_min, labels, weights);
  out.labels.assign(labels.begin(), labels.end());
  return out;
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::boundary: return "boundary";
    case Ablation::time_sampling: return "time_sampling";
    case Ablation::guidance: return "guidance";
    case Ablation::solver_order: return "solver_order";
  }
  return "?";
}

Ablation ablation_from_string(const std::string& s) {
  if (s == "boundary") return Ablation::boundary;
  if (s == "time_sampling") return Ablation::time_sampling;
  if (s == "guidance") return Ablation::guidance;
  if (s == "solver_order") return Ablation::solver_order;
  throw ConfigError("unknown ablation '" + s + "' (expected boundary, time_sampling, guidance or solver_order)");
}

namespace {

json coverage_json(const ModeCoverage& c) { return {{"covered", c.covered}, {"fractions", c.fractions}}; }

ArmResult distill_arm(const std::string& name, const DenoiserNet& teacher, const BootConfig& cfg,
                      const ExperimentConfig& exp, std::uint64_t seed, const SampleSet& reference,
                      const StepCallback& on_step) {
  log_info("ablation arm '" + name + "': distilling " + std::to_string(cfg.steps) + " steps");
  StudentNet student = run_distill(teacher, cfg, seed, on_step);
  SampleSet samples = student_samples(student, exp.eval.n_samples, stream_seed(seed, Stream::student_noise));
  const auto centers = exp.teacher.dataset.centers();
  json metrics = {{"energy_distance", energy_distance(samples, reference)},
                  {"mode_coverage", coverage_json(mode_coverage(samples.points, centers, exp.eval.mode_radius))},
                  {"covariance_trace", covariance_trace(samples.points)},
                  {"nearest_mode_distance", mean_nearest_center_distance(samples.points, centers)}};
  return ArmResult{name, cfg, std::move(student), std::move(samples), std::move(metrics)};
}

}  // namespace

AblationReport run_ablation(Ablation ablation, const DenoiserNet& teacher, const ExperimentConfig& cfg,
                            std::uint64_t seed, const StepCallback& on_step) {
  const NoiseSchedule& sched = teacher.schedule();
  AblationReport report;
  report.ablation = ablation;
  report.reference = teacher_samples(teacher, sched, cfg.eval.n_samples, cfg.eval.ddim_steps,
                                     stream_seed(seed, Stream::reference_noise));
  const auto centers = cfg.teacher.dataset.centers();
  report.summary = {{"ablation", to_string(ablation)},
                    {"seed", seed},
                    {"reference", report.reference.generator},
                    {"reference_mode_coverage",
                     coverage_json(mode_coverage(report.reference.points, centers, cfg.eval.mode_radius))}};

  BootConfig base = cfg.boot;
  switch (ablation) {
    case Ablation::boundary: {
      BootConfig with = base, without = base;
      with.beta = base.beta > 0.0 ? base.beta : 1.0;
      without.beta = 0.0;
      report.arms.push_back(distill_arm("beta=" + json(with.beta).dump(), teacher, with, cfg, seed, report.reference,
                                        on_step));
      report.arms.push_back(distill_arm("beta=0", teacher, without, cfg, seed, report.reference, on_step));
      break;
    }
    case Ablation::time_sampling: {
      BootConfig uniform = base, progressive = base;
      uniform.time_sampling = TimeSampling::uniform;
      progressive.time_sampling = TimeSampling::progressive;
      report.arms.push_back(distill_arm("uniform", teacher, uniform, cfg, seed, report.reference, on_step));
      report.arms.push_back(distill_arm("progressive", teacher, progressive, cfg, seed, report.reference, on_step));
      break;
    }
    case Ablation::solver_order: {
      BootConfig euler = base, heun = base;
      euler.target_solver = TargetSolver::euler;
      heun.target_solver = TargetSolver::heun;
      report.arms.push_back(distill_arm("euler", teacher, euler, cfg, seed, report.reference, on_step));
      report.arms.push_back(distill_arm("heun", teacher, heun, cfg, seed, report.reference, on_step));
      Rng rng(stream_seed(seed, Stream::evaluation));
      const Tensor eps = rng.normal_tensor(256, teacher.dim());
      const std::vector<double> times{sched.t_max, 0.5 * (sched.t_min + sched.t_max), sched.t_min};
      const TeacherQuery query{&teacher, nullptr, base.clip};
      for (auto& arm : report.arms) {
        arm.metrics["trajectory_times"] = times;
        arm.metrics["trajectory_divergence"] =
            trajectory_divergence(arm.student, query, eps, times, {}, {}, cfg.eval.ref_steps);
      }
      break;
    }
    case Ablation::guidance: {
      if (teacher.num_classes() == 0) throw ConfigError("guidance ablation needs a class-conditional teacher");
      BootConfig guided = base;
      if (!guided.guidance || !guided.guidance->weight_range) {
        GuidanceSpec g;
        g.condition = 1;
        g.weight_range = std::make_pair(1.0, 3.0);
        guided.guidance = g;
      }
      const int condition = guided.guidance->condition.value_or(1);
      ArmResult arm = distill_arm("w-conditioned", teacher, guided, cfg, seed, report.reference, on_step);
      Rng rng(stream_seed(seed, Stream::student_noise));
      const Tensor eps = rng.normal_tensor(cfg.eval.n_samples, teacher.dim());
      const auto rows = guidance_sweep(arm.student, cfg.eval.guidance_weights, condition, centers, eps,
                                       guided.guidance->weight_range);
      json table = json::array();
      for (const auto& r : rows) {
        const GuidanceBatch g = GuidanceBatch::fixed(cfg.eval.n_samples, condition, kNullLabel, r.weight);
        const SampleSet ref = teacher_samples(teacher, sched, cfg.eval.n_samples, cfg.eval.ddim_steps,
                                              stream_seed(seed, Stream::reference_noise), SamplerKind::ddim, &g);
        table.push_back({{"w", r.weight},
                         {"nearest_mode_distance", r.nearest_mode_distance},
                         {"covariance_trace", r.covariance_trace},
                         {"teacher_nearest_mode_distance", mean_nearest_center_distance(ref.points, centers)},
                         {"teacher_covariance_trace", covariance_trace(ref.points)}});
      }
      arm.metrics["sweep"] = table;
      arm.metrics["condition"] = condition;
      report.arms.push_back(std::move(arm));
      break;
    }
  }
  json arms = json::array();
  for (const auto& a : report.arms) arms.push_back({{"name", a.name}, {"metrics", a.metrics}});
  report.summary["arms"] = arms;
  return report;
}

}  // namespace boot
