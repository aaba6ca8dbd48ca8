#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "boot/config.hpp"
#include "boot/distill.hpp"
#include "boot/eval.hpp"
#include "boot/guidance.hpp"
#include "boot/student.hpp"
#include "boot/teacher.hpp"

namespace boot {

// Every random stream of an experiment is derived from its master seed.
enum class Stream : std::uint64_t {
  teacher_init = 1,
  teacher_train = 2,
  distill = 3,
  reference_noise = 4,
  second_reference_noise = 5,
  student_noise = 6,
  evaluation = 7,
};

std::uint64_t stream_seed(std::uint64_t master, Stream s);

/// Fresh teacher trained on the configured dataset.
DenoiserNet train_toy_teacher(const TeacherConfig& cfg, const NoiseSchedule& sched, std::uint64_t seed,
                              TrainLog* log = nullptr);

/// Student initialized from the teacher; w-conditioned when the guidance
/// block gives a weight range.
StudentNet init_student(const DenoiserNet& teacher, const BootConfig& cfg);

/// Initializes and distills a student; returns the EMA student.
StudentNet run_distill(const DenoiserNet& teacher, const BootConfig& cfg, std::uint64_t seed,
                       const StepCallback& on_step = {});

enum class SamplerKind { ddim, signal_euler, signal_heun };
std::string to_string(SamplerKind k);
SamplerKind sampler_from_string(const std::string& s);

/// n samples from the teacher with `steps` sampler steps. DDIM returns
/// x_{t_min}; the signal solvers return y_{t_min}.
SampleSet teacher_samples(const Denoiser& teacher, const NoiseSchedule& sched, std::size_t n, std::size_t steps,
                          std::uint64_t noise_seed, SamplerKind sampler = SamplerKind::ddim,
                          const GuidanceBatch* guidance = nullptr);

/// n one-NFE samples y_theta(eps, t_min).
SampleSet student_samples(const StudentNet& student, std::size_t n, std::uint64_t noise_seed,
                          std::span<const int> labels = {}, std::span<const double> weights = {});

enum class Ablation { boundary, time_sampling, guidance, solver_order };
std::string to_string(Ablation a);
/// Throws ConfigError for unknown names.
Ablation ablation_from_string(const std::string& s);

struct ArmResult {
  std::string name;
  BootConfig cfg;
  StudentNet student;
  SampleSet samples;
  json metrics;
};

struct AblationReport {
  Ablation ablation = Ablation::boundary;
  std::vector<ArmResult> arms;
  /// Teacher DDIM reference the arms are compared against.
  SampleSet reference;
  json summary;
};

/// Runs the paired configurations of one ablation with the boot block of
/// `cfg` as the shared base.
AblationReport run_ablation(Ablation ablation, const DenoiserNet& teacher, const ExperimentConfig& cfg,
                            std::uint64_t seed, const StepCallback& on_step = {});

}  // namespace boot
