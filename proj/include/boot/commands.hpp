#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace boot {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct CommonOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::filesystem::path out;
};

struct TrainTeacherOptions {
  CommonOptions common;
  std::optional<std::size_t> steps;
};

struct DistillOptions {
  CommonOptions common;
  std::filesystem::path teacher;
  std::optional<std::filesystem::path> log;
  /// Partial student checkpoint to continue from.
  std::optional<std::filesystem::path> resume;
  /// Overrides the configured total number of steps.
  std::optional<std::size_t> steps;
  /// Stop (and checkpoint) once this many steps are done; the run can be
  /// continued later with `resume`.
  std::optional<std::size_t> stop_at;
  /// Write wall_ms as 0 so repeated runs give identical logs.
  bool fixed_clock = false;
};

struct SampleOptions {
  CommonOptions common;
  std::filesystem::path checkpoint;
  std::size_t steps = 64;
  std::string solver = "ddim";
  std::size_t n = 2000;
  std::optional<int> label;
  double weight = 1.0;
};

struct EvalOptions {
  CommonOptions common;
  std::filesystem::path samples;
  std::optional<std::filesystem::path> reference;
  std::optional<std::filesystem::path> teacher;
  std::optional<std::filesystem::path> student;
  std::optional<std::filesystem::path> svg;
  double radius = 0.6;
};

struct VerifyOptions {
  CommonOptions common;
  std::string mutation = "none";
};

struct AblateOptions {
  CommonOptions common;
  std::string name;
  std::filesystem::path teacher;
  std::optional<std::size_t> steps;
};

// Each command returns a process exit code and reports errors on stderr:
// 2 for usage/config problems, 1 for runtime failures.
int cmd_train_teacher(const TrainTeacherOptions& opt);
int cmd_distill(const DistillOptions& opt);
int cmd_sample(const SampleOptions& opt);
int cmd_eval(const EvalOptions& opt);
int cmd_verify(const VerifyOptions& opt);
int cmd_ablate(const AblateOptions& opt);

/// Path of the sidecar written next to a teacher checkpoint.
std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

}  // namespace boot
