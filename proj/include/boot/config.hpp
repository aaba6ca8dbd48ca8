#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "boot/checkpoint.hpp"
#include "boot/distill.hpp"
#include "boot/teacher.hpp"

namespace boot {

/// Raised for malformed or inconsistent configuration; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetConfig {
  /// "ring" (Gaussian mixture on a circle) or "gaussian" (diagonal Gaussian).
  std::string name = "ring";
  double radius = 4.0;
  double component_std = 0.15;
  std::size_t modes = 8;
  bool labeled = false;
  std::vector<double> mean{0.0, 0.0};
  std::vector<double> std{1.0, 1.0};

  std::size_t dim() const { return name == "ring" ? 2 : mean.size(); }
  std::size_t num_classes() const { return name == "ring" && labeled ? 2 : 0; }
  /// Short tag recorded in the teacher sidecar, e.g. "ring8" or "ring8-labeled".
  std::string tag() const;
  RingDataset ring() const;
  DataSampler sampler() const;
  /// Mode centers for coverage metrics (the mean for "gaussian").
  std::vector<std::vector<double>> centers() const;
  void validate() const;
};

struct TeacherConfig {
  DatasetConfig dataset;
  DenoiserArch arch;
  TeacherTrainConfig train;
};

struct EvalConfig {
  std::size_t n_samples = 2000;
  std::size_t ddim_steps = 64;
  double mode_radius = 0.6;
  std::vector<double> guidance_weights{1.0, 2.0, 3.0};
  std::size_t ref_steps = 512;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs";
  NoiseSchedule schedule;
  TeacherConfig teacher;
  BootConfig boot;
  EvalConfig eval;

  /// Throws ConfigError on inconsistent values.
  void validate() const;
};

// JSON round trips. Readers reject unknown keys and fill absent keys with
// defaults.
json to_json(const BootConfig& cfg);
BootConfig boot_config_from_json(const json& j);
json to_json(const GuidanceSpec& g);
GuidanceSpec guidance_from_json(const json& j);
json to_json(const DatasetConfig& d);
DatasetConfig dataset_from_json(const json& j);
json to_json(const TeacherConfig& t);
TeacherConfig teacher_config_from_json(const json& j);
json to_json(const EvalConfig& e);
EvalConfig eval_config_from_json(const json& j);
json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_from_json(const json& j);

/// Loads an ExperimentConfig; a missing or unreadable file is a ConfigError.
ExperimentConfig load_experiment(const std::filesystem::path& path);
/// Loads a BootConfig from either a bare BootConfig object or an
/// ExperimentConfig with a "boot" block.
BootConfig load_boot_config(const std::filesystem::path& path);

}  // namespace boot
