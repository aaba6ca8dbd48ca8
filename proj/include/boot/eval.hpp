#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "boot/guidance.hpp"
#include "boot/student.hpp"
#include "boot/tensor.hpp"

namespace boot {

/// Generated or reference points plus the provenance needed to regenerate them.
struct SampleSet {
  Tensor points;            // (n, D)
  std::vector<int> labels;  // empty or one per point
  std::uint64_t seed = 0;
  std::string generator;    // e.g. "teacher-ddim-64", "student-1nfe"

  std::size_t size() const { return points.rank() == 2 ? points.rows() : 0; }
  std::size_t dim() const { return points.rank() == 2 ? points.cols() : 0; }
  /// Throws DimensionError on rank != 2 or a label count mismatch.
  void validate() const;
};

/// 2 E|A - B| - E|A - A'| - E|B - B'| with all-pairs (V-statistic) means.
/// Per-row partial sums may be spread over `threads` workers; they are
/// reduced in row order so the result does not depend on the thread count.
double energy_distance(const Tensor& a, const Tensor& b, std::size_t threads = 1);
double energy_distance(const SampleSet& a, const SampleSet& b, std::size_t threads = 1);

struct ModeCoverage {
  std::size_t covered = 0;
  /// Fraction of all samples within `radius` of each center.
  std::vector<double> fractions;
};

/// A mode counts as covered when at least `min_fraction` of the samples lie
/// within `radius` of its center.
ModeCoverage mode_coverage(const Tensor& samples, const std::vector<std::vector<double>>& centers, double radius,
                           double min_fraction = 0.05);

/// Signal-space reference path for trajectory checks: Heun on the
/// continuous Signal-ODE from y_{t_max} = f~(eps, t_max), `n_steps` uniform
/// steps over [t_min, t_max], with states reported at the requested times.
std::vector<Tensor> reference_signal_states(const TeacherQuery& teacher, const Tensor& eps,
                                            std::span<const double> times, const NoiseSchedule& sched,
                                            std::size_t n_steps = 512);

/// Mean over eps of |y_theta(eps, t) - y_t^ref(eps)| for each t in `times`.
std::vector<double> trajectory_divergence(const StudentNet& student, const TeacherQuery& teacher, const Tensor& eps,
                                          std::span<const double> times, std::span<const int> labels = {},
                                          std::span<const double> weights = {}, std::size_t ref_steps = 512);

struct GuidanceRow {
  double weight = 0.0;
  double nearest_mode_distance = 0.0;
  double covariance_trace = 0.0;
};

double mean_nearest_center_distance(const Tensor& samples, const std::vector<std::vector<double>>& centers);
double covariance_trace(const Tensor& samples);

/// Samples the w-conditioned student for class `condition` at each weight
/// on a fixed eps set. Weights outside `trained_range` log a warning.
std::vector<GuidanceRow> guidance_sweep(const StudentNet& student, std::span<const double> weights, int condition,
                                        const std::vector<std::vector<double>>& centers, const Tensor& eps,
                                        std::optional<std::pair<double, double>> trained_range = std::nullopt);

struct SpeedReport {
  double teacher_ms = 0.0;
  double student_ms = 0.0;
  double ratio = 0.0;
  /// Network evaluations per generated sample.
  std::uint64_t teacher_nfe_per_sample = 0;
  std::uint64_t student_nfe_per_sample = 0;
  std::uint64_t teacher_nfe_total = 0;
  std::uint64_t student_nfe_total = 0;
};

/// Times DDIM with `ddim_steps` against one student pass on the same eps
/// batch. Each timing is the minimum over `repeats` runs.
SpeedReport speed_report(const TeacherQuery& teacher, const StudentNet& student, const Tensor& eps,
                         std::size_t ddim_steps, std::size_t repeats = 3);

// ---- files ------------------------------------------------------------------

/// CSV with header x0,...,x{D-1}[,label]; values printed with 17 significant digits.
void write_samples_csv(const std::filesystem::path& path, const SampleSet& samples);
SampleSet read_samples_csv(const std::filesystem::path& path);

/// SVG 1.1 scatter of the first two coordinates (1-D data on a line), one
/// circle element per point, viewBox fitted to the data bounds.
std::string scatter_svg(const Tensor& points, std::span<const int> labels = {});
void write_scatter_svg(const std::filesystem::path& path, const Tensor& points, std::span<const int> labels = {});

}  // namespace boot
