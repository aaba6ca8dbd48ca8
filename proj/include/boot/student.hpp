#pragma once

#include <cstdint>
#include <span>

#include "boot/mlp.hpp"
#include "boot/params.hpp"
#include "boot/schedule.hpp"
#include "boot/teacher.hpp"

namespace boot {

enum class StudentBody {
  /// Teacher-initialized MLP with new target-time (and guidance-weight)
  /// embeddings that start at zero.
  mlp,
  /// Affine in eps with coefficients expanded in Chebyshev polynomials of
  /// the target time. Used for the linear-Gaussian exactness checks.
  linear,
};

std::string to_string(StudentBody body);
StudentBody student_body_from_string(const std::string& s);

/// Everything needed to rebuild a student's layer plan.
struct StudentArch {
  StudentBody body = StudentBody::mlp;
  std::size_t dim = 2;
  std::size_t hidden = 128;
  std::size_t depth = 3;
  std::size_t num_classes = 0;
  std::size_t time_features = 64;
  bool weight_conditioned = false;
  std::size_t basis_size = 8;
  PredictionKind init_adaptor = PredictionKind::signal;
};

/// Single-step generator y_theta(eps, t, c, w) approximating the signal
/// state y_t of the trajectory started from eps. The final sample is
/// y_theta(eps, t_min).
class StudentNet {
 public:
  StudentNet(const StudentArch& arch, NoiseSchedule sched, ParamSet params);

  /// Copies the teacher body; the teacher's own time input is pinned to
  /// t_max and the output is adapted so the initial student equals the
  /// teacher's first denoising output (NN_x, eps - NN_eps or -NN_v).
  static StudentNet from_teacher(const DenoiserNet& teacher, bool weight_conditioned = false);
  static StudentNet linear(std::size_t dim, std::size_t basis_size, NoiseSchedule sched);

  /// Records a forward pass. labels/weights may be empty when unused.
  Var forward(const BoundParams& params, const Tensor& eps, std::span<const double> t, std::span<const int> labels = {},
              std::span<const double> weights = {}) const;

  /// Tape-free evaluation with the live parameters; one NFE.
  Tensor predict(const Tensor& eps, std::span<const double> t, std::span<const int> labels = {},
                 std::span<const double> weights = {}) const;

  const StudentArch& arch() const { return arch_; }
  const LayerPlan& plan() const { return plan_; }
  const NoiseSchedule& schedule() const { return sched_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  std::size_t dim() const { return arch_.dim; }

  /// Student whose live weights are this one's EMA shadow.
  StudentNet ema() const;

  std::uint64_t nfe() const { return nfe_; }
  void reset_nfe() { nfe_ = 0; }

  static LayerPlan make_plan(const StudentArch& arch);
  /// Time features scaled for the guidance weight input.
  static double weight_feature_scale() { return 0.1; }

 private:
  Tensor linear_features(const Tensor& eps, std::span<const double> t) const;
  std::vector<Tensor> embedding_inputs(std::span<const double> t, std::span<const int> labels,
                                       std::span<const double> weights, std::size_t rows) const;

  StudentArch arch_;
  NoiseSchedule sched_;
  LayerPlan plan_;
  ParamSet params_;
  mutable std::uint64_t nfe_ = 0;
};

/// One forward pass at t_target (the final sample uses t_min).
Tensor sample_student(const StudentNet& student, const Tensor& eps, double t_target, std::span<const int> labels = {},
                      std::span<const double> weights = {});

}  // namespace boot
