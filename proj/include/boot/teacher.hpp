#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "boot/mlp.hpp"
#include "boot/params.hpp"
#include "boot/rng.hpp"
#include "boot/schedule.hpp"
#include "boot/tensor.hpp"

namespace boot {

/// Label value meaning "no condition" (the CFG null token).
inline constexpr int kNullLabel = -1;

enum class PredictionKind { signal, noise, v };

std::string to_string(PredictionKind kind);
PredictionKind prediction_kind_from_string(const std::string& s);

// Conversions between parameterizations at fixed (x_t, t); rows share one
// (alpha, sigma) pair per row.
Tensor signal_from_noise(const Tensor& x_t, const Tensor& eps_hat, std::span<const double> alpha,
                         std::span<const double> sigma);
Tensor signal_from_v(const Tensor& x_t, const Tensor& v_hat, std::span<const double> alpha,
                     std::span<const double> sigma);
Tensor noise_from_signal(const Tensor& x_t, const Tensor& x0_hat, std::span<const double> alpha,
                         std::span<const double> sigma);
Tensor v_from_signal(const Tensor& x_t, const Tensor& x0_hat, std::span<const double> alpha,
                     std::span<const double> sigma);

/// A frozen denoiser queried in signal space. Every call to predict_signal
/// is one network function evaluation (NFE), however many rows the batch holds.
class Denoiser {
 public:
  Denoiser() = default;
  Denoiser(const Denoiser& other) : nfe_(other.nfe_.load()) {}
  Denoiser& operator=(const Denoiser& other) {
    nfe_ = other.nfe_.load();
    return *this;
  }
  virtual ~Denoiser() = default;

  /// x: (B, D); t: one time per row; labels: one per row or empty for
  /// unconditional queries (kNullLabel everywhere).
  Tensor predict_signal(const Tensor& x, std::span<const double> t, std::span<const int> labels = {}) const;
  Tensor predict_signal(const Tensor& x, double t, std::span<const int> labels = {}) const;

  virtual std::size_t dim() const = 0;
  /// 0 for unconditional denoisers.
  virtual std::size_t num_classes() const { return 0; }

  std::uint64_t nfe() const { return nfe_.load(); }
  void reset_nfe() { nfe_ = 0; }

 protected:
  virtual Tensor predict_impl(const Tensor& x, std::span<const double> t, std::span<const int> labels) const = 0;

 private:
  mutable std::atomic<std::uint64_t> nfe_{0};
};

/// Wraps an arbitrary function; used for synthetic teachers in tests.
class FunctionDenoiser final : public Denoiser {
 public:
  using Fn = std::function<Tensor(const Tensor&, std::span<const double>, std::span<const int>)>;
  FunctionDenoiser(std::size_t dim, Fn fn, std::size_t num_classes = 0)
      : dim_(dim), classes_(num_classes), fn_(std::move(fn)) {}

  std::size_t dim() const override { return dim_; }
  std::size_t num_classes() const override { return classes_; }

 protected:
  Tensor predict_impl(const Tensor& x, std::span<const double> t, std::span<const int> labels) const override {
    return fn_(x, t, labels);
  }

 private:
  std::size_t dim_;
  std::size_t classes_;
  Fn fn_;
};

/// Exact posterior mean for Gaussian data N(mean, cov):
///   E[x0 | x_t] = mu + a S (a^2 S + s^2 I)^{-1} (x_t - a mu).
class AnalyticGaussianTeacher final : public Denoiser {
 public:
  AnalyticGaussianTeacher(Eigen::VectorXd mean, Eigen::MatrixXd cov, NoiseSchedule sched = {});

  std::size_t dim() const override { return static_cast<std::size_t>(mean_.size()); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& cov() const { return cov_; }
  const NoiseSchedule& schedule() const { return sched_; }

  Eigen::VectorXd posterior_mean(const Eigen::VectorXd& x_t, double t) const;

  /// Closed-form probability-flow trajectory started from x_{t_start} = eps,
  /// evaluated at t, in signal space y_t = (x_t - sigma_t eps) / alpha_t.
  Eigen::VectorXd exact_signal_path(const Eigen::VectorXd& eps, double t_start, double t) const;

 protected:
  Tensor predict_impl(const Tensor& x, std::span<const double> t, std::span<const int> labels) const override;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  NoiseSchedule sched_;
};

Eigen::VectorXd analytic_posterior_mean(const AnalyticGaussianTeacher& teacher, const Eigen::VectorXd& x_t,
                                        double t);

struct DenoiserArch {
  std::size_t dim = 2;
  std::size_t hidden = 128;
  std::size_t depth = 3;
  std::size_t num_classes = 0;
  std::size_t time_features = 64;
  PredictionKind kind = PredictionKind::signal;
};

/// MLP teacher f_phi(x_t, t, c). The raw network output is interpreted
/// according to `kind` and converted to a signal estimate.
class DenoiserNet final : public Denoiser {
 public:
  DenoiserNet(const DenoiserArch& arch, NoiseSchedule sched, Rng& rng);
  DenoiserNet(const DenoiserArch& arch, NoiseSchedule sched, ParamSet params);

  std::size_t dim() const override { return arch_.dim; }
  std::size_t num_classes() const override { return arch_.num_classes; }

  const DenoiserArch& arch() const { return arch_; }
  PredictionKind kind() const { return arch_.kind; }
  const LayerPlan& plan() const { return plan_; }
  const NoiseSchedule& schedule() const { return sched_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  /// Embedding inputs in plan order: time features, then class one-hot.
  std::vector<Tensor> embedding_inputs(std::span<const double> t, std::span<const int> labels, std::size_t rows) const;
  /// Raw parameterization output on a tape.
  Var forward_raw(const BoundParams& params, Var x, std::span<const double> t, std::span<const int> labels) const;

  static LayerPlan make_plan(const DenoiserArch& arch);

 protected:
  Tensor predict_impl(const Tensor& x, std::span<const double> t, std::span<const int> labels) const override;

 private:
  DenoiserArch arch_;
  NoiseSchedule sched_;
  LayerPlan plan_;
  ParamSet params_;
};

Tensor predict_signal(const Denoiser& net, const Tensor& x_t, double t, std::span<const int> labels = {});

// ---- data -----------------------------------------------------------------

struct DataBatch {
  Tensor x;
  std::vector<int> labels;  // empty for unlabeled data
};

using DataSampler = std::function<DataBatch(std::size_t n, Rng& rng)>;

/// Eight Gaussians evenly spaced on a circle.
struct RingDataset {
  double radius = 4.0;
  double component_std = 0.15;
  std::size_t modes = 8;
  /// When set, each point gets label 1 with probability (1 + cos angle)/2
  /// of its mode and label 0 otherwise; class 1 points sit tighter around
  /// their center than class 0 points.
  bool labeled = false;
  double class_one_std_scale = 0.5;
  double class_zero_std_scale = 1.5;

  std::vector<std::vector<double>> centers() const;
  DataBatch sample(std::size_t n, Rng& rng) const;
  /// Probability of label 1 for mode k.
  double label_one_probability(std::size_t k) const;
};

DataSampler ring_sampler(const RingDataset& ds);
DataSampler constant_sampler(std::vector<double> value);
DataSampler gaussian_sampler(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

struct TeacherTrainConfig {
  std::size_t steps = 20000;
  std::size_t batch = 256;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double uncond_prob = 0.2;
  double ema_decay = 0.999;
};

struct TrainLog {
  std::vector<double> loss;
};

/// Minimizes E |f(x_t, t) - target|^2 with x_t = alpha_t x + sigma_t eps,
/// t ~ U[t_min, t_max]; target is x, eps or v per the net's kind. Labels
/// are replaced by the null token with probability uncond_prob. On return
/// the net holds its EMA weights.
TrainLog train_teacher(const DataSampler& data, DenoiserNet& net, const TeacherTrainConfig& cfg, Rng& rng);

}  // namespace boot
