#include "boot/teacher.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace boot {

std::string to_string(PredictionKind kind) {
  switch (kind) {
    case PredictionKind::signal: return "signal";
    case PredictionKind::noise: return "noise";
    case PredictionKind::v: return "v";
  }
  return "signal";
}

PredictionKind prediction_kind_from_string(const std::string& s) {
  if (s == "signal") return PredictionKind::signal;
  if (s == "noise") return PredictionKind::noise;
  if (s == "v") return PredictionKind::v;
  throw ContractError("unknown prediction kind '" + s + "'");
}

namespace {

void check_rows(const Tensor& a, const Tensor& b, std::span<const double> alpha, std::span<const double> sigma) {
  if (!a.same_shape(b)) throw DimensionError("conversion: shape mismatch");
  if (alpha.size() != a.rows() || sigma.size() != a.rows()) {
    throw DimensionError("conversion: need one (alpha, sigma) per row");
  }
}

}  // namespace

Tensor signal_from_noise(const Tensor& x_t, const Tensor& eps_hat, std::span<const double> alpha,
                         std::span<const double> sigma) {
  check_rows(x_t, eps_hat, alpha, sigma);
  Tensor out = x_t;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    if (std::abs(alpha[r]) < 1e-12) {
      throw DomainError("signal_from_noise: alpha_t=" + std::to_string(alpha[r]) + " too small to invert");
    }
    auto o = out.row(r);
    auto e = eps_hat.row(r);
    for (std::size_t c = 0; c < o.size(); ++c) o[c] = (o[c] - sigma[r] * e[c]) / alpha[r];
  }
  return out;
}

Tensor signal_from_v(const Tensor& x_t, const Tensor& v_hat, std::span<const double> alpha,
                     std::span<const double> sigma) {
  check_rows(x_t, v_hat, alpha, sigma);
  Tensor out = x_t;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto o = out.row(r);
    auto v = v_hat.row(r);
    for (std::size_t c = 0; c < o.size(); ++c) o[c] = alpha[r] * o[c] - sigma[r] * v[c];
  }
  return out;
}

Tensor noise_from_signal(const Tensor& x_t, const Tensor& x0_hat, std::span<const double> alpha,
                         std::span<const double> sigma) {
  check_rows(x_t, x0_hat, alpha, sigma);
  Tensor out = x_t;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    if (std::abs(sigma[r]) < 1e-12) throw DomainError("noise_from_signal: sigma_t too small to invert");
    auto o = out.row(r);
    auto x0 = x0_hat.row(r);
    for (std::size_t c = 0; c < o.size(); ++c) o[c] = (o[c] - alpha[r] * x0[c]) / sigma[r];
  }
  return out;
}

Tensor v_from_signal(const Tensor& x_t, const Tensor& x0_hat, std::span<const double> alpha,
                     std::span<const double> sigma) {
  // v = alpha eps - sigma x0 with eps recovered from x_t.
  Tensor eps = noise_from_signal(x_t, x0_hat, alpha, sigma);
  for (std::size_t r = 0; r < eps.rows(); ++r) {
    auto e = eps.row(r);
    auto x0 = x0_hat.row(r);
    for (std::size_t c = 0; c < e.size(); ++c) e[c] = alpha[r] * e[c] - sigma[r] * x0[c];
  }
  return eps;
}

// ---- Denoiser ---------------------------------------------------------------

Tensor Denoiser::predict_signal(const Tensor& x, std::span<const double> t, std::span<const int> labels) const {
  if (x.rank() != 2 || x.cols() != dim()) {
    throw DimensionError("denoiser: expected (B, " + std::to_string(dim()) + ") input, got " +
                         shape_string(x.shape()));
  }
  if (t.size() != x.rows()) throw DimensionError("denoiser: need one time per row");
  if (!labels.empty()) {
    if (labels.size() != x.rows()) throw DimensionError("denoiser: need one label per row");
    for (int l : labels) {
      if (l == kNullLabel) continue;
      if (num_classes() == 0) throw ContractError("conditional query on an unconditional denoiser");
      if (l < 0 || static_cast<std::size_t>(l) >= num_classes()) {
        throw DomainError("denoiser: label " + std::to_string(l) + " out of range");
      }
    }
  }
  ++nfe_;
  return predict_impl(x, t, labels);
}

Tensor Denoiser::predict_signal(const Tensor& x, double t, std::span<const int> labels) const {
  const std::vector<double> ts(x.rows(), t);
  return predict_signal(x, ts, labels);
}

Tensor predict_signal(const Denoiser& net, const Tensor& x_t, double t, std::span<const int> labels) {
  return net.predict_signal(x_t, t, labels);
}

// ---- analytic teacher -------------------------------------------------------

AnalyticGaussianTeacher::AnalyticGaussianTeacher(Eigen::VectorXd mean, Eigen::MatrixXd cov, NoiseSchedule sched)
    : mean_(std::move(mean)), cov_(std::move(cov)), sched_(sched) {
  if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size()) {
    throw DimensionError("AnalyticGaussianTeacher: covariance must be square and match the mean");
  }
  if (!cov_.isApprox(cov_.transpose(), 1e-12)) throw ContractError("AnalyticGaussianTeacher: covariance not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(cov_);
  if (llt.info() != Eigen::Success) throw ContractError("AnalyticGaussianTeacher: covariance not positive definite");
}

Eigen::VectorXd AnalyticGaussianTeacher::posterior_mean(const Eigen::VectorXd& x_t, double t) const {
  if (!(t > 0.0 && t < 1.0)) throw DomainError("posterior_mean: t must lie in (0, 1)");
  const auto [a, s] = sched_.alpha_sigma(t);
  const auto n = mean_.size();
  Eigen::MatrixXd m = a * a * cov_ + s * s * Eigen::MatrixXd::Identity(n, n);
  Eigen::LDLT<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success || !solver.isPositive()) {
    throw DomainError("posterior_mean: singular system");
  }
  Eigen::VectorXd rhs = x_t - a * mean_;
  Eigen::VectorXd sol = solver.solve(rhs);
  return mean_ + a * (cov_ * sol);
}

Eigen::VectorXd analytic_posterior_mean(const AnalyticGaussianTeacher& teacher, const Eigen::VectorXd& x_t,
                                        double t) {
  return teacher.posterior_mean(x_t, t);
}

Eigen::VectorXd AnalyticGaussianTeacher::exact_signal_path(const Eigen::VectorXd& eps, double t_start,
                                                           double t) const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov_);
  const Eigen::MatrixXd& q = es.eigenvectors();
  const Eigen::VectorXd& lam = es.eigenvalues();
  const auto [a0, s0] = sched_.alpha_sigma(t_start);
  const auto [a, s] = sched_.alpha_sigma(t);
  // The flow keeps standardized eigen-coordinates fixed.
  Eigen::VectorXd z = q.transpose() * (eps - a0 * mean_);
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z(i) *= std::sqrt(a * a * lam(i) + s * s) / std::sqrt(a0 * a0 * lam(i) + s0 * s0);
  }
  Eigen::VectorXd x = a * mean_ + q * z;
  return (x - s * eps) / a;
}

Tensor AnalyticGaussianTeacher::predict_impl(const Tensor& x, std::span<const double> t,
                                             std::span<const int> labels) const {
  for (int l : labels) {
    if (l != kNullLabel) throw ContractError("AnalyticGaussianTeacher is unconditional");
  }
  Tensor out(x.shape());
  const auto d = static_cast<Eigen::Index>(dim());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    Eigen::Map<const Eigen::VectorXd> xr(x.row(r).data(), d);
    Eigen::VectorXd m = posterior_mean(xr, t[r]);
    for (Eigen::Index c = 0; c < d; ++c) out.at(r, static_cast<std::size_t>(c)) = m(c);
  }
  return out;
}

// ---- MLP teacher ------------------------------------------------------------

LayerPlan DenoiserNet::make_plan(const DenoiserArch& arch) {
  LayerPlan plan;
  plan.input_dim = arch.dim;
  plan.output_dim = arch.dim;
  plan.hidden = arch.hidden;
  plan.depth = arch.depth;
  plan.embeddings.push_back({"time", arch.time_features, true, false});
  if (arch.num_classes > 0) plan.embeddings.push_back({"class", arch.num_classes + 1, false, false});
  return plan;
}

DenoiserNet::DenoiserNet(const DenoiserArch& arch, NoiseSchedule sched, Rng& rng)
    : arch_(arch), sched_(sched), plan_(make_plan(arch)), params_(init_mlp(plan_, rng)) {
  sched_.validate();
}

DenoiserNet::DenoiserNet(const DenoiserArch& arch, NoiseSchedule sched, ParamSet params)
    : arch_(arch), sched_(sched), plan_(make_plan(arch)), params_(std::move(params)) {
  sched_.validate();
  Rng probe(0);
  const ParamSet expected = init_mlp(plan_, probe);
  for (const auto& e : expected.entries()) {
    if (!params_.contains(e.name) || !params_.get(e.name).same_shape(e.value)) {
      throw DimensionError("DenoiserNet: parameter '" + e.name + "' missing or misshapen");
    }
  }
}

std::vector<Tensor> DenoiserNet::embedding_inputs(std::span<const double> t, std::span<const int> labels,
                                                  std::size_t rows) const {
  std::vector<Tensor> out;
  out.push_back(sinusoidal_features(t, arch_.time_features));
  if (arch_.num_classes > 0) {
    if (labels.empty()) {
      const std::vector<int> nulls(rows, kNullLabel);
      out.push_back(one_hot(nulls, arch_.num_classes + 1));
    } else {
      out.push_back(one_hot(labels, arch_.num_classes + 1));
    }
  }
  return out;
}

Var DenoiserNet::forward_raw(const BoundParams& params, Var x, std::span<const double> t,
                             std::span<const int> labels) const {
  Tape& tape = params.tape();
  std::vector<Var> emb;
  for (auto& e : embedding_inputs(t, labels, tape.value(x).rows())) emb.push_back(tape.constant(std::move(e)));
  return forward_mlp(params, plan_, x, emb);
}

Tensor DenoiserNet::predict_impl(const Tensor& x, std::span<const double> t, std::span<const int> labels) const {
  const std::vector<Tensor> emb = embedding_inputs(t, labels, x.rows());
  Tensor raw = forward_mlp(params_, plan_, x, emb);
  if (arch_.kind == PredictionKind::signal) return raw;
  std::vector<double> alpha(x.rows()), sigma(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) std::tie(alpha[r], sigma[r]) = sched_.alpha_sigma(t[r]);
  if (arch_.kind == PredictionKind::noise) return signal_from_noise(x, raw, alpha, sigma);
  return signal_from_v(x, raw, alpha, sigma);
}

// ---- data -------------------------------------------------------------------

std::vector<std::vector<double>> RingDataset::centers() const {
  std::vector<std::vector<double>> out;
  for (std::size_t k = 0; k < modes; ++k) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(modes);
    out.push_back({radius * std::cos(a), radius * std::sin(a)});
  }
  return out;
}

double RingDataset::label_one_probability(std::size_t k) const {
  const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(modes);
  return 0.5 * (1.0 + std::cos(a));
}

DataBatch RingDataset::sample(std::size_t n, Rng& rng) const {
  const auto c = centers();
  DataBatch b{Tensor::zeros(n, 2), {}};
  if (labeled) b.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = rng.index(modes);
    const double u = rng.normal(), v = rng.normal();
    double sd = component_std;
    if (labeled) {
      b.labels[i] = rng.uniform(0.0, 1.0) < label_one_probability(k) ? 1 : 0;
      sd *= b.labels[i] == 1 ? class_one_std_scale : class_zero_std_scale;
    }
    b.x.at(i, 0) = c[k][0] + sd * u;
    b.x.at(i, 1) = c[k][1] + sd * v;
  }
  return b;
}

DataSampler ring_sampler(const RingDataset& ds) {
  return [ds](std::size_t n, Rng& rng) { return ds.sample(n, rng); };
}

DataSampler constant_sampler(std::vector<double> value) {
  return [value = std::move(value)](std::size_t n, Rng&) {
    DataBatch b{Tensor::zeros(n, value.size()), {}};
    for (std::size_t i = 0; i < n; ++i) std::copy(value.begin(), value.end(), b.x.row(i).begin());
    return b;
  };
}

DataSampler gaussian_sampler(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
  return [mean, chol](std::size_t n, Rng& rng) {
    const auto d = mean.size();
    DataBatch b{Tensor::zeros(n, static_cast<std::size_t>(d)), {}};
    Eigen::VectorXd z(d);
    for (std::size_t i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) z(j) = rng.normal();
      Eigen::VectorXd x = mean + chol * z;
      for (Eigen::Index j = 0; j < d; ++j) b.x.at(i, static_cast<std::size_t>(j)) = x(j);
    }
    return b;
  };
}

// ---- training ---------------------------------------------------------------

TrainLog train_teacher(const DataSampler& data, DenoiserNet& net, const TeacherTrainConfig& cfg, Rng& rng) {
  if (!(cfg.uncond_prob >= 0.0 && cfg.uncond_prob <= 1.0)) throw ContractError("uncond_prob must lie in [0, 1]");
  const NoiseSchedule& sched = net.schedule();
  TrainLog log;
  log.loss.reserve(cfg.steps);
  net.params().sync_shadow();
  const std::size_t b = cfg.batch;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    DataBatch batch = data(b, rng);
    if (batch.x.cols() != net.dim()) throw DimensionError("train_teacher: data dimension does not match the net");
    std::vector<double> t(b), alpha(b), sigma(b);
    for (std::size_t i = 0; i < b; ++i) {
      t[i] = rng.uniform(sched.t_min, sched.t_max);
      std::tie(alpha[i], sigma[i]) = sched.alpha_sigma(t[i]);
    }
    Tensor eps = rng.normal_tensor(b, net.dim());
    std::vector<int> labels;
    if (net.num_classes() > 0) {
      labels = batch.labels.empty() ? std::vector<int>(b, kNullLabel) : batch.labels;
      for (int& l : labels) {
        if (rng.uniform(0.0, 1.0) < cfg.uncond_prob) l = kNullLabel;
      }
    }
    Tensor x_t = batch.x;
    Tensor target = batch.x;
    for (std::size_t i = 0; i < b; ++i) {
      auto xr = x_t.row(i);
      auto tr = target.row(i);
      auto er = eps.row(i);
      for (std::size_t c = 0; c < xr.size(); ++c) {
        const double x0 = xr[c];
        xr[c] = alpha[i] * x0 + sigma[i] * er[c];
        switch (net.kind()) {
          case PredictionKind::signal: tr[c] = x0; break;
          case PredictionKind::noise: tr[c] = er[c]; break;
          case PredictionKind::v: tr[c] = alpha[i] * er[c] - sigma[i] * x0; break;
        }
      }
    }
    Tape tape;
    BoundParams bound(tape, net.params());
    Var raw = net.forward_raw(bound, tape.constant(x_t), t, labels);
    Var loss = scale(sum(square(sub(raw, tape.constant(target)))), 1.0 / static_cast<double>(b));
    const double lv = tape.value(loss)[0];
    if (!std::isfinite(lv)) throw std::runtime_error("train_teacher: non-finite loss at step " + std::to_string(step));
    log.loss.push_back(lv);
    adamw_step(net.params(), bound.gradients(tape.backward(loss)), cfg.lr, cfg.weight_decay);
    ema_update(net.params(), cfg.ema_decay);
  }
  for (auto& e : net.params().entries()) e.value = e.shadow;
  return log;
}

}  // namespace boot
