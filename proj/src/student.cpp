#include "boot/student.hpp"

#include <cmath>

namespace boot {

std::string to_string(StudentBody body) { return body == StudentBody::mlp ? "mlp" : "linear"; }

StudentBody student_body_from_string(const std::string& s) {
  if (s == "mlp") return StudentBody::mlp;
  if (s == "linear") return StudentBody::linear;
  throw ContractError("unknown student body '" + s + "'");
}

LayerPlan StudentNet::make_plan(const StudentArch& arch) {
  LayerPlan plan;
  plan.output_dim = arch.dim;
  if (arch.body == StudentBody::linear) {
    plan.input_dim = arch.basis_size * (arch.dim + 1);
    plan.depth = 0;
    plan.hidden = 0;
    return plan;
  }
  DenoiserArch base{arch.dim, arch.hidden, arch.depth, arch.num_classes, arch.time_features, arch.init_adaptor};
  plan = DenoiserNet::make_plan(base);
  plan.embeddings.push_back({"target_time", arch.time_features, true, true});
  if (arch.weight_conditioned) plan.embeddings.push_back({"guidance_weight", arch.time_features, true, true});
  return plan;
}

StudentNet::StudentNet(const StudentArch& arch, NoiseSchedule sched, ParamSet params)
    : arch_(arch), sched_(sched), plan_(make_plan(arch)), params_(std::move(params)) {
  sched_.validate();
  if (arch_.body == StudentBody::linear && (arch_.num_classes > 0 || arch_.weight_conditioned)) {
    throw ContractError("linear student cannot be conditioned");
  }
  Rng probe(0);
  const ParamSet expected = init_mlp(plan_, probe);
  for (const auto& e : expected.entries()) {
    if (!params_.contains(e.name) || !params_.get(e.name).same_shape(e.value)) {
      throw DimensionError("StudentNet: parameter '" + e.name + "' missing or misshapen");
    }
  }
}

StudentNet StudentNet::from_teacher(const DenoiserNet& teacher, bool weight_conditioned) {
  const DenoiserArch& ta = teacher.arch();
  StudentArch arch{StudentBody::mlp, ta.dim, ta.hidden, ta.depth, ta.num_classes, ta.time_features,
                   weight_conditioned, 0, ta.kind};
  const LayerPlan plan = make_plan(arch);
  Rng unused(0);
  ParamSet fresh = init_mlp(plan, unused);
  ParamSet params;
  for (const auto& e : fresh.entries()) {
    params.add(e.name, teacher.params().contains(e.name) ? teacher.params().get(e.name) : e.value);
  }
  return StudentNet(arch, teacher.schedule(), std::move(params));
}

StudentNet StudentNet::linear(std::size_t dim, std::size_t basis_size, NoiseSchedule sched) {
  if (basis_size == 0) throw ContractError("linear student needs a non-empty basis");
  StudentArch arch;
  arch.body = StudentBody::linear;
  arch.dim = dim;
  arch.basis_size = basis_size;
  const LayerPlan plan = make_plan(arch);
  ParamSet params;
  params.add("out.weight", Tensor::zeros(plan.output_dim, plan.input_dim));
  params.add("out.bias", Tensor({plan.output_dim}));
  return StudentNet(arch, sched, std::move(params));
}

Tensor StudentNet::linear_features(const Tensor& eps, std::span<const double> t) const {
  const std::size_t k = arch_.basis_size;
  const std::size_t d = arch_.dim;
  Tensor out = Tensor::zeros(eps.rows(), k * (d + 1));
  std::vector<double> cheb(k);
  for (std::size_t r = 0; r < eps.rows(); ++r) {
    const double u = 2.0 * (t[r] - sched_.t_min) / (sched_.t_max - sched_.t_min) - 1.0;
    cheb[0] = 1.0;
    if (k > 1) cheb[1] = u;
    for (std::size_t j = 2; j < k; ++j) cheb[j] = 2.0 * u * cheb[j - 1] - cheb[j - 2];
    auto row = out.row(r);
    auto e = eps.row(r);
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t c = 0; c < d; ++c) row[j * (d + 1) + c] = cheb[j] * e[c];
      row[j * (d + 1) + d] = cheb[j];
    }
  }
  return out;
}

std::vector<Tensor> StudentNet::embedding_inputs(std::span<const double> t, std::span<const int> labels,
                                                 std::span<const double> weights, std::size_t rows) const {
  std::vector<Tensor> out;
  const std::vector<double> pinned(rows, sched_.t_max);
  out.push_back(sinusoidal_features(pinned, arch_.time_features));
  if (arch_.num_classes > 0) {
    const std::vector<int> nulls(rows, kNullLabel);
    out.push_back(one_hot(labels.empty() ? std::span<const int>(nulls) : labels, arch_.num_classes + 1));
  } else {
    for (int l : labels) {
      if (l != kNullLabel) throw ContractError("student: labels given to an unconditional student");
    }
  }
  out.push_back(sinusoidal_features(t, arch_.time_features));
  if (arch_.weight_conditioned) {
    std::vector<double> w(rows, 1.0);
    if (!weights.empty()) {
      if (weights.size() != rows) throw DimensionError("student: need one guidance weight per row");
      w.assign(weights.begin(), weights.end());
    }
    for (double& v : w) v *= weight_feature_scale();
    out.push_back(sinusoidal_features(w, arch_.time_features));
  }
  return out;
}

Var StudentNet::forward(const BoundParams& params, const Tensor& eps, std::span<const double> t,
                        std::span<const int> labels, std::span<const double> weights) const {
  Tape& tape = params.tape();
  if (eps.rank() != 2 || eps.cols() != arch_.dim) {
    throw DimensionError("student: expected (B, " + std::to_string(arch_.dim) + ") noise, got " +
                         shape_string(eps.shape()));
  }
  if (t.size() != eps.rows()) throw DimensionError("student: need one target time per row");
  if (!labels.empty() && labels.size() != eps.rows()) throw DimensionError("student: need one label per row");
  if (arch_.body == StudentBody::linear) {
    if (!labels.empty() || !weights.empty()) {
      for (int l : labels) {
        if (l != kNullLabel) throw ContractError("linear student is unconditional");
      }
    }
    return forward_mlp(params, plan_, tape.constant(linear_features(eps, t)), {});
  }
  std::vector<Var> emb;
  for (auto& e : embedding_inputs(t, labels, weights, eps.rows())) emb.push_back(tape.constant(std::move(e)));
  Var eps_var = tape.constant(eps);
  Var raw = forward_mlp(params, plan_, eps_var, emb);
  switch (arch_.init_adaptor) {
    case PredictionKind::signal: return raw;
    case PredictionKind::noise: return sub(eps_var, raw);
    case PredictionKind::v: return scale(raw, -1.0);
  }
  return raw;
}

Tensor StudentNet::predict(const Tensor& eps, std::span<const double> t, std::span<const int> labels,
                           std::span<const double> weights) const {
  Tape tape;
  BoundParams bound(tape, params_);
  ++nfe_;
  return tape.value(forward(bound, eps, t, labels, weights));
}

StudentNet StudentNet::ema() const { return StudentNet(arch_, sched_, params_.ema_copy()); }

Tensor sample_student(const StudentNet& student, const Tensor& eps, double t_target, std::span<const int> labels,
                      std::span<const double> weights) {
  const NoiseSchedule& sched = student.schedule();
  if (!(t_target >= sched.t_min && t_target <= sched.t_max)) {
    throw DomainError("sample_student: t_target outside [t_min, t_max]");
  }
  const std::vector<double> ts(eps.rows(), t_target);
  return student.predict(eps, ts, labels, weights);
}

}  // namespace boot
