#include "boot/checkpoint.hpp"

#include <fstream>

namespace boot {

namespace {

json tensor_array(const Tensor& t) { return json(t.storage()); }

Tensor tensor_from(const json& values, const std::vector<std::size_t>& shape, const std::string& name) {
  if (!values.is_array()) throw FormatError("checkpoint: '" + name + "' is not an array");
  std::vector<double> data = values.get<std::vector<double>>();
  try {
    return Tensor(shape, std::move(data));
  } catch (const DimensionError& e) {
    throw FormatError("checkpoint: '" + name + "': " + e.what());
  }
}

void require_version(const json& doc) {
  if (!doc.is_object() || !doc.contains("version")) throw FormatError("checkpoint: missing version");
  if (doc.at("version").get<int>() != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + doc.at("version").dump());
  }
}

}  // namespace

json layer_plan_to_json(const ParamSet& params) {
  json plan = json::array();
  for (const auto& e : params.entries()) plan.push_back({{"name", e.name}, {"shape", e.value.shape()}});
  return plan;
}

json tensors_to_json(const ParamSet& params, const Tensor ParamSet::Entry::*field) {
  json out = json::object();
  for (const auto& e : params.entries()) out[e.name] = tensor_array(e.*field);
  return out;
}

json opt_state_to_json(const ParamSet& params) {
  return {{"step", params.step()},
          {"first_moment", tensors_to_json(params, &ParamSet::Entry::first_moment)},
          {"second_moment", tensors_to_json(params, &ParamSet::Entry::second_moment)}};
}

ParamSet params_from_checkpoint(const json& doc) {
  require_version(doc);
  ParamSet params;
  const json& plan = doc.at("layer_plan");
  const json& values = doc.at("params");
  for (const auto& layer : plan) {
    const auto name = layer.at("name").get<std::string>();
    const auto shape = layer.at("shape").get<std::vector<std::size_t>>();
    if (!values.contains(name)) throw FormatError("checkpoint: no values for '" + name + "'");
    params.add(name, tensor_from(values.at(name), shape, name));
  }
  for (auto& e : params.entries()) {
    const std::vector<std::size_t> shape = e.value.shape();
    if (doc.contains("ema") && doc.at("ema").contains(e.name)) {
      e.shadow = tensor_from(doc.at("ema").at(e.name), shape, e.name);
    }
    if (doc.contains("opt_state") && doc.at("opt_state").is_object()) {
      const json& opt = doc.at("opt_state");
      if (opt.contains("first_moment") && opt.at("first_moment").contains(e.name)) {
        e.first_moment = tensor_from(opt.at("first_moment").at(e.name), shape, e.name);
        e.second_moment = tensor_from(opt.at("second_moment").at(e.name), shape, e.name);
      }
    }
  }
  if (doc.contains("opt_state") && doc.at("opt_state").contains("step")) {
    params.set_step(doc.at("opt_state").at("step").get<std::uint64_t>());
  }
  return params;
}

json schedule_to_json(const NoiseSchedule& sched) {
  return {{"kind", "cosine"}, {"t_min", sched.t_min}, {"t_max", sched.t_max}};
}

NoiseSchedule schedule_from_json(const json& j) {
  for (const auto& [key, _] : j.items()) {
    if (key != "kind" && key != "t_min" && key != "t_max") throw FormatError("schedule: unknown key '" + key + "'");
  }
  NoiseSchedule s;
  if (j.contains("kind") && j.at("kind").get<std::string>() != "cosine") {
    throw FormatError("schedule: only the cosine kind is supported");
  }
  s.t_min = j.value("t_min", s.t_min);
  s.t_max = j.value("t_max", s.t_max);
  s.validate();
  return s;
}

namespace {

json base_document(const ParamSet& params, json model, const Rng* rng) {
  return {{"version", kCheckpointVersion},
          {"model", std::move(model)},
          {"layer_plan", layer_plan_to_json(params)},
          {"params", tensors_to_json(params, &ParamSet::Entry::value)},
          {"ema", tensors_to_json(params, &ParamSet::Entry::shadow)},
          {"opt_state", opt_state_to_json(params)},
          {"rng_state", rng ? json(rng->state()) : json(nullptr)}};
}

}  // namespace

json teacher_checkpoint(const DenoiserNet& teacher, const Rng* rng) {
  const DenoiserArch& a = teacher.arch();
  json model = {{"type", "teacher"},         {"dim", a.dim},
                {"hidden", a.hidden},        {"depth", a.depth},
                {"num_classes", a.num_classes}, {"time_features", a.time_features},
                {"kind", to_string(a.kind)}, {"schedule", schedule_to_json(teacher.schedule())}};
  return base_document(teacher.params(), std::move(model), rng);
}

DenoiserNet teacher_from_checkpoint(const json& doc) {
  require_version(doc);
  const json& m = doc.at("model");
  if (m.at("type").get<std::string>() != "teacher") throw FormatError("checkpoint is not a teacher");
  DenoiserArch a;
  a.dim = m.at("dim").get<std::size_t>();
  a.hidden = m.at("hidden").get<std::size_t>();
  a.depth = m.at("depth").get<std::size_t>();
  a.num_classes = m.at("num_classes").get<std::size_t>();
  a.time_features = m.at("time_features").get<std::size_t>();
  a.kind = prediction_kind_from_string(m.at("kind").get<std::string>());
  return DenoiserNet(a, schedule_from_json(m.at("schedule")), params_from_checkpoint(doc));
}

json student_checkpoint(const StudentNet& student, const Rng* rng) {
  const StudentArch& a = student.arch();
  json model = {{"type", "student"},
                {"body", to_string(a.body)},
                {"dim", a.dim},
                {"hidden", a.hidden},
                {"depth", a.depth},
                {"num_classes", a.num_classes},
                {"time_features", a.time_features},
                {"weight_conditioned", a.weight_conditioned},
                {"basis_size", a.basis_size},
                {"init_adaptor", to_string(a.init_adaptor)},
                {"schedule", schedule_to_json(student.schedule())}};
  return base_document(student.params(), std::move(model), rng);
}

StudentNet student_from_checkpoint(const json& doc, Rng* rng) {
  require_version(doc);
  const json& m = doc.at("model");
  if (m.at("type").get<std::string>() != "student") throw FormatError("checkpoint is not a student");
  StudentArch a;
  a.body = student_body_from_string(m.at("body").get<std::string>());
  a.dim = m.at("dim").get<std::size_t>();
  a.hidden = m.at("hidden").get<std::size_t>();
  a.depth = m.at("depth").get<std::size_t>();
  a.num_classes = m.at("num_classes").get<std::size_t>();
  a.time_features = m.at("time_features").get<std::size_t>();
  a.weight_conditioned = m.at("weight_conditioned").get<bool>();
  a.basis_size = m.at("basis_size").get<std::size_t>();
  a.init_adaptor = prediction_kind_from_string(m.at("init_adaptor").get<std::string>());
  StudentNet student(a, schedule_from_json(m.at("schedule")), params_from_checkpoint(doc));
  if (rng && doc.contains("rng_state") && doc.at("rng_state").is_string()) {
    rng->restore(doc.at("rng_state").get<std::string>());
  }
  return student;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << doc.dump() << '\n';
}

}  // namespace boot
