#include "boot/config.hpp"

#include <algorithm>
#include <initializer_list>

namespace boot {

namespace {

void require_object(const json& j, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + ": expected a JSON object");
}

void reject_unknown(const json& j, const std::string& what, std::initializer_list<const char*> allowed) {
  require_object(j, what);
  for (const auto& [key, _] : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return key == k; });
    if (!known) throw ConfigError(what + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& what) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(what + "." + key + ": " + e.what());
  }
}

template <typename Enum, typename Parse>
void read_enum(const json& j, const char* key, Enum& out, Parse parse, const std::string& what) {
  if (!j.contains(key)) return;
  try {
    out = parse(j.at(key).get<std::string>());
  } catch (const std::exception& e) {
    throw ConfigError(what + "." + key + ": " + e.what());
  }
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

// ---- guidance / boot ----------------------------------------------------------

json to_json(const GuidanceSpec& g) {
  json j = {{"condition", g.condition ? json(*g.condition) : json(nullptr)},
            {"negative", g.negative ? json(*g.negative) : json(nullptr)},
            {"weight", g.weight},
            {"weight_range", nullptr}};
  if (g.weight_range) j["weight_range"] = {g.weight_range->first, g.weight_range->second};
  return j;
}

GuidanceSpec guidance_from_json(const json& j) {
  const std::string what = "guidance";
  reject_unknown(j, what, {"condition", "negative", "weight", "weight_range"});
  GuidanceSpec g;
  if (j.contains("condition") && !j.at("condition").is_null()) g.condition = j.at("condition").get<int>();
  if (j.contains("negative") && !j.at("negative").is_null()) g.negative = j.at("negative").get<int>();
  read(j, "weight", g.weight, what);
  if (j.contains("weight_range") && !j.at("weight_range").is_null()) {
    const auto r = j.at("weight_range").get<std::vector<double>>();
    if (r.size() != 2) throw ConfigError("guidance.weight_range: expected [lo, hi]");
    g.weight_range = std::make_pair(r[0], r[1]);
  }
  try {
    g.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  return g;
}

json to_json(const BootConfig& c) {
  return {{"delta", c.delta},
          {"beta", c.beta},
          {"t_min", c.t_min},
          {"t_max", c.t_max},
          {"weighting", to_string(c.weighting)},
          {"time_sampling", to_string(c.time_sampling)},
          {"target_solver", to_string(c.target_solver)},
          {"boundary_period", c.boundary_period},
          {"clip", optional_number(c.clip)},
          {"ema_decay", c.ema_decay},
          {"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"batch", c.batch},
          {"steps", c.steps},
          {"guidance", c.guidance ? to_json(*c.guidance) : json(nullptr)}};
}

BootConfig boot_config_from_json(const json& j) {
  const std::string what = "boot";
  reject_unknown(j, what,
                 {"delta", "beta", "t_min", "t_max", "weighting", "time_sampling", "target_solver", "boundary_period",
                  "clip", "ema_decay", "lr", "weight_decay", "batch", "steps", "guidance"});
  BootConfig c;
  read(j, "delta", c.delta, what);
  read(j, "beta", c.beta, what);
  read(j, "t_min", c.t_min, what);
  read(j, "t_max", c.t_max, what);
  read_enum(j, "weighting", c.weighting, loss_weighting_from_string, what);
  read_enum(j, "time_sampling", c.time_sampling, time_sampling_from_string, what);
  read_enum(j, "target_solver", c.target_solver, target_solver_from_string, what);
  read(j, "boundary_period", c.boundary_period, what);
  if (j.contains("clip") && !j.at("clip").is_null()) c.clip = j.at("clip").get<double>();
  read(j, "ema_decay", c.ema_decay, what);
  read(j, "lr", c.lr, what);
  read(j, "weight_decay", c.weight_decay, what);
  read(j, "batch", c.batch, what);
  read(j, "steps", c.steps, what);
  if (j.contains("guidance") && !j.at("guidance").is_null()) c.guidance = guidance_from_json(j.at("guidance"));
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return c;
}

// ---- dataset / teacher -------------------------------------------------------

std::string DatasetConfig::tag() const {
  if (name == "ring") return "ring" + std::to_string(modes) + (labeled ? "-labeled" : "");
  return "gaussian" + std::to_string(mean.size()) + "d";
}

RingDataset DatasetConfig::ring() const {
  if (name != "ring") throw ConfigError("dataset '" + name + "' is not a ring");
  return RingDataset{radius, component_std, modes, labeled};
}

DataSampler DatasetConfig::sampler() const {
  validate();
  if (name == "ring") return ring_sampler(ring());
  const auto d = static_cast<Eigen::Index>(mean.size());
  Eigen::VectorXd m(d);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    m(i) = mean[static_cast<std::size_t>(i)];
    cov(i, i) = std[static_cast<std::size_t>(i)] * std[static_cast<std::size_t>(i)];
  }
  return gaussian_sampler(m, cov);
}

std::vector<std::vector<double>> DatasetConfig::centers() const {
  if (name == "ring") return ring().centers();
  return {mean};
}

void DatasetConfig::validate() const {
  if (name == "ring") {
    if (!(radius > 0.0) || !(component_std > 0.0) || modes < 1) {
      throw ConfigError("dataset: ring needs radius > 0, component_std > 0, modes >= 1");
    }
    return;
  }
  if (name == "gaussian") {
    if (mean.empty() || mean.size() != std.size()) throw ConfigError("dataset: gaussian mean/std sizes differ");
    for (double s : std) {
      if (!(s > 0.0)) throw ConfigError("dataset: gaussian std entries must be > 0");
    }
    return;
  }
  throw ConfigError("dataset: unknown name '" + name + "' (expected ring or gaussian)");
}

json to_json(const DatasetConfig& d) {
  return {{"name", d.name},   {"radius", d.radius}, {"component_std", d.component_std}, {"modes", d.modes},
          {"labeled", d.labeled}, {"mean", d.mean}, {"std", d.std}};
}

DatasetConfig dataset_from_json(const json& j) {
  const std::string what = "teacher.dataset";
  reject_unknown(j, what, {"name", "radius", "component_std", "modes", "labeled", "mean", "std"});
  DatasetConfig d;
  read(j, "name", d.name, what);
  read(j, "radius", d.radius, what);
  read(j, "component_std", d.component_std, what);
  read(j, "modes", d.modes, what);
  read(j, "labeled", d.labeled, what);
  read(j, "mean", d.mean, what);
  read(j, "std", d.std, what);
  d.validate();
  return d;
}

json to_json(const TeacherConfig& t) {
  const auto& a = t.arch;
  const auto& tr = t.train;
  return {{"dataset", to_json(t.dataset)},
          {"hidden", a.hidden},
          {"depth", a.depth},
          {"time_features", a.time_features},
          {"kind", to_string(a.kind)},
          {"steps", tr.steps},
          {"batch", tr.batch},
          {"lr", tr.lr},
          {"weight_decay", tr.weight_decay},
          {"uncond_prob", tr.uncond_prob},
          {"ema_decay", tr.ema_decay}};
}

TeacherConfig teacher_config_from_json(const json& j) {
  const std::string what = "teacher";
  reject_unknown(j, what,
                 {"dataset", "hidden", "depth", "time_features", "kind", "steps", "batch", "lr", "weight_decay",
                  "uncond_prob", "ema_decay"});
  TeacherConfig t;
  if (j.contains("dataset")) t.dataset = dataset_from_json(j.at("dataset"));
  read(j, "hidden", t.arch.hidden, what);
  read(j, "depth", t.arch.depth, what);
  read(j, "time_features", t.arch.time_features, what);
  read_enum(j, "kind", t.arch.kind, prediction_kind_from_string, what);
  read(j, "steps", t.train.steps, what);
  read(j, "batch", t.train.batch, what);
  read(j, "lr", t.train.lr, what);
  read(j, "weight_decay", t.train.weight_decay, what);
  read(j, "uncond_prob", t.train.uncond_prob, what);
  read(j, "ema_decay", t.train.ema_decay, what);
  t.arch.dim = t.dataset.dim();
  t.arch.num_classes = t.dataset.num_classes();
  return t;
}

json to_json(const EvalConfig& e) {
  return {{"n_samples", e.n_samples},
          {"ddim_steps", e.ddim_steps},
          {"mode_radius", e.mode_radius},
          {"guidance_weights", e.guidance_weights},
          {"ref_steps", e.ref_steps}};
}

EvalConfig eval_config_from_json(const json& j) {
  const std::string what = "eval";
  reject_unknown(j, what, {"n_samples", "ddim_steps", "mode_radius", "guidance_weights", "ref_steps"});
  EvalConfig e;
  read(j, "n_samples", e.n_samples, what);
  read(j, "ddim_steps", e.ddim_steps, what);
  read(j, "mode_radius", e.mode_radius, what);
  read(j, "guidance_weights", e.guidance_weights, what);
  read(j, "ref_steps", e.ref_steps, what);
  return e;
}

// ---- experiment ---------------------------------------------------------------

void ExperimentConfig::validate() const {
  try {
    schedule.validate();
    boot.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  teacher.dataset.validate();
  if (schedule.t_min != boot.t_min || schedule.t_max != boot.t_max) {
    throw ConfigError("boot.t_min/t_max must match the schedule block");
  }
  if (teacher.train.batch < 1 || teacher.arch.hidden < 1) throw ConfigError("teacher: batch and hidden must be >= 1");
  if (!(teacher.train.uncond_prob >= 0.0 && teacher.train.uncond_prob <= 1.0)) {
    throw ConfigError("teacher.uncond_prob must lie in [0, 1]");
  }
  if (!(teacher.train.ema_decay >= 0.0 && teacher.train.ema_decay < 1.0)) {
    throw ConfigError("teacher.ema_decay must lie in [0, 1)");
  }
  if (eval.n_samples < 2 || eval.ddim_steps < 1 || eval.ref_steps < 1 || !(eval.mode_radius > 0.0)) {
    throw ConfigError("eval: need n_samples >= 2, ddim_steps >= 1, ref_steps >= 1, mode_radius > 0");
  }
}

json to_json(const ExperimentConfig& c) {
  return {{"seed", c.seed},
          {"output_dir", c.output_dir},
          {"schedule", schedule_to_json(c.schedule)},
          {"teacher", to_json(c.teacher)},
          {"boot", to_json(c.boot)},
          {"eval", to_json(c.eval)}};
}

ExperimentConfig experiment_from_json(const json& j) {
  const std::string what = "config";
  reject_unknown(j, what, {"seed", "output_dir", "schedule", "teacher", "boot", "eval"});
  ExperimentConfig c;
  read(j, "seed", c.seed, what);
  read(j, "output_dir", c.output_dir, what);
  if (j.contains("schedule")) {
    try {
      c.schedule = schedule_from_json(j.at("schedule"));
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("teacher")) c.teacher = teacher_config_from_json(j.at("teacher"));
  if (j.contains("boot")) {
    c.boot = boot_config_from_json(j.at("boot"));
  } else {
    c.boot.t_min = c.schedule.t_min;
    c.boot.t_max = c.schedule.t_max;
  }
  if (j.contains("eval")) c.eval = eval_config_from_json(j.at("eval"));
  c.validate();
  return c;
}

namespace {

json load_document(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  try {
    return read_json(path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

ExperimentConfig load_experiment(const std::filesystem::path& path) { return experiment_from_json(load_document(path)); }

BootConfig load_boot_config(const std::filesystem::path& path) {
  const json doc = load_document(path);
  if (doc.is_object() && doc.contains("boot")) return experiment_from_json(doc).boot;
  return boot_config_from_json(doc);
}

}  // namespace boot
