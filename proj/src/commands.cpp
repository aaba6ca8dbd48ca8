#include "boot/commands.hpp"

#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "boot/checkpoint.hpp"
#include "boot/config.hpp"
#include "boot/eval.hpp"
#include "boot/experiments.hpp"
#include "boot/log.hpp"
#include "boot/verify.hpp"

namespace boot {

namespace {

int guarded(const char* command, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << command << ": config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << command << ": input error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << command << ": " << e.what() << '\n';
    return kExitFailure;
  }
}

ExperimentConfig experiment_for(const CommonOptions& opt) {
  ExperimentConfig cfg = opt.config ? load_experiment(*opt.config) : ExperimentConfig{};
  if (opt.seed) cfg.seed = *opt.seed;
  return cfg;
}

std::uint64_t seed_for(const CommonOptions& opt) {
  if (opt.seed) return *opt.seed;
  if (opt.config) {
    const json doc = read_json(*opt.config);
    if (doc.is_object() && doc.contains("seed")) return doc.at("seed").get<std::uint64_t>();
  }
  return 0;
}

json load_document(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw FormatError("file not found: " + path.string());
  return read_json(path);
}

std::string model_type(const json& doc) {
  if (!doc.is_object() || !doc.contains("model")) throw FormatError("not a checkpoint (no model block)");
  return doc.at("model").at("type").get<std::string>();
}

/// Dataset recorded in a teacher's sidecar, if there is one.
std::optional<DatasetConfig> sidecar_dataset(const std::filesystem::path& teacher_ckpt) {
  const auto side = sidecar_path(teacher_ckpt);
  if (!std::filesystem::exists(side)) return std::nullopt;
  const json doc = read_json(side);
  return dataset_from_json(doc.at("dataset"));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

json coverage_json(const ModeCoverage& c) { return {{"covered", c.covered}, {"fractions", c.fractions}}; }

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  std::filesystem::path p = checkpoint;
  p.replace_extension(".sidecar.json");
  return p;
}

// ---- train-teacher ----------------------------------------------------------------

int cmd_train_teacher(const TrainTeacherOptions& opt) {
  return guarded("train-teacher", [&] {
    ExperimentConfig cfg = experiment_for(opt.common);
    if (opt.steps) cfg.teacher.train.steps = *opt.steps;
    const std::filesystem::path dir = opt.common.out.empty() ? std::filesystem::path(".") : opt.common.out;
    log_info("training teacher on " + cfg.teacher.dataset.tag() + " for " + std::to_string(cfg.teacher.train.steps) +
             " steps (seed " + std::to_string(cfg.seed) + ")");
    TrainLog log;
    DenoiserNet teacher = train_toy_teacher(cfg.teacher, cfg.schedule, cfg.seed, &log);
    if (!log.loss.empty()) log_info("final training loss " + std::to_string(log.loss.back()));
    const auto ckpt = dir / "teacher.json";
    write_json(ckpt, teacher_checkpoint(teacher));
    write_json(sidecar_path(ckpt), {{"dataset", to_json(cfg.teacher.dataset)},
                                    {"kind", to_string(teacher.kind())},
                                    {"schedule", schedule_to_json(teacher.schedule())}});
    std::cout << ckpt.string() << '\n';
    return kExitOk;
  });
}

// ---- distill ----------------------------------------------------------------------

int cmd_distill(const DistillOptions& opt) {
  return guarded("distill", [&] {
    BootConfig cfg = opt.common.config ? load_boot_config(*opt.common.config) : BootConfig{};
    if (opt.steps) cfg.steps = *opt.steps;
    if (opt.common.out.empty()) throw ConfigError("--out is required");
    const std::uint64_t seed = seed_for(opt.common);
    const DenoiserNet teacher = teacher_from_checkpoint(load_document(opt.teacher));
    if (teacher.schedule().t_min != cfg.t_min || teacher.schedule().t_max != cfg.t_max) {
      throw ConfigError("boot t_min/t_max differ from the teacher's schedule");
    }

    Rng rng(stream_seed(seed, Stream::distill));
    std::optional<StudentNet> student;
    if (opt.resume) {
      student.emplace(student_from_checkpoint(load_document(*opt.resume), &rng));
      log_info("resuming from step " + std::to_string(student->params().step()));
    } else {
      student.emplace(init_student(teacher, cfg));
    }

    std::ofstream metrics;
    if (opt.log) {
      if (opt.log->has_parent_path()) std::filesystem::create_directories(opt.log->parent_path());
      const bool append = opt.resume.has_value() && std::filesystem::exists(*opt.log);
      metrics.open(*opt.log, append ? std::ios::app | std::ios::binary : std::ios::trunc | std::ios::binary);
      if (!metrics) throw std::runtime_error("cannot write " + opt.log->string());
      metrics << std::setprecision(17);
      if (!append) metrics << "step,loss_bs,loss_bc,ema_decay,wall_ms\n";
    }
    const bool fixed_clock = opt.fixed_clock;
    auto on_step = [&](const StepLog& s) {
      if (metrics.is_open()) {
        metrics << s.step << ',' << s.loss_bs << ',' << s.loss_bc << ',' << s.ema_decay << ','
                << (fixed_clock ? 0.0 : s.wall_ms) << '\n';
      }
      if (log_level() >= LogLevel::debug || (s.step + 1) % 1000 == 0) {
        std::ostringstream os;
        os << "step " << s.step + 1 << "/" << cfg.steps << " loss_bs=" << s.loss_bs << " loss_bc=" << s.loss_bc;
        log_info(os.str());
      }
    };
    distill(teacher, *student, cfg, rng, on_step, {}, opt.stop_at.value_or(std::numeric_limits<std::size_t>::max()));
    write_json(opt.common.out, student_checkpoint(*student, &rng));
    std::cout << opt.common.out.string() << '\n';
    return kExitOk;
  });
}

// ---- sample -----------------------------------------------------------------------

int cmd_sample(const SampleOptions& opt) {
  return guarded("sample", [&] {
    if (opt.common.out.empty()) throw ConfigError("--out is required");
    if (opt.n == 0) throw ConfigError("--n must be >= 1");
    const SamplerKind sampler = sampler_from_string(opt.solver);
    const std::uint64_t seed = seed_for(opt.common);
    const json doc = load_document(opt.checkpoint);
    SampleSet set;
    if (model_type(doc) == "student") {
      const StudentNet student = student_from_checkpoint(doc).ema();
      std::vector<int> labels;
      std::vector<double> weights;
      if (opt.label) labels.assign(opt.n, *opt.label);
      if (student.arch().weight_conditioned) weights.assign(opt.n, opt.weight);
      set = student_samples(student, opt.n, stream_seed(seed, Stream::student_noise), labels, weights);
    } else {
      const DenoiserNet teacher = teacher_from_checkpoint(doc);
      if (opt.steps == 0) throw ConfigError("--steps must be >= 1");
      std::optional<GuidanceBatch> guidance;
      if (opt.label) guidance = GuidanceBatch::fixed(opt.n, *opt.label, kNullLabel, opt.weight);
      set = teacher_samples(teacher, teacher.schedule(), opt.n, opt.steps, stream_seed(seed, Stream::student_noise),
                            sampler, guidance ? &*guidance : nullptr);
    }
    write_samples_csv(opt.common.out, set);
    log_info("wrote " + std::to_string(set.size()) + " samples (" + set.generator + ") to " + opt.common.out.string());
    return kExitOk;
  });
}

// ---- eval -------------------------------------------------------------------------

int cmd_eval(const EvalOptions& opt) {
  return guarded("eval", [&] {
    if (opt.common.out.empty()) throw ConfigError("--out is required");
    if (!std::filesystem::exists(opt.samples)) throw FormatError("file not found: " + opt.samples.string());
    const SampleSet samples = read_samples_csv(opt.samples);
    json metrics = {{"n", samples.size()}, {"dim", samples.dim()}};
    if (samples.size() >= 2) metrics["covariance_trace"] = covariance_trace(samples.points);
    if (opt.reference) {
      if (!std::filesystem::exists(*opt.reference)) throw FormatError("file not found: " + opt.reference->string());
      metrics["energy_distance"] = energy_distance(samples, read_samples_csv(*opt.reference), opt.common.threads);
    }
    std::optional<DatasetConfig> dataset;
    if (opt.teacher) dataset = sidecar_dataset(*opt.teacher);
    if (!dataset && opt.common.config) dataset = load_experiment(*opt.common.config).teacher.dataset;
    if (dataset && dataset->dim() == samples.dim()) {
      const auto centers = dataset->centers();
      metrics["mode_coverage"] = coverage_json(mode_coverage(samples.points, centers, opt.radius));
      metrics["nearest_mode_distance"] = mean_nearest_center_distance(samples.points, centers);
    }
    if (opt.teacher && opt.student) {
      const DenoiserNet teacher = teacher_from_checkpoint(load_document(*opt.teacher));
      const StudentNet student = student_from_checkpoint(load_document(*opt.student)).ema();
      Rng rng(stream_seed(seed_for(opt.common), Stream::evaluation));
      const Tensor eps = rng.normal_tensor(1000, teacher.dim());
      const SpeedReport sp = speed_report(TeacherQuery{&teacher, nullptr, std::nullopt}, student, eps, 64);
      metrics["speed"] = {{"teacher_ms", sp.teacher_ms},
                          {"student_ms", sp.student_ms},
                          {"ratio", sp.ratio},
                          {"teacher_nfe_per_sample", sp.teacher_nfe_per_sample},
                          {"student_nfe_per_sample", sp.student_nfe_per_sample}};
    }
    write_json(opt.common.out, metrics);
    if (opt.svg) write_scatter_svg(*opt.svg, samples.points, samples.labels);
    std::cout << metrics.dump(2) << '\n';
    return kExitOk;
  });
}

// ---- verify -----------------------------------------------------------------------

int cmd_verify(const VerifyOptions& opt) {
  return guarded("verify", [&] {
    Mutation mutation;
    try {
      mutation = mutation_from_string(opt.mutation);
    } catch (const ContractError& e) {
      throw ConfigError(e.what());
    }
    const auto results = run_verify_suite(seed_for(opt.common), mutation);
    bool ok = true;
    json report = json::array();
    for (const auto& r : results) {
      std::cout << format_check(r) << '\n';
      ok = ok && r.passed;
      report.push_back({{"name", r.name}, {"measured", r.measured}, {"tolerance", r.tolerance}, {"passed", r.passed}});
    }
    if (!opt.common.out.empty()) write_json(opt.common.out, report);
    std::cout << (ok ? "all checks passed" : "some checks FAILED") << '\n';
    return ok ? kExitOk : kExitFailure;
  });
}

// ---- ablate -----------------------------------------------------------------------

int cmd_ablate(const AblateOptions& opt) {
  return guarded("ablate", [&] {
    const Ablation ablation = ablation_from_string(opt.name);
    ExperimentConfig cfg = experiment_for(opt.common);
    if (opt.steps) cfg.boot.steps = *opt.steps;
    if (auto ds = sidecar_dataset(opt.teacher)) cfg.teacher.dataset = *ds;
    const DenoiserNet teacher = teacher_from_checkpoint(load_document(opt.teacher));
    const std::filesystem::path dir = opt.common.out.empty() ? std::filesystem::path("ablation") : opt.common.out;

    const AblationReport report = run_ablation(ablation, teacher, cfg, cfg.seed);
    write_json(dir / "report.json", report.summary);
    write_scatter_svg(dir / "reference.svg", report.reference.points);
    std::ostringstream table;
    table << std::setprecision(6) << "arm,energy_distance,modes_covered,covariance_trace,nearest_mode_distance\n";
    for (const auto& arm : report.arms) {
      std::string stem = arm.name;
      for (char& c : stem) {
        if (c == '=' || c == '.') c = '_';
      }
      write_json(dir / (stem + ".json"), student_checkpoint(arm.student));
      write_scatter_svg(dir / (stem + ".svg"), arm.samples.points);
      table << arm.name << ',' << arm.metrics.at("energy_distance").get<double>() << ','
            << arm.metrics.at("mode_coverage").at("covered").get<std::size_t>() << ','
            << arm.metrics.at("covariance_trace").get<double>() << ','
            << arm.metrics.at("nearest_mode_distance").get<double>() << '\n';
    }
    write_text(dir / "table.csv", table.str());
    std::cout << table.str();
    if (ablation == Ablation::guidance) {
      std::cout << "w,nearest_mode_distance,covariance_trace\n";
      for (const auto& row : report.arms.front().metrics.at("sweep")) {
        std::cout << row.at("w").get<double>() << ',' << row.at("nearest_mode_distance").get<double>() << ','
                  << row.at("covariance_trace").get<double>() << '\n';
      }
    }
    return kExitOk;
  });
}

}  // namespace boot
