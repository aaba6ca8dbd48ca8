#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "boot/commands.hpp"
#include "boot/log.hpp"
#include "boot/tensor.hpp"

namespace {

void add_common(CLI::App* cmd, boot::CommonOptions& common, const std::string& out_help) {
  cmd->add_option("--config", common.config, "Experiment or boot config (JSON)");
  cmd->add_option("--seed", common.seed, "Master seed");
  cmd->add_option("--threads", common.threads, "Worker threads for evaluation")->check(CLI::PositiveNumber);
  cmd->add_option("--out", common.out, out_help);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    boot::set_log_level(boot::log_level_from_env());
  } catch (const boot::ContractError& e) {
    std::cerr << e.what() << '\n';
    return boot::kExitUsage;
  }

  CLI::App app{"Data-free single-step distillation of diffusion models on toy problems"};
  app.require_subcommand(1);

  boot::TrainTeacherOptions train;
  auto* train_cmd = app.add_subcommand("train-teacher", "Train a toy diffusion teacher");
  add_common(train_cmd, train.common, "Output directory (teacher.json + teacher.sidecar.json)");
  train_cmd->add_option("--steps", train.steps, "Override the configured training steps");

  boot::DistillOptions dist;
  auto* dist_cmd = app.add_subcommand("distill", "Distill a single-step student from a teacher checkpoint");
  add_common(dist_cmd, dist.common, "Student checkpoint path");
  dist_cmd->add_option("--teacher", dist.teacher, "Teacher checkpoint")->required();
  dist_cmd->add_option("--log", dist.log, "Per-step metrics CSV");
  dist_cmd->add_option("--resume", dist.resume, "Partial student checkpoint to continue");
  dist_cmd->add_option("--steps", dist.steps, "Override the configured total steps");
  dist_cmd->add_option("--stop-at", dist.stop_at, "Stop after this many total steps");
  dist_cmd->add_flag("--fixed-clock", dist.fixed_clock, "Log wall_ms as 0 for reproducible logs");

  boot::SampleOptions sample;
  auto* sample_cmd = app.add_subcommand("sample", "Draw samples from a teacher or student checkpoint");
  add_common(sample_cmd, sample.common, "Samples CSV path");
  sample_cmd->add_option("--checkpoint", sample.checkpoint, "Teacher or student checkpoint")->required();
  sample_cmd->add_option("--steps", sample.steps, "Teacher sampler steps (students always use 1)");
  sample_cmd->add_option("--solver", sample.solver, "ddim, signal-euler or signal-heun");
  sample_cmd->add_option("-n,--n", sample.n, "Number of samples");
  sample_cmd->add_option("--label", sample.label, "Class condition");
  sample_cmd->add_option("--weight", sample.weight, "Guidance weight");

  boot::EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Compute sample metrics");
  add_common(eval_cmd, eval.common, "metrics.json path");
  eval_cmd->add_option("--samples", eval.samples, "Samples CSV")->required();
  eval_cmd->add_option("--reference", eval.reference, "Reference samples CSV for energy distance");
  eval_cmd->add_option("--teacher", eval.teacher, "Teacher checkpoint (dataset centers, speed)");
  eval_cmd->add_option("--student", eval.student, "Student checkpoint (speed)");
  eval_cmd->add_option("--svg", eval.svg, "Scatter plot output");
  eval_cmd->add_option("--radius", eval.radius, "Mode coverage radius");

  boot::VerifyOptions verify;
  auto* verify_cmd = app.add_subcommand("verify", "Run the oracle checks");
  add_common(verify_cmd, verify.common, "Optional JSON report path");
  verify_cmd->add_option("--mutation", verify.mutation, "Inject a fault: none or signal-sign-flip");

  boot::AblateOptions ablate;
  auto* ablate_cmd = app.add_subcommand("ablate", "Run a paired ablation");
  add_common(ablate_cmd, ablate.common, "Report directory");
  ablate_cmd->add_option("name", ablate.name, "boundary, time_sampling, guidance or solver_order")->required();
  ablate_cmd->add_option("--teacher", ablate.teacher, "Teacher checkpoint")->required();
  ablate_cmd->add_option("--steps", ablate.steps, "Override the distillation steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return boot::kExitUsage;
  }

  if (*train_cmd) return boot::cmd_train_teacher(train);
  if (*dist_cmd) return boot::cmd_distill(dist);
  if (*sample_cmd) return boot::cmd_sample(sample);
  if (*eval_cmd) return boot::cmd_eval(eval);
  if (*verify_cmd) return boot::cmd_verify(verify);
  if (*ablate_cmd) return boot::cmd_ablate(ablate);
  return boot::kExitUsage;
}
