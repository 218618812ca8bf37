// gplan: sensor fusion, prompt synthesis, plan supervision, and desk-scale
// simulation behind one config-driven command-line tool.

#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gplan/cli.hpp"

namespace cli = gplan::cli;

int main(int argc, char** argv) {
  CLI::App app{"3D-grounded robotic task planning pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  int rc = cli::kExitOk;
  const auto add_config = [&config_path](CLI::App* sub) {
    sub->add_option("--config,-c", config_path, "pipeline config JSON")->required();
  };
  const auto add_task = [](CLI::App* sub, int& task_id) {
    sub->add_option("--task", task_id, "demo task id")->check(CLI::Range(1, 4));
  };

  auto* fuse = app.add_subcommand("fuse", "Score the point cloud against the camera frame");
  std::string fuse_out = "scored_points.json";
  add_config(fuse);
  fuse->add_option("--out,-o", fuse_out, "scored-points JSON path");
  fuse->callback([&] {
    rc = cli::run_command([&] { return cli::cmd_fuse(cli::load_config(config_path), fuse_out); });
  });

  auto* annotate = app.add_subcommand("annotate", "Mark reliable points on the camera image");
  std::string annotate_image = "annotated.ppm";
  std::string annotate_markers = "markers.json";
  add_config(annotate);
  annotate->add_option("--out-image", annotate_image, "annotated PPM path");
  annotate->add_option("--out-markers", annotate_markers, "marker JSON path");
  annotate->callback([&] {
    rc = cli::run_command([&] {
      return cli::cmd_annotate(cli::load_config(config_path), annotate_image, annotate_markers);
    });
  });

  auto* plan = app.add_subcommand("plan", "Request a plan from the vision model");
  std::string plan_strategy;
  int plan_task = 1;
  std::string plan_out = "plan.json";
  std::string plan_transcript = "transcript.json";
  add_config(plan);
  plan->add_option("--strategy", plan_strategy, "prompting strategy")
      ->required()
      ->check(CLI::IsMember({"direct", "iterative"}));
  add_task(plan, plan_task);
  plan->add_option("--out,-o", plan_out, "plan JSON path");
  plan->add_option("--transcript", plan_transcript, "prompt/response transcript path");
  plan->callback([&] {
    rc = cli::run_command([&] {
      return cli::cmd_plan(cli::load_config(config_path), plan_strategy, plan_task, plan_out,
                           plan_transcript);
    });
  });

  auto* supervise = app.add_subcommand("supervise", "Run the review/correction loop");
  int supervise_task = 1;
  std::string supervise_out = "session.json";
  add_config(supervise);
  add_task(supervise, supervise_task);
  supervise->add_option("--out,-o", supervise_out, "session summary JSON path");
  supervise->callback([&] {
    rc = cli::run_command([&] {
      return cli::cmd_supervise(cli::load_config(config_path), supervise_task, supervise_out);
    });
  });

  auto* simulate = app.add_subcommand("simulate", "Execute a plan in the desk simulator");
  int simulate_task = 1;
  std::string simulate_plan;
  std::string simulate_out = "outcome.json";
  add_config(simulate);
  add_task(simulate, simulate_task);
  simulate->add_option("--plan", simulate_plan, "plan JSON (defaults to the reference plan)");
  simulate->add_option("--out,-o", simulate_out, "outcome JSON path");
  simulate->callback([&] {
    rc = cli::run_command([&] {
      const std::optional<std::filesystem::path> plan_file =
          simulate_plan.empty() ? std::nullopt
                                : std::optional<std::filesystem::path>(simulate_plan);
      return cli::cmd_simulate(cli::load_config(config_path), simulate_task, plan_file,
                               simulate_out);
    });
  });

  auto* eval = app.add_subcommand("eval", "Benchmark the closed loop over seeded runs");
  cli::EvalOptions eval_opt;
  std::string eval_workdir;
  std::string eval_out = "report.json";
  bool eval_no_reviewer = false;
  add_config(eval);
  add_task(eval, eval_opt.task_id);
  eval->add_option("--runs", eval_opt.runs, "number of seeded runs")->required();
  eval->add_flag("--no-reviewer", eval_no_reviewer, "skip the review loop (ablation)");
  eval->add_option("--fault-every", eval_opt.fault_every,
                   "inject a faulty first plan every k-th run");
  eval->add_option("--workdir", eval_workdir, "scratch directory for generated scripts");
  eval->add_option("--out,-o", eval_out, "evaluation report JSON path");
  eval->callback([&] {
    rc = cli::run_command([&] {
      eval_opt.use_reviewer = !eval_no_reviewer;
      eval_opt.workdir = eval_workdir;
      return cli::cmd_eval(cli::load_config(config_path), eval_opt, eval_out);
    });
  });

  auto* augment = app.add_subcommand("augment", "Generate a labeled review dataset");
  int augment_count = 0;
  std::string augment_out = "dataset.jsonl";
  add_config(augment);
  augment->add_option("--count", augment_count, "positive/negative pairs to generate")
      ->required();
  augment->add_option("--out,-o", augment_out, "dataset JSONL path");
  augment->callback([&] {
    rc = cli::run_command(
        [&] { return cli::cmd_augment(cli::load_config(config_path), augment_count, augment_out); });
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitConfig;
  }
  return rc;
}
