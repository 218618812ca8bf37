#pragma once

// Built-in desk scenes and reference plans for the four demo tasks, seeded
// scene perturbations, and a closed-loop benchmark that feeds scripted plans
// through supervision and the simulator to produce an evaluation report.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "gplan/errors.hpp"
#include "gplan/evaluation.hpp"
#include "gplan/gateway.hpp"
#include "gplan/geometry.hpp"
#include "gplan/jsonio.hpp"
#include "gplan/simulator.hpp"
#include "gplan/supervision.hpp"
#include "gplan/util.hpp"

namespace gplan::scenario {

using gateway::VlmPlan;
using geometry::Vec3;
using sim::ConstraintSet;
using sim::GoalParams;
using sim::SceneModel;

inline std::string task_description(int task_id) {
  switch (task_id) {
    case 1: return "Hang the headphone on its stand.";
    case 2: return "Move the headphone to the target position.";
    case 3: return "Place the stand at its target, then hang the headphone on it.";
    case 4: return "Tidy up the desk.";
  }
  throw Error("task id must be 1..4");
}

// The demo desk: a fragile manipuland, its stand, and one box-shaped
// obstacle the planner must keep clear of.
inline SceneModel task_scene(int task_id) {
  task_description(task_id);  // validates the id
  SceneModel s;
  s.objects = {
      {"headphone", {0.5, 0.3, 0.2}, {{"fragility", "high"}}},
      {"headphone_stand", {0.4, 0.2, 0.1}, {{"material", "metal"}}},
      {"obstacle", {0.6, 0.4, 0.3}, {{"type", "box"}}},
  };
  return s;
}

// Wider grasp envelope for plans that grasp from a hover pose instead of
// moving onto the object first.
inline ConstraintSet hover_constraints() {
  ConstraintSet c;
  c.reach_tolerance = 0.3;
  return c;
}

// Jitters every object position by up to `magnitude` per axis. At the default
// 0.02 m the task-1 reference plan keeps at least 0.104 m of obstacle
// clearance in the worst case, so every perturbed run stays solvable.
inline SceneModel perturb_scene(const SceneModel& scene, std::uint64_t seed,
                                double magnitude = 0.02) {
  if (magnitude < 0.0) throw Error("perturbation magnitude must be non-negative");
  Rng rng(seed);
  SceneModel out = scene;
  for (auto& o : out.objects) {
    o.position.x += rng.uniform(-magnitude, magnitude);
    o.position.y += rng.uniform(-magnitude, magnitude);
    o.position.z += rng.uniform(-magnitude, magnitude);
  }
  out.validate();
  return out;
}

namespace detail {

inline std::string move_to_action(const Vec3& p) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "move_to([%.6g, %.6g, %.6g])", p.x, p.y, p.z);
  return buf;
}

inline const sim::SceneObject& must_find(const SceneModel& scene, const std::string& name) {
  const auto* o = scene.find(name);
  if (!o) throw sim::MissingObject("scene has no object named '" + name + "'");
  return *o;
}

inline VlmPlan plan_shell(const SceneModel& scene, const std::vector<std::string>& actions) {
  VlmPlan p;
  for (const auto& o : scene.objects) p.objects.push_back({o.name, o.position, o.properties});
  for (std::size_t i = 0; i < actions.size(); ++i)
    p.task_steps.push_back({std::to_string(i + 1), actions[i], ""});
  p.flag = gateway::PlanFlag::complete;
  return p;
}

}  // namespace detail

// Reference pick-and-place solution for the task in the given scene; executes
// under default constraints and satisfies the built-in goal.
inline VlmPlan competent_plan(int task_id, const SceneModel& scene, const GoalParams& gp = {}) {
  const auto& headphone = detail::must_find(scene, "headphone");
  switch (task_id) {
    case 1: {
      const auto& stand = detail::must_find(scene, "headphone_stand");
      return detail::plan_shell(
          scene, {detail::move_to_action(headphone.position), "grasp('headphone')",
                  detail::move_to_action(stand.position + gp.hook_offset), "release()"});
    }
    case 2:
      return detail::plan_shell(scene,
                                {detail::move_to_action(headphone.position), "grasp('headphone')",
                                 detail::move_to_action(gp.target), "release()"});
    case 3: {
      const auto& stand = detail::must_find(scene, "headphone_stand");
      return detail::plan_shell(
          scene, {detail::move_to_action(stand.position), "grasp('headphone_stand')",
                  detail::move_to_action(gp.stand_target), "release()",
                  detail::move_to_action(headphone.position), "grasp('headphone')",
                  detail::move_to_action(gp.stand_target + gp.hook_offset), "release()"});
    }
    case 4:
      return competent_plan(gp.mapped_task, scene, gp);
  }
  throw Error("task id must be 1..4");
}

// Injects one of two canonical faults: an unrecognized action spelling (the
// plan no longer parses) or an unnamed 15 N grasp (exceeds every force limit).
inline VlmPlan faulty_plan(int task_id, const SceneModel& scene, std::uint64_t seed,
                           const GoalParams& gp = {}) {
  VlmPlan plan = competent_plan(task_id, scene, gp);
  Rng rng(seed);
  std::size_t grasp_at = 0, move_after = 0;
  for (std::size_t i = 0; i < plan.task_steps.size(); ++i) {
    const auto cmd = sim::parse_action(plan.task_steps[i].action);
    if (std::holds_alternative<sim::Grasp>(cmd) && grasp_at == 0) grasp_at = i;
    if (grasp_at > 0 && i > grasp_at && std::holds_alternative<sim::MoveTo>(cmd) &&
        move_after == 0)
      move_after = i;
  }
  if (rng.uniform_int(0, 1) == 0 && move_after > 0) {
    auto& action = plan.task_steps[move_after].action;
    action = "liftTo" + action.substr(std::string("move_to").size());
  } else {
    plan.task_steps[grasp_at].action = "grasp(15)";
  }
  return plan;
}

// ---- closed-loop benchmark --------------------------------------------------------

struct BenchmarkOptions {
  int task_id = 1;
  int runs = 50;
  std::uint64_t seed = 2026;
  double perturb_magnitude = 0.02;
  bool use_reviewer = true;
  int fault_every = 0;  // 0 = clean scripts; k = every k-th run starts faulty
};

// Per run: perturb the scene, script a plan (optionally faulty, with the
// reference plan queued as the correction reply), pass it through supervision
// when enabled, then execute the result and aggregate all four metrics.
inline evaluation::EvalReport benchmark(const BenchmarkOptions& opt,
                                        const std::filesystem::path& workdir) {
  if (opt.runs < 1) throw evaluation::EmptyInput("benchmark needs at least one run");
  if (opt.fault_every < 0) throw Error("fault_every must be non-negative");
  std::filesystem::create_directories(workdir);
  gateway::reset_scripted_backends();
  const auto templates = supervision::default_templates();
  const SceneModel nominal = task_scene(opt.task_id);
  const GoalParams gp;
  const ConstraintSet c;

  std::vector<sim::Outcome> outcomes;
  std::vector<evaluation::Localization> locs;
  double rouge_sum = 0.0;

  for (int i = 0; i < opt.runs; ++i) {
    const SceneModel scene = perturb_scene(nominal, opt.seed + static_cast<std::uint64_t>(i),
                                           opt.perturb_magnitude);
    const VlmPlan reference = competent_plan(opt.task_id, scene, gp);
    const bool faulty = opt.fault_every > 0 && i % opt.fault_every == 0;
    const VlmPlan first =
        faulty ? faulty_plan(opt.task_id, scene, opt.seed + static_cast<std::uint64_t>(i), gp)
               : reference;

    VlmPlan executed = first;
    if (opt.use_reviewer) {
      std::vector<std::string> lines = {dump_canonical(json(first), -1)};
      if (faulty) lines.push_back(dump_canonical(json(reference), -1));
      lines.push_back("Desk scene, run " + std::to_string(i) + ".");
      const auto script = workdir / ("vlm_run_" + std::to_string(i) + ".txt");
      std::string text;
      for (const auto& l : lines) text += l + "\n";
      write_text_file(script, text);
      gateway::ModelBackendConfig vlm;
      vlm.kind = gateway::ModelBackendConfig::Kind::scripted;
      vlm.script = std::filesystem::absolute(script).string();
      const auto result =
          supervision::run_supervision(task_description(opt.task_id), scene, vlm,
                                       supervision::RuleReviewer{}, templates, c);
      executed = result.final_plan;
    }

    outcomes.push_back(sim::run_plan(scene, executed, sim::builtin_goals(opt.task_id, gp), c));
    rouge_sum += evaluation::rouge_l(evaluation::action_tokens(executed),
                                     evaluation::action_tokens(reference));
    for (const auto& claimed : executed.objects) {
      const auto* truth = scene.find(claimed.name);
      if (truth) locs.push_back({claimed.name, claimed.position, truth->position});
    }
  }

  evaluation::EvalReport report;
  report.miou = locs.empty() ? 0.0 : evaluation::miou(locs);
  report.rouge_l = rouge_sum / static_cast<double>(opt.runs);
  report.executability = evaluation::executability(outcomes);
  report.tsr = evaluation::tsr(outcomes);
  report.n = static_cast<std::size_t>(opt.runs);
  report.validate();
  return report;
}

}  // namespace gplan::scenario
