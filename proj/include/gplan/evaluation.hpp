#pragma once

// Run metrics (localization IoU, control-sequence ROUGE-L, executability,
// task success rate) and reviewer-training dataset construction: positive
// samples pair a valid plan with an accepting review, and six seeded
// mutation strategies derive negatives that the plan validator must flag.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gplan/errors.hpp"
#include "gplan/gateway.hpp"
#include "gplan/io.hpp"
#include "gplan/jsonio.hpp"
#include "gplan/simulator.hpp"
#include "gplan/supervision.hpp"
#include "gplan/util.hpp"

namespace gplan::evaluation {

using gateway::VlmPlan;
using geometry::Vec3;
using sim::ConstraintSet;
using sim::SceneModel;

struct EmptyInput : Error {
  using Error::Error;
};
struct NoMutableField : Error {
  using Error::Error;
};

// ---- localization IoU ---------------------------------------------------------

struct Localization {
  std::string name;
  Vec3 predicted;
  Vec3 ground_truth;

  void validate() const {
    for (double v : {predicted.x, predicted.y, predicted.z, ground_truth.x, ground_truth.y,
                     ground_truth.z})
      if (!std::isfinite(v)) throw Error("localization '" + name + "' is not finite");
  }
};

inline void to_json(json& j, const Localization& l) {
  j = json{{"name", l.name}, {"predicted", l.predicted}, {"ground_truth", l.ground_truth}};
}

inline void from_json(const json& j, Localization& l) {
  l.name = j.at("name").get<std::string>();
  l.predicted = j.at("predicted").get<Vec3>();
  l.ground_truth = j.at("ground_truth").get<Vec3>();
}

namespace detail {

// Cells whose centers fall inside the ball; cell i spans [i*voxel, (i+1)*voxel).
inline std::set<std::array<long long, 3>> voxel_ball(const Vec3& c, double r, double voxel) {
  std::set<std::array<long long, 3>> cells;
  const auto lo = [&](double v) { return static_cast<long long>(std::floor((v - r) / voxel)) - 1; };
  const auto hi = [&](double v) { return static_cast<long long>(std::floor((v + r) / voxel)) + 1; };
  for (long long i = lo(c.x); i <= hi(c.x); ++i)
    for (long long j = lo(c.y); j <= hi(c.y); ++j)
      for (long long k = lo(c.z); k <= hi(c.z); ++k) {
        const Vec3 center{(i + 0.5) * voxel, (j + 0.5) * voxel, (k + 0.5) * voxel};
        if ((center - c).norm() <= r) cells.insert({i, j, k});
      }
  return cells;
}

}  // namespace detail

// IoU of two equal-radius balls discretized on a shared voxel grid.
inline double ball_iou(const Vec3& a, const Vec3& b, double radius, double voxel) {
  const auto A = detail::voxel_ball(a, radius, voxel);
  const auto B = detail::voxel_ball(b, radius, voxel);
  if (A.empty() && B.empty()) return 1.0;  // degenerate radius; identical empty sets
  std::size_t inter = 0;
  for (const auto& cell : A) inter += B.count(cell);
  return static_cast<double>(inter) / static_cast<double>(A.size() + B.size() - inter);
}

// Mean IoU over objects. Predictions farther than `tol` from ground truth
// contribute zero; the rest score the voxelized overlap of radius-tol/2 balls.
inline double miou(const std::vector<Localization>& locs, double voxel = 0.05,
                   double tol = 0.2) {
  if (locs.empty()) throw EmptyInput("miou needs at least one localization");
  if (voxel <= 0.0 || tol <= 0.0) throw Error("miou voxel and tolerance must be positive");
  double sum = 0.0;
  for (const auto& l : locs) {
    l.validate();
    const double err = (l.predicted - l.ground_truth).norm();
    if (err >= tol) continue;
    sum += ball_iou(l.predicted, l.ground_truth, tol / 2.0, voxel);
  }
  return sum / static_cast<double>(locs.size());
}

// ---- control-sequence ROUGE-L ---------------------------------------------------

inline std::string normalize_token(std::string_view raw) {
  return collapse_whitespace(to_lower(raw));
}

// 2·LCS/(|P|+|G|) over normalized action strings. Two empty sequences match
// by convention; a single empty sequence scores zero.
inline double rouge_l(const std::vector<std::string>& pred, const std::vector<std::string>& gt) {
  if (pred.empty() && gt.empty()) return 1.0;
  if (pred.empty() || gt.empty()) return 0.0;
  std::vector<std::string> p(pred.size()), g(gt.size());
  std::transform(pred.begin(), pred.end(), p.begin(), normalize_token);
  std::transform(gt.begin(), gt.end(), g.begin(), normalize_token);

  std::vector<std::size_t> prev(g.size() + 1, 0), cur(g.size() + 1, 0);
  for (std::size_t i = 1; i <= p.size(); ++i) {
    for (std::size_t j = 1; j <= g.size(); ++j)
      cur[j] = p[i - 1] == g[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  const double lcs = static_cast<double>(prev[g.size()]);
  return 2.0 * lcs / static_cast<double>(p.size() + g.size());
}

inline std::vector<std::string> action_tokens(const VlmPlan& plan) {
  std::vector<std::string> out;
  out.reserve(plan.task_steps.size());
  for (const auto& s : plan.task_steps) out.push_back(s.action);
  return out;
}

// ---- run-level rates -----------------------------------------------------------

struct ExecutionCheck {
  bool parsed_and_validated = false;
};

inline double executability(const std::vector<ExecutionCheck>& results) {
  if (results.empty()) throw EmptyInput("executability needs at least one result");
  std::size_t ok = 0;
  for (const auto& r : results) ok += r.parsed_and_validated ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(results.size());
}

// An outcome counts as executable when every step parsed and ran, even if the
// goal predicate was ultimately missed.
inline double executability(const std::vector<sim::Outcome>& outcomes) {
  if (outcomes.empty()) throw EmptyInput("executability needs at least one outcome");
  std::size_t ok = 0;
  for (const auto& o : outcomes) ok += o.failed_step.has_value() ? 0 : 1;
  return static_cast<double>(ok) / static_cast<double>(outcomes.size());
}

inline double tsr(const std::vector<sim::Outcome>& outcomes) {
  if (outcomes.empty()) throw EmptyInput("tsr needs at least one outcome");
  std::size_t ok = 0;
  for (const auto& o : outcomes) ok += o.success ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(outcomes.size());
}

struct EvalReport {
  double miou = 0.0;
  double rouge_l = 0.0;
  double executability = 0.0;
  double tsr = 0.0;
  std::size_t n = 0;

  void validate() const {
    for (double v : {miou, rouge_l, executability, tsr})
      if (!(v >= 0.0 && v <= 1.0)) throw Error("evaluation rates must lie in [0, 1]");
  }
};

inline void to_json(json& j, const EvalReport& r) {
  j = json{{"miou", r.miou},
           {"rouge_l", r.rouge_l},
           {"executability", r.executability},
           {"tsr", r.tsr},
           {"n", r.n}};
}

inline void from_json(const json& j, EvalReport& r) {
  r.miou = j.at("miou").get<double>();
  r.rouge_l = j.at("rouge_l").get<double>();
  r.executability = j.at("executability").get<double>();
  r.tsr = j.at("tsr").get<double>();
  r.n = j.at("n").get<std::size_t>();
  r.validate();
}

// ---- reviewer-training samples ----------------------------------------------------

enum class Polarity { positive, negative };

inline const char* to_string(Polarity p) {
  return p == Polarity::positive ? "positive" : "negative";
}

struct SampleInput {
  std::string task;
  std::string scene_text;  // scene-description JSON text
  json vlm_output;         // full plan JSON
  json history = json::array();
};

struct SampleOutput {
  std::string feedback;
  std::vector<gateway::Suggestion> suggestions;
  double confidence = 0.0;
  std::string prompt_for_vlm;
};

struct SampleRecord {
  SampleInput input;
  SampleOutput output;
  Polarity polarity = Polarity::positive;
  std::string error_type;  // negatives only

  void validate() const {
    if (input.task.empty()) throw Error("sample task description is empty");
    if (input.scene_text.empty()) throw Error("sample scene text is empty");
    if (!input.vlm_output.is_object()) throw Error("sample plan output must be a JSON object");
    if (!(output.confidence >= 0.0 && output.confidence <= 1.0))
      throw Error("sample confidence must lie in [0, 1]");
    if (polarity == Polarity::negative && error_type.empty())
      throw Error("negative samples must carry an error type");
  }
};

inline void to_json(json& j, const SampleRecord& s) {
  j = json{{"input",
            {{"Task Description", s.input.task},
             {"Scene", s.input.scene_text},
             {"VLM Output", s.input.vlm_output},
             {"Historical SLM Feedback", s.input.history}}},
           {"output",
            {{"Feedback", s.output.feedback},
             {"Suggestions", s.output.suggestions},
             {"Confidence", s.output.confidence},
             {"Prompt for VLM", s.output.prompt_for_vlm}}},
           {"polarity", to_string(s.polarity)}};
  if (s.polarity == Polarity::negative) j["error_type"] = s.error_type;
}

inline void from_json(const json& j, SampleRecord& s) {
  const json& in = j.at("input");
  s.input.task = in.at("Task Description").get<std::string>();
  s.input.scene_text = in.at("Scene").get<std::string>();
  s.input.vlm_output = in.at("VLM Output");
  s.input.history = in.value("Historical SLM Feedback", json::array());
  const json& out = j.at("output");
  s.output.feedback = out.at("Feedback").get<std::string>();
  s.output.suggestions.clear();
  for (const json& sj : out.at("Suggestions"))
    s.output.suggestions.push_back({sj.at("id").get<std::string>(),
                                    sj.at("text").get<std::string>(),
                                    sj.at("confidence").get<double>()});
  s.output.confidence = out.at("Confidence").get<double>();
  s.output.prompt_for_vlm = out.at("Prompt for VLM").get<std::string>();
  const std::string pol = j.at("polarity").get<std::string>();
  if (pol != "positive" && pol != "negative") throw Error("unknown sample polarity '" + pol + "'");
  s.polarity = pol == "positive" ? Polarity::positive : Polarity::negative;
  s.error_type = j.value("error_type", "");
  s.validate();
}

// Objects whose coordinates were occluded away are unlocatable and therefore
// absent from the reconstructed scene.
inline SceneModel scene_from_text(const std::string& text) {
  const json j = parse_json(text, "scene text");
  const json& root = j.contains("scene_description") ? j.at("scene_description") : j;
  SceneModel scene;
  for (const json& oj : root.at("objects")) {
    if (!oj.contains("position")) continue;
    scene.objects.push_back(oj.get<sim::SceneObject>());
  }
  scene.validate();
  return scene;
}

namespace detail {

inline const gateway::PromptTemplate& default_correction() {
  static const gateway::PromptTemplate t{
      "correction",
      read_text_file(std::string(GPLAN_ASSETS_DIR) + "/templates/correction_prompt.txt")};
  return t;
}

inline std::string feedback_text(const supervision::FeedbackRecord& rec) {
  if (rec.issues.empty()) return "The plan satisfies every validator check.";
  std::string out = "The plan has " + std::to_string(rec.issues.size()) + " issue(s):";
  for (const auto& i : rec.issues) out += " " + i.description;
  return out;
}

inline SampleOutput review_output(const std::string& task, const VlmPlan& plan,
                                  const SceneModel& scene, const ConstraintSet& c) {
  supervision::FeedbackHistory history;
  const auto rec =
      supervision::rule_based_review(task, default_correction(), history, plan, scene, c);
  return {feedback_text(rec), rec.suggestions, rec.confidence, rec.prompt_for_vlm};
}

inline std::string fmt_action(const sim::ActionCommand& cmd) {
  using supervision::detail::fmt_num;
  if (const auto* mv = std::get_if<sim::MoveTo>(&cmd))
    return "move_to([" + fmt_num(mv->target.x) + ", " + fmt_num(mv->target.y) + ", " +
           fmt_num(mv->target.z) + "])";
  if (const auto* g = std::get_if<sim::Grasp>(&cmd)) {
    if (g->target) return "grasp('" + *g->target + "')";
    return "grasp(" + fmt_num(g->force.value_or(0.0)) + ")";
  }
  if (std::holds_alternative<sim::Release>(cmd)) return "release()";
  if (const auto* r = std::get_if<sim::Rotate>(&cmd)) return "rotate(" + fmt_num(r->angle_deg) + ")";
  return "analyse()";
}

inline void renumber_steps(VlmPlan& plan) {
  for (std::size_t i = 0; i < plan.task_steps.size(); ++i)
    plan.task_steps[i].step_id = std::to_string(i + 1);
}

inline VlmPlan plan_of(const SampleRecord& s) {
  return gateway::parse_vlm_plan(s.input.vlm_output.dump());
}

// Rebuilds the record around a mutated plan/scene and labels it with the
// first category the validator raises.
inline SampleRecord finish_negative(const SampleRecord& src, const VlmPlan& plan,
                                    const std::string& scene_text, const ConstraintSet& c,
                                    const char* strategy) {
  const SceneModel scene = scene_from_text(scene_text);
  const auto issues = supervision::validate_plan(plan, scene, c);
  if (issues.empty())
    throw NoMutableField(std::string(strategy) + " produced no validator-visible fault");
  SampleRecord out = src;
  out.input.vlm_output = json(plan);
  out.input.scene_text = scene_text;
  out.output = review_output(src.input.task, plan, scene, c);
  out.polarity = Polarity::negative;
  out.error_type = to_string(issues.front().category);
  out.validate();
  return out;
}

}  // namespace detail

// Valid plan + accepting review; refuses plans the validator would flag so
// generated corpora keep their polarity invariant by construction.
inline SampleRecord make_positive_sample(const std::string& task, const SceneModel& scene,
                                         const VlmPlan& plan, const ConstraintSet& c = {}) {
  if (!supervision::validate_plan(plan, scene, c).empty())
    throw Error("positive samples must pass plan validation");
  SampleRecord s;
  s.input.task = task;
  s.input.scene_text = dump_canonical(json(scene), -1);
  s.input.vlm_output = json(plan);
  s.output = detail::review_output(task, plan, scene, c);
  s.polarity = Polarity::positive;
  s.validate();
  return s;
}

enum class Augmentation {
  param_exceed,
  drop_step,
  add_step,
  reverse_flow,
  invalid_position,
  occlusion
};

inline const char* to_string(Augmentation a) {
  switch (a) {
    case Augmentation::param_exceed: return "param_exceed";
    case Augmentation::drop_step: return "drop_step";
    case Augmentation::add_step: return "add_step";
    case Augmentation::reverse_flow: return "reverse_flow";
    case Augmentation::invalid_position: return "invalid_position";
    case Augmentation::occlusion: return "occlusion";
  }
  return "?";
}

inline Augmentation augmentation_from_string(const std::string& name) {
  for (Augmentation a : {Augmentation::param_exceed, Augmentation::drop_step,
                         Augmentation::add_step, Augmentation::reverse_flow,
                         Augmentation::invalid_position, Augmentation::occlusion})
    if (name == to_string(a)) return a;
  throw Error("unknown augmentation strategy '" + name + "'");
}

// Parameter and step-structure mutations of a known-good sample.
inline SampleRecord augment_positive(const SampleRecord& s, Augmentation strategy,
                                     std::uint64_t seed, const ConstraintSet& c = {}) {
  s.validate();
  if (s.polarity != Polarity::positive) throw Error("augmentation expects a positive sample");
  VlmPlan plan = detail::plan_of(s);
  Rng rng(seed);

  if (strategy == Augmentation::param_exceed) {
    // One numeric argument (coordinate or grip force), pushed past its bound.
    struct Slot {
      std::size_t step;
      int arg;  // 0..2 coordinate, 3 force
    };
    std::vector<Slot> slots;
    std::vector<sim::ActionCommand> cmds(plan.task_steps.size());
    for (std::size_t i = 0; i < plan.task_steps.size(); ++i) {
      cmds[i] = sim::parse_action(plan.task_steps[i].action);
      if (std::holds_alternative<sim::MoveTo>(cmds[i]))
        for (int a = 0; a < 3; ++a) slots.push_back({i, a});
      else if (const auto* g = std::get_if<sim::Grasp>(&cmds[i]))
        if (g->force) slots.push_back({i, 3});
    }
    if (slots.empty()) throw NoMutableField("plan has no force or position arguments");
    const Slot slot = slots[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(slots.size()) - 1))];
    if (slot.arg == 3) {
      auto& g = std::get<sim::Grasp>(cmds[slot.step]);
      double f = *g.force * rng.uniform(2.5, 4.0);
      if (f <= c.max_grip_force + 0.5) f = c.max_grip_force + 2.0 + rng.uniform(0.0, 3.0);
      g.force = f;
    } else {
      auto& mv = std::get<sim::MoveTo>(cmds[slot.step]);
      double* coord = slot.arg == 0 ? &mv.target.x : slot.arg == 1 ? &mv.target.y : &mv.target.z;
      double v = *coord * rng.uniform(3.0, 5.0);
      const double hi = slot.arg == 0   ? c.workspace_max.x
                        : slot.arg == 1 ? c.workspace_max.y
                                        : c.workspace_max.z;
      if (v <= hi) v = hi + 0.2 + rng.uniform(0.0, 0.5);
      *coord = v;
    }
    plan.task_steps[slot.step].action = detail::fmt_action(cmds[slot.step]);
    return detail::finish_negative(s, plan, s.input.scene_text, c, "param_exceed");
  }

  if (strategy == Augmentation::drop_step) {
    // Prefer dropping a release, then a grasp; accept the first removal the
    // validator objects to.
    std::vector<std::size_t> order;
    for (int pass = 0; pass < 3; ++pass)
      for (std::size_t i = 0; i < plan.task_steps.size(); ++i) {
        const auto cmd = sim::parse_action(plan.task_steps[i].action);
        const bool is_release = std::holds_alternative<sim::Release>(cmd);
        const bool is_grasp = std::holds_alternative<sim::Grasp>(cmd);
        if ((pass == 0 && is_release) || (pass == 1 && is_grasp) ||
            (pass == 2 && !is_release && !is_grasp))
          order.push_back(i);
      }
    if (!order.empty()) {
      const std::size_t start = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(order.size()) - 1));
      for (std::size_t k = 0; k < order.size(); ++k) {
        VlmPlan mutated = plan;
        mutated.task_steps.erase(mutated.task_steps.begin() +
                                 static_cast<std::ptrdiff_t>(order[(start + k) % order.size()]));
        detail::renumber_steps(mutated);
        try {
          return detail::finish_negative(s, mutated, s.input.scene_text, c, "drop_step");
        } catch (const NoMutableField&) {
          // this removal kept the plan valid; try the next candidate
        }
      }
    }
    throw NoMutableField("no removable step breaks the plan");
  }

  if (strategy == Augmentation::add_step) {
    // Duplicate a grasp or release in place; the repeat is always a logical
    // fault. Plans without either gain a stray release.
    std::vector<std::size_t> anchors;
    for (std::size_t i = 0; i < plan.task_steps.size(); ++i) {
      const auto cmd = sim::parse_action(plan.task_steps[i].action);
      if (std::holds_alternative<sim::Grasp>(cmd) || std::holds_alternative<sim::Release>(cmd))
        anchors.push_back(i);
    }
    if (anchors.empty()) {
      plan.task_steps.push_back({"", "release()", ""});
    } else {
      const std::size_t at = anchors[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(anchors.size()) - 1))];
      plan.task_steps.insert(plan.task_steps.begin() + static_cast<std::ptrdiff_t>(at) + 1,
                             plan.task_steps[at]);
    }
    detail::renumber_steps(plan);
    return detail::finish_negative(s, plan, s.input.scene_text, c, "add_step");
  }

  throw Error("augment_positive handles param_exceed, drop_step, and add_step only");
}

// Flow, coordinate, and scene-visibility faults.
inline SampleRecord generate_negative(const SampleRecord& s, Augmentation strategy,
                                      std::uint64_t seed, const ConstraintSet& c = {}) {
  s.validate();
  if (s.polarity != Polarity::positive) throw Error("augmentation expects a positive sample");
  VlmPlan plan = detail::plan_of(s);
  Rng rng(seed);

  if (strategy == Augmentation::reverse_flow) {
    std::optional<std::size_t> grasp_at, release_at;
    for (std::size_t i = 0; i < plan.task_steps.size(); ++i) {
      const auto cmd = sim::parse_action(plan.task_steps[i].action);
      if (!grasp_at && std::holds_alternative<sim::Grasp>(cmd)) grasp_at = i;
      if (grasp_at && !release_at && i > *grasp_at && std::holds_alternative<sim::Release>(cmd))
        release_at = i;
    }
    if (!grasp_at || !release_at) throw NoMutableField("plan has no grasp before a release");
    std::swap(plan.task_steps[*grasp_at].action, plan.task_steps[*release_at].action);
    return detail::finish_negative(s, plan, s.input.scene_text, c, "reverse_flow");
  }

  if (strategy == Augmentation::invalid_position) {
    std::vector<std::size_t> moves;
    std::vector<sim::ActionCommand> cmds(plan.task_steps.size());
    for (std::size_t i = 0; i < plan.task_steps.size(); ++i) {
      cmds[i] = sim::parse_action(plan.task_steps[i].action);
      if (std::holds_alternative<sim::MoveTo>(cmds[i])) moves.push_back(i);
    }
    if (moves.empty()) throw NoMutableField("plan has no move_to step");
    const std::size_t at = moves[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(moves.size()) - 1))];
    auto& mv = std::get<sim::MoveTo>(cmds[at]);
    const int axis = static_cast<int>(rng.uniform_int(0, 2));
    double* coord = axis == 0 ? &mv.target.x : axis == 1 ? &mv.target.y : &mv.target.z;
    *coord = rng.uniform_int(0, 1) == 0 ? 1.2 + rng.uniform(0.0, 0.8)
                                        : -(0.2 + rng.uniform(0.0, 0.8));
    plan.task_steps[at].action = detail::fmt_action(cmds[at]);
    return detail::finish_negative(s, plan, s.input.scene_text, c, "invalid_position");
  }

  if (strategy == Augmentation::occlusion) {
    // Hide the coordinates of an object the plan grasps by name, so the
    // validator loses sight of it.
    std::vector<std::string> named;
    for (const auto& step : plan.task_steps) {
      const auto cmd = sim::parse_action(step.action);
      if (const auto* g = std::get_if<sim::Grasp>(&cmd))
        if (g->target) named.push_back(*g->target);
    }
    if (named.empty()) throw NoMutableField("plan grasps no object by name");
    const std::string victim = named[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(named.size()) - 1))];

    json scene_json = parse_json(s.input.scene_text, "scene text");
    json& root = scene_json.contains("scene_description") ? scene_json.at("scene_description")
                                                          : scene_json;
    bool occluded = false;
    for (json& oj : root.at("objects"))
      if (oj.at("name").get<std::string>() == victim && oj.contains("position")) {
        oj.erase("position");
        occluded = true;
      }
    if (!occluded) throw NoMutableField("grasped object '" + victim + "' is not in the scene");
    return detail::finish_negative(s, plan, dump_canonical(scene_json, -1), c, "occlusion");
  }

  throw Error("generate_negative handles reverse_flow, invalid_position, and occlusion only");
}

inline SampleRecord augment(const SampleRecord& s, Augmentation strategy, std::uint64_t seed,
                            const ConstraintSet& c = {}) {
  switch (strategy) {
    case Augmentation::param_exceed:
    case Augmentation::drop_step:
    case Augmentation::add_step:
      return augment_positive(s, strategy, seed, c);
    default:
      return generate_negative(s, strategy, seed, c);
  }
}

// ---- dataset files ---------------------------------------------------------------

inline std::size_t export_dataset(const std::vector<SampleRecord>& samples,
                                  const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io::IoError("cannot write dataset '" + path + "'");
  for (const auto& s : samples) {
    s.validate();
    out << dump_canonical(json(s), -1) << "\n";
  }
  out.flush();
  if (!out) throw io::IoError("failed while writing dataset '" + path + "'");
  return samples.size();
}

inline std::vector<SampleRecord> import_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io::IoError("cannot read dataset '" + path + "'");
  std::vector<SampleRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    out.push_back(parse_json(line, "dataset line " + std::to_string(n)).get<SampleRecord>());
  }
  return out;
}

}  // namespace gplan::evaluation
