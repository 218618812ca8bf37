#pragma once

// Reviewer-in-the-loop plan supervision: a deterministic rule-based reviewer
// (or a scripted/HTTP language-model backend) critiques generated plans,
// drives corrections one issue at a time, and archives the session outcome.

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <limits>
#include <optional>
#include <regex>
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
#include "gplan/util.hpp"

namespace gplan::supervision {

using gateway::PromptTemplate;
using gateway::Suggestion;
using gateway::VlmPlan;
using sim::ConstraintSet;
using sim::SceneModel;
using sim::Vec3;

struct EmptyHistory : Error {
  using Error::Error;
};

// ---- issues -------------------------------------------------------------------

enum class IssueCategory { ParameterError, LogicalError, ConstraintViolation, ParseError };

inline const char* to_string(IssueCategory c) {
  switch (c) {
    case IssueCategory::ParameterError: return "ParameterError";
    case IssueCategory::LogicalError: return "LogicalError";
    case IssueCategory::ConstraintViolation: return "ConstraintViolation";
    case IssueCategory::ParseError: return "ParseError";
  }
  return "?";
}

inline int severity(IssueCategory c) {
  switch (c) {
    case IssueCategory::ParseError: return 3;
    case IssueCategory::ConstraintViolation: return 2;
    case IssueCategory::LogicalError: return 1;
    case IssueCategory::ParameterError: return 0;
  }
  return -1;
}

inline double suggestion_confidence(IssueCategory c) {
  switch (c) {
    case IssueCategory::ParseError: return 0.95;
    case IssueCategory::ParameterError: return 0.9;
    case IssueCategory::ConstraintViolation: return 0.85;
    case IssueCategory::LogicalError: return 0.8;
  }
  return 0.0;
}

struct Issue {
  IssueCategory category = IssueCategory::LogicalError;
  std::string step_id;  // empty when the issue is plan-wide
  std::string description;
  std::string suggested_fix;
};

inline void to_json(json& j, const Issue& i) {
  j = json{{"category", to_string(i.category)},
           {"step_id", i.step_id},
           {"description", i.description},
           {"suggested_fix", i.suggested_fix}};
}

// ---- plan validation -----------------------------------------------------------

namespace detail {

inline std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline std::string fmt_vec(const Vec3& v) {
  return "[" + fmt_num(v.x) + ", " + fmt_num(v.y) + ", " + fmt_num(v.z) + "]";
}

// Orders step ids numerically when possible ("2" before "10"), else lexically.
inline std::pair<long long, std::string> step_rank(const std::string& id) {
  if (!id.empty() && std::all_of(id.begin(), id.end(),
                                 [](unsigned char c) { return std::isdigit(c); }))
    return {std::stoll(id), std::string()};
  return {std::numeric_limits<long long>::max(), id};
}

}  // namespace detail

// Deterministic reviewer checks, applied per step in plan order against a
// symbolic replay of gripper position and held object. All findings are
// returned; nothing throws.
inline std::vector<Issue> validate_plan(const VlmPlan& plan, const SceneModel& scene,
                                        const ConstraintSet& c = {}) {
  std::vector<Issue> issues;
  Vec3 pos{0.0, 0.0, 0.0};
  std::optional<std::string> held;
  std::string last_step_id;

  for (const auto& s : plan.task_steps) {
    last_step_id = s.step_id;
    sim::ActionCommand cmd;
    try {
      cmd = sim::parse_action(s.action);
    } catch (const sim::ParseError& e) {
      static const std::regex unknown("unknown function '([^']+)'");
      std::smatch m;
      const std::string what = e.what();
      if (std::regex_search(what, m, unknown)) {
        issues.push_back({IssueCategory::ParseError, s.step_id,
                          "The function '" + m[1].str() +
                              "' is not recognized as a valid robotic function.",
                          "Replace '" + m[1].str() +
                              "' with a supported action such as 'move_to' using appropriate "
                              "coordinates."});
      } else {
        issues.push_back({IssueCategory::ParseError, s.step_id,
                          "Action '" + s.action + "' cannot be parsed: " + what,
                          "Rewrite the action using the documented grammar."});
      }
      continue;
    }

    if (const auto* mv = std::get_if<sim::MoveTo>(&cmd)) {
      if (!c.in_workspace(mv->target)) {
        issues.push_back({IssueCategory::ParameterError, s.step_id,
                          "Target " + detail::fmt_vec(mv->target) + " lies outside the workspace " +
                              detail::fmt_vec(c.workspace_min) + " to " +
                              detail::fmt_vec(c.workspace_max) + ".",
                          "Choose a target inside the workspace bounds."});
      } else {
        for (const auto& o : scene.objects) {
          if (!o.is_obstacle()) continue;
          if (held && o.name == *held) continue;
          const double d =
              sim::detail::sampled_segment_distance(pos, mv->target, o.position, c.path_step);
          if (d < c.min_clearance)
            issues.push_back(
                {IssueCategory::ConstraintViolation, s.step_id,
                 "Path to " + detail::fmt_vec(mv->target) + " passes within " +
                     detail::fmt_num(d) + " m of '" + o.name + "'.",
                 "Adjust the path to keep at least " + detail::fmt_num(c.min_clearance) +
                     " m from '" + o.name + "'."});
        }
      }
      pos = mv->target;
      continue;
    }

    if (const auto* g = std::get_if<sim::Grasp>(&cmd)) {
      if (held) {
        issues.push_back({IssueCategory::LogicalError, s.step_id,
                          "Grasp requested while still holding '" + *held + "'.",
                          "Release '" + *held + "' before grasping again."});
        continue;
      }
      const sim::SceneObject* target = nullptr;
      if (g->target) {
        target = scene.find(*g->target);
        if (!target) {
          issues.push_back({IssueCategory::LogicalError, s.step_id,
                            "No object named '" + *g->target + "' exists in the scene.",
                            "Grasp one of the objects listed in the scene description."});
          continue;
        }
      } else {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& o : scene.objects) {
          const double d = (o.position - pos).norm();
          if (d < best) {
            best = d;
            target = &o;
          }
        }
        if (!target) {
          issues.push_back({IssueCategory::LogicalError, s.step_id,
                            "The scene contains no objects to grasp.",
                            "Add a move_to toward a real object before grasping."});
          continue;
        }
      }
      const double dist = (target->position - pos).norm();
      if (dist > c.reach_tolerance) {
        issues.push_back(
            {IssueCategory::LogicalError, s.step_id,
             "Grasp of '" + target->name + "' from " + detail::fmt_vec(pos) + " is " +
                 detail::fmt_num(dist) + " m away (reach tolerance " +
                 detail::fmt_num(c.reach_tolerance) + " m).",
             "Insert a move_to to " + detail::fmt_vec(target->position) + " before grasping."});
      }
      const double limit = c.force_limit(*target);
      if (g->force && *g->force > limit) {
        issues.push_back({IssueCategory::ConstraintViolation, s.step_id,
                          "Grasp force " + detail::fmt_num(*g->force) + " N exceeds the " +
                              detail::fmt_num(limit) + " N limit for '" + target->name + "'.",
                          "Reduce the grasping force on '" + target->name + "' to at most " +
                              detail::fmt_num(limit) + " N."});
      }
      held = target->name;
      continue;
    }

    if (std::holds_alternative<sim::Release>(cmd)) {
      if (!held) {
        issues.push_back({IssueCategory::LogicalError, s.step_id,
                          "Release requested with no object held.",
                          "Grasp an object before releasing."});
      } else {
        held.reset();
      }
      continue;
    }
    // Rotate / Analyse carry no validated state.
  }

  if (held)
    issues.push_back({IssueCategory::LogicalError, last_step_id,
                      "The plan ends still holding '" + *held + "'.",
                      "Release '" + *held + "' at its target position."});
  return issues;
}

// ---- feedback records ------------------------------------------------------------

struct FeedbackRecord {
  int iteration = 1;
  int accept_flag = 0;
  double confidence = 0.0;
  std::vector<Issue> issues;
  std::vector<Suggestion> suggestions;
  std::string prompt_for_vlm;
  int selected_issue = -1;  // index into issues; -1 when none surfaced
};

inline void to_json(json& j, const FeedbackRecord& r) {
  j = json{{"iteration", r.iteration}, {"accept_flag", r.accept_flag},
           {"confidence", r.confidence}, {"issues", r.issues},
           {"suggestions", r.suggestions}, {"prompt_for_vlm", r.prompt_for_vlm},
           {"selected_issue", r.selected_issue}};
}

struct Adjustment {
  int iteration = 0;
  IssueCategory category = IssueCategory::LogicalError;
  std::string step_id;
  std::string description;
  std::string suggestion;
};

class FeedbackHistory {
 public:
  const std::vector<FeedbackRecord>& records() const { return records_; }
  const std::vector<Adjustment>& adjustments() const { return adjustments_; }

  void append(FeedbackRecord r) {
    if (!records_.empty() && r.iteration <= records_.back().iteration)
      throw Error("history iterations must strictly increase");
    if (r.accept_flag == 1 && !r.issues.empty())
      throw Error("accepted records cannot carry issues");
    records_.push_back(std::move(r));
  }

  void log_adjustment(int iteration, const Issue& issue, const std::string& suggestion) {
    adjustments_.push_back({iteration, issue.category, issue.step_id, issue.description,
                            suggestion});
  }

  bool adjusted(const Issue& issue) const {
    for (const auto& a : adjustments_)
      if (a.category == issue.category && a.step_id == issue.step_id &&
          a.description == issue.description)
        return true;
    return false;
  }

  bool suggestion_seen(const std::string& text) const {
    for (const auto& r : records_)
      for (const auto& s : r.suggestions)
        if (s.text == text) return true;
    for (const auto& a : adjustments_)
      if (a.suggestion == text) return true;
    return false;
  }

  std::string adjustments_text() const {
    if (adjustments_.empty()) return "(none)";
    std::string out;
    for (const auto& a : adjustments_) {
      if (!out.empty()) out += "\n";
      out += "- iteration " + std::to_string(a.iteration) + ": " + a.suggestion;
    }
    return out;
  }

  int next_iteration() const { return records_.empty() ? 1 : records_.back().iteration + 1; }

 private:
  std::vector<FeedbackRecord> records_;
  std::vector<Adjustment> adjustments_;
};

inline void to_json(json& j, const FeedbackHistory& h) {
  json adj = json::array();
  for (const auto& a : h.adjustments())
    adj.push_back(json{{"iteration", a.iteration},
                       {"category", to_string(a.category)},
                       {"step_id", a.step_id},
                       {"description", a.description},
                       {"suggestion", a.suggestion}});
  j = json{{"records", h.records()}, {"adjustments", adj}};
}

// ---- review -----------------------------------------------------------------------

struct LoopParams {
  int n_max = 5;
  double tau = 0.8;

  void validate() const {
    if (n_max < 1) throw Error("n_max must be positive");
    if (tau < 0.0 || tau > 1.0) throw Error("tau must lie in [0, 1]");
  }
};

// One issue per correction round: most severe category first, then earliest
// step, skipping issues already adjusted; if everything is a repeat, the
// earliest issue is surfaced again.
inline Issue single_dimension_adjust(const std::vector<Issue>& issues,
                                     const FeedbackHistory& history) {
  if (issues.empty()) throw Error("no issues to adjust");
  auto better = [](const Issue& a, const Issue& b) {
    if (severity(a.category) != severity(b.category))
      return severity(a.category) > severity(b.category);
    return detail::step_rank(a.step_id) < detail::step_rank(b.step_id);
  };
  const Issue* best_fresh = nullptr;
  const Issue* best_any = nullptr;
  for (const auto& i : issues) {
    if (!best_any || better(i, *best_any)) best_any = &i;
    if (history.adjusted(i)) continue;
    if (!best_fresh || better(i, *best_fresh)) best_fresh = &i;
  }
  return best_fresh ? *best_fresh : *best_any;
}

namespace detail {

inline std::string suggestion_id(std::size_t index) {
  if (index < 26) return std::string(1, static_cast<char>('A' + index));
  return "S" + std::to_string(index + 1);
}

}  // namespace detail

inline FeedbackRecord rule_based_review(const std::string& task,
                                        const PromptTemplate& correction,
                                        const FeedbackHistory& history, const VlmPlan& plan,
                                        const SceneModel& scene, const ConstraintSet& c = {},
                                        const LoopParams& p = {}) {
  (void)task;
  p.validate();
  FeedbackRecord rec;
  rec.iteration = history.next_iteration();
  rec.issues = validate_plan(plan, scene, c);

  if (rec.issues.empty()) {
    rec.accept_flag = 1;
    // Self-reported concerns in the plan downgrade confidence without blocking.
    const double warnings = static_cast<double>(plan.issues.size());
    rec.confidence = std::max(0.5, 1.0 - 0.1 * warnings);
    return rec;
  }

  rec.accept_flag = 0;
  rec.confidence = std::max(0.0, 1.0 - 0.2 * static_cast<double>(rec.issues.size()));
  for (const auto& issue : rec.issues) {
    if (history.suggestion_seen(issue.suggested_fix)) continue;
    rec.suggestions.push_back({detail::suggestion_id(rec.suggestions.size()),
                               issue.suggested_fix, suggestion_confidence(issue.category)});
  }

  const Issue chosen = single_dimension_adjust(rec.issues, history);
  for (std::size_t i = 0; i < rec.issues.size(); ++i) {
    const auto& it = rec.issues[i];
    if (it.category == chosen.category && it.step_id == chosen.step_id &&
        it.description == chosen.description) {
      rec.selected_issue = static_cast<int>(i);
      break;
    }
  }
  rec.prompt_for_vlm = gateway::render_template(
      correction, {{"ISSUE", chosen.description},
                   {"SUGGESTION", chosen.suggested_fix},
                   {"HISTORY", history.adjustments_text()}});
  return rec;
}

// Correction prompt for the lowest-confidence suggestion issued so far
// (ties resolve to the earliest).
inline std::string fallback(const FeedbackHistory& history, const PromptTemplate& correction) {
  if (history.records().empty()) throw EmptyHistory("no feedback recorded yet");
  const Suggestion* weakest = nullptr;
  for (const auto& r : history.records())
    for (const auto& s : r.suggestions)
      if (!weakest || s.confidence < weakest->confidence) weakest = &s;
  if (!weakest) throw EmptyHistory("no suggestions recorded yet");
  return gateway::render_template(
      correction,
      {{"ISSUE", "The least certain adjustment so far remains unresolved: '" + weakest->text +
                     "' (confidence " + detail::fmt_num(weakest->confidence) + ")."},
       {"SUGGESTION", weakest->text},
       {"HISTORY", history.adjustments_text()}});
}

// ---- session archive -----------------------------------------------------------

struct SessionArchive {
  std::string scenario_info;
  std::string task_info;
  std::string control_code;
  std::string created_at;  // ISO-8601 UTC
  std::string outcome;     // "success" | "human_intervention"

  void validate() const {
    if (outcome != "success" && outcome != "human_intervention")
      throw Error("archive outcome must be success or human_intervention");
    if (outcome == "success" && control_code.empty())
      throw Error("successful sessions must carry control code");
  }
};

inline void to_json(json& j, const SessionArchive& a) {
  j = json{{"scenario_info", a.scenario_info},
           {"task_info", a.task_info},
           {"control_code", a.control_code},
           {"created_at", a.created_at},
           {"outcome", a.outcome}};
}

inline void from_json(const json& j, SessionArchive& a) {
  a.scenario_info = j.at("scenario_info").get<std::string>();
  a.task_info = j.at("task_info").get<std::string>();
  a.control_code = j.at("control_code").get<std::string>();
  a.created_at = j.at("created_at").get<std::string>();
  a.outcome = j.at("outcome").get<std::string>();
}

namespace detail {

struct LockedFile {
  int fd = -1;
  explicit LockedFile(const std::string& path) {
    fd = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd < 0) throw io::IoError("cannot open archive '" + path + "'");
    if (::flock(fd, LOCK_EX) != 0) {
      ::close(fd);
      fd = -1;
      throw io::IoError("cannot lock archive '" + path + "'");
    }
  }
  ~LockedFile() {
    if (fd >= 0) {
      ::flock(fd, LOCK_UN);
      ::close(fd);
    }
  }
};

inline std::string utc_now_iso8601() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

// Appends one record under an exclusive lock; the returned id counts existing
// records, so ids increase monotonically across processes.
inline std::size_t archive_write(const SessionArchive& a, const std::string& path) {
  a.validate();
  detail::LockedFile lock(path);

  std::string existing;
  char buf[4096];
  ssize_t got;
  while ((got = ::read(lock.fd, buf, sizeof buf)) > 0) existing.append(buf, got);
  if (got < 0) throw io::IoError("cannot read archive '" + path + "'");
  const std::size_t id =
      static_cast<std::size_t>(std::count(existing.begin(), existing.end(), '\n'));

  json j = a;
  j["id"] = id;
  const std::string line = dump_canonical(j, -1) + "\n";
  if (::lseek(lock.fd, 0, SEEK_END) < 0 ||
      ::write(lock.fd, line.data(), line.size()) != static_cast<ssize_t>(line.size()))
    throw io::IoError("cannot append to archive '" + path + "'");
  return id;
}

inline std::vector<json> read_archive(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    out.push_back(parse_json(line, "archive record"));
  }
  return out;
}

// ---- supervised loop -------------------------------------------------------------

struct SupervisionTemplates {
  PromptTemplate vlm;         // initial plan request
  PromptTemplate correction;  // one-issue correction prompt
  PromptTemplate slm;         // review request (backend reviewers only)
};

inline SupervisionTemplates default_templates() {
  const std::string dir = std::string(GPLAN_ASSETS_DIR) + "/templates/";
  return {{"direct_scene", read_text_file(dir + "direct_scene_prompt.txt")},
          {"correction", read_text_file(dir + "correction_prompt.txt")},
          {"slm", read_text_file(dir + "slm_prompt.txt")}};
}

struct RuleReviewer {};  // deterministic in-process reviewer
using SlmSource = std::variant<RuleReviewer, gateway::ModelBackendConfig>;

struct SupervisionResult {
  SessionArchive archive;
  FeedbackHistory history;
  VlmPlan final_plan;
};

struct SupervisionAborted : Error {
  FeedbackHistory history;
  SupervisionAborted(const std::string& why, FeedbackHistory h)
      : Error("supervision aborted: " + why), history(std::move(h)) {}
};

namespace detail {

inline std::string scene_markers(const SceneModel& scene) {
  if (scene.objects.empty()) return "(none)";
  std::string out;
  for (const auto& o : scene.objects) {
    if (!out.empty()) out += "\n";
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s: [%.3f, %.3f, %.3f]", o.name.c_str(), o.position.x,
                  o.position.y, o.position.z);
    out += buf;
  }
  return out;
}

inline std::string chat_text(const gateway::ModelBackendConfig& cfg, const std::string& prompt) {
  return gateway::send_chat(cfg, {gateway::ChatMessage{gateway::Role::user, prompt, {}}});
}

inline std::string plan_code(const VlmPlan& plan) {
  std::string out;
  for (const auto& s : plan.task_steps) {
    if (!out.empty()) out += "\n";
    out += s.action;
  }
  return out;
}

}  // namespace detail

// Runs the review/correct loop: at most n_max reviews, then exactly one
// fallback round, so the reviewer is consulted at most n_max + 1 times.
inline SupervisionResult run_supervision(
    const std::string& task, const SceneModel& scene, const gateway::ModelBackendConfig& vlm,
    const SlmSource& slm, const SupervisionTemplates& templates = default_templates(),
    const ConstraintSet& c = {}, const LoopParams& p = {},
    const std::optional<std::string>& fixed_timestamp = std::nullopt) {
  p.validate();
  SupervisionResult result;
  FeedbackHistory& history = result.history;
  const std::string stamp =
      fixed_timestamp ? *fixed_timestamp : detail::utc_now_iso8601();

  auto review_once = [&](const VlmPlan& plan) -> FeedbackRecord {
    if (std::holds_alternative<RuleReviewer>(slm))
      return rule_based_review(task, templates.correction, history, plan, scene, c, p);
    const auto& cfg = std::get<gateway::ModelBackendConfig>(slm);
    const std::string prompt = gateway::render_template(
        templates.slm, {{"T", task},
                        {"R", gateway::serialize_plan(plan)},
                        {"H", dump_canonical(json(history), -1)}});
    const gateway::SlmReview review = gateway::parse_slm_review(detail::chat_text(cfg, prompt));
    FeedbackRecord rec;
    rec.iteration = history.next_iteration();
    rec.accept_flag = review.accept_flag;
    rec.confidence = review.confidence;
    rec.suggestions = review.suggestions;
    rec.prompt_for_vlm = review.prompt_for_vlm;
    return rec;
  };

  auto accept = [&](const VlmPlan& plan) {
    result.final_plan = plan;
    result.archive.scenario_info =
        detail::chat_text(vlm, "Describe the scenario in detail, object by object.");
    result.archive.task_info = task;
    result.archive.control_code = detail::plan_code(plan);
    result.archive.created_at = stamp;
    result.archive.outcome = "success";
    return result;
  };

  try {
    const std::string initial_prompt = gateway::render_template(
        templates.vlm, {{"T", task},
                        {"MARKERS", detail::scene_markers(scene)},
                        {"FEEDBACK", "(none)"},
                        {"HISTORY", "(none)"}});
    VlmPlan plan = gateway::parse_vlm_plan(detail::chat_text(vlm, initial_prompt));

    for (int n = 1; n <= p.n_max; ++n) {
      FeedbackRecord rec = review_once(plan);
      rec.iteration = n;
      history.append(rec);
      const FeedbackRecord& last = history.records().back();

      if (last.accept_flag == 1 && last.confidence > p.tau) return accept(plan);
      if (n == p.n_max) break;

      std::string correction = last.prompt_for_vlm;
      if (last.selected_issue >= 0) {
        const Issue& chosen = last.issues[static_cast<std::size_t>(last.selected_issue)];
        history.log_adjustment(n, chosen, chosen.suggested_fix);
      } else if (!last.suggestions.empty()) {
        history.log_adjustment(n, Issue{IssueCategory::LogicalError, "", "reviewer feedback", ""},
                               last.suggestions.front().text);
      }
      if (correction.empty())
        correction = gateway::render_template(
            templates.correction, {{"ISSUE", "the plan was not accepted by the reviewer"},
                                   {"SUGGESTION", "revise the plan to satisfy all constraints"},
                                   {"HISTORY", history.adjustments_text()}});
      plan = gateway::parse_vlm_plan(detail::chat_text(vlm, correction));
    }

    // One fallback round: retry the least-confident adjustment, then stop.
    std::string fb;
    try {
      fb = fallback(history, templates.correction);
    } catch (const EmptyHistory&) {
      fb = gateway::render_template(
          templates.correction, {{"ISSUE", "the plan was not accepted by the reviewer"},
                                 {"SUGGESTION", "revise the plan to satisfy all constraints"},
                                 {"HISTORY", history.adjustments_text()}});
    }
    plan = gateway::parse_vlm_plan(detail::chat_text(vlm, fb));
    FeedbackRecord rec = review_once(plan);
    rec.iteration = p.n_max + 1;
    history.append(rec);
    if (rec.accept_flag == 1 && rec.confidence > p.tau) return accept(plan);

    result.final_plan = plan;
    result.archive.scenario_info = dump_canonical(json(scene), -1);
    result.archive.task_info = task;
    result.archive.control_code = "";
    result.archive.created_at = stamp;
    result.archive.outcome = "human_intervention";
    return result;
  } catch (const gateway::BackendError& e) {
    throw SupervisionAborted(e.what(), history);
  }
}

}  // namespace gplan::supervision
