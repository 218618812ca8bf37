#pragma once

// Desk-scale kinematic simulator. Parses the robot action DSL, steps a scene
// of named objects under a safety constraint set, and judges task goals.
// No dynamics: released objects rest where they are dropped.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "gplan/errors.hpp"
#include "gplan/gateway.hpp"
#include "gplan/geometry.hpp"
#include "gplan/jsonio.hpp"
#include "gplan/util.hpp"

namespace gplan::sim {

using geometry::Vec3;

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t col)
      : Error(what + " (column " + std::to_string(col) + ")"), column(col) {}
  std::size_t column;  // 1-based offset into the action string
};

class MissingObject : public Error {
  using Error::Error;
};

// ---- scene ------------------------------------------------------------------

struct SceneObject {
  std::string name;
  Vec3 position;  // meters, robot-base frame
  std::map<std::string, std::string> properties;

  // Anything typed (e.g. "type": "box") is treated as an obstacle for
  // clearance checks; plain manipulands are not.
  bool is_obstacle() const { return properties.count("type") > 0; }
  bool is_fragile() const {
    auto it = properties.find("fragility");
    return it != properties.end() && to_lower(it->second) == "high";
  }
};

inline void to_json(json& j, const SceneObject& o) {
  j = json{{"name", o.name}, {"position", o.position}};
  if (!o.properties.empty()) j["properties"] = o.properties;
}

inline void from_json(const json& j, SceneObject& o) {
  o.name = j.at("name").get<std::string>();
  o.position = j.at("position").get<Vec3>();
  o.properties.clear();
  if (j.contains("properties"))
    o.properties = j.at("properties").get<std::map<std::string, std::string>>();
}

struct SceneModel {
  std::vector<SceneObject> objects;

  const SceneObject* find(const std::string& name) const {
    for (const auto& o : objects)
      if (o.name == name) return &o;
    return nullptr;
  }
  SceneObject* find(const std::string& name) {
    for (auto& o : objects)
      if (o.name == name) return &o;
    return nullptr;
  }

  void validate() const {
    for (std::size_t i = 0; i < objects.size(); ++i) {
      const auto& o = objects[i];
      if (!std::isfinite(o.position.x) || !std::isfinite(o.position.y) ||
          !std::isfinite(o.position.z))
        throw Error("scene object '" + o.name + "' has a non-finite position");
      for (std::size_t k = i + 1; k < objects.size(); ++k)
        if (objects[k].name == o.name)
          throw Error("duplicate scene object name '" + o.name + "'");
    }
  }
};

inline void to_json(json& j, const SceneModel& s) { j = json{{"objects", s.objects}}; }

inline void from_json(const json& j, SceneModel& s) {
  const json& root = j.contains("scene_description") ? j.at("scene_description") : j;
  s.objects = root.at("objects").get<std::vector<SceneObject>>();
  s.validate();
}

inline SceneModel scene_from_plan(const gateway::VlmPlan& plan) {
  SceneModel s;
  for (const auto& o : plan.objects) s.objects.push_back({o.name, o.position, o.properties});
  s.validate();
  return s;
}

inline SceneModel read_scene_file(const std::string& path) {
  return read_json_file(path).get<SceneModel>();
}

inline void write_scene_file(const std::string& path, const SceneModel& s) {
  write_json_file(path, json(s));
}

// ---- robot ------------------------------------------------------------------

struct RobotState {
  Vec3 gripper{0.0, 0.0, 0.0};
  std::optional<std::string> held;
  double applied_force = 0.0;  // newtons
  double orientation = 0.0;    // radians about the vertical axis
};

inline void to_json(json& j, const RobotState& st) {
  j = json{{"gripper", st.gripper},
           {"held", st.held ? json(*st.held) : json(nullptr)},
           {"applied_force", st.applied_force},
           {"orientation", st.orientation}};
}

// ---- constraints ------------------------------------------------------------

struct ConstraintSet {
  Vec3 workspace_min{0.0, 0.0, 0.0};
  Vec3 workspace_max{1.0, 1.0, 1.0};
  double max_grip_force = 10.0;    // newtons
  double fragile_max_force = 5.0;  // newtons, fragile objects
  double min_clearance = 0.1;      // meters to any obstacle while moving
  double reach_tolerance = 0.05;   // meters, grasp reach
  double path_step = 0.01;         // meters, straight-line sampling pitch

  bool in_workspace(const Vec3& p) const {
    return p.x >= workspace_min.x && p.x <= workspace_max.x && p.y >= workspace_min.y &&
           p.y <= workspace_max.y && p.z >= workspace_min.z && p.z <= workspace_max.z;
  }
  double force_limit(const SceneObject& o) const {
    return o.is_fragile() ? std::min(fragile_max_force, max_grip_force) : max_grip_force;
  }
};

inline void to_json(json& j, const ConstraintSet& c) {
  j = json{{"workspace_min", c.workspace_min},
           {"workspace_max", c.workspace_max},
           {"max_grip_force", c.max_grip_force},
           {"fragile_max_force", c.fragile_max_force},
           {"min_clearance", c.min_clearance},
           {"reach_tolerance", c.reach_tolerance},
           {"path_step", c.path_step}};
}

inline void from_json(const json& j, ConstraintSet& c) {
  if (j.contains("workspace_min")) c.workspace_min = j.at("workspace_min").get<Vec3>();
  if (j.contains("workspace_max")) c.workspace_max = j.at("workspace_max").get<Vec3>();
  if (j.contains("max_grip_force")) c.max_grip_force = j.at("max_grip_force").get<double>();
  if (j.contains("fragile_max_force"))
    c.fragile_max_force = j.at("fragile_max_force").get<double>();
  if (j.contains("min_clearance")) c.min_clearance = j.at("min_clearance").get<double>();
  if (j.contains("reach_tolerance")) c.reach_tolerance = j.at("reach_tolerance").get<double>();
  if (j.contains("path_step")) c.path_step = j.at("path_step").get<double>();
}

// ---- actions ----------------------------------------------------------------

struct MoveTo {
  Vec3 target;
};
struct Grasp {
  std::optional<std::string> target;  // grasp('name')
  std::optional<double> force;        // grasp(f), newtons
};
struct Release {};
struct Rotate {
  double angle_deg = 0.0;
};
struct Analyse {};  // perception no-op

using ActionCommand = std::variant<MoveTo, Grasp, Release, Rotate, Analyse>;

namespace detail {

struct Scanner {
  const std::string& s;
  std::size_t i = 0;

  [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
    throw ParseError(msg, at + 1);
  }
  void skip_ws() {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  }
  bool eof() const { return i >= s.size(); }
  char peek() const { return eof() ? '\0' : s[i]; }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'", i);
    ++i;
  }
  std::string ident() {
    std::size_t start = i;
    auto head = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
    auto tail = [&](char c) { return head(c) || std::isdigit(static_cast<unsigned char>(c)); };
    if (eof() || !head(s[i])) fail("expected action name", i);
    while (i < s.size() && tail(s[i])) ++i;
    return s.substr(start, i - start);
  }
  double number() {
    skip_ws();
    const char* begin = s.c_str() + i;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || !std::isfinite(v)) fail("expected a decimal number", i);
    i += static_cast<std::size_t>(end - begin);
    return v;
  }
  std::string quoted() {
    char q = peek();
    std::size_t open = i;
    ++i;
    std::size_t start = i;
    while (!eof() && s[i] != q) ++i;
    if (eof()) fail("unterminated object name", open);
    std::string out = s.substr(start, i - start);
    ++i;
    return out;
  }
};

}  // namespace detail

// Grammar: move_to([f,f,f]) | grasp('name') | grasp(f) | release() | rotate(f)
// | analyse(). moveTo with bare arguments is accepted as a spelling of
// move_to; any other name is rejected.
inline ActionCommand parse_action(const std::string& text) {
  detail::Scanner sc{text};
  sc.skip_ws();
  const std::size_t name_at = sc.i;
  const std::string name = sc.ident();
  sc.skip_ws();
  sc.expect('(');
  ActionCommand cmd;
  if (name == "move_to" || name == "moveTo") {
    sc.skip_ws();
    const bool bracketed = sc.peek() == '[';
    if (bracketed) ++sc.i;
    Vec3 p;
    p.x = sc.number();
    sc.skip_ws();
    sc.expect(',');
    p.y = sc.number();
    sc.skip_ws();
    sc.expect(',');
    p.z = sc.number();
    sc.skip_ws();
    if (bracketed) sc.expect(']');
    cmd = MoveTo{p};
  } else if (name == "grasp") {
    sc.skip_ws();
    if (sc.peek() == '\'' || sc.peek() == '"')
      cmd = Grasp{sc.quoted(), std::nullopt};
    else
      cmd = Grasp{std::nullopt, sc.number()};
  } else if (name == "release") {
    cmd = Release{};
  } else if (name == "rotate") {
    cmd = Rotate{sc.number()};
  } else if (name == "analyse") {
    cmd = Analyse{};
  } else {
    sc.fail("unknown function '" + name + "'", name_at);
  }
  sc.skip_ws();
  sc.expect(')');
  sc.skip_ws();
  if (!sc.eof()) sc.fail("trailing characters after action", sc.i);
  return cmd;
}

// ---- stepping ---------------------------------------------------------------

enum class FailReason { OutOfWorkspace, Collision, NothingToGrasp, OverForce, NothingHeld };

inline const char* to_string(FailReason r) {
  switch (r) {
    case FailReason::OutOfWorkspace: return "OutOfWorkspace";
    case FailReason::Collision: return "Collision";
    case FailReason::NothingToGrasp: return "NothingToGrasp";
    case FailReason::OverForce: return "OverForce";
    case FailReason::NothingHeld: return "NothingHeld";
  }
  return "?";
}

struct StepFailure {
  FailReason reason;
  std::string message;
};

struct StepOk {
  RobotState state;
  SceneModel scene;
};

using StepResult = std::variant<StepOk, StepFailure>;

namespace detail {

// Minimum distance from the segment a-b to point p, sampled every `pitch`
// meters, endpoints included.
inline double sampled_segment_distance(const Vec3& a, const Vec3& b, const Vec3& p,
                                       double pitch) {
  const double len = (b - a).norm();
  const std::size_t n =
      len <= 0.0 ? 1 : static_cast<std::size_t>(std::ceil(len / std::max(pitch, 1e-9)));
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(n);
    const Vec3 q = a + (b - a) * t;
    best = std::min(best, (q - p).norm());
  }
  return best;
}

}  // namespace detail

inline StepResult step(const RobotState& state, const SceneModel& scene,
                       const ActionCommand& cmd, const ConstraintSet& c) {
  RobotState st = state;
  SceneModel sc = scene;

  if (const auto* mv = std::get_if<MoveTo>(&cmd)) {
    if (!c.in_workspace(mv->target)) {
      std::ostringstream os;
      os << "target [" << mv->target.x << ", " << mv->target.y << ", " << mv->target.z
         << "] is outside the workspace";
      return StepFailure{FailReason::OutOfWorkspace, os.str()};
    }
    for (const auto& o : sc.objects) {
      if (!o.is_obstacle()) continue;
      if (st.held && o.name == *st.held) continue;
      const double d =
          detail::sampled_segment_distance(st.gripper, mv->target, o.position, c.path_step);
      if (d < c.min_clearance) {
        std::ostringstream os;
        os << "path passes " << d << " m from '" << o.name << "' (minimum clearance "
           << c.min_clearance << " m)";
        return StepFailure{FailReason::Collision, os.str()};
      }
    }
    st.gripper = mv->target;
    if (st.held) sc.find(*st.held)->position = st.gripper;
    return StepOk{st, sc};
  }

  if (const auto* g = std::get_if<Grasp>(&cmd)) {
    if (st.held)
      return StepFailure{FailReason::NothingToGrasp, "gripper already holds '" + *st.held + "'"};
    const SceneObject* target = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : sc.objects) {
      if (g->target && o.name != *g->target) continue;
      const double d = (o.position - st.gripper).norm();
      if (d < best) {
        best = d;
        target = &o;
      }
    }
    if (!target)
      return StepFailure{FailReason::NothingToGrasp,
                         g->target ? "no object named '" + *g->target + "'"
                                   : "scene has no objects"};
    if (best > c.reach_tolerance) {
      std::ostringstream os;
      os << "'" << target->name << "' is " << best << " m away (reach tolerance "
         << c.reach_tolerance << " m)";
      return StepFailure{FailReason::NothingToGrasp, os.str()};
    }
    const double limit = c.force_limit(*target);
    const double force = g->force ? *g->force : limit;  // named grasp: nominal safe force
    if (force > limit) {
      std::ostringstream os;
      os << "force " << force << " N exceeds the " << limit << " N limit for '" << target->name
         << "'";
      return StepFailure{FailReason::OverForce, os.str()};
    }
    st.held = target->name;
    st.applied_force = force;
    sc.find(*st.held)->position = st.gripper;
    return StepOk{st, sc};
  }

  if (std::get_if<Release>(&cmd)) {
    if (!st.held) return StepFailure{FailReason::NothingHeld, "gripper is empty"};
    st.held.reset();
    st.applied_force = 0.0;
    return StepOk{st, sc};  // object rests where it was released
  }

  if (const auto* r = std::get_if<Rotate>(&cmd)) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double w = std::fmod(st.orientation + r->angle_deg * std::numbers::pi / 180.0, two_pi);
    if (w < 0.0) w += two_pi;
    st.orientation = w;
    return StepOk{st, sc};
  }

  return StepOk{st, sc};  // Analyse: perception no-op
}

// ---- goals ------------------------------------------------------------------

struct GoalPredicate {
  std::string name;
  std::function<bool(const SceneModel&, const RobotState&)> holds;
};

struct GoalParams {
  double delta = 0.05;               // meters, goal tolerance
  Vec3 hook_offset{0.0, 0.0, 0.05};  // hang pose relative to the stand
  Vec3 target{0.7, 0.3, 0.2};        // task 2 placement (hand-off point)
  Vec3 stand_target{0.5, 0.5, 0.1};  // task 3 stand relocation target
  int mapped_task = 2;               // task 4 resolves to this concrete task
};

namespace detail {

// Exact name match, else a unique object whose name contains the token
// (scenes variously spell the stand "stand" or "headphone_stand").
inline const SceneObject& require_object(const SceneModel& s, const std::string& name) {
  if (const SceneObject* o = s.find(name)) return *o;
  const SceneObject* hit = nullptr;
  for (const auto& o : s.objects) {
    if (o.name.find(name) == std::string::npos) continue;
    if (hit) throw MissingObject("object name '" + name + "' is ambiguous");
    hit = &o;
  }
  if (!hit) throw MissingObject("scene has no object '" + name + "'");
  return *hit;
}

}  // namespace detail

inline GoalPredicate builtin_goals(int task_id, const GoalParams& gp = {}) {
  switch (task_id) {
    case 1:
      return {"task1:hang-headphone-on-stand",
              [gp](const SceneModel& s, const RobotState&) {
                const auto& hp = detail::require_object(s, "headphone");
                const auto& st = detail::require_object(s, "stand");
                return (hp.position - (st.position + gp.hook_offset)).norm() <= gp.delta;
              }};
    case 2:
      return {"task2:place-headphone-at-target",
              [gp](const SceneModel& s, const RobotState&) {
                const auto& hp = detail::require_object(s, "headphone");
                return (hp.position - gp.target).norm() <= gp.delta;
              }};
    case 3:
      return {"task3:move-stand-then-hang",
              [gp](const SceneModel& s, const RobotState&) {
                const auto& hp = detail::require_object(s, "headphone");
                const auto& st = detail::require_object(s, "stand");
                return (st.position - gp.stand_target).norm() <= gp.delta &&
                       (hp.position - (st.position + gp.hook_offset)).norm() <= gp.delta;
              }};
    case 4: {
      if (gp.mapped_task < 1 || gp.mapped_task > 3)
        throw Error("task 4 must map to a concrete task in {1,2,3}");
      GoalPredicate base = builtin_goals(gp.mapped_task, gp);
      return {"task4:mapped(" + base.name + ")", base.holds};
    }
    default:
      throw Error("unknown task id " + std::to_string(task_id));
  }
}

// ---- plan execution ---------------------------------------------------------

struct TraceEntry {
  std::size_t n = 0;  // 1-based step index
  std::string command;
  RobotState state_after;
  json result;  // "ok" or {"error","message"}
};

inline void to_json(json& j, const TraceEntry& e) {
  j = json{{"n", e.n},
           {"command", e.command},
           {"state_after", e.state_after},
           {"result", e.result}};
}

struct Outcome {
  bool success = false;
  std::optional<std::string> failed_step;  // step_id of the first failing step
  std::string failure;                     // empty on success
  std::vector<TraceEntry> trace;
  SceneModel final_scene;
};

inline void to_json(json& j, const Outcome& out) {
  j = json{{"success", out.success},
           {"failed_step", out.failed_step ? json(*out.failed_step) : json(nullptr)},
           {"failure", out.failure},
           {"trace", out.trace},
           {"final_scene", out.final_scene}};
}

inline void write_trace_file(const std::string& path, const std::vector<TraceEntry>& trace) {
  std::string text;
  for (const auto& e : trace) text += dump_canonical(json(e), -1) + "\n";
  write_text_file(path, text);
}

// Executes the plan's steps in order against a copy of the scene. The whole
// plan is parsed up front: a plan with an unparseable step never moves the
// robot. Execution aborts at the first failing step; success additionally
// requires the goal predicate on the final state.
inline Outcome run_plan(const SceneModel& scene0, const gateway::VlmPlan& plan,
                        const GoalPredicate& goal, const ConstraintSet& c = {}) {
  Outcome out;
  std::vector<ActionCommand> cmds;
  cmds.reserve(plan.task_steps.size());
  for (const auto& s : plan.task_steps) {
    try {
      cmds.push_back(parse_action(s.action));
    } catch (const ParseError& e) {
      out.failed_step = s.step_id;
      out.failure = std::string("parse: ") + e.what();
      out.final_scene = scene0;
      return out;
    }
  }

  RobotState st;
  SceneModel sc = scene0;
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    TraceEntry entry;
    entry.n = i + 1;
    entry.command = plan.task_steps[i].action;
    StepResult r = step(st, sc, cmds[i], c);
    if (const auto* fail = std::get_if<StepFailure>(&r)) {
      entry.state_after = st;
      entry.result = json{{"error", to_string(fail->reason)}, {"message", fail->message}};
      out.trace.push_back(entry);
      out.failed_step = plan.task_steps[i].step_id;
      out.failure = std::string(to_string(fail->reason)) + ": " + fail->message;
      out.final_scene = sc;
      return out;
    }
    const auto& ok = std::get<StepOk>(r);
    st = ok.state;
    sc = ok.scene;
    entry.state_after = st;
    entry.result = "ok";
    out.trace.push_back(entry);
  }

  if (goal.holds(sc, st)) {
    out.success = true;
  } else {
    out.failure = "goal '" + goal.name + "' not satisfied";
  }
  out.final_scene = sc;
  return out;
}

}  // namespace gplan::sim
