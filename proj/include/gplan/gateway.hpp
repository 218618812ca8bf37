#pragma once

#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <httplib.h>

// glibc's resolv.h (dragged in by httplib) defines _res as a macro, which
// breaks any later header using it as an identifier (Eigen does).
#ifdef _res
#undef _res
#endif

#include "gplan/geometry.hpp"
#include "gplan/jsonio.hpp"
#include "gplan/util.hpp"

namespace gplan::gateway {

using geometry::Pixel;
using geometry::Vec3;

struct BackendError : Error {
  using Error::Error;
};
struct ScriptExhausted : BackendError {
  using BackendError::BackendError;
};
struct ParseError : Error {
  using Error::Error;
};
struct SchemaError : Error {
  explicit SchemaError(const std::string& field, const std::string& why)
      : Error("schema violation at '" + field + "': " + why), field(field) {}
  std::string field;
};
struct MissingPlaceholder : Error {
  explicit MissingPlaceholder(const std::string& key)
      : Error("unbound template placeholder {" + key + "}"), key(key) {}
  std::string key;
};

// ---------------------------------------------------------------------------
// Prompt templates

// Placeholders look like {T}, {MARKERS}: a brace pair wrapping an uppercase
// identifier. Braces in embedded JSON snippets never match this shape.
inline const std::regex& placeholder_regex() {
  static const std::regex re(R"(\{([A-Z][A-Z0-9_]*)\})");
  return re;
}

inline const std::set<std::string>& known_placeholders() {
  static const std::set<std::string> keys = {"T",        "PT",     "H",          "R",
                                             "MARKERS",  "FEEDBACK", "ISSUE",    "SUGGESTION",
                                             "HISTORY"};
  return keys;
}

struct PromptTemplate {
  std::string name;
  std::string body;

  std::vector<std::string> placeholders() const {
    std::vector<std::string> out;
    for (std::sregex_iterator it(body.begin(), body.end(), placeholder_regex()), end;
         it != end; ++it)
      out.push_back((*it)[1].str());
    return out;
  }

  void validate() const {
    for (const std::string& p : placeholders())
      if (!known_placeholders().count(p))
        throw Error("template '" + name + "' uses unknown placeholder {" + p + "}");
  }

  static PromptTemplate load(const std::filesystem::path& path) {
    PromptTemplate t{path.stem().string(), read_text_file(path)};
    t.validate();
    return t;
  }
};

// Single-pass literal substitution; every placeholder in the body must be
// bound. Unused bindings are ignored.
inline std::string render_template(const PromptTemplate& t,
                                   const std::map<std::string, std::string>& bindings) {
  std::string out;
  out.reserve(t.body.size());
  std::size_t last = 0;
  for (std::sregex_iterator it(t.body.begin(), t.body.end(), placeholder_regex()), end;
       it != end; ++it) {
    const auto& m = *it;
    out.append(t.body, last, static_cast<std::size_t>(m.position()) - last);
    const std::string key = m[1].str();
    const auto b = bindings.find(key);
    if (b == bindings.end()) throw MissingPlaceholder(key);
    out += b->second;
    last = static_cast<std::size_t>(m.position() + m.length());
  }
  out.append(t.body, last, std::string::npos);
  return out;
}

// ---------------------------------------------------------------------------
// Chat backends

enum class Role { system, user, assistant };

inline std::string role_name(Role r) {
  switch (r) {
    case Role::system:
      return "system";
    case Role::user:
      return "user";
    case Role::assistant:
      return "assistant";
  }
  throw Error("invalid role");
}

struct ImageAttachment {
  std::string media_type = "image/x-portable-pixmap";
  std::string base64_payload;
};

struct ChatMessage {
  Role role = Role::user;
  std::string content;
  std::optional<ImageAttachment> image;
};

struct ModelBackendConfig {
  enum class Kind { http, scripted };
  Kind kind = Kind::scripted;
  std::string base_url;          // http only
  std::string model;             // http only
  double temperature = 0.0;      // http only
  double timeout_seconds = 30.0; // http only
  std::string token_env;         // env var holding the bearer token, optional
  std::filesystem::path script;  // scripted only

  void validate() const {
    if (kind == Kind::http && base_url.empty())
      throw Error("http backend requires base_url");
    if (kind == Kind::scripted && script.empty())
      throw Error("scripted backend requires a script path");
  }
};

inline void from_json(const json& j, ModelBackendConfig& c) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "http")
    c.kind = ModelBackendConfig::Kind::http;
  else if (kind == "scripted")
    c.kind = ModelBackendConfig::Kind::scripted;
  else
    throw Error("backend kind must be 'http' or 'scripted'");
  c.base_url = j.value("base_url", "");
  c.model = j.value("model", "");
  c.temperature = j.value("temperature", 0.0);
  c.timeout_seconds = j.value("timeout_seconds", 30.0);
  c.token_env = j.value("token_env", "");
  c.script = std::filesystem::path(j.value("script", ""));
  c.validate();
}

inline void to_json(json& j, const ModelBackendConfig& c) {
  j = json{{"kind", c.kind == ModelBackendConfig::Kind::http ? "http" : "scripted"}};
  if (c.kind == ModelBackendConfig::Kind::http) {
    j["base_url"] = c.base_url;
    j["model"] = c.model;
    j["temperature"] = c.temperature;
    j["timeout_seconds"] = c.timeout_seconds;
    if (!c.token_env.empty()) j["token_env"] = c.token_env;
  } else {
    j["script"] = c.script.string();
  }
}

namespace detail {

// Scripted responses advance a per-file cursor for the lifetime of the
// process, so that one script drives a whole conversation.
struct ScriptState {
  std::vector<std::string> lines;
  std::size_t cursor = 0;
};

struct ScriptRegistry {
  std::mutex mu;
  std::map<std::string, ScriptState> scripts;

  static ScriptRegistry& instance() {
    static ScriptRegistry reg;
    return reg;
  }
};

inline std::string next_script_line(const std::filesystem::path& path) {
  auto& reg = ScriptRegistry::instance();
  std::lock_guard<std::mutex> lock(reg.mu);
  const std::string key = std::filesystem::absolute(path).string();
  auto it = reg.scripts.find(key);
  if (it == reg.scripts.end()) {
    ScriptState st;
    std::istringstream in(read_text_file(path));
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      // JSONL: a quoted line decodes to its string value; anything else is
      // taken verbatim (covers inline JSON object responses).
      std::string value = line;
      try {
        const json parsed = json::parse(line);
        if (parsed.is_string()) value = parsed.get<std::string>();
      } catch (const json::parse_error&) {
      }
      st.lines.push_back(std::move(value));
    }
    it = reg.scripts.emplace(key, std::move(st)).first;
  }
  ScriptState& st = it->second;
  if (st.cursor >= st.lines.size())
    throw ScriptExhausted("script exhausted after " + std::to_string(st.lines.size()) +
                          " responses: " + path.string());
  return st.lines[st.cursor++];
}

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("backend url must include a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

inline json message_to_wire(const ChatMessage& m) {
  json msg{{"role", role_name(m.role)}};
  if (m.image) {
    msg["content"] = json::array(
        {json{{"type", "text"}, {"text", m.content}},
         json{{"type", "image_url"},
              {"image_url",
               {{"url", "data:" + m.image->media_type + ";base64," + m.image->base64_payload}}}}});
  } else {
    msg["content"] = m.content;
  }
  return msg;
}

inline std::string http_chat(const ModelBackendConfig& cfg,
                             const std::vector<ChatMessage>& messages) {
  const ParsedUrl url = split_url(cfg.base_url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(std::chrono::duration<double>(cfg.timeout_seconds));
  client.set_read_timeout(std::chrono::duration<double>(cfg.timeout_seconds));

  json body{{"model", cfg.model}, {"temperature", cfg.temperature}, {"messages", json::array()}};
  for (const ChatMessage& m : messages) body["messages"].push_back(message_to_wire(m));

  httplib::Headers headers;
  if (!cfg.token_env.empty()) {
    if (const char* token = std::getenv(cfg.token_env.c_str()); token && *token)
      headers.emplace("Authorization", std::string("Bearer ") + token);
  }

  const auto res = client.Post(url.path, headers, body.dump(), "application/json");
  if (!res)
    throw BackendError("backend unreachable: " + cfg.base_url + " (" +
                       httplib::to_string(res.error()) + ")");
  if (res->status != 200)
    throw BackendError("backend returned HTTP " + std::to_string(res->status) + ": " + res->body);
  try {
    const json reply = json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed backend response: ") + e.what());
  }
}

}  // namespace detail

// Clears scripted cursors; used by tests that replay the same script file.
inline void reset_scripted_backends() {
  auto& reg = detail::ScriptRegistry::instance();
  std::lock_guard<std::mutex> lock(reg.mu);
  reg.scripts.clear();
}

// Sends one chat exchange. The http kind posts a chat-completions request and
// returns the first choice's content; the scripted kind replays the next line
// of its script file.
inline std::string send_chat(const ModelBackendConfig& cfg,
                             const std::vector<ChatMessage>& messages) {
  cfg.validate();
  if (cfg.kind == ModelBackendConfig::Kind::scripted) return detail::next_script_line(cfg.script);
  return detail::http_chat(cfg, messages);
}

// ---------------------------------------------------------------------------
// Plan / review schemas

// Pixel-space region of interest. `extent` holds the half-width and
// half-height around the center.
struct RoiBox {
  Pixel center;
  double extent_u = 0.0, extent_v = 0.0;

  bool contains(const Pixel& p) const {
    return std::fabs(p.u - center.u) <= extent_u && std::fabs(p.v - center.v) <= extent_v;
  }
};

inline void to_json(json& j, const RoiBox& r) {
  j = json{{"center", r.center}, {"extent", json::array({r.extent_u, r.extent_v})}};
}

struct PlanObject {
  std::string name;
  Vec3 position;
  std::map<std::string, std::string> properties;
};

struct PlanStep {
  std::string step_id;
  std::string action;
  std::string description;  // optional free text
};

struct PlanIssue {
  std::string description;
  std::string step_id;     // optional
  std::string suggestion;  // optional
};

enum class PlanFlag { complete, incomplete };

struct VlmPlan {
  std::vector<PlanObject> objects;  // scene_description.objects
  std::vector<PlanStep> task_steps;
  std::vector<PlanIssue> issues;
  PlanFlag flag = PlanFlag::incomplete;
  json roi;    // raw optional "roi" field; null when absent
  json extra;  // unknown top-level fields, preserved verbatim

  const PlanObject* find_object(const std::string& name) const {
    for (const auto& o : objects)
      if (o.name == name) return &o;
    return nullptr;
  }
};

struct Suggestion {
  std::string id;
  std::string text;
  double confidence = 0.0;
};

inline void to_json(json& j, const Suggestion& s) {
  j = json{{"id", s.id}, {"text", s.text}, {"confidence", s.confidence}};
}

struct SlmReview {
  std::string feedback;
  std::vector<Suggestion> suggestions;
  double confidence = 0.0;
  std::string prompt_for_vlm;
  int accept_flag = 0;  // 1 accepts the plan as-is
};

namespace detail {

inline const json* find_key_ci(const json& obj, std::initializer_list<const char*> names) {
  if (!obj.is_object()) return nullptr;
  for (const char* name : names) {
    const std::string want = to_lower(name);
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (to_lower(it.key()) == want) return &it.value();
  }
  return nullptr;
}

inline double finite_number(const json& j, const std::string& field) {
  if (!j.is_number()) throw SchemaError(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(field, "expected a finite number");
  return v;
}

inline Vec3 position_field(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) throw SchemaError(field, "expected a 3-vector");
  return {finite_number(j[0], field), finite_number(j[1], field), finite_number(j[2], field)};
}

inline std::string string_field(const json& j, const std::string& field) {
  if (!j.is_string()) throw SchemaError(field, "expected a string");
  return j.get<std::string>();
}

inline std::string stringify_scalar(const json& j, const std::string& field) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number() || j.is_boolean()) return j.dump();
  throw SchemaError(field, "expected a scalar");
}

inline json parse_strict(const std::string& raw, const char* what) {
  try {
    return json::parse(raw);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

}  // namespace detail

inline VlmPlan parse_vlm_plan(const std::string& raw) {
  const json j = detail::parse_strict(raw, "plan response");
  if (!j.is_object()) throw SchemaError("$", "plan must be a JSON object");
  VlmPlan plan;

  const auto scene_it = j.find("scene_description");
  if (scene_it == j.end()) throw SchemaError("scene_description", "required field missing");
  const json* objects = detail::find_key_ci(*scene_it, {"objects"});
  if (!objects || !objects->is_array())
    throw SchemaError("scene_description.objects", "expected an array");
  for (const json& o : *objects) {
    PlanObject obj;
    const json* name = detail::find_key_ci(o, {"name"});
    const json* pos = detail::find_key_ci(o, {"position"});
    if (!name) throw SchemaError("objects[].name", "required field missing");
    if (!pos) throw SchemaError("objects[].position", "required field missing");
    obj.name = detail::string_field(*name, "objects[].name");
    obj.position = detail::position_field(*pos, "objects[].position");
    if (const json* props = detail::find_key_ci(o, {"properties"})) {
      if (!props->is_object()) throw SchemaError("objects[].properties", "expected an object");
      for (auto it = props->begin(); it != props->end(); ++it)
        obj.properties[it.key()] = detail::stringify_scalar(it.value(), "objects[].properties");
    }
    plan.objects.push_back(std::move(obj));
  }

  const auto steps_it = j.find("task_steps");
  if (steps_it == j.end()) throw SchemaError("task_steps", "required field missing");
  if (!steps_it->is_array()) throw SchemaError("task_steps", "expected an array");
  std::set<std::string> seen_ids;
  for (const json& s : *steps_it) {
    PlanStep step;
    const json* id = detail::find_key_ci(s, {"step_id"});
    const json* action = detail::find_key_ci(s, {"action"});
    if (!id) throw SchemaError("task_steps[].step_id", "required field missing");
    if (!action) throw SchemaError("task_steps[].action", "required field missing");
    step.step_id = detail::string_field(*id, "task_steps[].step_id");
    step.action = detail::string_field(*action, "task_steps[].action");
    if (const json* desc = detail::find_key_ci(s, {"description"}))
      step.description = detail::string_field(*desc, "task_steps[].description");
    if (!seen_ids.insert(step.step_id).second)
      throw SchemaError("task_steps[].step_id", "duplicate id '" + step.step_id + "'");
    plan.task_steps.push_back(std::move(step));
  }

  if (const auto issues_it = j.find("issues"); issues_it != j.end()) {
    if (!issues_it->is_array()) throw SchemaError("issues", "expected an array");
    for (const json& i : *issues_it) {
      PlanIssue issue;
      const json* desc = detail::find_key_ci(i, {"description"});
      if (!desc) throw SchemaError("issues[].description", "required field missing");
      issue.description = detail::string_field(*desc, "issues[].description");
      if (const json* sid = detail::find_key_ci(i, {"step_id"}))
        issue.step_id = detail::string_field(*sid, "issues[].step_id");
      if (const json* sug = detail::find_key_ci(i, {"suggestion"}))
        issue.suggestion = detail::string_field(*sug, "issues[].suggestion");
      plan.issues.push_back(std::move(issue));
    }
  }

  // A plan that does not flag itself incomplete counts as final.
  if (const auto flag_it = j.find("flag"); flag_it != j.end())
    plan.flag = (flag_it->is_string() && to_lower(flag_it->get<std::string>()) == "complete")
                    ? PlanFlag::complete
                    : PlanFlag::incomplete;
  else
    plan.flag = PlanFlag::complete;

  if (const auto roi_it = j.find("roi"); roi_it != j.end()) plan.roi = *roi_it;

  plan.extra = json::object();
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const std::set<std::string> known = {"scene_description", "task_steps", "issues",
                                                "flag", "roi"};
    if (!known.count(it.key())) plan.extra[it.key()] = it.value();
  }
  return plan;
}

inline void to_json(json& j, const PlanObject& o) {
  j = json{{"name", o.name}, {"position", o.position}};
  if (!o.properties.empty()) j["properties"] = o.properties;
}

inline void to_json(json& j, const PlanStep& s) {
  j = json{{"step_id", s.step_id}, {"action", s.action}};
  if (!s.description.empty()) j["description"] = s.description;
}

inline void to_json(json& j, const PlanIssue& i) {
  j = json{{"description", i.description}};
  if (!i.step_id.empty()) j["step_id"] = i.step_id;
  if (!i.suggestion.empty()) j["suggestion"] = i.suggestion;
}

inline void to_json(json& j, const VlmPlan& p) {
  j = json{{"scene_description", {{"objects", p.objects}}},
           {"task_steps", p.task_steps},
           {"issues", p.issues},
           {"flag", p.flag == PlanFlag::complete ? "complete" : "incomplete"}};
  if (!p.roi.is_null()) j["roi"] = p.roi;
  if (p.extra.is_object())
    for (auto it = p.extra.begin(); it != p.extra.end(); ++it) j[it.key()] = it.value();
}

inline std::string serialize_plan(const VlmPlan& p) { return dump_canonical(json(p)); }

inline SlmReview parse_slm_review(const std::string& raw) {
  const json j = detail::parse_strict(raw, "review response");
  if (!j.is_object()) throw SchemaError("$", "review must be a JSON object");
  SlmReview review;

  // Feedback: plain text, a {Description, ...} object, or a list of strings.
  if (const json* fb = detail::find_key_ci(j, {"Feedback"})) {
    if (fb->is_string()) {
      review.feedback = fb->get<std::string>();
    } else if (fb->is_object()) {
      if (const json* desc = detail::find_key_ci(*fb, {"Description"}))
        review.feedback = detail::string_field(*desc, "Feedback.Description");
    } else if (fb->is_array()) {
      std::string joined;
      for (const json& item : *fb) {
        if (!joined.empty()) joined += " ";
        joined += detail::string_field(item, "Feedback[]");
      }
      review.feedback = joined;
    } else {
      throw SchemaError("Feedback", "expected text, object, or list");
    }
  }

  if (const json* sugs = detail::find_key_ci(j, {"Suggestions"})) {
    const json* list = sugs;
    if (sugs->is_object()) list = detail::find_key_ci(*sugs, {"Example"});  // template shape
    if (!list || !list->is_array()) throw SchemaError("Suggestions", "expected an array");
    for (const json& s : *list) {
      Suggestion sug;
      const json* id = detail::find_key_ci(s, {"id"});
      const json* text = detail::find_key_ci(s, {"text"});
      const json* conf = detail::find_key_ci(s, {"confidence"});
      if (!text) throw SchemaError("Suggestions[].text", "required field missing");
      if (!conf) throw SchemaError("Suggestions[].confidence", "required field missing");
      sug.id = id ? detail::string_field(*id, "Suggestions[].id") : "";
      sug.text = detail::string_field(*text, "Suggestions[].text");
      sug.confidence = detail::finite_number(*conf, "Suggestions[].confidence");
      if (sug.confidence < 0.0 || sug.confidence > 1.0)
        throw SchemaError("Suggestions[].confidence", "must lie in [0,1]");
      review.suggestions.push_back(std::move(sug));
    }
  }

  if (const json* conf = detail::find_key_ci(j, {"Confidence"})) {
    const json* value = conf;
    if (conf->is_object()) value = detail::find_key_ci(*conf, {"Value", "Example"});
    if (!value) throw SchemaError("Confidence", "expected a number or a Value field");
    review.confidence = detail::finite_number(*value, "Confidence");
    if (review.confidence < 0.0 || review.confidence > 1.0)
      throw SchemaError("Confidence", "must lie in [0,1]");
  }

  if (const json* prompt = detail::find_key_ci(j, {"Prompt for VLM", "PromptForVLM",
                                                   "prompt_for_vlm"})) {
    if (prompt->is_string()) {
      review.prompt_for_vlm = prompt->get<std::string>();
    } else if (prompt->is_object()) {
      if (const json* cmd = detail::find_key_ci(*prompt, {"Command", "Example"}))
        review.prompt_for_vlm = detail::string_field(*cmd, "Prompt for VLM.Command");
    } else {
      throw SchemaError("Prompt for VLM", "expected text or object");
    }
  }

  // Absent flag means the reviewer did not accept.
  if (const json* flag = detail::find_key_ci(j, {"flag", "accept_flag"})) {
    if (flag->is_boolean()) {
      review.accept_flag = flag->get<bool>() ? 1 : 0;
    } else if (flag->is_number_integer()) {
      const int v = flag->get<int>();
      if (v != 0 && v != 1) throw SchemaError("flag", "must be 0 or 1");
      review.accept_flag = v;
    } else {
      throw SchemaError("flag", "must be 0, 1, or boolean");
    }
  }
  return review;
}

inline void to_json(json& j, const SlmReview& r) {
  j = json{{"Feedback", r.feedback},
           {"Suggestions", r.suggestions},
           {"Confidence", r.confidence},
           {"Prompt for VLM", r.prompt_for_vlm},
           {"flag", r.accept_flag}};
}

inline std::string serialize_review(const SlmReview& r) { return dump_canonical(json(r)); }

}  // namespace gplan::gateway
