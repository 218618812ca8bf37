#pragma once

// Command-line pipeline wiring: a single JSON config names the sensor inputs,
// prompt templates, model backends, and loop parameters; the cmd_* functions
// implement the gplan subcommands on top of it. Exit codes: 0 success,
// 2 config/input error, 3 backend error, 4 task failure.

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gplan/confidence.hpp"
#include "gplan/errors.hpp"
#include "gplan/evaluation.hpp"
#include "gplan/gateway.hpp"
#include "gplan/io.hpp"
#include "gplan/jsonio.hpp"
#include "gplan/preprocess.hpp"
#include "gplan/scenario.hpp"
#include "gplan/simulator.hpp"
#include "gplan/supervision.hpp"
#include "gplan/synthesis.hpp"
#include "gplan/util.hpp"

namespace gplan::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitBackend = 3;
inline constexpr int kExitTask = 4;

struct ConfigError : Error {
  using Error::Error;
};

// ---- configuration ----------------------------------------------------------

struct PipelinePaths {
  fs::path calibration;
  fs::path cloud;
  fs::path depth;
  fs::path mask;
  fs::path image;
  fs::path templates;  // directory of prompt templates; empty = built-in
  fs::path archive;    // session archive, created on first write
  fs::path scene;
};

struct PreprocessParams {
  double voxel = 0.0;  // > 0 enables voxel downsampling
  bool ground_removal = false;
  double ground_angle_deg = 15.0;
  double ground_inlier = 0.02;
};

struct PipelineConfig {
  PipelinePaths paths;
  std::optional<gateway::ModelBackendConfig> vlm;
  std::optional<gateway::ModelBackendConfig> slm;
  std::string reviewer = "rules";  // "rules" | "model"
  confidence::WeightProfile weights{1.0, 1.0, 1.0, 1.0};
  PreprocessParams preprocess;
  synthesis::ConvergenceParams convergence;
  supervision::LoopParams loop;
  sim::ConstraintSet constraints;
  std::uint64_t seed = 2026;

  // Input files must exist up front so failures surface before any work; the
  // archive is an output and is exempt.
  void validate() const {
    const std::array<std::pair<const char*, const fs::path*>, 6> inputs = {{
        {"calibration", &paths.calibration},
        {"cloud", &paths.cloud},
        {"depth", &paths.depth},
        {"mask", &paths.mask},
        {"image", &paths.image},
        {"scene", &paths.scene},
    }};
    for (const auto& [name, path] : inputs)
      if (!path->empty() && !fs::exists(*path))
        throw ConfigError(std::string(name) + " file does not exist: " + path->string());
    if (!paths.templates.empty() && !fs::is_directory(paths.templates))
      throw ConfigError("templates path is not a directory: " + paths.templates.string());
    if (reviewer != "rules" && reviewer != "model")
      throw ConfigError("reviewer must be 'rules' or 'model', got '" + reviewer + "'");
    if (reviewer == "model" && !slm)
      throw ConfigError("reviewer 'model' requires an slm backend config");
    weights.validate();
    convergence.validate();
    loop.validate();
    if (preprocess.voxel < 0.0) throw ConfigError("preprocess.voxel must be non-negative");
    if (!(preprocess.ground_inlier > 0.0))
      throw ConfigError("preprocess.ground_inlier must be positive");
  }
};

// ${NAME} in any config string is replaced by the environment variable NAME
// (used for backend tokens and machine-local paths); unset variables fail.
inline std::string interpolate_env(const std::string& text) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '$' && i + 1 < text.size() && text[i + 1] == '{') {
      const std::size_t end = text.find('}', i + 2);
      if (end == std::string::npos)
        throw ConfigError("unterminated ${ in config value: " + text);
      const std::string name = text.substr(i + 2, end - i - 2);
      const char* value = std::getenv(name.c_str());
      if (!value) throw ConfigError("environment variable '" + name + "' is not set");
      out += value;
      i = end + 1;
    } else {
      out += text[i++];
    }
  }
  return out;
}

inline json interpolate_env_json(const json& j) {
  if (j.is_string()) return interpolate_env(j.get<std::string>());
  if (j.is_object()) {
    json out = json::object();
    for (const auto& [key, value] : j.items()) out[key] = interpolate_env_json(value);
    return out;
  }
  if (j.is_array()) {
    json out = json::array();
    for (const auto& value : j) out.push_back(interpolate_env_json(value));
    return out;
  }
  return j;
}

namespace detail {

inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> known,
                                const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

inline fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return base / p;
}

}  // namespace detail

// Parses an interpolated config document; relative paths resolve against
// `base` (the config file's directory).
inline PipelineConfig parse_config(const json& doc, const fs::path& base = ".") {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  detail::reject_unknown_keys(doc,
                              {"paths", "vlm", "slm", "reviewer", "weights", "preprocess",
                               "convergence", "loop", "constraints", "seed"},
                              "config");
  PipelineConfig c;

  const json paths = doc.value("paths", json::object());
  detail::reject_unknown_keys(
      paths, {"calibration", "cloud", "depth", "mask", "image", "templates", "archive", "scene"},
      "config.paths");
  auto path_of = [&](const char* key) {
    return detail::resolve(base, fs::path(paths.value(key, std::string())));
  };
  c.paths.calibration = path_of("calibration");
  c.paths.cloud = path_of("cloud");
  c.paths.depth = path_of("depth");
  c.paths.mask = path_of("mask");
  c.paths.image = path_of("image");
  c.paths.templates = path_of("templates");
  c.paths.archive = path_of("archive");
  c.paths.scene = path_of("scene");

  if (doc.contains("vlm")) c.vlm = doc.at("vlm").get<gateway::ModelBackendConfig>();
  if (doc.contains("slm")) c.slm = doc.at("slm").get<gateway::ModelBackendConfig>();
  for (auto* backend : {&c.vlm, &c.slm})
    if (*backend && (*backend)->kind == gateway::ModelBackendConfig::Kind::scripted)
      (*backend)->script = detail::resolve(base, (*backend)->script);
  c.reviewer = doc.value("reviewer", std::string("rules"));

  if (doc.contains("weights")) {
    const json& w = doc.at("weights");
    if (w.is_string())
      c.weights = confidence::weight_profile_for_task(
          confidence::task_kind_from_string(w.get<std::string>()));
    else
      c.weights = w.get<confidence::WeightProfile>();
  }

  const json pre = doc.value("preprocess", json::object());
  detail::reject_unknown_keys(pre, {"voxel", "ground_removal", "ground_angle_deg", "ground_inlier"},
                              "config.preprocess");
  c.preprocess.voxel = pre.value("voxel", c.preprocess.voxel);
  c.preprocess.ground_removal = pre.value("ground_removal", c.preprocess.ground_removal);
  c.preprocess.ground_angle_deg = pre.value("ground_angle_deg", c.preprocess.ground_angle_deg);
  c.preprocess.ground_inlier = pre.value("ground_inlier", c.preprocess.ground_inlier);

  const json conv = doc.value("convergence", json::object());
  detail::reject_unknown_keys(conv, {"epsilon", "max_iter"}, "config.convergence");
  c.convergence.epsilon = conv.value("epsilon", c.convergence.epsilon);
  c.convergence.max_iter = conv.value("max_iter", c.convergence.max_iter);

  const json loop = doc.value("loop", json::object());
  detail::reject_unknown_keys(loop, {"n_max", "tau"}, "config.loop");
  c.loop.n_max = loop.value("n_max", c.loop.n_max);
  c.loop.tau = loop.value("tau", c.loop.tau);

  const json cons = doc.value("constraints", json::object());
  detail::reject_unknown_keys(cons,
                              {"workspace_min", "workspace_max", "max_grip_force",
                               "fragile_max_force", "min_clearance", "reach_tolerance",
                               "path_step"},
                              "config.constraints");
  if (cons.contains("workspace_min"))
    c.constraints.workspace_min = cons.at("workspace_min").get<geometry::Vec3>();
  if (cons.contains("workspace_max"))
    c.constraints.workspace_max = cons.at("workspace_max").get<geometry::Vec3>();
  c.constraints.max_grip_force = cons.value("max_grip_force", c.constraints.max_grip_force);
  c.constraints.fragile_max_force =
      cons.value("fragile_max_force", c.constraints.fragile_max_force);
  c.constraints.min_clearance = cons.value("min_clearance", c.constraints.min_clearance);
  c.constraints.reach_tolerance = cons.value("reach_tolerance", c.constraints.reach_tolerance);
  c.constraints.path_step = cons.value("path_step", c.constraints.path_step);

  c.seed = doc.value("seed", c.seed);
  c.validate();
  return c;
}

inline PipelineConfig load_config(const fs::path& path) {
  const json doc = interpolate_env_json(parse_json(read_text_file(path), path.string()));
  return parse_config(doc, path.parent_path().empty() ? "." : path.parent_path());
}

// ---- command plumbing ---------------------------------------------------------

namespace detail {

inline void require_path(const fs::path& p, const char* what) {
  if (p.empty())
    throw ConfigError(std::string("config is missing the required '") + what + "' path");
}

inline const gateway::ModelBackendConfig& require_backend(
    const std::optional<gateway::ModelBackendConfig>& b, const char* what) {
  if (!b) throw ConfigError(std::string("config is missing the '") + what + "' backend");
  return *b;
}

// Deterministic on-disk JSON: sorted keys, 9 significant digits, newline EOF.
inline void write_json_output(const fs::path& path, const json& j) {
  write_text_file(path, dump_canonical(j) + "\n");
}

inline gateway::PromptTemplate load_template(const fs::path& dir, const std::string& name,
                                             const std::string& file) {
  return {name, read_text_file(dir / file)};
}

inline supervision::SupervisionTemplates supervision_templates(const PipelineConfig& c) {
  if (c.paths.templates.empty()) return supervision::default_templates();
  const fs::path& dir = c.paths.templates;
  return {load_template(dir, "direct_scene", "direct_scene_prompt.txt"),
          load_template(dir, "correction", "correction_prompt.txt"),
          load_template(dir, "slm", "slm_prompt.txt")};
}

inline synthesis::SynthesisTemplates synthesis_templates(const PipelineConfig& c) {
  if (c.paths.templates.empty()) return synthesis::default_templates();
  const fs::path& dir = c.paths.templates;
  return {load_template(dir, "direct_scene", "direct_scene_prompt.txt"),
          load_template(dir, "iterative_interaction", "iterative_interaction.txt")};
}

// Shared sensor-fusion front end: load calibration + sensors, optionally
// downsample and strip the ground plane, then score every visible point.
inline std::vector<confidence::ScoredPoint> fuse_points(const PipelineConfig& c) {
  require_path(c.paths.calibration, "calibration");
  require_path(c.paths.cloud, "cloud");
  require_path(c.paths.depth, "depth");
  require_path(c.paths.mask, "mask");
  const io::Calibration calib = io::read_calibration(c.paths.calibration);
  preprocess::PointCloud cloud = io::read_cloud(c.paths.cloud);
  const preprocess::DepthMap depth = io::read_depth_pgm(c.paths.depth);
  const preprocess::LabelMask mask = io::read_mask_pgm(c.paths.mask);

  if (c.preprocess.voxel > 0.0) cloud = preprocess::downsample(cloud, c.preprocess.voxel);
  if (c.preprocess.ground_removal) {
    const auto split = preprocess::remove_ground(cloud.points, c.preprocess.ground_angle_deg,
                                                 c.preprocess.ground_inlier);
    preprocess::PointCloud kept;
    for (std::size_t idx : split.kept) {
      kept.points.push_back(cloud.points[idx]);
      if (!cloud.timestamps.empty()) kept.timestamps.push_back(cloud.timestamps[idx]);
    }
    cloud = std::move(kept);
  }

  return confidence::score_cloud(cloud, mask, depth, {}, calib.intrinsics,
                                 calib.lidar_to_camera, c.weights);
}

inline sim::SceneModel load_scene(const PipelineConfig& c, int task_id) {
  if (c.paths.scene.empty()) return scenario::task_scene(task_id);
  return sim::read_scene_file(c.paths.scene.string());
}

// Accepts either a bare plan document or a cmd_plan output wrapping it under
// a "plan" key.
inline gateway::VlmPlan load_plan_file(const fs::path& path) {
  json doc = parse_json(read_text_file(path), path.string());
  if (doc.is_object() && doc.contains("plan")) doc = doc.at("plan");
  return gateway::parse_vlm_plan(doc.dump());
}

}  // namespace detail

// Maps thrown errors onto the documented exit codes; commands stay
// exception-based and unit-testable.
template <typename Fn>
inline int run_command(Fn&& fn) {
  try {
    return fn();
  } catch (const supervision::SupervisionAborted& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitBackend;
  } catch (const gateway::BackendError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitBackend;
  } catch (const synthesis::MaxIterationsExceeded& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitTask;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
}

// ---- subcommands ------------------------------------------------------------

inline int cmd_fuse(const PipelineConfig& c, const fs::path& out) {
  const auto scored = detail::fuse_points(c);
  detail::write_json_output(out, json(scored));
  return kExitOk;
}

inline int cmd_annotate(const PipelineConfig& c, const fs::path& out_image,
                        const fs::path& out_markers) {
  detail::require_path(c.paths.image, "image");
  const io::Image image = io::read_ppm(c.paths.image);
  const auto scored = detail::fuse_points(c);
  const auto annotated = synthesis::annotate(image, synthesis::reliable_per_mask(scored));
  io::write_ppm(out_image, annotated.image);
  detail::write_json_output(out_markers, json(annotated.markers));
  return kExitOk;
}

inline int cmd_plan(const PipelineConfig& c, const std::string& strategy, int task_id,
                    const fs::path& out_plan, const fs::path& out_transcript) {
  const auto& vlm = detail::require_backend(c.vlm, "vlm");
  const std::string task = scenario::task_description(task_id);

  if (strategy == "direct") {
    // One prompt, one reply: the scene markers ride along in the text.
    const sim::SceneModel scene = detail::load_scene(c, task_id);
    const auto templates = detail::supervision_templates(c);
    const std::string prompt = gateway::render_template(
        templates.vlm, {{"T", task},
                        {"MARKERS", supervision::detail::scene_markers(scene)},
                        {"FEEDBACK", "(none)"},
                        {"HISTORY", "(none)"}});
    gateway::ChatMessage msg;
    msg.role = gateway::Role::user;
    msg.content = prompt;
    const std::string raw = gateway::send_chat(vlm, {msg});
    const gateway::VlmPlan plan = gateway::parse_vlm_plan(raw);
    detail::write_json_output(out_plan, json{{"strategy", "direct"}, {"plan", plan}});
    detail::write_json_output(
        out_transcript, json::array({json{{"n", 1}, {"prompt", prompt}, {"response_raw", raw}}}));
    return kExitOk;
  }

  if (strategy == "iterative") {
    detail::require_path(c.paths.image, "image");
    const io::Image frame = io::read_ppm(c.paths.image);
    const synthesis::FrameSource frames = [frame]() { return frame; };
    const synthesis::ScoreFn score = [&c](const io::Image&) { return detail::fuse_points(c); };
    const auto result = synthesis::run_interactive(task, frames, vlm, score, c.convergence,
                                                   detail::synthesis_templates(c));
    detail::write_json_output(out_plan,
                              json{{"strategy", "iterative"}, {"selection", result.selection}});
    detail::write_json_output(out_transcript, json(result.transcript));
    return kExitOk;
  }

  throw ConfigError("strategy must be 'direct' or 'iterative', got '" + strategy + "'");
}

inline int cmd_supervise(const PipelineConfig& c, int task_id, const fs::path& out) {
  const auto& vlm = detail::require_backend(c.vlm, "vlm");
  detail::require_path(c.paths.archive, "archive");
  const sim::SceneModel scene = detail::load_scene(c, task_id);
  supervision::SlmSource slm = supervision::RuleReviewer{};
  if (c.reviewer == "model") slm = detail::require_backend(c.slm, "slm");

  const auto result =
      supervision::run_supervision(scenario::task_description(task_id), scene, vlm, slm,
                                   detail::supervision_templates(c), c.constraints, c.loop);
  const std::size_t id = supervision::archive_write(result.archive, c.paths.archive.string());

  json summary(result.archive);
  summary["id"] = id;
  summary["reviews"] = result.history.records().size();
  detail::write_json_output(out, summary);
  return result.archive.outcome == "success" ? kExitOk : kExitTask;
}

inline int cmd_simulate(const PipelineConfig& c, int task_id,
                        const std::optional<fs::path>& plan_file, const fs::path& out) {
  const sim::SceneModel scene = detail::load_scene(c, task_id);
  const gateway::VlmPlan plan = plan_file ? detail::load_plan_file(*plan_file)
                                          : scenario::competent_plan(task_id, scene);
  const sim::Outcome outcome =
      sim::run_plan(scene, plan, sim::builtin_goals(task_id), c.constraints);
  detail::write_json_output(out, json(outcome));
  return outcome.success ? kExitOk : kExitTask;
}

struct EvalOptions {
  int task_id = 1;
  int runs = 0;  // must be set explicitly
  bool use_reviewer = true;
  int fault_every = 0;
  fs::path workdir;  // scratch space for generated backend scripts
};

inline int cmd_eval(const PipelineConfig& c, const EvalOptions& opt, const fs::path& out) {
  if (opt.runs < 1) throw ConfigError("--runs must be at least 1");
  scenario::BenchmarkOptions bench;
  bench.task_id = opt.task_id;
  bench.runs = opt.runs;
  bench.seed = c.seed;
  bench.use_reviewer = opt.use_reviewer;
  bench.fault_every = opt.fault_every;
  const fs::path workdir =
      opt.workdir.empty() ? fs::temp_directory_path() / "gplan_eval_scripts" : opt.workdir;
  const auto report = scenario::benchmark(bench, workdir);
  detail::write_json_output(out, json(report));
  return kExitOk;
}

// Emits `count` validator-clean samples plus `count` mutated counterexamples
// (one line each, strategies cycled) as a JSONL dataset.
inline int cmd_augment(const PipelineConfig& c, int count, const fs::path& out) {
  if (count < 1) throw ConfigError("--count must be at least 1");
  static constexpr std::array<evaluation::Augmentation, 6> kStrategies = {
      evaluation::Augmentation::param_exceed,  evaluation::Augmentation::drop_step,
      evaluation::Augmentation::add_step,      evaluation::Augmentation::reverse_flow,
      evaluation::Augmentation::invalid_position, evaluation::Augmentation::occlusion};

  const std::string task = scenario::task_description(1);
  std::vector<evaluation::SampleRecord> samples;
  samples.reserve(static_cast<std::size_t>(count) * 2);
  for (int i = 0; i < count; ++i) {
    const auto scene =
        scenario::perturb_scene(scenario::task_scene(1), c.seed + static_cast<std::uint64_t>(i));
    const auto plan = scenario::competent_plan(1, scene);
    samples.push_back(evaluation::make_positive_sample(task, scene, plan, c.constraints));
  }
  for (int i = 0; i < count; ++i)
    samples.push_back(evaluation::augment(samples[static_cast<std::size_t>(i)],
                                          kStrategies[static_cast<std::size_t>(i) % 6],
                                          c.seed + 1000 + static_cast<std::uint64_t>(i),
                                          c.constraints));
  evaluation::export_dataset(samples, out.string());
  return kExitOk;
}

}  // namespace gplan::cli
