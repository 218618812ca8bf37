// End-to-end acceptance run. Each criterion prints one PASS/FAIL line; the
// process exits nonzero if any check fails. Randomized checks are seeded so
// every run covers the same instances.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Geometry>

#include "gplan/evaluation.hpp"
#include "gplan/scenario.hpp"
#include "gplan/synthesis.hpp"

using namespace gplan;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

const fs::path kAssets = GPLAN_ASSETS_DIR;

#define EXPECT(cond, message) \
  do {                        \
    if (!(cond)) {            \
      why = (message);        \
      return false;           \
    }                         \
  } while (0)

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("gplan_accept_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

gateway::ModelBackendConfig scripted(const fs::path& script,
                                     const std::vector<std::string>& lines) {
  std::ofstream out(script);
  for (const auto& l : lines) out << l << "\n";
  out.close();
  gateway::ModelBackendConfig cfg;
  cfg.kind = gateway::ModelBackendConfig::Kind::scripted;
  cfg.script = fs::absolute(script).string();
  return cfg;
}

// 1: normalized entropy stays in [0, 1] with its peak at p = 1/e, the fused
// confidence obeys ln C = -sum(lambda * h), and uniformly scaling the weights
// never changes which point ranks highest.
bool entropy_and_confidence(std::string& why) {
  const auto t0 = Clock::now();
  constexpr double kPeakTol = 1e-9;
  constexpr double kLogTol = 1e-12;

  const double peak = confidence::norm_entropy(1.0 / std::numbers::e);
  EXPECT(std::fabs(peak - 1.0) <= kPeakTol, "entropy at p = 1/e is not 1");

  Rng rng(101);
  for (int i = 0; i < 10000; ++i) {
    const double p = rng.uniform();
    const double h = confidence::norm_entropy(p);
    EXPECT(h >= 0.0 && h <= 1.0, "normalized entropy left [0, 1]");
    EXPECT(h <= peak + kLogTol, "entropy exceeds the p = 1/e peak");

    const confidence::EntropyVector e{rng.uniform(), rng.uniform(), rng.uniform(),
                                      rng.uniform()};
    const confidence::WeightProfile w{rng.uniform(0.05, 3.0), rng.uniform(0.05, 3.0),
                                      rng.uniform(0.05, 3.0), rng.uniform(0.05, 3.0)};
    const double c = confidence::confidence_score(e, w);
    const double s = w.spatial * e.spatial + w.geometric * e.geometric +
                     w.depth * e.depth + w.temporal * e.temporal;
    EXPECT(std::fabs(std::log(c) + s) < kLogTol, "log-confidence identity violated");
  }

  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<confidence::EntropyVector> pts(100);
    for (auto& e : pts) e = {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    const confidence::WeightProfile w{rng.uniform(0.05, 2.0), rng.uniform(0.05, 2.0),
                                      rng.uniform(0.05, 2.0), rng.uniform(0.05, 2.0)};
    const double k = std::exp(rng.uniform(-2.0, 2.0));
    const confidence::WeightProfile ws{w.spatial * k, w.geometric * k, w.depth * k,
                                       w.temporal * k};
    auto argmax = [&](const confidence::WeightProfile& wp) {
      std::size_t best = 0;
      double best_c = -1.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const double c = confidence::confidence_score(pts[i], wp);
        if (c > best_c) {
          best_c = c;
          best = i;
        }
      }
      return best;
    };
    EXPECT(argmax(w) == argmax(ws), "ranking changed under uniform weight scaling");
  }

  EXPECT(seconds_since(t0) < 5.0, "entropy sweep exceeded 5 s");
  return true;
}

// 2: compose(T, invert(T)) is the identity, projection only depends on the
// ray direction, and every valid depth pixel back-projects onto itself.
bool geometry_round_trips(std::string& why) {
  const auto t0 = Clock::now();
  constexpr double kIdTol = 1e-9;
  constexpr double kPixTol = 1e-6;

  Rng rng(202);
  auto random_rotation = [&]() {
    Eigen::Vector3d axis;
    do {
      axis = Eigen::Vector3d(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                             rng.uniform(-1.0, 1.0));
    } while (axis.norm() < 1e-3);
    axis.normalize();
    return Eigen::Matrix3d(Eigen::AngleAxisd(rng.uniform(-M_PI, M_PI), axis));
  };

  for (int i = 0; i < 1000; ++i) {
    const geometry::RigidTransform t(
        random_rotation(),
        {rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)});
    const auto m = geometry::compose(t, geometry::invert(t)).matrix();
    double err = 0.0;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        err = std::max(err, std::fabs(m[r][c] - (r == c ? 1.0 : 0.0)));
    EXPECT(err <= kIdTol, "compose(T, invert(T)) strayed from the identity");
  }

  const geometry::CameraIntrinsics cam{500.0, 480.0, 320.0, 240.0, 640, 480};
  for (int i = 0; i < 10000; ++i) {
    const geometry::Vec3 p{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                           rng.uniform(0.1, 10.0)};
    const double s = std::exp(rng.uniform(std::log(0.01), std::log(100.0)));
    const geometry::Pixel a = geometry::project_point(cam, p);
    const geometry::Pixel b = geometry::project_point(cam, p * s);
    EXPECT(std::fabs(a.u - b.u) <= kIdTol && std::fabs(a.v - b.v) <= kIdTol,
           "projection is not scale-invariant along the ray");
  }

  const geometry::CameraIntrinsics depth_cam{120.0, 110.0, 62.5, 50.5, 125, 100};
  preprocess::DepthMap depth(125, 100);
  for (double& z : depth.depth) z = rng.uniform(0.5, 5.0);
  const preprocess::PointCloud cloud = preprocess::depth_to_cloud(depth, depth_cam);
  EXPECT(cloud.points.size() == 12500, "back-projection dropped valid pixels");
  std::set<std::pair<int, int>> seen;
  for (const auto& q : cloud.points) {
    const geometry::Pixel px = geometry::project_point(depth_cam, q);
    const int x = static_cast<int>(std::lround(px.u));
    const int y = static_cast<int>(std::lround(px.v));
    EXPECT(std::fabs(px.u - x) <= kPixTol && std::fabs(px.v - y) <= kPixTol,
           "depth round trip missed its pixel center");
    EXPECT(depth.in_bounds(x, y), "depth round trip left the image");
    EXPECT(depth.at(x, y) == q.z, "depth value changed across the round trip");
    seen.insert({x, y});
  }
  EXPECT(seen.size() == 12500, "depth round trip collapsed distinct pixels");

  EXPECT(seconds_since(t0) < 5.0, "geometry sweep exceeded 5 s");
  return true;
}

// 3: candidate search, reliable selection, ROI depth selection, and the
// overlap score each reproduce an exhaustive brute-force reference exactly.
bool selection_oracles(std::string& why) {
  Rng rng(303);

  auto random_scored = [&](std::size_t n) {
    std::vector<confidence::ScoredPoint> v(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i].point_index = i;
      v[i].pixel = {static_cast<double>(rng.uniform_int(0, 20)),
                    static_cast<double>(rng.uniform_int(0, 20))};
      v[i].position = {rng.uniform(), rng.uniform(), rng.uniform()};
      v[i].mask_id = 1;
      v[i].confidence = static_cast<double>(rng.uniform_int(0, 20)) / 20.0;
    }
    return v;
  };

  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 500));
    const auto scored = random_scored(n);

    const geometry::Pixel centroid{static_cast<double>(rng.uniform_int(0, 20)),
                                   static_cast<double>(rng.uniform_int(0, 20))};
    auto dist2 = [](const confidence::ScoredPoint& s, const geometry::Pixel& c) {
      const double du = s.pixel.u - c.u;
      const double dv = s.pixel.v - c.v;
      return du * du + dv * dv;
    };

    const std::size_t k = static_cast<std::size_t>(rng.uniform_int(1, 8));
    const auto picked = synthesis::nearest_candidates(centroid, scored, k);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double da = dist2(scored[a], centroid), db = dist2(scored[b], centroid);
      if (da != db) return da < db;
      return scored[a].point_index < scored[b].point_index;
    });
    EXPECT(picked.size() == std::min(k, n), "candidate count off");
    for (std::size_t i = 0; i < picked.size(); ++i)
      EXPECT(picked[i].point_index == scored[order[i]].point_index,
             "candidate ordering disagrees with brute force");

    const auto chosen = synthesis::select_reliable(scored);
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (scored[i].confidence > scored[best].confidence) best = i;
    EXPECT(chosen.point_index == scored[best].point_index,
           "reliable selection disagrees with brute force");

    const gateway::RoiBox roi{{static_cast<double>(rng.uniform_int(0, 20)),
                               static_cast<double>(rng.uniform_int(0, 20))},
                              static_cast<double>(rng.uniform_int(0, 6)),
                              static_cast<double>(rng.uniform_int(0, 6))};
    const auto depth_pick = synthesis::optimal_depth(roi, scored);
    const confidence::ScoredPoint* want = nullptr;
    for (const auto& s : scored) {
      if (std::fabs(s.pixel.u - roi.center.u) > roi.extent_u ||
          std::fabs(s.pixel.v - roi.center.v) > roi.extent_v)
        continue;
      if (!want || s.confidence > want->confidence) want = &s;
    }
    if (!want)
      for (const auto& s : scored)
        if (!want || dist2(s, roi.center) < dist2(*want, roi.center)) want = &s;
    EXPECT(depth_pick.point_index == want->point_index,
           "ROI depth selection disagrees with brute force");
  }

  const std::array<std::string, 4> alphabet = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 1000; ++trial) {
    auto draw = [&]() {
      std::vector<std::string> s(static_cast<std::size_t>(rng.uniform_int(0, 12)));
      for (auto& t : s) t = alphabet[static_cast<std::size_t>(rng.uniform_int(0, 3))];
      return s;
    };
    const auto pred = draw(), gold = draw();
    const double got = evaluation::rouge_l(pred, gold);

    double want = 0.0;
    if (pred.empty() && gold.empty()) {
      want = 1.0;
    } else if (!pred.empty() && !gold.empty()) {
      std::size_t lcs = 0;
      for (std::uint32_t mask = 0; mask < (1u << pred.size()); ++mask) {
        std::size_t gi = 0, len = 0;
        bool ok = true;
        for (std::size_t i = 0; i < pred.size() && ok; ++i) {
          if (!((mask >> i) & 1u)) continue;
          while (gi < gold.size() && gold[gi] != pred[i]) ++gi;
          if (gi == gold.size())
            ok = false;
          else {
            ++gi;
            ++len;
          }
        }
        if (ok) lcs = std::max(lcs, len);
      }
      want = 2.0 * static_cast<double>(lcs) / static_cast<double>(pred.size() + gold.size());
    }
    EXPECT(got == want, "overlap score disagrees with exhaustive subsequence search");
  }
  return true;
}

// 4: a jittered floor plus a displaced cube split cleanly; at least 99% of
// the floor is classified as ground and no cube point is.
bool ground_removal(std::string& why) {
  const auto t0 = Clock::now();
  Rng rng(404);
  const std::size_t n_plane = 20000, n_cube = 5000;
  std::vector<geometry::Vec3> pts;
  pts.reserve(n_plane + n_cube);
  for (std::size_t i = 0; i < n_plane; ++i)
    pts.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-0.004, 0.004), rng.uniform(-1.0, 1.0)});
  for (std::size_t i = 0; i < n_cube; ++i)
    pts.push_back({rng.uniform(0.2, 0.4), -rng.uniform(0.25, 0.45), rng.uniform(0.2, 0.4)});

  const auto split = preprocess::remove_ground(pts, 15.0, 0.02);
  EXPECT(split.ground.size() + split.kept.size() == pts.size(), "point count changed");
  std::size_t plane_removed = 0, cube_removed = 0;
  for (std::size_t i : split.ground) (i < n_plane ? plane_removed : cube_removed) += 1;
  EXPECT(cube_removed == 0, "object points were classified as ground");
  EXPECT(plane_removed * 100 >= n_plane * 99, "less than 99% of the floor was removed");

  EXPECT(seconds_since(t0) < 2.0, "ground removal exceeded 2 s");
  return true;
}

// 5: the bundled model-output example yields exactly the two known findings,
// and the corrected plan both validates cleanly and executes in its scene.
bool worked_example_review(std::string& why) {
  const gateway::VlmPlan plan =
      gateway::parse_vlm_plan(read_text_file((kAssets / "examples/vlm_output.json").string()));
  const sim::SceneModel scene = sim::scene_from_plan(plan);

  auto find = [&](const std::string& name) -> const sim::SceneObject* {
    for (const auto& o : scene.objects)
      if (o.name == name) return &o;
    return nullptr;
  };
  const auto* headphone = find("headphone");
  const auto* stand = find("headphone_stand");
  EXPECT(headphone != nullptr && stand != nullptr, "scene lost its objects");
  EXPECT(headphone->position.x == 0.5 && headphone->position.y == 0.3 &&
             headphone->position.z == 0.2,
         "headphone position drifted");
  EXPECT(stand->position.x == 0.4 && stand->position.y == 0.2 && stand->position.z == 0.1,
         "stand position drifted");

  sim::ConstraintSet hover;
  hover.reach_tolerance = 0.3;
  const auto issues = supervision::validate_plan(plan, scene, hover);
  EXPECT(issues.size() == 2, "expected exactly two findings, got " +
                                 std::to_string(issues.size()));
  EXPECT(issues[0].category == supervision::IssueCategory::ConstraintViolation,
         "first finding is not the force violation");
  EXPECT(issues[0].step_id == "4", "force finding anchored to the wrong step");
  EXPECT(issues[0].description.find("15 N") != std::string::npos &&
             issues[0].description.find("5 N") != std::string::npos,
         "force finding lost its limits");
  EXPECT(issues[1].category == supervision::IssueCategory::ParseError,
         "second finding is not the unknown action");
  EXPECT(issues[1].step_id == "5", "parse finding anchored to the wrong step");
  EXPECT(issues[1].description.find("'liftTo'") != std::string::npos,
         "parse finding does not name the bad action");

  gateway::VlmPlan fixed = plan;
  fixed.task_steps[3].action = "grasp(5)";
  fixed.task_steps[4].action = "moveTo(0.4, 0.3, 0.5)";
  EXPECT(supervision::validate_plan(fixed, scene, hover).empty(),
         "corrected plan still has findings");

  sim::GoalParams gp;
  gp.target = {0.5, 0.4, 0.2};
  const auto run = sim::run_plan(scene, fixed, sim::builtin_goals(2, gp), hover);
  EXPECT(run.success, "corrected plan failed in simulation: " + run.failure);
  return true;
}

// 6: a reviewer that never accepts triggers exactly one fallback round
// (quoting the least-confident suggestion) before escalation, with at most
// n_max + 1 reviews; an accepting reviewer succeeds at the first review and
// the written archive round-trips byte-identically.
bool supervision_loop(std::string& why) {
  TempDir dir;
  gateway::reset_scripted_backends();
  const auto templates = supervision::default_templates();
  const sim::SceneModel scene = scenario::task_scene(1);
  const std::string task = scenario::task_description(1);
  const supervision::LoopParams loop;
  const std::string stamp = "2026-08-14T00:00:00Z";

  const std::string plan_line = dump_canonical(json(scenario::competent_plan(1, scene)), -1);
  auto reject = [](const std::string& text, double conf) {
    return dump_canonical(
        json{{"Feedback", "not acceptable yet"},
             {"Suggestions",
              json::array({json{{"id", "A"}, {"text", text}, {"confidence", conf}}})},
             {"Confidence", 0.4},
             {"Prompt for VLM", ""},
             {"flag", 0}},
        -1);
  };

  const gateway::ModelBackendConfig vlm =
      scripted(dir.path / "vlm_stubborn.txt",
               {plan_line, plan_line, plan_line, plan_line, plan_line, plan_line,
                "SENTINEL-UNREAD"});
  const gateway::ModelBackendConfig slm = scripted(
      dir.path / "slm_stubborn.txt",
      {reject("tighten the approach pose", 0.8), reject("slow the lift", 0.7),
       reject("recalibrate the gripper offsets", 0.55), reject("lower the grip force", 0.6),
       reject("re-check the stand position", 0.65), reject("replan from scratch", 0.9)});

  const auto result =
      supervision::run_supervision(task, scene, vlm, slm, templates, {}, loop, stamp);
  EXPECT(result.archive.outcome == "human_intervention",
         "stubborn reviewer did not escalate");
  EXPECT(result.history.records().size() == 6,
         "reviewer consulted " + std::to_string(result.history.records().size()) +
             " times, expected n_max + 1 = 6");
  EXPECT(result.archive.control_code.empty(), "escalation carried a control code");

  gateway::ChatMessage probe;
  probe.role = gateway::Role::user;
  probe.content = "next";
  EXPECT(gateway::send_chat(vlm, {probe}) == "SENTINEL-UNREAD",
         "loop made more than one fallback query");

  const std::string fb = supervision::fallback(result.history, templates.correction);
  EXPECT(fb.find("recalibrate the gripper offsets") != std::string::npos,
         "fallback does not quote the least-confident suggestion");
  EXPECT(fb.find("0.55") != std::string::npos, "fallback lost the suggestion confidence");

  const std::string describe = "The desk holds a headphone, its stand, and a box obstacle.";
  const gateway::ModelBackendConfig vlm_ok =
      scripted(dir.path / "vlm_ok.txt", {plan_line, describe});
  const gateway::ModelBackendConfig slm_ok =
      scripted(dir.path / "slm_ok.txt", {dump_canonical(json{{"Feedback", "approved"},
                                                             {"Suggestions", json::array()},
                                                             {"Confidence", 0.9},
                                                             {"Prompt for VLM", ""},
                                                             {"flag", 1}},
                                                        -1)});
  const auto ok =
      supervision::run_supervision(task, scene, vlm_ok, slm_ok, templates, {}, loop, stamp);
  EXPECT(ok.archive.outcome == "success", "accepting reviewer did not succeed");
  EXPECT(ok.history.records().size() == 1, "acceptance happened after extra reviews");
  EXPECT(ok.archive.scenario_info == describe, "archive lost the scenario description");

  const std::string archive_path = (dir.path / "sessions.jsonl").string();
  EXPECT(supervision::archive_write(ok.archive, archive_path) == 0,
         "first record id is not 0");
  const std::string text = read_text_file(archive_path);
  EXPECT(!text.empty() && text.back() == '\n' &&
             std::count(text.begin(), text.end(), '\n') == 1,
         "archive is not a single line");
  const std::string line = text.substr(0, text.size() - 1);
  const json parsed = parse_json(line, "archive line");
  const auto back = parsed.get<supervision::SessionArchive>();
  json again = back;
  again["id"] = parsed.at("id");
  EXPECT(dump_canonical(again, -1) == line, "archive did not round-trip byte-identically");
  return true;
}

// 7: an ROI drifting 1 px per step with the completion flag raised at step 3
// converges at exactly step 3; responses that never raise it exhaust the
// iteration budget.
bool interactive_convergence(std::string& why) {
  TempDir dir;
  gateway::reset_scripted_backends();

  const io::Image frame(120, 110, 80, 80, 80);
  std::vector<confidence::ScoredPoint> scored;
  Rng rng(707);
  for (int i = 0; i < 300; ++i) {
    confidence::ScoredPoint s;
    s.point_index = static_cast<std::size_t>(i);
    s.pixel = {5.0 + (i % 20) * 5.0, 5.0 + (i / 20) * 7.0};
    s.position = {rng.uniform(), rng.uniform(), rng.uniform()};
    s.mask_id = 1;
    s.confidence = rng.uniform();
    scored.push_back(s);
  }
  const synthesis::FrameSource frames = [&]() { return frame; };
  const synthesis::ScoreFn score_fn = [&](const io::Image&) { return scored; };

  auto roi_line = [](double u, double v, const char* flag) {
    return dump_canonical(json{{"scene_description", {{"objects", json::array()}}},
                               {"task_steps", json::array()},
                               {"flag", flag},
                               {"roi", {{"center", {u, v}}, {"extent", {6.0, 6.0}}}}},
                          -1);
  };

  const synthesis::ConvergenceParams params;
  const gateway::ModelBackendConfig drift =
      scripted(dir.path / "vlm_drift.txt",
               {roi_line(10, 10, "incomplete"), roi_line(11, 10, "incomplete"),
                roi_line(12, 10, "complete")});
  const auto result =
      synthesis::run_interactive("locate the headphone", frames, drift, score_fn, params);
  EXPECT(result.transcript.size() == 3,
         "drift stopped after " + std::to_string(result.transcript.size()) +
             " steps, expected 3");
  const gateway::RoiBox last{{12.0, 10.0}, 6.0, 6.0};
  EXPECT(result.selection.point_index == synthesis::optimal_depth(last, scored).point_index,
         "selection is not the best point of the final ROI");

  const gateway::ModelBackendConfig stuck =
      scripted(dir.path / "vlm_stuck.txt",
               {roi_line(10, 10, "incomplete"), roi_line(11, 10, "incomplete"),
                roi_line(12, 10, "incomplete"), roi_line(13, 10, "incomplete"),
                roi_line(14, 10, "incomplete")});
  bool tripped = false;
  try {
    synthesis::run_interactive("locate the headphone", frames, stuck, score_fn, params);
  } catch (const synthesis::MaxIterationsExceeded& e) {
    tripped = true;
    EXPECT(e.transcript.size() == static_cast<std::size_t>(params.max_iter),
           "budget transcript length off");
  }
  EXPECT(tripped, "never-complete responses did not trip the iteration budget");
  return true;
}

// 8: 50 perturbed desk scenes through the reviewer loop reach perfect task
// success and executability; disabling the reviewer while injecting faulty
// plans strictly lowers the success rate.
bool closed_loop_benchmark(std::string& why) {
  const auto t0 = Clock::now();
  TempDir dir;

  scenario::BenchmarkOptions opt;
  const auto with_reviewer = scenario::benchmark(opt, dir.path / "with");
  EXPECT(with_reviewer.n == 50, "run count off");
  EXPECT(with_reviewer.tsr == 1.0, "task success below 1 with the reviewer");
  EXPECT(with_reviewer.executability == 1.0, "executability below 1 with the reviewer");

  scenario::BenchmarkOptions ablated = opt;
  ablated.use_reviewer = false;
  ablated.fault_every = 5;
  const auto without = scenario::benchmark(ablated, dir.path / "without");
  EXPECT(without.tsr < with_reviewer.tsr, "disabling the reviewer did not lower success");

  EXPECT(seconds_since(t0) < 60.0, "benchmark exceeded 60 s");
  return true;
}

// 9: 500 generated positives and 500 mutated negatives all conform to the
// sample schema, every negative is caught by validation, every positive is
// clean, and the dataset file round-trips exactly.
bool dataset_generation(std::string& why) {
  TempDir dir;
  const std::string task = scenario::task_description(1);
  const std::array strategies = {
      evaluation::Augmentation::param_exceed,     evaluation::Augmentation::drop_step,
      evaluation::Augmentation::add_step,         evaluation::Augmentation::reverse_flow,
      evaluation::Augmentation::invalid_position, evaluation::Augmentation::occlusion};

  std::vector<evaluation::SampleRecord> samples;
  samples.reserve(1000);
  for (int i = 0; i < 500; ++i) {
    const auto scene = scenario::perturb_scene(scenario::task_scene(1),
                                               8000 + static_cast<std::uint64_t>(i));
    samples.push_back(
        evaluation::make_positive_sample(task, scene, scenario::competent_plan(1, scene)));
  }
  for (int i = 0; i < 500; ++i)
    samples.push_back(evaluation::augment(samples[static_cast<std::size_t>(i)],
                                          strategies[static_cast<std::size_t>(i) % 6],
                                          9000 + static_cast<std::uint64_t>(i)));

  const std::set<std::string> input_keys = {"Task Description", "Scene", "VLM Output",
                                            "Historical SLM Feedback"};
  const std::set<std::string> output_keys = {"Feedback", "Suggestions", "Confidence",
                                             "Prompt for VLM"};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const json j = samples[i];
    std::set<std::string> in, out;
    for (const auto& [key, value] : j.at("input").items()) in.insert(key);
    for (const auto& [key, value] : j.at("output").items()) out.insert(key);
    EXPECT(in == input_keys && out == output_keys, "sample schema drifted");
    const bool negative = i >= 500;
    EXPECT(j.at("polarity") == (negative ? "negative" : "positive"), "polarity mislabeled");
    EXPECT(j.contains("error_type") == negative, "error_type presence off");

    const auto plan = gateway::parse_vlm_plan(j.at("input").at("VLM Output").dump());
    const auto scene =
        evaluation::scene_from_text(j.at("input").at("Scene").get<std::string>());
    const auto issues = supervision::validate_plan(plan, scene);
    if (negative) {
      EXPECT(!issues.empty(), "negative sample passed validation");
      EXPECT(!j.at("error_type").get<std::string>().empty(), "negative sample lost its label");
    } else {
      EXPECT(issues.empty(), "positive sample failed validation");
    }
  }

  const std::string file_a = (dir.path / "dataset_a.jsonl").string();
  const std::string file_b = (dir.path / "dataset_b.jsonl").string();
  EXPECT(evaluation::export_dataset(samples, file_a) == 1000, "export count off");
  const auto imported = evaluation::import_dataset(file_a);
  EXPECT(imported.size() == 1000, "import count off");
  EXPECT(evaluation::export_dataset(imported, file_b) == 1000, "re-export count off");
  EXPECT(read_text_file(file_a) == read_text_file(file_b),
         "dataset did not round-trip exactly");
  return true;
}

// 10: one full scripted session (reject, correct, accept, archive) finishes
// well under interactive latency.
bool session_overhead(std::string& why) {
  TempDir dir;
  gateway::reset_scripted_backends();
  const auto templates = supervision::default_templates();
  const sim::SceneModel scene = scenario::task_scene(1);
  const std::string task = scenario::task_description(1);

  const std::string good = dump_canonical(json(scenario::competent_plan(1, scene)), -1);
  const std::string bad = dump_canonical(json(scenario::faulty_plan(1, scene, 3)), -1);
  const gateway::ModelBackendConfig vlm =
      scripted(dir.path / "vlm_session.txt",
               {bad, good, "A desk with a headphone, a stand, and a box."});

  const auto t0 = Clock::now();
  const auto result =
      supervision::run_supervision(task, scene, vlm, supervision::RuleReviewer{}, templates);
  const double dt = seconds_since(t0);
  EXPECT(result.archive.outcome == "success", "scripted session did not succeed");
  EXPECT(dt < 0.8, "supervision session took " + std::to_string(dt) + " s");
  return true;
}

struct Criterion {
  int id;
  const char* title;
  bool (*fn)(std::string&);
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {1, "entropy and confidence identities", entropy_and_confidence},
      {2, "rigid-motion and projection round trips", geometry_round_trips},
      {3, "selection and overlap brute-force oracles", selection_oracles},
      {4, "ground plane removal", ground_removal},
      {5, "worked-example review and correction", worked_example_review},
      {6, "supervision loop termination and archive", supervision_loop},
      {7, "interactive grounding convergence", interactive_convergence},
      {8, "closed-loop benchmark and reviewer ablation", closed_loop_benchmark},
      {9, "review dataset generation and round trip", dataset_generation},
      {10, "supervision session overhead", session_overhead},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    std::string why;
    bool ok = false;
    const auto t0 = Clock::now();
    try {
      ok = c.fn(why);
    } catch (const std::exception& e) {
      why = std::string("unhandled exception: ") + e.what();
    }
    const double dt = seconds_since(t0);
    if (ok) {
      std::printf("PASS  %2d  %-45s (%.2f s)\n", c.id, c.title, dt);
    } else {
      std::printf("FAIL  %2d  %-45s (%.2f s): %s\n", c.id, c.title, dt, why.c_str());
      ++failures;
    }
    std::fflush(stdout);
  }
  if (failures == 0)
    std::printf("all 10 criteria passed\n");
  else
    std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
