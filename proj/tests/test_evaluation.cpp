#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gplan/evaluation.hpp"

using Catch::Approx;
using Catch::Matchers::ContainsSubstring;
using namespace gplan;
using namespace gplan::evaluation;

namespace {

const std::filesystem::path kAssets = GPLAN_ASSETS_DIR;

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("gplan_eval_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

SceneModel desk_scene() {
  SceneModel s;
  s.objects = {
      {"headphone", {0.5, 0.3, 0.2}, {{"fragility", "high"}}},
      {"stand", {0.4, 0.2, 0.1}, {}},
      {"obstacle", {0.6, 0.4, 0.3}, {{"type", "box"}}},
  };
  return s;
}

VlmPlan plan_from(const std::vector<std::string>& actions) {
  VlmPlan p;
  for (std::size_t i = 0; i < actions.size(); ++i)
    p.task_steps.push_back({std::to_string(i + 1), actions[i], ""});
  return p;
}

const std::vector<std::string> kPickPlace = {
    "move_to([0.5, 0.3, 0.2])", "grasp('headphone')", "move_to([0.7, 0.3, 0.2])", "release()"};

SampleRecord pick_place_sample() {
  return make_positive_sample("Move the headphone to the target.", desk_scene(),
                              plan_from(kPickPlace));
}

// Exhaustive LCS: longest subsequence of `a` that is also a subsequence of `b`.
std::size_t brute_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << a.size()); ++mask) {
    std::size_t bi = 0, len = 0;
    for (std::size_t i = 0; i < a.size() && bi <= b.size(); ++i) {
      if (!(mask & (1u << i))) continue;
      while (bi < b.size() && b[bi] != a[i]) ++bi;
      if (bi == b.size()) {
        len = 0;
        break;
      }
      ++len;
      ++bi;
    }
    best = std::max(best, len);
  }
  return best;
}

// Independent voxel enumeration over a fixed grid window.
double brute_ball_iou(const geometry::Vec3& a, const geometry::Vec3& b, double r, double voxel) {
  std::size_t na = 0, nb = 0, inter = 0;
  for (long long i = -100; i <= 100; ++i)
    for (long long j = -100; j <= 100; ++j)
      for (long long k = -100; k <= 100; ++k) {
        const geometry::Vec3 c{(i + 0.5) * voxel, (j + 0.5) * voxel, (k + 0.5) * voxel};
        const bool in_a = (c - a).norm() <= r;
        const bool in_b = (c - b).norm() <= r;
        na += in_a;
        nb += in_b;
        inter += in_a && in_b;
      }
  if (na + nb == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(na + nb - inter);
}

}  // namespace

TEST_CASE("miou scores exact localizations as one and gates gross errors", "[evaluation]") {
  std::vector<Localization> locs = {{"a", {0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}}};
  CHECK(miou(locs) == 1.0);

  locs.push_back({"b", {0.2, 0.2, 0.2}, {0.5, 0.2, 0.2}});  // 0.3 m off: gated out
  CHECK(miou(locs) == Approx(0.5));

  locs.push_back({"c", {0.55, 0.5, 0.5}, {0.5, 0.5, 0.5}});
  CHECK(miou(locs) == Approx((1.0 + 0.0 + 20.0 / 44.0) / 3.0));

  CHECK_THROWS_AS(miou({}), EmptyInput);
  CHECK_THROWS_AS(miou(locs, 0.0), Error);
  CHECK_THROWS_AS(
      miou({{"n", {std::nan(""), 0.0, 0.0}, {0.0, 0.0, 0.0}}}), Error);
}

TEST_CASE("voxel ball overlap matches a brute-force enumeration", "[evaluation]") {
  const geometry::Vec3 gt{0.5, 0.5, 0.5};
  CHECK(ball_iou(gt, {0.55, 0.5, 0.5}, 0.1, 0.05) == Approx(20.0 / 44.0));

  Rng rng(20260814);
  for (int trial = 0; trial < 40; ++trial) {
    const geometry::Vec3 a{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)};
    const geometry::Vec3 b{a.x + rng.uniform(-0.15, 0.15), a.y + rng.uniform(-0.15, 0.15),
                           a.z + rng.uniform(-0.15, 0.15)};
    CHECK(ball_iou(a, b, 0.1, 0.05) == Approx(brute_ball_iou(a, b, 0.1, 0.05)));
  }
}

TEST_CASE("miou decays with grid-aligned displacement", "[evaluation]") {
  const geometry::Vec3 gt{0.5, 0.5, 0.5};
  double prev = 1.0;
  for (int cells = 0; cells <= 4; ++cells) {
    const double off = 0.05 * cells;
    const double v = miou({{"o", {0.5 + off, 0.5, 0.5}, gt}});
    CHECK(v <= prev);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    prev = v;
  }
  CHECK(miou({{"o", {0.7, 0.5, 0.5}, gt}}) == 0.0);  // at the gate exactly
}

TEST_CASE("rouge_l matches hand-computed ratios and conventions", "[evaluation]") {
  CHECK(rouge_l({"a", "b", "c"}, {"a", "b", "c"}) == 1.0);
  CHECK(rouge_l({"a", "b"}, {"c", "d"}) == 0.0);
  CHECK(rouge_l({"a", "b", "c"}, {"a", "c"}) == Approx(0.8));
  CHECK(rouge_l({}, {}) == 1.0);
  CHECK(rouge_l({"a"}, {}) == 0.0);
  CHECK(rouge_l({}, {"a"}) == 0.0);

  // Action strings normalize before comparison.
  CHECK(rouge_l({"Move_To([0.5,  0.3, 0.2])"}, {"move_to([0.5, 0.3, 0.2])"}) == 1.0);
  CHECK(rouge_l({" grasp(5) "}, {"grasp(5)"}) == 1.0);
}

TEST_CASE("rouge_l equals the exhaustive subsequence oracle", "[evaluation]") {
  Rng rng(99);
  const std::vector<std::string> alphabet = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::string> p, g;
    const auto np = static_cast<std::size_t>(rng.uniform_int(1, 12));
    const auto ng = static_cast<std::size_t>(rng.uniform_int(1, 12));
    for (std::size_t i = 0; i < np; ++i)
      p.push_back(alphabet[static_cast<std::size_t>(rng.uniform_int(0, 3))]);
    for (std::size_t i = 0; i < ng; ++i)
      g.push_back(alphabet[static_cast<std::size_t>(rng.uniform_int(0, 3))]);

    const double expected =
        2.0 * static_cast<double>(brute_lcs(p, g)) / static_cast<double>(p.size() + g.size());
    CHECK(rouge_l(p, g) == Approx(expected));
    CHECK(rouge_l(p, g) == Approx(rouge_l(g, p)));  // symmetry
    CHECK((rouge_l(p, g) == 1.0) == (p == g));
  }
}

TEST_CASE("executability and tsr are plain success fractions", "[evaluation]") {
  CHECK(executability(std::vector<ExecutionCheck>{{true}, {true}}) == 1.0);
  CHECK(executability(std::vector<ExecutionCheck>{{true}, {false}, {false}, {false}}) == 0.25);
  CHECK_THROWS_AS(executability(std::vector<ExecutionCheck>{}), EmptyInput);

  const auto plan = gateway::parse_vlm_plan(
      read_text_file((kAssets / "examples/vlm_output.json").string()));
  const SceneModel scene = sim::scene_from_plan(plan);
  sim::ConstraintSet c;
  c.reach_tolerance = 0.3;
  const auto broken = sim::run_plan(scene, plan, sim::builtin_goals(2), c);

  auto fixed_plan = plan;
  fixed_plan.task_steps[3].action = "grasp(5)";
  fixed_plan.task_steps[4].action = "moveTo(0.4, 0.3, 0.5)";
  sim::GoalParams gp;
  gp.target = {0.5, 0.4, 0.2};
  const auto fixed = sim::run_plan(scene, fixed_plan, sim::builtin_goals(2, gp), c);

  REQUIRE(fixed.success);
  REQUIRE_FALSE(broken.success);
  CHECK(executability(std::vector<sim::Outcome>{broken, fixed}) == 0.5);
  CHECK(tsr(std::vector<sim::Outcome>{broken, fixed}) == 0.5);
  CHECK(tsr(std::vector<sim::Outcome>{fixed}) == 1.0);

  std::vector<sim::Outcome> many(50, fixed);
  many[10] = broken;
  many[20] = broken;
  CHECK(tsr(many) == Approx(0.96));
  CHECK_THROWS_AS(tsr({}), EmptyInput);
}

TEST_CASE("evaluation reports serialize with fixed keys and ranges", "[evaluation]") {
  EvalReport r{0.5, 0.8, 1.0, 0.96, 50};
  const json j = r;
  CHECK(j.at("miou") == 0.5);
  CHECK(j.at("rouge_l") == 0.8);
  CHECK(j.at("executability") == 1.0);
  CHECK(j.at("tsr") == 0.96);
  CHECK(j.at("n") == 50);
  const auto back = j.get<EvalReport>();
  CHECK(back.tsr == r.tsr);

  EvalReport bad = r;
  bad.miou = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("positive samples carry an accepting review", "[evaluation]") {
  const SampleRecord s = pick_place_sample();
  CHECK(s.polarity == Polarity::positive);
  CHECK(s.output.confidence == 1.0);
  CHECK(s.output.suggestions.empty());
  CHECK_THAT(s.output.feedback, ContainsSubstring("satisfies"));
  CHECK(s.error_type.empty());
  s.validate();

  const json j = s;
  CHECK(j.at("input").contains("Task Description"));
  CHECK(j.at("input").contains("VLM Output"));
  CHECK(j.at("output").contains("Confidence"));
  CHECK_FALSE(j.contains("error_type"));

  // Plans the validator rejects cannot seed positives.
  CHECK_THROWS_WITH(
      make_positive_sample("t", desk_scene(), plan_from({"release()"})),
      ContainsSubstring("pass plan validation"));

  SampleRecord negative_without_type = s;
  negative_without_type.polarity = Polarity::negative;
  CHECK_THROWS_AS(negative_without_type.validate(), Error);
}

TEST_CASE("param_exceed pushes one argument past its limit", "[evaluation]") {
  SceneModel scene;
  scene.objects = {{"cube", {0.0, 0.0, 0.0}, {}}};
  const SampleRecord s =
      make_positive_sample("Lift the cube.", scene, plan_from({"grasp(5)", "release()"}));

  const SampleRecord neg = augment_positive(s, Augmentation::param_exceed, 7);
  CHECK(neg.polarity == Polarity::negative);
  CHECK_FALSE(neg.error_type.empty());
  const auto plan = gateway::parse_vlm_plan(neg.input.vlm_output.dump());
  const auto g = std::get<sim::Grasp>(sim::parse_action(plan.task_steps[0].action));
  REQUIRE(g.force.has_value());
  CHECK(*g.force > 5.0);
  CHECK_FALSE(supervision::validate_plan(plan, scene).empty());
  CHECK(neg.output.confidence < 1.0);
  CHECK_FALSE(neg.output.suggestions.empty());

  // Deterministic per seed; different seeds may choose different slots.
  const SampleRecord replay = augment_positive(s, Augmentation::param_exceed, 7);
  CHECK(json(replay) == json(neg));

  const SampleRecord coords = augment_positive(pick_place_sample(),
                                               Augmentation::param_exceed, 3);
  CHECK_FALSE(coords.error_type.empty());

  CHECK_THROWS_AS(
      augment_positive(make_positive_sample("t", desk_scene(), plan_from({"rotate(90)"})),
                       Augmentation::param_exceed, 1),
      NoMutableField);
  CHECK_THROWS_AS(augment_positive(coords, Augmentation::param_exceed, 1), Error);
}

TEST_CASE("drop_step removes a step the validator misses", "[evaluation]") {
  const SampleRecord neg = augment_positive(pick_place_sample(), Augmentation::drop_step, 11);
  CHECK(neg.error_type == "LogicalError");
  const auto plan = gateway::parse_vlm_plan(neg.input.vlm_output.dump());
  CHECK(plan.task_steps.size() == 3);
  CHECK_FALSE(supervision::validate_plan(plan, desk_scene()).empty());

  // A plan whose every removal stays valid cannot be broken this way.
  CHECK_THROWS_AS(
      augment_positive(make_positive_sample("t", desk_scene(),
                                            plan_from({"rotate(90)", "analyse()"})),
                       Augmentation::drop_step, 1),
      NoMutableField);
}

TEST_CASE("add_step duplicates a gripper action into a logical fault", "[evaluation]") {
  const SampleRecord neg = augment_positive(pick_place_sample(), Augmentation::add_step, 5);
  CHECK(neg.error_type == "LogicalError");
  const auto plan = gateway::parse_vlm_plan(neg.input.vlm_output.dump());
  CHECK(plan.task_steps.size() == 5);
  for (std::size_t i = 0; i < plan.task_steps.size(); ++i)
    CHECK(plan.task_steps[i].step_id == std::to_string(i + 1));

  const SampleRecord bare = make_positive_sample("t", desk_scene(), plan_from({"rotate(90)"}));
  const auto stray = augment_positive(bare, Augmentation::add_step, 5);
  const auto stray_plan = gateway::parse_vlm_plan(stray.input.vlm_output.dump());
  CHECK(stray_plan.task_steps.back().action == "release()");
}

TEST_CASE("reverse_flow puts a release before its grasp", "[evaluation]") {
  const SampleRecord neg = generate_negative(pick_place_sample(), Augmentation::reverse_flow, 2);
  CHECK(neg.error_type == "LogicalError");
  const auto plan = gateway::parse_vlm_plan(neg.input.vlm_output.dump());
  CHECK(plan.task_steps[1].action == "release()");
  CHECK(plan.task_steps[3].action == "grasp('headphone')");

  CHECK_THROWS_AS(
      generate_negative(make_positive_sample("t", desk_scene(), plan_from({"rotate(90)"})),
                        Augmentation::reverse_flow, 1),
      NoMutableField);
  CHECK_THROWS_AS(generate_negative(pick_place_sample(), Augmentation::drop_step, 1), Error);
}

TEST_CASE("invalid_position leaves the workspace", "[evaluation]") {
  const SampleRecord neg =
      generate_negative(pick_place_sample(), Augmentation::invalid_position, 13);
  CHECK(neg.error_type == "ParameterError");
  const auto plan = gateway::parse_vlm_plan(neg.input.vlm_output.dump());
  bool outside = false;
  for (const auto& step : plan.task_steps) {
    const auto cmd = sim::parse_action(step.action);
    if (const auto* mv = std::get_if<sim::MoveTo>(&cmd))
      outside = outside || !sim::ConstraintSet{}.in_workspace(mv->target);
  }
  CHECK(outside);

  CHECK_THROWS_AS(
      generate_negative(make_positive_sample("t", desk_scene(), plan_from({"rotate(90)"})),
                        Augmentation::invalid_position, 1),
      NoMutableField);
}

TEST_CASE("occlusion hides the grasped object's coordinates", "[evaluation]") {
  const SampleRecord src = pick_place_sample();
  const SampleRecord neg = generate_negative(src, Augmentation::occlusion, 17);
  CHECK(neg.error_type == "LogicalError");
  CHECK(neg.input.vlm_output == src.input.vlm_output);  // plan untouched

  const json scene_json = parse_json(neg.input.scene_text, "scene");
  bool headphone_positionless = false;
  for (const json& o : scene_json.at("objects"))
    if (o.at("name") == "headphone") headphone_positionless = !o.contains("position");
  CHECK(headphone_positionless);

  const SceneModel rebuilt = scene_from_text(neg.input.scene_text);
  CHECK(rebuilt.find("headphone") == nullptr);
  CHECK(rebuilt.find("stand") != nullptr);
  const auto issues = supervision::validate_plan(
      gateway::parse_vlm_plan(neg.input.vlm_output.dump()), rebuilt);
  REQUIRE_FALSE(issues.empty());
  CHECK_THAT(issues[0].description, ContainsSubstring("No object named 'headphone'"));

  SceneModel cube;
  cube.objects = {{"cube", {0.0, 0.0, 0.0}, {}}};
  CHECK_THROWS_AS(
      generate_negative(make_positive_sample("t", cube, plan_from({"grasp(5)", "release()"})),
                        Augmentation::occlusion, 1),
      NoMutableField);
}

TEST_CASE("augmentation strategies parse from their names", "[evaluation]") {
  for (Augmentation a : {Augmentation::param_exceed, Augmentation::drop_step,
                         Augmentation::add_step, Augmentation::reverse_flow,
                         Augmentation::invalid_position, Augmentation::occlusion})
    CHECK(augmentation_from_string(to_string(a)) == a);
  CHECK_THROWS_AS(augmentation_from_string("swap_everything"), Error);
}

TEST_CASE("datasets export to JSONL and re-import equal records", "[evaluation]") {
  TempDir tmp;
  const std::string path = (tmp.path / "dataset.jsonl").string();

  CHECK(export_dataset({}, path) == 0);
  CHECK(read_text_file(path).empty());
  CHECK(import_dataset(path).empty());

  std::vector<SampleRecord> samples = {pick_place_sample()};
  samples.push_back(augment(samples[0], Augmentation::drop_step, 1));
  samples.push_back(augment(samples[0], Augmentation::occlusion, 2));
  CHECK(export_dataset(samples, path) == 3);

  const auto back = import_dataset(path);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(json(back[i]) == json(samples[i]));

  CHECK_THROWS_AS(export_dataset(samples, "/nonexistent_dir_gplan/x.jsonl"), io::IoError);
  CHECK_THROWS_AS(import_dataset((tmp.path / "missing.jsonl").string()), io::IoError);
}

TEST_CASE("generated corpora keep the polarity invariant", "[evaluation]") {
  // Small-scale version of the dataset builder: every positive validates
  // cleanly, every negative trips the validator.
  std::vector<SampleRecord> corpus;
  for (int i = 0; i < 8; ++i) {
    SceneModel scene;
    const double x = 0.3 + 0.04 * i;
    scene.objects = {{"headphone", {x, 0.3, 0.2}, {{"fragility", "high"}}},
                     {"stand", {0.4, 0.2, 0.1}, {}}};
    char buf[64];
    std::snprintf(buf, sizeof buf, "move_to([%.2f, 0.3, 0.2])", x);
    corpus.push_back(make_positive_sample(
        "Move the headphone.", scene,
        plan_from({buf, "grasp('headphone')", "move_to([0.7, 0.3, 0.2])", "release()"})));
  }
  const std::size_t n_pos = corpus.size();
  const Augmentation all[] = {Augmentation::param_exceed,     Augmentation::drop_step,
                              Augmentation::add_step,         Augmentation::reverse_flow,
                              Augmentation::invalid_position, Augmentation::occlusion};
  for (int i = 0; i < 12; ++i)
    corpus.push_back(augment(corpus[i % n_pos], all[i % 6], 1000 + i));

  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& s = corpus[i];
    s.validate();
    const auto plan = gateway::parse_vlm_plan(s.input.vlm_output.dump());
    const auto issues = supervision::validate_plan(plan, scene_from_text(s.input.scene_text));
    if (s.polarity == Polarity::positive) {
      CHECK(issues.empty());
    } else {
      CHECK_FALSE(issues.empty());
      CHECK_FALSE(s.error_type.empty());
    }
  }
}
