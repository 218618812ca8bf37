#pragma once

// 2D prompt synthesis: project fused 3D selections onto the image as red
// markers, then iterate prompt -> model -> ROI -> depth selection until the
// ROI settles and the model flags the plan complete.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gplan/confidence.hpp"
#include "gplan/errors.hpp"
#include "gplan/gateway.hpp"
#include "gplan/geometry.hpp"
#include "gplan/io.hpp"
#include "gplan/jsonio.hpp"
#include "gplan/preprocess.hpp"
#include "gplan/util.hpp"

namespace gplan::synthesis {

using confidence::ScoredPoint;
using gateway::PromptTemplate;
using gateway::RoiBox;
using geometry::Pixel;
using geometry::Vec3;

struct EmptyMask : Error {
  using Error::Error;
};
struct NoCandidates : Error {
  using Error::Error;
};
struct NoRoi : Error {
  using Error::Error;
};
struct OutOfBounds : Error {
  using Error::Error;
};

// ---- markers ----------------------------------------------------------------

struct Marker {
  std::string label;
  Pixel pixel;
  Vec3 position;
  double confidence = 0.0;
};

inline void to_json(json& j, const Marker& m) {
  j = json{{"label", m.label},
           {"pixel", m.pixel},
           {"position", m.position},
           {"confidence", m.confidence}};
}

struct AnnotatedImage {
  io::Image image;
  std::vector<Marker> markers;
};

inline Pixel mask_centroid(const preprocess::LabelMask& mask, std::uint32_t k_id) {
  double su = 0.0, sv = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(x, y) == k_id) {
        su += x;
        sv += y;
        ++n;
      }
  if (n == 0) throw EmptyMask("mask has no pixels labeled " + std::to_string(k_id));
  return {su / static_cast<double>(n), sv / static_cast<double>(n)};
}

// The k scored points whose projections sit nearest the centroid; ties break
// toward the lower point index.
inline std::vector<ScoredPoint> nearest_candidates(const Pixel& centroid,
                                                   const std::vector<ScoredPoint>& scored,
                                                   std::size_t k = 4) {
  if (scored.empty()) throw NoCandidates("no scored points");
  std::vector<std::size_t> order(scored.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto d2 = [&](std::size_t i) {
    const double du = scored[i].pixel.u - centroid.u;
    const double dv = scored[i].pixel.v - centroid.v;
    return du * du + dv * dv;
  };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double da = d2(a), db = d2(b);
    if (da != db) return da < db;
    return scored[a].point_index < scored[b].point_index;
  });
  std::vector<ScoredPoint> out;
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) out.push_back(scored[order[i]]);
  return out;
}

inline ScoredPoint select_reliable(const std::vector<ScoredPoint>& candidates) {
  if (candidates.empty()) throw NoCandidates("no candidate points");
  const ScoredPoint* best = &candidates[0];
  for (const auto& c : candidates) {
    if (c.confidence > best->confidence ||
        (c.confidence == best->confidence && c.point_index < best->point_index))
      best = &c;
  }
  return *best;
}

// One selection per labeled mask region, ascending mask id.
inline std::vector<std::pair<std::uint32_t, ScoredPoint>> reliable_per_mask(
    const std::vector<ScoredPoint>& scored) {
  std::map<std::uint32_t, std::vector<ScoredPoint>> groups;
  for (const auto& s : scored)
    if (s.mask_id != 0) groups[s.mask_id].push_back(s);
  std::vector<std::pair<std::uint32_t, ScoredPoint>> out;
  for (const auto& [id, pts] : groups) out.emplace_back(id, select_reliable(pts));
  return out;
}

inline std::string marker_label(const Vec3& p) {
  char buf[80];
  std::snprintf(buf, sizeof buf, "[%.3f, %.3f, %.3f]", p.x, p.y, p.z);
  return buf;
}

// Stamps a filled red disk (radius 4 px) per selection and records markers in
// ascending mask-id order. Pixels outside each disk are untouched.
inline AnnotatedImage annotate(const io::Image& image,
                               std::vector<std::pair<std::uint32_t, ScoredPoint>> selections) {
  constexpr int kRadius = 4;
  std::stable_sort(selections.begin(), selections.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  AnnotatedImage out{image, {}};
  for (const auto& [mask_id, point] : selections) {
    const int cx = static_cast<int>(std::lround(point.pixel.u));
    const int cy = static_cast<int>(std::lround(point.pixel.v));
    if (!image.in_bounds(cx, cy))
      throw OutOfBounds("marker pixel (" + std::to_string(cx) + ", " + std::to_string(cy) +
                        ") outside the image");
    for (int dy = -kRadius; dy <= kRadius; ++dy)
      for (int dx = -kRadius; dx <= kRadius; ++dx) {
        if (dx * dx + dy * dy > kRadius * kRadius) continue;
        if (out.image.in_bounds(cx + dx, cy + dy)) out.image.set(cx + dx, cy + dy, 255, 0, 0);
      }
    out.markers.push_back({marker_label(point.position), point.pixel, point.position,
                           point.confidence});
  }
  return out;
}

// ---- prompt state -----------------------------------------------------------

struct PromptState {
  int n = 1;  // iteration, 1-based
  std::string prompt_text;
  std::vector<std::string> responses;  // raw prior model replies
  std::optional<RoiBox> prior_roi;
};

inline std::string serialize_markers(const std::vector<Marker>& markers) {
  if (markers.empty()) return "(none)";
  std::string out;
  for (const auto& m : markers) {
    if (!out.empty()) out += "\n";
    out += "- " + m.label;
  }
  return out;
}

inline PromptState build_initial_prompt(const std::string& task, const PromptTemplate& t,
                                        const AnnotatedImage& annotated) {
  if (trim(task).empty()) throw gateway::MissingPlaceholder("T");
  const std::map<std::string, std::string> bindings{
      {"T", task},
      {"MARKERS", serialize_markers(annotated.markers)},
      {"FEEDBACK", "(none)"},
      {"HISTORY", "(none)"},
  };
  return {1, gateway::render_template(t, bindings), {}, std::nullopt};
}

inline PromptState update_prompt(const PromptState& s, const PromptTemplate& iterative,
                                 const std::string& task, const AnnotatedImage& annotated,
                                 const std::string& response_raw, const RoiBox& roi) {
  PromptState next;
  next.n = s.n + 1;
  next.responses = s.responses;
  next.responses.push_back(response_raw);
  next.prior_roi = roi;

  std::string history;
  for (std::size_t i = 0; i < next.responses.size(); ++i) {
    history += "Iteration " + std::to_string(i + 1) + " response: " + next.responses[i] + "\n";
  }
  history += "Latest ROI: " + dump_canonical(json(roi), -1);

  const std::map<std::string, std::string> bindings{
      {"T", task},
      {"MARKERS", serialize_markers(annotated.markers)},
      {"FEEDBACK", "(none)"},
      {"HISTORY", history},
  };
  next.prompt_text = gateway::render_template(iterative, bindings);
  return next;
}

// ---- ROI and depth selection --------------------------------------------------

inline RoiBox roi_from_json(const json& j) {
  if (!j.is_object()) throw NoRoi("response has no roi object");
  const auto center = j.find("center");
  const auto extent = j.find("extent");
  if (center == j.end() || extent == j.end()) throw NoRoi("roi missing center or extent");
  if (!center->is_array() || center->size() != 2 || !(*center)[0].is_number() ||
      !(*center)[1].is_number())
    throw NoRoi("roi center malformed");
  if (!extent->is_array() || extent->size() != 2 || !(*extent)[0].is_number() ||
      !(*extent)[1].is_number())
    throw NoRoi("roi extent malformed");
  RoiBox box;
  box.center = {(*center)[0].get<double>(), (*center)[1].get<double>()};
  box.extent_u = (*extent)[0].get<double>();
  box.extent_v = (*extent)[1].get<double>();
  if (box.extent_u < 0.0 || box.extent_v < 0.0) throw NoRoi("roi extent negative");
  return box;
}

inline RoiBox extract_roi(const gateway::VlmPlan& plan) { return roi_from_json(plan.roi); }

inline RoiBox extract_roi(const std::string& raw) {
  json j;
  try {
    j = parse_json(raw, "response");
  } catch (const Error&) {
    throw NoRoi("response is not JSON");
  }
  if (!j.is_object() || !j.contains("roi")) throw NoRoi("response has no roi");
  return roi_from_json(j.at("roi"));
}

// Highest-confidence point projecting inside the ROI; if none does, the point
// nearest the ROI center. Ties break toward the lower point index.
inline ScoredPoint optimal_depth(const RoiBox& roi, const std::vector<ScoredPoint>& scored) {
  if (scored.empty()) throw NoCandidates("no scored points");
  const ScoredPoint* best = nullptr;
  for (const auto& s : scored) {
    if (!roi.contains(s.pixel)) continue;
    if (!best || s.confidence > best->confidence ||
        (s.confidence == best->confidence && s.point_index < best->point_index))
      best = &s;
  }
  if (best) return *best;
  auto d2 = [&](const ScoredPoint& s) {
    const double du = s.pixel.u - roi.center.u;
    const double dv = s.pixel.v - roi.center.v;
    return du * du + dv * dv;
  };
  best = &scored[0];
  for (const auto& s : scored) {
    const double ds = d2(s), db = d2(*best);
    if (ds < db || (ds == db && s.point_index < best->point_index)) best = &s;
  }
  return *best;
}

// ---- convergence ------------------------------------------------------------

struct ConvergenceParams {
  double epsilon = 2.0;  // pixels between successive ROI centers
  int max_iter = 5;

  void validate() const {
    if (!(epsilon > 0.0)) throw Error("epsilon must be positive");
    if (max_iter < 1) throw Error("max_iter must be at least 1");
  }
};

inline bool converged(const std::optional<RoiBox>& prev, const RoiBox& cur, bool flag,
                      const ConvergenceParams& p) {
  if (!prev || !flag) return false;
  const double du = prev->center.u - cur.center.u;
  const double dv = prev->center.v - cur.center.v;
  return std::sqrt(du * du + dv * dv) < p.epsilon;
}

// ---- interactive loop ---------------------------------------------------------

struct IterationRecord {
  int n = 0;
  std::string prompt;
  std::string response_raw;
  RoiBox roi;
  ScoredPoint selected;
};

inline void to_json(json& j, const IterationRecord& r) {
  j = json{{"n", r.n},
           {"prompt", r.prompt},
           {"response_raw", r.response_raw},
           {"roi", r.roi},
           {"selected_point", r.selected}};
}

struct MaxIterationsExceeded : Error {
  ScoredPoint best;  // highest-confidence selection seen
  json transcript;
  MaxIterationsExceeded(ScoredPoint b, json t)
      : Error("no convergence within the iteration budget"),
        best(std::move(b)),
        transcript(std::move(t)) {}
};

struct InteractiveResult {
  ScoredPoint selection;
  std::vector<IterationRecord> transcript;
};

struct SynthesisTemplates {
  PromptTemplate initial;
  PromptTemplate iterative;
};

inline SynthesisTemplates default_templates() {
  const std::string dir = std::string(GPLAN_ASSETS_DIR) + "/templates/";
  return {{"direct_scene", read_text_file(dir + "direct_scene_prompt.txt")},
          {"iterative_interaction", read_text_file(dir + "iterative_interaction.txt")}};
}

using FrameSource = std::function<io::Image()>;
using ScoreFn = std::function<std::vector<ScoredPoint>(const io::Image&)>;

namespace detail {

inline std::string ppm_bytes(const io::Image& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
  return out;
}

}  // namespace detail

// Runs the prompt/ROI refinement loop. A fresh frame is captured only when a
// response asks for one via a top-level "capture_new_image": true field.
inline InteractiveResult run_interactive(const std::string& task, const FrameSource& frames,
                                         const gateway::ModelBackendConfig& backend,
                                         const ScoreFn& scored_fn,
                                         const ConvergenceParams& p = {},
                                         const SynthesisTemplates& templates =
                                             default_templates()) {
  p.validate();
  io::Image frame = frames();
  std::vector<ScoredPoint> scored = scored_fn(frame);
  AnnotatedImage annotated = annotate(frame, reliable_per_mask(scored));
  PromptState state = build_initial_prompt(task, templates.initial, annotated);

  InteractiveResult result;
  std::optional<RoiBox> prev;
  std::optional<ScoredPoint> best;

  for (int n = 1; n <= p.max_iter; ++n) {
    gateway::ChatMessage msg;
    msg.role = gateway::Role::user;
    msg.content = state.prompt_text;
    msg.image = gateway::ImageAttachment{"image/x-portable-pixmap",
                                         base64_encode(detail::ppm_bytes(annotated.image))};
    const std::string response_raw = gateway::send_chat(backend, {msg});

    RoiBox roi;
    bool flag = false;
    bool new_frame = false;
    try {
      const gateway::VlmPlan plan = gateway::parse_vlm_plan(response_raw);
      roi = extract_roi(plan);
      flag = plan.flag == gateway::PlanFlag::complete;
      new_frame = plan.extra.is_object() && plan.extra.value("capture_new_image", false);
    } catch (const gateway::ParseError&) {
      roi = extract_roi(response_raw);
    } catch (const gateway::SchemaError&) {
      roi = extract_roi(response_raw);
    }

    const ScoredPoint selected = optimal_depth(roi, scored);
    result.transcript.push_back({n, state.prompt_text, response_raw, roi, selected});
    if (!best || selected.confidence > best->confidence) best = selected;

    if (converged(prev, roi, flag, p)) {
      result.selection = selected;
      return result;
    }
    prev = roi;
    if (n == p.max_iter) break;

    if (new_frame) {
      frame = frames();
      scored = scored_fn(frame);
      annotated = annotate(frame, reliable_per_mask(scored));
    }
    state = update_prompt(state, templates.iterative, task, annotated, response_raw, roi);
  }

  throw MaxIterationsExceeded(best ? *best : ScoredPoint{}, json(result.transcript));
}

inline void write_transcript_file(const std::string& path,
                                  const std::vector<IterationRecord>& transcript) {
  write_json_file(path, json(transcript));
}

}  // namespace gplan::synthesis
