#include "gazeswipe/interaction.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "gazeswipe/rng.hpp"

namespace gazeswipe {

double Rect::squared_distance(const Vec2& p) const {
  const double qx = std::clamp(p.x(), x, x + width);
  const double qy = std::clamp(p.y(), y, y + height);
  const double dx = p.x() - qx;
  const double dy = p.y() - qy;
  return dx * dx + dy * dy;
}

double Rect::distance(const Vec2& p) const { return std::sqrt(squared_distance(p)); }

TargetLayout::TargetLayout(std::uint64_t seed, Vec2 cell_size_pt, std::vector<Element> elements)
    : seed_(seed), cell_size_pt_(cell_size_pt), elements_(std::move(elements)) {
  if (elements_.empty()) throw InvalidInput("layout: no elements");
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    if (elements_[i].id != static_cast<int>(i)) throw InvalidInput("layout: element ids must be 0..n-1");
  }
  const auto targets = std::count_if(elements_.begin(), elements_.end(), [](const Element& e) { return e.is_target; });
  if (targets > 1) throw InvalidInput("layout: more than one target");
  if (targets == 0) elements_[0].is_target = true;
  for (const auto& e : elements_) {
    if (e.is_target) target_id_ = e.id;
  }
}

const Element& TargetLayout::element(int id) const {
  if (id < 0 || id >= static_cast<int>(elements_.size())) {
    throw InvalidInput("layout: no element " + std::to_string(id));
  }
  return elements_[static_cast<std::size_t>(id)];
}

void TargetLayout::set_target(int id) {
  element(id);
  elements_[static_cast<std::size_t>(target_id_)].is_target = false;
  elements_[static_cast<std::size_t>(id)].is_target = true;
  target_id_ = id;
}

TargetLayout generate_layout(std::uint64_t seed, const DeviceProfile& profile) {
  const Vec2i pt = profile.screen_pt;
  if (pt.x() <= 0 || pt.y() <= 0 || pt.x() % TargetLayout::kCols != 0 || pt.y() % TargetLayout::kRows != 0) {
    throw InvalidInput("layout: pt grid of '" + profile.name + "' does not split into 12 x 6 cells");
  }
  const double cw = static_cast<double>(pt.x() / TargetLayout::kCols);
  const double ch = static_cast<double>(pt.y() / TargetLayout::kRows);
  if (cw < 100.0 || ch < 100.0) throw InvalidInput("layout: cells smaller than the largest element");

  Rng rng = Rng::derive(seed, "layout");
  std::vector<Element> elements;
  elements.reserve(TargetLayout::kCount);
  for (int r = 0; r < TargetLayout::kRows; ++r) {
    for (int c = 0; c < TargetLayout::kCols; ++c) {
      const double size = rng.uniform_int(2) == 0 ? 50.0 : 100.0;
      Element e;
      e.id = r * TargetLayout::kCols + c;
      e.rect_pt.x = c * cw + rng.uniform() * (cw - size);
      e.rect_pt.y = r * ch + rng.uniform() * (ch - size);
      e.rect_pt.width = size;
      e.rect_pt.height = size;
      elements.push_back(e);
    }
  }
  elements[rng.uniform_int(TargetLayout::kCount)].is_target = true;
  return TargetLayout(seed, Vec2(cw, ch), std::move(elements));
}

int snap_to_nearest(const Vec2& p_pt, const TargetLayout& layout) {
  detail::require_finite(p_pt, "snap_to_nearest");
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  double best_c = std::numeric_limits<double>::infinity();
  for (const auto& e : layout.elements()) {
    const double d = e.rect_pt.squared_distance(p_pt);
    const double c = (p_pt - e.rect_pt.center()).squaredNorm();
    if (d < best_d || (d == best_d && c < best_c)) {
      best = e.id;
      best_d = d;
      best_c = c;
    }
  }
  return best;
}

std::optional<int> element_at(const Vec2& p_pt, const TargetLayout& layout) {
  for (const auto& e : layout.elements()) {
    if (e.rect_pt.contains(p_pt)) return e.id;
  }
  return std::nullopt;
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Inactive: return "Inactive";
    case Phase::Hover: return "Hover";
    case Phase::Locked: return "Locked";
    case Phase::Dragging: return "Dragging";
  }
  return "?";
}

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::GazeFrameArrived: return "GazeFrameArrived";
    case EventKind::TouchDown: return "TouchDown";
    case EventKind::TouchMove: return "TouchMove";
    case EventKind::TouchUp: return "TouchUp";
    case EventKind::DoubleTapEdge: return "DoubleTapEdge";
  }
  return "?";
}

std::string_view to_string(Gesture g) {
  switch (g) {
    case Gesture::DragRelease: return "DragRelease";
    case Gesture::TapOnly: return "TapOnly";
    case Gesture::Scroll: return "Scroll";
    case Gesture::ShortTapAtFinger: return "ShortTapAtFinger";
  }
  return "?";
}

EventKind parse_event_kind(std::string_view name) {
  for (EventKind k : kAllEventKinds) {
    if (to_string(k) == name) return k;
  }
  throw InvalidInput("unknown event kind '" + std::string(name) + "'");
}

Gesture parse_gesture(std::string_view name) {
  for (Gesture g : {Gesture::DragRelease, Gesture::TapOnly, Gesture::Scroll, Gesture::ShortTapAtFinger}) {
    if (to_string(g) == name) return g;
  }
  throw InvalidInput("unknown gesture '" + std::string(name) + "'");
}

InteractionEvent InteractionEvent::gaze(GazeFrame f) {
  InteractionEvent ev;
  ev.kind = EventKind::GazeFrameArrived;
  ev.t = f.timestamp_s;
  ev.frame = std::move(f);
  return ev;
}

namespace {

InteractionEvent touch(EventKind kind, double t, Vec2 p) {
  InteractionEvent ev;
  ev.kind = kind;
  ev.t = t;
  ev.point_pt = p;
  return ev;
}

}  // namespace

InteractionEvent InteractionEvent::touch_down(double t, Vec2 p) { return touch(EventKind::TouchDown, t, p); }
InteractionEvent InteractionEvent::touch_move(double t, Vec2 p) { return touch(EventKind::TouchMove, t, p); }
InteractionEvent InteractionEvent::touch_up(double t, Vec2 p) { return touch(EventKind::TouchUp, t, p); }

InteractionEvent InteractionEvent::double_tap_edge(double t) {
  InteractionEvent ev;
  ev.kind = EventKind::DoubleTapEdge;
  ev.t = t;
  return ev;
}

void to_json(nlohmann::json& j, const InteractionConfig& c) {
  j = nlohmann::json{
      {"gs_gain", c.gs_gain},
      {"pc_gain", c.pc_gain},
      {"tap_max_displacement_cm", c.tap_max_displacement_cm},
      {"tap_max_duration_s", c.tap_max_duration_s},
      {"double_tap_window_s", c.double_tap_window_s},
      {"double_tap_radius_cm", c.double_tap_radius_cm},
      {"scroll_min_length_fraction", c.scroll_min_length_fraction},
      {"scroll_min_speed_cm_s", c.scroll_min_speed_cm_s},
      {"filter", {{"min_cutoff_hz", c.filter.min_cutoff_hz}, {"beta", c.filter.beta}, {"d_cutoff_hz", c.filter.d_cutoff_hz}}},
  };
}

void merge_from_json(const nlohmann::json& j, InteractionConfig& c) {
  try {
    c.gs_gain = j.value("gs_gain", c.gs_gain);
    c.pc_gain = j.value("pc_gain", c.pc_gain);
    c.tap_max_displacement_cm = j.value("tap_max_displacement_cm", c.tap_max_displacement_cm);
    c.tap_max_duration_s = j.value("tap_max_duration_s", c.tap_max_duration_s);
    c.double_tap_window_s = j.value("double_tap_window_s", c.double_tap_window_s);
    c.double_tap_radius_cm = j.value("double_tap_radius_cm", c.double_tap_radius_cm);
    c.scroll_min_length_fraction = j.value("scroll_min_length_fraction", c.scroll_min_length_fraction);
    c.scroll_min_speed_cm_s = j.value("scroll_min_speed_cm_s", c.scroll_min_speed_cm_s);
    if (j.contains("filter")) {
      const auto& f = j.at("filter");
      c.filter.min_cutoff_hz = f.value("min_cutoff_hz", c.filter.min_cutoff_hz);
      c.filter.beta = f.value("beta", c.filter.beta);
      c.filter.d_cutoff_hz = f.value("d_cutoff_hz", c.filter.d_cutoff_hz);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("interaction config json: ") + e.what());
  }
  if (!(c.gs_gain > 0.0) || !(c.pc_gain > 0.0)) throw ConfigError("interaction config: gains must be positive");
  OneEuroFilter<double> check(c.filter);
}

double path_length_cm(std::span<const TouchPoint> path, const DeviceProfile& profile) {
  double length = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    length += screen_pt_to_cm(Vec2(path[i].pt - path[i - 1].pt), profile).norm();
  }
  return length;
}

Gesture classify_gesture(std::span<const TouchPoint> path, const DeviceProfile& profile,
                         const InteractionConfig& cfg, std::optional<PreviousTap> previous_tap) {
  if (path.empty()) throw InvalidInput("classify_gesture: empty touch path");
  const TouchPoint& first = path.front();
  const TouchPoint& last = path.back();
  const double displacement = screen_pt_to_cm(Vec2(last.pt - first.pt), profile).norm();
  const double duration = last.t - first.t;

  if (displacement < cfg.tap_max_displacement_cm && duration < cfg.tap_max_duration_s) {
    if (previous_tap && first.t - previous_tap->t_up <= cfg.double_tap_window_s &&
        screen_pt_to_cm(Vec2(first.pt - previous_tap->pt), profile).norm() <= cfg.double_tap_radius_cm) {
      return Gesture::ShortTapAtFinger;
    }
    return Gesture::TapOnly;
  }
  const double length = path_length_cm(path, profile);
  const double speed = duration > 0.0 ? length / duration : std::numeric_limits<double>::infinity();
  if (length > cfg.scroll_min_length_fraction * profile.physical_cm.y() && speed > cfg.scroll_min_speed_cm_s) {
    return Gesture::Scroll;
  }
  return Gesture::DragRelease;
}

namespace {

[[noreturn]] void reject(const InteractionEvent& ev, Phase phase) {
  throw ProtocolError(std::string(to_string(ev.kind)) + " not accepted in phase " + std::string(to_string(phase)));
}

void check_order(const InteractionEvent& ev, const std::optional<double>& last_t) {
  if (!std::isfinite(ev.t)) throw InvalidInput("event: non-finite timestamp");
  if (last_t && ev.t < *last_t) throw ProtocolError("event: timestamp earlier than the previous event");
  if (ev.kind != EventKind::GazeFrameArrived && ev.kind != EventKind::DoubleTapEdge) {
    detail::require_finite(ev.point_pt, "touch event");
  }
}

SelectionOutcome make_outcome(const Vec2& release_pt, const TargetLayout& layout, Gesture gesture,
                              std::span<const TouchPoint> path, const DeviceProfile& profile) {
  SelectionOutcome o;
  o.released_pos_pt = release_pt;
  o.hit_element = element_at(release_pt, layout);
  o.target_id = layout.target_id();
  o.success = layout.target().rect_pt.contains(release_pt);
  o.thumb_distance_cm = path_length_cm(path, profile);
  o.duration_s = path.back().t - path.front().t;
  o.gesture = gesture;
  return o;
}

}  // namespace

GazeSwipeEngine::GazeSwipeEngine(DeviceProfile profile, InteractionConfig cfg)
    : profile_(std::move(profile)), cfg_(cfg), pipeline_(profile_, cfg_.filter) {
  validate(profile_);
}

StepResult GazeSwipeEngine::handle(const InteractionEvent& ev, const TargetLayout& layout,
                                   const Calibrator& calibrator) {
  check_order(ev, last_t_);
  StepResult result;
  const Phase phase = state_.phase;
  switch (ev.kind) {
    case EventKind::DoubleTapEdge:
      if (phase == Phase::Inactive) {
        pipeline_.reset();
        latest_.reset();
        state_ = CursorState{};
        state_.phase = Phase::Hover;
        // Until the first gaze frame the cursor rests at the screen center.
        const Vec2 center_pt = profile_.screen_pt_size() / 2.0;
        state_.calibrated_cm = screen_pt_to_cm(center_pt, profile_);
        state_.raw_gaze_cm = state_.calibrated_cm;
        state_.snapped_element = snap_to_nearest(center_pt, layout);
      } else if (phase == Phase::Hover) {
        pipeline_.reset();
        latest_.reset();
        state_ = CursorState{};
      } else {
        reject(ev, phase);
      }
      result.state_changed = true;
      break;

    case EventKind::GazeFrameArrived:
      if (phase == Phase::Inactive) reject(ev, phase);
      if (!ev.frame) throw InvalidInput("GazeFrameArrived without a frame");
      if (ev.frame->timestamp_s != ev.t) throw InvalidInput("GazeFrameArrived: event and frame timestamps differ");
      result = on_gaze(ev, layout, calibrator);
      break;

    case EventKind::TouchDown:
      if (phase != Phase::Hover) reject(ev, phase);
      if (!latest_) throw ProtocolError("TouchDown before any gaze estimate");
      state_.phase = Phase::Locked;
      state_.locked_pos_pt = layout.element(*state_.snapped_element).rect_pt.center();
      state_.current_pos_pt = state_.locked_pos_pt;
      state_.touch_origin_pt = ev.point_pt;
      at_lock_ = latest_;
      path_.assign(1, TouchPoint{ev.t, ev.point_pt});
      result.state_changed = true;
      break;

    case EventKind::TouchMove:
      if (phase != Phase::Locked && phase != Phase::Dragging) reject(ev, phase);
      state_.phase = Phase::Dragging;
      state_.current_pos_pt = *state_.locked_pos_pt + cfg_.gs_gain * (ev.point_pt - *state_.touch_origin_pt);
      path_.push_back(TouchPoint{ev.t, ev.point_pt});
      result.state_changed = true;
      break;

    case EventKind::TouchUp:
      if (phase != Phase::Locked && phase != Phase::Dragging) reject(ev, phase);
      result = on_touch_up(ev, layout);
      break;
  }
  last_t_ = ev.t;
  return result;
}

void GazeSwipeEngine::restart_gaze_stream() {
  if (state_.phase != Phase::Hover) throw ProtocolError("gaze stream restart outside Hover");
  pipeline_.reset();
}

StepResult GazeSwipeEngine::on_gaze(const InteractionEvent& ev, const TargetLayout& layout,
                                    const Calibrator& calibrator) {
  const GazeEstimate estimate = pipeline_.process(*ev.frame, calibrator);
  latest_ = estimate;
  state_.raw_gaze_cm = estimate.estimated_cm;
  state_.calibrated_cm = estimate.calibrated_cm;
  if (state_.phase == Phase::Hover) {
    state_.snapped_element = snap_to_nearest(screen_cm_to_pt(estimate.calibrated_cm, profile_), layout);
  }
  StepResult r;
  r.state_changed = true;
  return r;
}

StepResult GazeSwipeEngine::on_touch_up(const InteractionEvent& ev, const TargetLayout& layout) {
  std::vector<TouchPoint> path = path_;
  path.push_back(TouchPoint{ev.t, ev.point_pt});
  const Gesture gesture = classify_gesture(path, profile_, cfg_, previous_tap_);

  StepResult r;
  r.state_changed = true;
  r.gesture = gesture;
  const Vec2 drag_end = *state_.locked_pos_pt + cfg_.gs_gain * (ev.point_pt - *state_.touch_origin_pt);
  switch (gesture) {
    case Gesture::TapOnly:
    case Gesture::DragRelease: {
      const Vec2 release = gesture == Gesture::TapOnly ? *state_.locked_pos_pt : drag_end;
      r.outcome = make_outcome(release, layout, gesture, path, profile_);
      r.outcome->gaze_at_lock_cm = at_lock_->calibrated_cm;
      CalibrationSample s;
      s.g_est_cm = at_lock_->estimated_cm;
      s.g_gt_cm = screen_pt_to_cm(release, profile_);
      s.head_pose = at_lock_->head_pose;
      s.timestamp_s = ev.t;
      s.trial_id = next_trial_id_++;
      r.sample = s;
      if (gesture == Gesture::TapOnly) {
        previous_tap_ = PreviousTap{ev.t, path.front().pt};
      } else {
        previous_tap_.reset();
      }
      break;
    }
    case Gesture::ShortTapAtFinger:
      r.outcome = make_outcome(ev.point_pt, layout, gesture, path, profile_);
      previous_tap_.reset();
      break;
    case Gesture::Scroll:
      previous_tap_.reset();
      break;
  }

  state_.phase = Phase::Hover;
  state_.locked_pos_pt.reset();
  state_.current_pos_pt.reset();
  state_.touch_origin_pt.reset();
  at_lock_.reset();
  path_.clear();
  return r;
}

PureCursorEngine::PureCursorEngine(DeviceProfile profile, InteractionConfig cfg)
    : profile_(std::move(profile)), cfg_(cfg) {
  validate(profile_);
  state_.phase = Phase::Hover;
}

StepResult PureCursorEngine::handle(const InteractionEvent& ev, const TargetLayout& layout) {
  check_order(ev, last_t_);
  StepResult r;
  const Phase phase = state_.phase;
  switch (ev.kind) {
    case EventKind::DoubleTapEdge:
      if (phase == Phase::Inactive) {
        state_.phase = Phase::Hover;
      } else if (phase == Phase::Hover) {
        state_.phase = Phase::Inactive;
      } else {
        reject(ev, phase);
      }
      r.state_changed = true;
      break;

    case EventKind::GazeFrameArrived:
      if (phase == Phase::Inactive) reject(ev, phase);
      if (!ev.frame) throw InvalidInput("GazeFrameArrived without a frame");
      validate(*ev.frame);
      break;

    case EventKind::TouchDown:
      if (phase != Phase::Hover) reject(ev, phase);
      state_.phase = Phase::Locked;
      state_.locked_pos_pt = ev.point_pt;
      state_.current_pos_pt = ev.point_pt;
      state_.touch_origin_pt = ev.point_pt;
      path_.assign(1, TouchPoint{ev.t, ev.point_pt});
      r.state_changed = true;
      break;

    case EventKind::TouchMove:
      if (phase != Phase::Locked && phase != Phase::Dragging) reject(ev, phase);
      state_.phase = Phase::Dragging;
      state_.current_pos_pt = *state_.touch_origin_pt + cfg_.pc_gain * (ev.point_pt - *state_.touch_origin_pt);
      path_.push_back(TouchPoint{ev.t, ev.point_pt});
      r.state_changed = true;
      break;

    case EventKind::TouchUp: {
      if (phase != Phase::Locked && phase != Phase::Dragging) reject(ev, phase);
      path_.push_back(TouchPoint{ev.t, ev.point_pt});
      const Gesture gesture = classify_gesture(path_, profile_, cfg_);
      const Vec2 cursor = *state_.touch_origin_pt + cfg_.pc_gain * (ev.point_pt - *state_.touch_origin_pt);
      r.gesture = gesture;
      if (gesture != Gesture::Scroll) r.outcome = make_outcome(cursor, layout, gesture, path_, profile_);
      state_.phase = Phase::Hover;
      state_.locked_pos_pt.reset();
      state_.current_pos_pt.reset();
      state_.touch_origin_pt.reset();
      path_.clear();
      r.state_changed = true;
      break;
    }
  }
  last_t_ = ev.t;
  return r;
}

void to_json(nlohmann::json& j, const InteractionEvent& ev) {
  if (ev.kind == EventKind::GazeFrameArrived) {
    if (!ev.frame) throw InvalidInput("GazeFrameArrived without a frame");
    j = nlohmann::json(*ev.frame);
    j["kind"] = to_string(ev.kind);
    return;
  }
  j = nlohmann::json{{"kind", to_string(ev.kind)}, {"t", ev.t}};
  if (ev.kind != EventKind::DoubleTapEdge) {
    j["x_pt"] = ev.point_pt.x();
    j["y_pt"] = ev.point_pt.y();
  }
}

void from_json(const nlohmann::json& j, InteractionEvent& ev) {
  try {
    ev = InteractionEvent{};
    ev.kind = parse_event_kind(j.at("kind").get<std::string>());
    if (ev.kind == EventKind::GazeFrameArrived) {
      ev.frame = j.get<GazeFrame>();
      ev.t = ev.frame->timestamp_s;
      return;
    }
    ev.t = j.at("t").get<double>();
    if (ev.kind != EventKind::DoubleTapEdge) {
      ev.point_pt = Vec2(j.at("x_pt").get<double>(), j.at("y_pt").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("event json: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const SelectionOutcome& o) {
  j = nlohmann::json{
      {"released_pt", {o.released_pos_pt.x(), o.released_pos_pt.y()}},
      {"hit_id", nullptr},
      {"target_id", o.target_id},
      {"success", o.success},
      {"thumb_distance_cm", o.thumb_distance_cm},
      {"duration_s", o.duration_s},
      {"gesture", to_string(o.gesture)},
  };
  if (o.hit_element) j["hit_id"] = *o.hit_element;
  if (o.gaze_at_lock_cm) j["gaze_at_lock_cm"] = {o.gaze_at_lock_cm->x(), o.gaze_at_lock_cm->y()};
}

void write_event_log(std::ostream& out, const std::vector<EventLogRecord>& records) {
  for (const auto& rec : records) {
    nlohmann::json j;
    if (const auto* ev = std::get_if<InteractionEvent>(&rec)) {
      j = *ev;
    } else {
      const auto& tc = std::get<TargetChange>(rec);
      j = nlohmann::json{{"kind", "SetTarget"}, {"t", tc.t}, {"target_id", tc.target_id}};
    }
    out << j.dump() << '\n';
  }
}

std::vector<EventLogRecord> read_event_log(std::istream& in) {
  std::vector<EventLogRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      if (j.at("kind") == "SetTarget") {
        records.emplace_back(TargetChange{j.at("t").get<double>(), j.at("target_id").get<int>()});
        continue;
      }
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInput("event log line " + std::to_string(line_no) + ": " + e.what());
    }
    records.emplace_back(j.get<InteractionEvent>());
  }
  return records;
}

std::vector<StepResult> replay_event_log(const std::vector<EventLogRecord>& records, const DeviceProfile& profile,
                                         std::uint64_t layout_seed, Calibrator& calibrator,
                                         const InteractionConfig& cfg) {
  TargetLayout layout = generate_layout(layout_seed, profile);
  GazeSwipeEngine engine(profile, cfg);
  std::vector<StepResult> results;
  results.reserve(records.size());
  for (const auto& rec : records) {
    if (const auto* tc = std::get_if<TargetChange>(&rec)) {
      layout.set_target(tc->target_id);
      results.push_back(StepResult{});
      continue;
    }
    StepResult r = engine.handle(std::get<InteractionEvent>(rec), layout, calibrator);
    if (r.sample) calibrator.offer(*r.sample);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace gazeswipe
