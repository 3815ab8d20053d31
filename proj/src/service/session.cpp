#include <algorithm>
#include <cmath>
#include <string>

#include "gazeswipe/service.hpp"

namespace gazeswipe {

std::string_view to_string(GazeMode m) { return m == GazeMode::Synthetic ? "synthetic" : "client-proxy"; }

GazeMode parse_gaze_mode(std::string_view name) {
  if (name == "synthetic") return GazeMode::Synthetic;
  if (name == "client-proxy") return GazeMode::ClientProxy;
  throw ConfigError("unknown gaze mode '" + std::string(name) + "'");
}

SessionRequest session_request_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("session request must be a JSON object");
  SessionRequest r;
  try {
    r.profile = j.value("profile", r.profile);
    if (j.contains("strategy")) r.strategy = parse_strategy(j.at("strategy").get<std::string>());
    if (j.contains("technique")) r.technique = parse_technique(j.at("technique").get<std::string>());
    r.seed = j.value("seed", r.seed);
    if (j.contains("gaze_mode")) r.gaze_mode = parse_gaze_mode(j.at("gaze_mode").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("session request: ") + e.what());
  }
  profile_by_name(r.profile);
  return r;
}

namespace {

nlohmann::json vec_json(const Vec2& v) { return {v.x(), v.y()}; }

CalibratorConfig calibrator_config(Strategy s) {
  CalibratorConfig c;
  c.strategy = s;
  return c;
}

std::optional<double> number_field(const nlohmann::json& msg, const char* key) {
  if (!msg.contains(key) || !msg.at(key).is_number()) return std::nullopt;
  const double v = msg.at(key).get<double>();
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

Session::Session(std::string id, const SessionRequest& request)
    : id_(std::move(id)),
      request_(request),
      profile_(profile_by_name(request.profile)),
      sim_(default_experiment_config(request.profile)),
      rng_(request.seed),
      participant_(draw_participant(sim_.gaze, sim_.user, rng_.user)),
      layout_(generate_layout(request.seed, profile_)),
      calibrator_(calibrator_config(request.strategy)),
      gs_(profile_, sim_.interaction),
      pc_(profile_, sim_.interaction) {
  previous_target_ = layout_.target_id();
  set_strategy(request.strategy);
}

nlohmann::json Session::descriptor() const {
  nlohmann::json elements = nlohmann::json::array();
  for (const auto& e : layout_.elements()) {
    elements.push_back({{"id", e.id},
                        {"x", e.rect_pt.x},
                        {"y", e.rect_pt.y},
                        {"width", e.rect_pt.width},
                        {"height", e.rect_pt.height},
                        {"is_target", e.is_target}});
  }
  return {
      {"id", id_},
      {"profile", profile_},
      {"strategy", to_string(calibrator_.config().strategy)},
      {"technique", to_string(request_.technique)},
      {"seed", request_.seed},
      {"gaze_mode", to_string(request_.gaze_mode)},
      {"layout",
       {{"rows", TargetLayout::kRows},
        {"cols", TargetLayout::kCols},
        {"cell_pt", vec_json(layout_.cell_size_pt())},
        {"target_id", layout_.target_id()},
        {"elements", elements}}},
  };
}

nlohmann::json Session::envelope(std::string type, nlohmann::json payload) {
  payload["type"] = std::move(type);
  payload["seq"] = ++seq_;
  return payload;
}

nlohmann::json Session::error(const char* code, const std::string& message) {
  return envelope("error", {{"code", code}, {"message", message}});
}

nlohmann::json Session::cursor_state_message() {
  const CursorState& s = request_.technique == Technique::GazeSwipe ? gs_.state() : pc_.state();
  nlohmann::json current = nullptr;
  if (s.current_pos_pt) {
    current = vec_json(*s.current_pos_pt);
  } else if (s.phase == Phase::Hover && s.snapped_element && request_.technique == Technique::GazeSwipe) {
    current = vec_json(layout_.element(*s.snapped_element).rect_pt.center());
  }
  return envelope("cursor_state", {
                                      {"phase", to_string(s.phase)},
                                      {"snapped_id", s.snapped_element ? nlohmann::json(*s.snapped_element) : nlohmann::json(nullptr)},
                                      {"current_pt", current},
                                      {"calibrated_cm", vec_json(s.calibrated_cm)},
                                      {"target_id", layout_.target_id()},
                                  });
}

std::vector<nlohmann::json> Session::handle_text(std::string_view text) {
  nlohmann::json msg;
  try {
    msg = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    return {error(error_code::kMalformed, std::string("not JSON: ") + e.what())};
  }
  return handle_message(msg);
}

std::vector<nlohmann::json> Session::handle_message(const nlohmann::json& msg) {
  if (!msg.is_object() || !msg.contains("type") || !msg.at("type").is_string()) {
    return {error(error_code::kMalformed, "message must be an object with a string 'type'")};
  }
  const std::string type = msg.at("type").get<std::string>();
  try {
    return dispatch(type, msg);
  } catch (const ProtocolError& e) {
    return {error(error_code::kProtocol, e.what())};
  } catch (const Error& e) {
    return {error(error_code::kInvalid, e.what())};
  }
}

std::vector<nlohmann::json> Session::dispatch(const std::string& type, const nlohmann::json& msg) {
  if (type == "metrics_snapshot") return {metrics_snapshot()};
  if (type == "set_strategy") {
    if (!msg.contains("strategy") || !msg.at("strategy").is_string()) {
      return {error(error_code::kMalformed, "set_strategy needs a string 'strategy'")};
    }
    Strategy s;
    try {
      s = parse_strategy(msg.at("strategy").get<std::string>());
    } catch (const ConfigError& e) {
      return {error(error_code::kInvalid, e.what())};
    }
    set_strategy(s);
    return {envelope("set_strategy", {{"strategy", to_string(s)}, {"store_size", calibrator_.store().size()}})};
  }

  std::optional<EventKind> kind;
  if (type == "gaze_frame") kind = EventKind::GazeFrameArrived;
  if (type == "touch_down") kind = EventKind::TouchDown;
  if (type == "touch_move") kind = EventKind::TouchMove;
  if (type == "touch_up") kind = EventKind::TouchUp;
  if (type == "double_tap_edge") kind = EventKind::DoubleTapEdge;
  if (!kind) return {error(error_code::kUnknownType, "unknown message type '" + type + "'")};

  const auto t = number_field(msg, "t");
  if (!t) return {error(error_code::kMalformed, type + " needs a finite numeric 't'")};
  if (last_t_ && *t < *last_t_) return {error(error_code::kTimestamp, "timestamp earlier than the previous message")};

  std::vector<nlohmann::json> out;
  if (*kind == EventKind::GazeFrameArrived) {
    if (last_gaze_t_ && !(*t > *last_gaze_t_)) {
      return {error(error_code::kTimestamp, "gaze frame timestamps must strictly increase")};
    }
    out = on_gaze(*t, msg);
  } else if (*kind == EventKind::DoubleTapEdge) {
    if (request_.technique == Technique::GazeSwipe) {
      gs_.handle(InteractionEvent::double_tap_edge(*t), layout_, calibrator_);
    } else {
      pc_.handle(InteractionEvent::double_tap_edge(*t), layout_);
    }
    out.push_back(cursor_state_message());
  } else {
    out = on_touch(*kind, *t, msg);
  }
  if (!out.empty() && out.front().at("type") == "error") return out;
  last_t_ = *t;
  if (*kind == EventKind::GazeFrameArrived) last_gaze_t_ = *t;
  if (!target_shown_t_) target_shown_t_ = *t;
  return out;
}

void Session::begin_fixation() {
  const Vec2 target_cm = screen_pt_to_cm(layout_.target().rect_pt.center(), profile_);
  fixation_cm_ = target_cm + rng_.motor.normal2(sim_.user.fixation_jitter_cm);
  fixation_pose_ = pose_walk_step(participant_.posture, sim_.user.fixation_pose_jitter, rng_.pose);
  if (gs_.state().phase == Phase::Hover) gs_.restart_gaze_stream();
}

std::vector<nlohmann::json> Session::on_gaze(double t, const nlohmann::json& msg) {
  Vec2 true_gaze_cm;
  Vec3 pose = participant_.posture;
  if (request_.gaze_mode == GazeMode::ClientProxy) {
    const auto x = number_field(msg, "x_cm");
    const auto y = number_field(msg, "y_cm");
    if (!x || !y) return {error(error_code::kMalformed, "gaze_frame needs numeric 'x_cm' and 'y_cm'")};
    true_gaze_cm = Vec2(*x, *y);
    if (msg.contains("head_pose") && !msg.at("head_pose").is_null()) {
      const auto& h = msg.at("head_pose");
      if (!h.is_array() || h.size() != 3 || !h.at(0).is_number() || !h.at(1).is_number() || !h.at(2).is_number()) {
        return {error(error_code::kMalformed, "head_pose must be [x, y, z] or null")};
      }
      pose = Vec3(h.at(0).get<double>(), h.at(1).get<double>(), h.at(2).get<double>());
      if (!is_unit(pose)) return {error(error_code::kInvalid, "head_pose must be a unit vector")};
    }
  }

  if (request_.technique == Technique::PureCursor) {
    if (pc_.state().phase == Phase::Inactive) throw ProtocolError("gaze_frame while inactive");
    return {};
  }
  if (gs_.state().phase == Phase::Inactive) throw ProtocolError("gaze_frame while inactive");

  if (request_.gaze_mode == GazeMode::Synthetic) {
    if (!fixation_cm_) begin_fixation();
    true_gaze_cm = *fixation_cm_;
    pose = fixation_pose_;
  }
  GazeFrame frame = synthetic_frame(true_gaze_cm, t, participant_.gaze, pose, profile_, rng_.noise);
  gs_.handle(InteractionEvent::gaze(std::move(frame)), layout_, calibrator_);
  return {cursor_state_message()};
}

std::vector<nlohmann::json> Session::on_touch(EventKind kind, double t, const nlohmann::json& msg) {
  const auto x = number_field(msg, "x_pt");
  const auto y = number_field(msg, "y_pt");
  if (!x || !y) return {error(error_code::kMalformed, "touch messages need numeric 'x_pt' and 'y_pt'")};
  const Vec2 p(*x, *y);
  InteractionEvent ev;
  switch (kind) {
    case EventKind::TouchDown: ev = InteractionEvent::touch_down(t, p); break;
    case EventKind::TouchMove: ev = InteractionEvent::touch_move(t, p); break;
    default: ev = InteractionEvent::touch_up(t, p); break;
  }

  StepResult r;
  if (request_.technique == Technique::GazeSwipe) {
    const std::optional<Vec2> lock_gaze = gs_.state().calibrated_cm;
    r = gs_.handle(ev, layout_, calibrator_);
    if (kind == EventKind::TouchDown) gaze_at_lock_cm_ = lock_gaze;
  } else {
    r = pc_.handle(ev, layout_);
  }
  std::vector<nlohmann::json> out{cursor_state_message()};
  if (r.outcome) {
    auto more = on_selection(r, t);
    out.insert(out.end(), more.begin(), more.end());
  }
  return out;
}

std::vector<nlohmann::json> Session::on_selection(const StepResult& r, double t) {
  const SelectionOutcome& o = *r.outcome;
  TrialRecord rec;
  rec.trial_idx = static_cast<std::int64_t>(records_.size());
  rec.seed = request_.seed;
  rec.device = profile_.name;
  rec.strategy = std::string(to_string(calibrator_.config().strategy));
  rec.technique = std::string(to_string(request_.technique));
  const Vec2 release_cm = screen_pt_to_cm(o.released_pos_pt, profile_);
  rec.gaze_error_cm = request_.technique == Technique::GazeSwipe && gaze_at_lock_cm_
                          ? gaze_error(*gaze_at_lock_cm_, release_cm)
                          : 0.0;
  rec.thumb_distance_cm = o.thumb_distance_cm;
  // Time since the target was presented: the previous selection, or the session's first event.
  rec.completion_time_s = t - target_shown_t_.value_or(t);
  rec.timestamp_s = t;
  target_shown_t_ = t;
  rec.success = o.success;
  rec.gesture = std::string(to_string(o.gesture));

  std::vector<nlohmann::json> out;
  nlohmann::json selection = o;
  std::optional<nlohmann::json> sample_msg;
  if (r.sample) {
    const bool stored = calibrator_.offer(*r.sample);
    const Vec2 offset = r.sample->offset();
    sample_msg = nlohmann::json{{"g_est_cm", vec_json(r.sample->g_est_cm)},
                                {"g_gt_cm", vec_json(r.sample->g_gt_cm)},
                                {"offset_cm", vec_json(offset)},
                                {"offset_norm_cm", offset.norm()},
                                {"stored", stored},
                                {"store_size", calibrator_.store().size()}};
  }
  advance_posture(participant_, sim_.user, rng_.pose);
  pick_next_target();
  selection["next_target_id"] = layout_.target_id();
  out.push_back(envelope("selection", std::move(selection)));
  if (sample_msg) out.push_back(envelope("sample_recorded", std::move(*sample_msg)));
  records_.push_back(std::move(rec));
  gaze_at_lock_cm_.reset();
  return out;
}

void Session::pick_next_target() {
  const auto n = static_cast<std::uint64_t>(layout_.elements().size());
  int id;
  do {
    id = static_cast<int>(rng_.targets.uniform_int(n));
  } while (n > 1 && id == previous_target_);
  previous_target_ = id;
  layout_.set_target(id);
  fixation_cm_.reset();
}

void Session::set_strategy(Strategy s) {
  calibrator_.set_strategy(s);
  if (s == Strategy::EC) {
    double t = 0.0;
    calibrator_.reset(simulate_explicit_calibration(profile_, participant_, sim_.user, sim_.interaction.filter,
                                                    rng_.explicit_calibration, t));
  }
}

nlohmann::json Session::metrics_snapshot() {
  nlohmann::json strategies = nlohmann::json::object();
  for (const auto& r : records_) {
    auto& g = strategies[r.strategy];
    if (g.is_null()) g = {{"count", 0}, {"mean_gaze_error_cm", 0.0}, {"mean_thumb_distance_cm", 0.0}, {"success_rate", 0.0}};
    const double n = g["count"].get<double>();
    auto update = [&](const char* key, double v) { g[key] = (g[key].get<double>() * n + v) / (n + 1.0); };
    update("mean_gaze_error_cm", r.gaze_error_cm);
    update("mean_thumb_distance_cm", r.thumb_distance_cm);
    update("success_rate", r.success ? 1.0 : 0.0);
    g["count"] = g["count"].get<int>() + 1;
  }

  const std::string current(to_string(calibrator_.config().strategy));
  std::vector<double> errors;
  for (const auto& r : records_) {
    if (r.strategy == current) errors.push_back(r.gaze_error_cm);
  }
  nlohmann::json window = nlohmann::json::array();
  if (errors.size() >= 16) {
    for (const auto& p : sliding_window_error(errors)) window.push_back({p.center_idx, p.mean_error});
  }
  nlohmann::json summary = nullptr;
  if (!records_.empty()) summary = summarize(records_);
  return envelope("metrics_snapshot", {{"strategies", strategies},
                                       {"current_strategy", current},
                                       {"window", window},
                                       {"summary", summary}});
}

nlohmann::json SessionManager::create(const nlohmann::json& request) {
  const SessionRequest r = session_request_from_json(request);
  std::lock_guard lock(mutex_);
  const std::string id = "session-" + std::to_string(next_id_);
  auto slot = std::make_shared<Slot>();
  slot->session = std::make_unique<Session>(id, r);
  nlohmann::json descriptor = slot->session->descriptor();
  sessions_.emplace(id, std::move(slot));
  ++next_id_;
  return descriptor;
}

bool SessionManager::close(const std::string& id) {
  std::lock_guard lock(mutex_);
  return sessions_.erase(id) > 0;
}

nlohmann::json SessionManager::list() const {
  std::lock_guard lock(mutex_);
  nlohmann::json ids = nlohmann::json::array();
  for (const auto& [id, slot] : sessions_) ids.push_back(id);
  return {{"sessions", ids}};
}

bool SessionManager::with_session(const std::string& id, const std::function<void(Session&)>& fn) {
  std::shared_ptr<Slot> slot;
  {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return false;
    slot = it->second;
  }
  std::lock_guard lock(slot->mutex);
  fn(*slot->session);
  return true;
}

}  // namespace gazeswipe
