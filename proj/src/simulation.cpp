#include "gazeswipe/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gazeswipe {

std::string_view to_string(Technique t) { return t == Technique::GazeSwipe ? "GazeSwipe" : "PureCursor"; }

Technique parse_technique(std::string_view name) {
  if (name == "GazeSwipe") return Technique::GazeSwipe;
  if (name == "PureCursor") return Technique::PureCursor;
  throw ConfigError("unknown technique '" + std::string(name) + "'");
}

void validate(const SimulatedUser& u) {
  if (!(u.fixation_jitter_cm >= 0.0) || !(u.motor_noise_cm >= 0.0) || !(u.reaction_time_s > 0.0) ||
      !(u.initial_posture_sigma >= 0.0) || !(u.posture_settle_trials >= 0.0) || !(u.fixation_pose_jitter >= 0.0) ||
      !(u.inter_trial_gap_s >= 0.0)) {
    throw ConfigError("simulated user: values must be nonnegative and reaction time positive");
  }
  if (!(u.drag_speed_cm_s > 0.0)) throw ConfigError("simulated user: drag speed must be positive");
  if (u.settle_frames < 1) throw ConfigError("simulated user: settle_frames must be at least 1");
  if (!u.thumb_home_fraction.allFinite()) throw ConfigError("simulated user: non-finite thumb home");
}

void to_json(nlohmann::json& j, const SimulatedUser& u) {
  j = nlohmann::json{
      {"fixation_jitter_cm", u.fixation_jitter_cm},
      {"motor_noise_cm", u.motor_noise_cm},
      {"reaction_time_s", u.reaction_time_s},
      {"drag_speed_cm_s", u.drag_speed_cm_s},
      {"settle_frames", u.settle_frames},
      {"initial_posture_sigma", u.initial_posture_sigma},
      {"posture_settle_trials", u.posture_settle_trials},
      {"fixation_pose_jitter", u.fixation_pose_jitter},
      {"thumb_home_fraction", {u.thumb_home_fraction.x(), u.thumb_home_fraction.y()}},
      {"inter_trial_gap_s", u.inter_trial_gap_s},
  };
}

void merge_from_json(const nlohmann::json& j, SimulatedUser& u) {
  try {
    u.fixation_jitter_cm = j.value("fixation_jitter_cm", u.fixation_jitter_cm);
    u.motor_noise_cm = j.value("motor_noise_cm", u.motor_noise_cm);
    u.reaction_time_s = j.value("reaction_time_s", u.reaction_time_s);
    u.drag_speed_cm_s = j.value("drag_speed_cm_s", u.drag_speed_cm_s);
    u.settle_frames = j.value("settle_frames", u.settle_frames);
    u.initial_posture_sigma = j.value("initial_posture_sigma", u.initial_posture_sigma);
    u.posture_settle_trials = j.value("posture_settle_trials", u.posture_settle_trials);
    u.fixation_pose_jitter = j.value("fixation_pose_jitter", u.fixation_pose_jitter);
    u.inter_trial_gap_s = j.value("inter_trial_gap_s", u.inter_trial_gap_s);
    if (j.contains("thumb_home_fraction")) {
      const auto& h = j.at("thumb_home_fraction");
      u.thumb_home_fraction = Vec2(h.at(0).get<double>(), h.at(1).get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("simulated user json: ") + e.what());
  }
  validate(u);
}

ExperimentConfig default_experiment_config(std::string_view device) {
  ExperimentConfig cfg;
  profile_by_name(device);
  cfg.device = std::string(device);
  cfg.gaze = default_gaze_model(device);
  return cfg;
}

void validate(const ExperimentConfig& cfg) {
  profile_by_name(cfg.device);
  if (cfg.strategies.empty()) throw ConfigError("experiment: no strategies");
  if (cfg.seeds.empty()) throw ConfigError("experiment: no seeds");
  if (cfg.targets_per_condition < 1) throw ConfigError("experiment: targets_per_condition must be at least 1");
  validate(cfg.user);
  validate(cfg.calibrator);
  if (!(cfg.interaction.gs_gain > 0.0) || !(cfg.interaction.pc_gain > 0.0)) {
    throw ConfigError("experiment: gains must be positive");
  }
}

void to_json(nlohmann::json& j, const ExperimentConfig& cfg) {
  nlohmann::json strategies = nlohmann::json::array();
  for (Strategy s : cfg.strategies) strategies.push_back(to_string(s));
  j = nlohmann::json{
      {"device", cfg.device},
      {"strategies", strategies},
      {"technique", to_string(cfg.technique)},
      {"targets_per_condition", cfg.targets_per_condition},
      {"seeds", cfg.seeds},
      {"gaze", cfg.gaze},
      {"user", cfg.user},
      {"interaction", cfg.interaction},
      {"calibrator",
       {{"epsilon_cm", cfg.calibrator.epsilon_cm},
        {"weighting_mode", to_string(cfg.calibrator.weighting_mode)},
        {"clamp_negative_cosine", cfg.calibrator.clamp_negative_cosine}}},
  };
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  ExperimentConfig cfg;
  try {
    cfg = default_experiment_config(j.value("device", std::string("phone")));
    if (j.contains("strategies")) {
      cfg.strategies.clear();
      for (const auto& s : j.at("strategies")) cfg.strategies.push_back(parse_strategy(s.get<std::string>()));
    }
    if (j.contains("technique")) cfg.technique = parse_technique(j.at("technique").get<std::string>());
    cfg.targets_per_condition = j.value("targets_per_condition", cfg.targets_per_condition);
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("gaze")) merge_from_json(j.at("gaze"), cfg.gaze);
    if (j.contains("user")) merge_from_json(j.at("user"), cfg.user);
    if (j.contains("interaction")) merge_from_json(j.at("interaction"), cfg.interaction);
    if (j.contains("calibrator")) {
      const auto& c = j.at("calibrator");
      cfg.calibrator.epsilon_cm = c.value("epsilon_cm", cfg.calibrator.epsilon_cm);
      if (c.contains("weighting_mode")) {
        cfg.calibrator.weighting_mode = parse_weighting_mode(c.at("weighting_mode").get<std::string>());
      }
      cfg.calibrator.clamp_negative_cosine = c.value("clamp_negative_cosine", cfg.calibrator.clamp_negative_cosine);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config json: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

SimulationStreams::SimulationStreams(std::uint64_t seed)
    : user(Rng::derive(seed, "user")),
      targets(Rng::derive(seed, "targets")),
      pose(Rng::derive(seed, "pose")),
      noise(Rng::derive(seed, "noise")),
      motor(Rng::derive(seed, "motor")),
      explicit_calibration(Rng::derive(seed, "explicit-calibration")) {}

Participant draw_participant(const GazeModel& model, const SimulatedUser& user, Rng& rng) {
  Participant p;
  p.gaze = model.draw_user(rng);
  p.posture = pose_walk_step(model.base_pose, user.initial_posture_sigma, rng);
  return p;
}

void advance_posture(Participant& participant, const SimulatedUser& user, Rng& rng) {
  const Vec3& base = participant.gaze.base_pose;
  Vec3& posture = participant.posture;
  if (user.posture_settle_trials > 0.0) {
    const double rate = std::min(1.0, 1.0 / user.posture_settle_trials);
    const Vec3 relaxed = posture + rate * (base - posture);
    if (relaxed.norm() > 1e-9) posture = relaxed.normalized();
  }
  posture = pose_walk_step(posture, participant.gaze.pose_walk_sigma, rng);
}

SampleStore simulate_explicit_calibration(const DeviceProfile& profile, const Participant& participant,
                                          const SimulatedUser& user, const OneEuroParams& filter, Rng& rng,
                                          double& t) {
  const auto targets = explicit_calibration_targets_pt(profile);
  std::vector<Vec2> observed;
  std::vector<Vec3> poses;
  const Calibrator uncalibrated;
  const double dt = 1.0 / participant.gaze.frame_rate_hz;
  for (const Vec2& target_pt : targets) {
    const Vec3 pose = pose_walk_step(participant.posture, user.fixation_pose_jitter, rng);
    const Vec2 fixation = screen_pt_to_cm(target_pt, profile) + rng.normal2(user.fixation_jitter_cm);
    GazePipeline pipeline(profile, filter);
    GazeEstimate e;
    for (int k = 0; k < user.settle_frames; ++k) {
      t += dt;
      e = pipeline.process(synthetic_frame(fixation, t, participant.gaze, pose, profile, rng), uncalibrated);
    }
    observed.push_back(e.estimated_cm);
    poses.push_back(pose);
  }
  return build_explicit_calibration(profile, targets, observed, poses);
}

TrialRunner::TrialRunner(const ExperimentConfig& cfg, std::uint64_t seed, Strategy strategy)
    : cfg_(cfg),
      seed_(seed),
      strategy_(strategy),
      profile_(profile_by_name(cfg.device)),
      rng_(seed),
      participant_(draw_participant(cfg.gaze, cfg.user, rng_.user)),
      layout_(generate_layout(seed, profile_)),
      calibrator_([&] {
        CalibratorConfig c = cfg.calibrator;
        c.strategy = strategy;
        return c;
      }()),
      gs_(profile_, cfg.interaction),
      pc_(profile_, cfg.interaction) {
  gs_.handle(InteractionEvent::double_tap_edge(t_), layout_, calibrator_);
}

void TrialRunner::stream_fixation(const Vec2& true_gaze_cm, const Vec3& pose) {
  gs_.restart_gaze_stream();
  const double dt = 1.0 / participant_.gaze.frame_rate_hz;
  for (int k = 0; k < cfg_.user.settle_frames; ++k) {
    t_ += dt;
    GazeFrame f = synthetic_frame(true_gaze_cm, t_, participant_.gaze, pose, profile_, rng_.noise);
    gs_.handle(InteractionEvent::gaze(std::move(f)), layout_, calibrator_);
  }
}

void TrialRunner::run_explicit_calibration() {
  calibrator_.reset(simulate_explicit_calibration(profile_, participant_, cfg_.user, cfg_.interaction.filter,
                                                  rng_.explicit_calibration, t_));
}

void TrialRunner::advance_posture() { gazeswipe::advance_posture(participant_, cfg_.user, rng_.pose); }

int TrialRunner::next_target() {
  const auto n = static_cast<std::uint64_t>(layout_.elements().size());
  int id;
  do {
    id = static_cast<int>(rng_.targets.uniform_int(n));
  } while (n > 1 && id == previous_target_);
  previous_target_ = id;
  return id;
}

std::vector<InteractionEvent> TrialRunner::drag_path(double t_down, const Vec2& from_pt, const Vec2& to_pt) const {
  constexpr int kSegments = 4;
  const double length_cm = screen_pt_to_cm(Vec2(to_pt - from_pt), profile_).norm();
  const double duration = length_cm / cfg_.user.drag_speed_cm_s;
  std::vector<InteractionEvent> events;
  for (int k = 1; k < kSegments; ++k) {
    const double f = static_cast<double>(k) / kSegments;
    events.push_back(InteractionEvent::touch_move(t_down + f * duration, from_pt + f * (to_pt - from_pt)));
  }
  events.push_back(InteractionEvent::touch_up(t_down + duration, to_pt));
  return events;
}

TrialRecord TrialRunner::run_trial(int target_id) {
  layout_.set_target(target_id);
  const SimulatedUser& user = cfg_.user;
  const Vec2 target_pt = layout_.target().rect_pt.center();
  const Vec2 target_cm = screen_pt_to_cm(target_pt, profile_);
  const Vec2 home_pt = profile_.screen_pt_size().cwiseProduct(user.thumb_home_fraction);

  // Drawn every trial so all conditions consume the streams identically.
  const Vec2 fixation_cm = target_cm + rng_.motor.normal2(user.fixation_jitter_cm);
  const Vec2 motor_cm = rng_.motor.normal2(user.motor_noise_cm);
  const Vec3 pose = pose_walk_step(participant_.posture, user.fixation_pose_jitter, rng_.pose);
  const Vec2 aim_pt = screen_cm_to_pt(Vec2(target_cm + motor_cm), profile_);

  std::optional<SelectionOutcome> outcome;
  std::optional<Vec2> gaze_at_lock;
  Vec2 intended_release_pt = aim_pt;
  double thumb_fallback_cm = 0.0;

  if (cfg_.technique == Technique::GazeSwipe) {
    stream_fixation(fixation_cm, pose);
    gaze_at_lock = gs_.state().calibrated_cm;
    const double t_down = t_ + user.reaction_time_s;
    gs_.handle(InteractionEvent::touch_down(t_down, home_pt), layout_, calibrator_);
    const Vec2 locked = *gs_.state().locked_pos_pt;
    std::vector<InteractionEvent> rest;
    if (gs_.state().snapped_element == target_id) {
      intended_release_pt = locked;
      rest.push_back(InteractionEvent::touch_up(t_down, home_pt));
    } else {
      const Vec2 thumb_end = home_pt + (aim_pt - locked) / cfg_.interaction.gs_gain;
      rest = drag_path(t_down, home_pt, thumb_end);
      thumb_fallback_cm = screen_pt_to_cm(Vec2(thumb_end - home_pt), profile_).norm();
    }
    for (const auto& ev : rest) {
      StepResult r = gs_.handle(ev, layout_, calibrator_);
      if (r.sample) calibrator_.offer(*r.sample);
      if (r.outcome) outcome = r.outcome;
    }
    t_ = rest.back().t;
  } else {
    t_ += user.reaction_time_s;
    const double t_down = t_;
    pc_.handle(InteractionEvent::touch_down(t_down, home_pt), layout_);
    const Vec2 thumb_end = home_pt + (aim_pt - home_pt) / cfg_.interaction.pc_gain;
    thumb_fallback_cm = screen_pt_to_cm(Vec2(thumb_end - home_pt), profile_).norm();
    const auto rest = drag_path(t_down, home_pt, thumb_end);
    for (const auto& ev : rest) {
      StepResult r = pc_.handle(ev, layout_);
      if (r.outcome) outcome = r.outcome;
    }
    t_ = rest.back().t;
  }

  TrialRecord rec;
  rec.trial_idx = trial_idx_++;
  rec.seed = seed_;
  rec.device = cfg_.device;
  rec.strategy = std::string(to_string(strategy_));
  rec.technique = std::string(to_string(cfg_.technique));
  rec.timestamp_s = t_;
  const Vec2 release_pt = outcome ? outcome->released_pos_pt : intended_release_pt;
  rec.gaze_error_cm = gaze_at_lock ? gaze_error(*gaze_at_lock, screen_pt_to_cm(release_pt, profile_)) : 0.0;
  if (outcome) {
    rec.thumb_distance_cm = outcome->thumb_distance_cm;
    rec.completion_time_s = user.reaction_time_s + outcome->duration_s;
    rec.success = outcome->success;
    rec.gesture = std::string(to_string(outcome->gesture));
  } else {
    rec.thumb_distance_cm = thumb_fallback_cm;
    rec.completion_time_s = user.reaction_time_s + thumb_fallback_cm / user.drag_speed_cm_s;
    rec.success = false;
    rec.gesture = std::string(to_string(Gesture::Scroll));
  }
  t_ += user.inter_trial_gap_s;
  return rec;
}

std::vector<TrialRecord> run_condition(const ExperimentConfig& cfg, std::uint64_t seed, Strategy strategy) {
  TrialRunner runner(cfg, seed, strategy);
  if (strategy == Strategy::EC && cfg.technique == Technique::GazeSwipe) runner.run_explicit_calibration();
  std::vector<TrialRecord> records;
  records.reserve(static_cast<std::size_t>(cfg.targets_per_condition));
  for (int k = 0; k < cfg.targets_per_condition; ++k) {
    records.push_back(runner.run_trial(runner.next_target()));
    runner.advance_posture();
  }
  return records;
}

std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  std::vector<TrialRecord> records;
  for (std::uint64_t seed : cfg.seeds) {
    for (Strategy s : cfg.strategies) {
      auto part = run_condition(cfg, seed, s);
      records.insert(records.end(), part.begin(), part.end());
    }
  }
  return records;
}

}  // namespace gazeswipe
