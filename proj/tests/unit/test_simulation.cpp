#include <doctest.h>

#include <algorithm>
#include <set>

#include "gazeswipe/simulation.hpp"
#include "oracles.hpp"

using namespace gazeswipe;

namespace {

ExperimentConfig noiseless(Strategy s) {
  ExperimentConfig cfg = default_experiment_config("phone");
  cfg.strategies = {s};
  cfg.targets_per_condition = 32;
  cfg.gaze.bias_sigma_cm = 0.0;
  cfg.gaze.pose_gain_cm = 0.0;
  cfg.gaze.noise_sigma_cm = 0.0;
  cfg.gaze.pose_walk_sigma = 0.0;
  cfg.user.fixation_jitter_cm = 0.0;
  cfg.user.motor_noise_cm = 0.0;
  cfg.user.fixation_pose_jitter = 0.0;
  cfg.user.initial_posture_sigma = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("noise-free chain taps every target") {
  const auto records = run_experiment(noiseless(Strategy::NC));
  REQUIRE(records.size() == 32);
  for (const auto& r : records) {
    CHECK(r.gesture == "TapOnly");
    CHECK(r.success);
    CHECK(r.thumb_distance_cm == 0.0);
    CHECK(r.gaze_error_cm < 0.01);
    CHECK(r.completion_time_s == doctest::Approx(0.45));
  }
}

TEST_CASE("a constant bias must be dragged off every trial without calibration") {
  ExperimentConfig cfg = noiseless(Strategy::NC);
  cfg.gaze.fixed_bias_cm = Vec2(2.0, 0.0);
  const DeviceProfile phone = profile_by_name("phone");
  const TargetLayout layout = generate_layout(0, phone);
  std::vector<oracle::Box> boxes;
  for (const auto& e : layout.elements()) boxes.push_back({e.id, e.rect_pt.x, e.rect_pt.y, e.rect_pt.width, e.rect_pt.height});

  TrialRunner runner(cfg, 0, Strategy::NC);
  double sum = 0.0;
  for (int k = 0; k < 64; ++k) {
    const int target = runner.next_target();
    const TrialRecord r = runner.run_trial(target);
    // The estimate sits exactly 2 cm right of the target center.
    CHECK(r.gaze_error_cm == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(r.success);
    // The cursor locks onto the element nearest the biased estimate; the
    // thumb covers the distance from there to the target center.
    const Vec2 c = layout.element(target).rect_pt.center();
    const Vec2 gaze_pt = screen_cm_to_pt(Vec2(screen_pt_to_cm(c, phone) + Vec2(2.0, 0.0)), phone);
    const int snapped = oracle::nearest(boxes, {gaze_pt.x(), gaze_pt.y()});
    const double expected = (screen_pt_to_cm(Vec2(c - layout.element(snapped).rect_pt.center()), phone)).norm();
    CAPTURE(k);
    CHECK(r.thumb_distance_cm == doctest::Approx(expected).epsilon(1e-9));
    sum += r.thumb_distance_cm;
  }
  // Snapping quantizes the drag to element centers; on average it stays near the bias.
  CHECK(sum / 64 == doctest::Approx(2.0).epsilon(0.25));
}

TEST_CASE("AC1 removes a constant bias after one sample") {
  for (Strategy s : {Strategy::AC1, Strategy::AC2}) {
    ExperimentConfig cfg = noiseless(s);
    cfg.gaze.fixed_bias_cm = Vec2(2.0, 0.0);
    const auto records = run_experiment(cfg);
    REQUIRE(records.size() == 32);
    CHECK(records[0].gaze_error_cm == doctest::Approx(2.0));
    for (std::size_t i = 1; i < records.size(); ++i) {
      CAPTURE(i);
      CHECK(records[i].thumb_distance_cm < 0.01);
      CHECK(records[i].gaze_error_cm < 0.01);
      CHECK(records[i].gesture == "TapOnly");
    }
  }
}

TEST_CASE("EC removes a constant bias from the start") {
  ExperimentConfig cfg = noiseless(Strategy::EC);
  cfg.gaze.fixed_bias_cm = Vec2(1.0, -0.5);
  for (const auto& r : run_experiment(cfg)) {
    CHECK(r.gaze_error_cm < 0.01);
    CHECK(r.thumb_distance_cm < 0.01);
  }
}

TEST_CASE("experiment shape and determinism") {
  ExperimentConfig cfg = default_experiment_config("phone");
  cfg.seeds = {3, 4};
  const auto a = run_experiment(cfg);
  const auto b = run_experiment(cfg);
  REQUIRE(a.size() == 2 * 256);
  CHECK(a == b);
  const char* order[] = {"NC", "EC", "AC1", "AC2"};
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& r = a[i];
    CHECK(r.seed == (i < 256 ? 3u : 4u));
    CHECK(r.strategy == order[(i % 256) / 64]);
    CHECK(r.trial_idx == static_cast<std::int64_t>(i % 64));
    CHECK(r.device == "phone");
    CHECK(r.technique == "GazeSwipe");
    CHECK(r.completion_time_s >= cfg.user.reaction_time_s);
    CHECK(r.gaze_error_cm >= 0.0);
    CHECK(r.thumb_distance_cm >= 0.0);
  }
  // Timestamps advance within a condition.
  for (std::size_t i = 1; i < 64; ++i) CHECK(a[i].timestamp_s > a[i - 1].timestamp_s);

  cfg.seeds = {4};
  const auto single = run_experiment(cfg);
  CHECK(std::equal(single.begin(), single.end(), a.begin() + 256));
}

TEST_CASE("calibration store across a condition") {
  const ExperimentConfig cfg = default_experiment_config("phone");
  for (Strategy s : {Strategy::NC, Strategy::EC, Strategy::AC1, Strategy::AC2}) {
    TrialRunner runner(cfg, 9, s);
    CHECK(runner.calibrator().store().empty());
    if (s == Strategy::EC) {
      runner.run_explicit_calibration();
      CHECK(runner.calibrator().store().size() == 9);
      CHECK(runner.calibrator().store().frozen());
    }
    const bool collects = s == Strategy::AC1 || s == Strategy::AC2;
    std::size_t expected = runner.calibrator().store().size();
    for (int k = 0; k < 64; ++k) {
      const TrialRecord r = runner.run_trial(runner.next_target());
      runner.advance_posture();
      if (collects && (r.gesture == "TapOnly" || r.gesture == "DragRelease")) ++expected;
      CHECK(runner.calibrator().store().size() == expected);
    }
    if (collects) CHECK(expected > 60);
  }
}

TEST_CASE("targets never repeat back to back") {
  TrialRunner runner(default_experiment_config("phone"), 1, Strategy::NC);
  std::set<int> seen;
  int previous = -1;
  for (int k = 0; k < 2000; ++k) {
    const int t = runner.next_target();
    CHECK(t != previous);
    CHECK(t >= 0);
    CHECK(t < 72);
    seen.insert(t);
    previous = t;
  }
  CHECK(seen.size() == 72);
}

TEST_CASE("conditions sharing a seed see the same participant and targets") {
  const ExperimentConfig cfg = default_experiment_config("phone");
  TrialRunner nc(cfg, 5, Strategy::NC);
  TrialRunner ac(cfg, 5, Strategy::AC2);
  CHECK(nc.participant().gaze.user_bias_cm == ac.participant().gaze.user_bias_cm);
  CHECK(nc.participant().posture == ac.participant().posture);
  for (int k = 0; k < 64; ++k) CHECK(nc.next_target() == ac.next_target());
}

TEST_CASE("Pure Cursor trials") {
  ExperimentConfig cfg = default_experiment_config("phone");
  cfg.technique = Technique::PureCursor;
  cfg.strategies = {Strategy::NC};
  const auto records = run_experiment(cfg);
  REQUIRE(records.size() == 64);
  const DeviceProfile phone = profile_by_name("phone");
  const Vec2 home = phone.screen_pt_size().cwiseProduct(cfg.user.thumb_home_fraction);
  for (const auto& r : records) {
    CHECK(r.technique == "PureCursor");
    CHECK(r.gaze_error_cm == 0.0);
    // The thumb covers a third of the way from home to the target.
    CHECK(r.thumb_distance_cm < screen_pt_to_cm(home, phone).norm());
  }
}

TEST_CASE("posture relaxes toward the base pose") {
  ExperimentConfig cfg = default_experiment_config("phone");
  cfg.gaze.pose_walk_sigma = 0.0;
  Rng rng(2);
  Participant p = draw_participant(cfg.gaze, cfg.user, rng);
  const Vec3 base = p.gaze.base_pose;
  double previous = std::acos(std::clamp(p.posture.dot(base), -1.0, 1.0));
  CHECK(previous > 0.0);
  for (int k = 0; k < 30; ++k) {
    advance_posture(p, cfg.user, rng);
    const double angle = std::acos(std::clamp(p.posture.dot(base), -1.0, 1.0));
    CHECK(angle <= previous + 1e-12);
    CHECK(std::abs(p.posture.norm() - 1.0) < 1e-12);
    previous = angle;
  }
  CHECK(previous < 0.01);
}

TEST_CASE("experiment config json") {
  const ExperimentConfig d = default_experiment_config("tablet");
  CHECK(d.device == "tablet");
  CHECK(d.targets_per_condition == 64);
  CHECK(d.strategies.size() == 4);
  CHECK_THROWS_AS(default_experiment_config("watch"), ConfigError);

  const nlohmann::json j = d;
  const ExperimentConfig back = experiment_config_from_json(j);
  CHECK(nlohmann::json(back) == j);

  const ExperimentConfig partial =
      experiment_config_from_json({{"device", "phone"}, {"strategies", {"AC2"}}, {"user", {{"motor_noise_cm", 0.3}}}});
  CHECK(partial.strategies == std::vector<Strategy>{Strategy::AC2});
  CHECK(partial.user.motor_noise_cm == 0.3);
  CHECK(partial.user.reaction_time_s == 0.45);

  CHECK_THROWS_AS(experiment_config_from_json({{"device", "phone"}, {"strategies", {"AC3"}}}), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json({{"device", "watch"}}), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json({{"targets_per_condition", 0}}), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json({{"technique", "DirectTouch"}}), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json({{"user", {{"drag_speed_cm_s", 0.0}}}}), ConfigError);
  ExperimentConfig empty = d;
  empty.seeds.clear();
  CHECK_THROWS_AS(validate(empty), ConfigError);
}
