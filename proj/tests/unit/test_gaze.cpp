#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "gazeswipe/gaze.hpp"
#include "gazeswipe/simulation.hpp"

using namespace gazeswipe;

TEST_CASE("pose walk") {
  Rng rng(1);
  const Vec3 up(0.0, 0.0, 1.0);
  CHECK(pose_walk_step(up, 0.0, rng) == up);

  Vec3 pose = up;
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    pose = pose_walk_step(pose, 0.1, rng);
    worst = std::max(worst, std::abs(pose.norm() - 1.0));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("pose walk angular step follows the Rayleigh mean") {
  Rng rng(2);
  const double sigma = 0.05;
  Rng start_rng(9);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    // Start points spread over the sphere so the tangent basis is exercised.
    const Vec3 start = pose_walk_step(Vec3(0.0, 0.0, 1.0), 1.0, start_rng);
    const Vec3 next = pose_walk_step(start, sigma, rng);
    sum += std::acos(std::clamp(start.dot(next), -1.0, 1.0));
  }
  const double expected = sigma * std::sqrt(std::numbers::pi / 2.0);
  // atan(r) < r for the renormalized step; the bias is O(sigma^2) and well inside 5%.
  CHECK(sum / n == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("synthetic frame without error maps back to the true gaze") {
  const DeviceProfile phone = profile_by_name("phone");
  SyntheticGazeConfig cfg;
  Rng rng(4);
  const Vec2 g(2.5, 9.0);
  const GazeFrame f = synthetic_frame(g, 1.0, cfg, cfg.base_pose, phone, rng);
  CHECK(f.timestamp_s == 1.0);
  REQUIRE(f.head_pose);
  CHECK(*f.head_pose == cfg.base_pose);
  const Vec2 back = camera_cm_to_screen_pt(f.raw_cm, phone);
  const Vec2 expected = screen_cm_to_pt(g, phone);
  CHECK((back - expected).norm() < 1e-9);
}

TEST_CASE("synthetic frame bias is a pure translation") {
  const DeviceProfile phone = profile_by_name("phone");
  SyntheticGazeConfig cfg;
  cfg.user_bias_cm = Vec2(1.0, 0.0);
  Rng rng(4);
  const Vec2 g(3.0, 7.0);
  const GazeFrame f = synthetic_frame(g, 0.0, cfg, cfg.base_pose, phone, rng);
  const Vec2 est = camera_cm_to_screen_cm(f.raw_cm, phone);
  CHECK((est - (g + Vec2(1.0, 0.0))).norm() < 1e-12);
}

TEST_CASE("synthetic frame pose term is linear") {
  const DeviceProfile phone = profile_by_name("phone");
  SyntheticGazeConfig cfg;
  cfg.pose_gain_cm << 2.0, 0.0, 0.0, 0.0, 3.0, 0.0;
  Rng rng(4);
  const Vec3 pose = Vec3(0.1, -0.2, 1.0).normalized();
  const Vec2 g(3.0, 7.0);
  const GazeFrame f = synthetic_frame(g, 0.0, cfg, pose, phone, rng);
  const Vec2 expected = g + cfg.pose_gain_cm * (pose - cfg.base_pose);
  CHECK((camera_cm_to_screen_cm(f.raw_cm, phone) - expected).norm() < 1e-12);
}

TEST_CASE("default models land on the configured uncalibrated error") {
  for (const auto& [device, target] : {std::pair{"phone", 2.9}, std::pair{"tablet", 3.5}}) {
    const DeviceProfile profile = profile_by_name(device);
    const ExperimentConfig cfg = default_experiment_config(device);
    Rng users(100), poses(101), noise(102), where(103);
    double sum = 0.0;
    int n = 0;
    while (n < 10000) {
      Participant p = draw_participant(cfg.gaze, cfg.user, users);
      for (int trial = 0; trial < 64 && n < 10000; ++trial, ++n) {
        const Vec2 g(where.uniform(0.0, profile.physical_cm.x()), where.uniform(0.0, profile.physical_cm.y()));
        const Vec3 pose = pose_walk_step(p.posture, cfg.user.fixation_pose_jitter, poses);
        const GazeFrame f = synthetic_frame(g, trial, p.gaze, pose, profile, noise);
        sum += (camera_cm_to_screen_cm(f.raw_cm, profile) - g).norm();
        advance_posture(p, cfg.user, poses);
      }
    }
    CAPTURE(device);
    CHECK(sum / n == doctest::Approx(target).epsilon(0.4 / target));
  }
}

TEST_CASE("pipeline") {
  const DeviceProfile phone = profile_by_name("phone");
  SyntheticGazeConfig cfg;
  Rng rng(1);
  const Vec2 g(4.0, 6.0);

  SUBCASE("NC leaves the estimate alone") {
    GazePipeline pipe(phone);
    Calibrator nc;
    cfg.noise_sigma_cm = 0.5;
    for (int i = 0; i < 30; ++i) {
      const auto e = pipe.process(synthetic_frame(g, i / 12.0, cfg, cfg.base_pose, phone, rng), nc);
      CHECK(e.calibrated_cm == e.estimated_cm);
    }
  }

  SUBCASE("settles on the true gaze") {
    GazePipeline pipe(phone);
    Calibrator nc;
    pipe.process(synthetic_frame(Vec2(1.0, 1.0), 0.0, cfg, cfg.base_pose, phone, rng), nc);
    GazeEstimate e;
    for (int i = 1; i <= 200; ++i) e = pipe.process(synthetic_frame(g, i / 12.0, cfg, cfg.base_pose, phone, rng), nc);
    CHECK((e.estimated_cm - g).norm() < 0.01);

    pipe.reset();
    const auto first = pipe.process(synthetic_frame(Vec2(1.0, 1.0), 100.0, cfg, cfg.base_pose, phone, rng), nc);
    CHECK((first.estimated_cm - Vec2(1.0, 1.0)).norm() < 1e-12);
  }

  SUBCASE("20 constant frames") {
    GazePipeline pipe(phone);
    Calibrator nc;
    GazeEstimate e;
    for (int i = 0; i < 20; ++i) e = pipe.process(synthetic_frame(g, i / 12.0, cfg, cfg.base_pose, phone, rng), nc);
    CHECK((e.estimated_cm - g).norm() < 0.01);
  }

  SUBCASE("AC1 with one sample adds its offset") {
    CalibratorConfig cc;
    cc.strategy = Strategy::AC1;
    Calibrator ac1(cc);
    CalibrationSample s;
    s.g_est_cm = Vec2(1.0, 1.0);
    s.g_gt_cm = Vec2(1.7, 0.8);
    ac1.offer(s);
    GazePipeline pipe(phone);
    const auto e = pipe.process(synthetic_frame(g, 0.0, cfg, cfg.base_pose, phone, rng), ac1);
    CHECK((e.calibrated_cm - (e.estimated_cm + Vec2(0.7, -0.2))).norm() < 1e-12);
  }

  SUBCASE("rejects bad frames") {
    GazePipeline pipe(phone);
    Calibrator nc;
    GazeFrame f;
    f.raw_cm = Vec2(NAN, 0.0);
    CHECK_THROWS_AS(pipe.process(f, nc), InvalidInput);
    f.raw_cm = Vec2(0.0, 0.0);
    f.head_pose = Vec3(0.0, 0.0, 2.0);
    CHECK_THROWS_AS(pipe.process(f, nc), InvalidInput);
    f.head_pose.reset();
    f.timestamp_s = 1.0;
    pipe.process(f, nc);
    f.timestamp_s = 0.5;
    CHECK_THROWS_AS(pipe.process(f, nc), ProtocolError);
  }
}

TEST_CASE("frame log round trip") {
  std::vector<GazeFrame> frames;
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    GazeFrame f;
    f.timestamp_s = i / 12.0 + rng.uniform() * 0.01;
    f.raw_cm = Vec2(rng.normal(), rng.normal());
    if (i % 3) f.head_pose = pose_walk_step(Vec3(0, 0, 1), 0.2, rng);
    frames.push_back(f);
  }
  std::stringstream ss;
  write_frames_jsonl(ss, frames);
  const auto back = read_frames_jsonl(ss);
  REQUIRE(back.size() == frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    CHECK(back[i].timestamp_s == frames[i].timestamp_s);
    CHECK(back[i].raw_cm == frames[i].raw_cm);
    CHECK(back[i].head_pose.has_value() == frames[i].head_pose.has_value());
    if (frames[i].head_pose) CHECK(*back[i].head_pose == *frames[i].head_pose);
  }

  std::stringstream bad("{\"t\":1,\"raw_cm\":[0,0],\"head_pose\":null}\n{\"t\":1,\"raw_cm\":[0,0],\"head_pose\":null}\n");
  CHECK_THROWS_AS(read_frames_jsonl(bad), ProtocolError);
}

TEST_CASE("gaze model json") {
  GazeModel m = default_gaze_model("tablet");
  CHECK(m.bias_sigma_cm > default_gaze_model("phone").bias_sigma_cm);
  CHECK_THROWS_AS(default_gaze_model("watch"), ConfigError);

  merge_from_json({{"noise_sigma_cm", 0.3}, {"fixed_bias_cm", {2.0, 0.0}}}, m);
  CHECK(m.noise_sigma_cm == 0.3);
  CHECK(m.bias_sigma_cm == 2.65);
  REQUIRE(m.fixed_bias_cm);
  Rng rng(1);
  CHECK(m.draw_user(rng).user_bias_cm == Vec2(2.0, 0.0));

  const nlohmann::json j = m;
  GazeModel back;
  merge_from_json(j, back);
  CHECK(back.noise_sigma_cm == m.noise_sigma_cm);
  CHECK(back.fixed_bias_cm == m.fixed_bias_cm);

  CHECK_THROWS_AS(merge_from_json({{"noise_sigma_cm", -1.0}}, m), ConfigError);
  CHECK_THROWS_AS(merge_from_json({{"base_pose", {0.0, 0.0, 2.0}}}, m), ConfigError);
}
