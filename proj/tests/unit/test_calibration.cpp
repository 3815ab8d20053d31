#include <doctest.h>

#include <sstream>

#include "gazeswipe/calibration.hpp"
#include "gazeswipe/gaze.hpp"
#include "gazeswipe/rng.hpp"
#include "oracles.hpp"

using namespace gazeswipe;

namespace {

CalibrationSample sample(Vec2 est, Vec2 gt, std::optional<Vec3> pose = std::nullopt, std::int64_t id = 0) {
  CalibrationSample s;
  s.g_est_cm = est;
  s.g_gt_cm = gt;
  s.head_pose = pose;
  s.trial_id = id;
  return s;
}

SampleStore two_sample_store(std::optional<Vec3> p1 = std::nullopt, std::optional<Vec3> p2 = std::nullopt) {
  SampleStore store;
  store.record(sample(Vec2(1, 1), Vec2(2, 1), p1));
  store.record(sample(Vec2(5, 5), Vec2(5, 7), p2));
  return store;
}

CalibratorConfig config(Strategy s) {
  CalibratorConfig c;
  c.strategy = s;
  return c;
}

std::vector<oracle::Sample> to_oracle(const SampleStore& store) {
  std::vector<oracle::Sample> out;
  for (const auto& s : store.samples()) {
    oracle::Sample o{{s.g_est_cm.x(), s.g_est_cm.y()}, {s.g_gt_cm.x(), s.g_gt_cm.y()}, s.head_pose.has_value(), {}};
    if (s.head_pose) o.pose = {s.head_pose->x(), s.head_pose->y(), s.head_pose->z()};
    out.push_back(o);
  }
  return out;
}

}  // namespace

TEST_CASE("strategy names") {
  for (auto s : {Strategy::NC, Strategy::EC, Strategy::AC1, Strategy::AC2}) CHECK(parse_strategy(to_string(s)) == s);
  CHECK_THROWS_AS(parse_strategy("AC3"), ConfigError);
  CHECK(parse_weighting_mode("estimate-distance") == WeightingMode::EstimateDistance);
}

TEST_CASE("sample store") {
  SampleStore store;
  store.record(sample(Vec2(0, 0), Vec2(1, 1), std::nullopt, 1));
  CHECK(store.size() == 1);

  SampleStore bounded(std::size_t{2});
  for (int i = 1; i <= 3; ++i) bounded.record(sample(Vec2(i, 0), Vec2(i, 1), std::nullopt, i));
  REQUIRE(bounded.size() == 2);
  CHECK(bounded.samples()[0].trial_id == 2);
  CHECK(bounded.samples()[1].trial_id == 3);

  CHECK_THROWS_AS(store.record(sample(Vec2(NAN, 0), Vec2(0, 0))), InvalidInput);
  CHECK_THROWS_AS(store.record(sample(Vec2(0, 0), Vec2(0, 0), Vec3(1, 1, 0))), InvalidInput);
  CHECK(store.size() == 1);

  store.freeze();
  CHECK_THROWS_AS(store.record(sample(Vec2(0, 0), Vec2(1, 1))), ProtocolError);
  CHECK_THROWS_AS(store.clear(), ProtocolError);
}

TEST_CASE("sample log round trips bit for bit") {
  Rng rng(12);
  SampleStore store;
  for (int i = 0; i < 40; ++i) {
    std::optional<Vec3> pose;
    if (i % 2) pose = pose_walk_step(Vec3(0, 0, 1), 0.3, rng);
    auto s = sample(Vec2(rng.normal(), rng.normal()), Vec2(rng.normal(), rng.normal()), pose, i);
    s.timestamp_s = rng.uniform(0, 100);
    store.record(s);
  }
  std::stringstream a;
  write_samples_jsonl(a, store);
  std::stringstream in(a.str());
  const SampleStore back = read_samples_jsonl(in);
  std::stringstream b;
  write_samples_jsonl(b, back);
  CHECK(a.str() == b.str());
  for (std::size_t i = 0; i < store.size(); ++i) {
    CHECK(back.samples()[i].g_est_cm == store.samples()[i].g_est_cm);
    CHECK(back.samples()[i].g_gt_cm == store.samples()[i].g_gt_cm);
    CHECK(back.samples()[i].timestamp_s == store.samples()[i].timestamp_s);
  }
}

TEST_CASE("AC1 examples") {
  const CalibratorConfig cfg = config(Strategy::AC1);
  CHECK(calibrate_ac1(SampleStore{}, Vec2(3, 3), cfg) == Vec2(3, 3));

  SampleStore one;
  one.record(sample(Vec2(4, 9), Vec2(4.7, 8.8)));
  const Vec2 q(3, 3);
  const Vec2 out = calibrate_ac1(one, q, cfg);
  CHECK((out - (q + Vec2(0.7, -0.2))).norm() < 1e-12);

  const Vec2 two = calibrate_ac1(two_sample_store(), Vec2(3, 3), cfg);
  CHECK(two.x() == doctest::Approx(3.0 + 2.0 / 3.0).epsilon(1e-12));
  CHECK(two.y() == doctest::Approx(3.0 + 2.0 / 3.0).epsilon(1e-12));
  CHECK(two.x() == doctest::Approx(3.6667).epsilon(1e-4));

  const auto w = ac1_weights(two_sample_store(), Vec2(3, 3), cfg);
  CHECK(w(0) == doctest::Approx(2.0 / 3.0));
  CHECK(w(1) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("AC1 weighting by distance from the estimate") {
  CalibratorConfig cfg = config(Strategy::AC1);
  cfg.weighting_mode = WeightingMode::EstimateDistance;
  // Query at (2,2): distances sqrt(2) and sqrt(18), weights 3/4 and 1/4.
  const Vec2 out = calibrate_ac1(two_sample_store(), Vec2(2, 2), cfg);
  CHECK(out.x() == doctest::Approx(2.0 + 0.75));
  CHECK(out.y() == doctest::Approx(2.0 + 0.5));
}

TEST_CASE("AC2 examples") {
  const CalibratorConfig cfg = config(Strategy::AC2);
  const Vec3 q(0, 0, 1);
  // Second sample pose at cosine 0.8 with the query.
  const Vec3 p2(0.6, 0, 0.8);
  const Vec2 out = calibrate_ac2(two_sample_store(q, p2), Vec2(3, 3), q, cfg);
  CHECK(out.x() == doctest::Approx(3.0 + 2.0 / 3.0).epsilon(1e-12));
  CHECK(out.y() == doctest::Approx(3.0 + 0.8 * 2.0 / 3.0).epsilon(1e-12));
  CHECK(out.y() == doctest::Approx(3.5333).epsilon(1e-4));

  const Vec2 same = calibrate_ac2(two_sample_store(q, q), Vec2(3, 3), q, cfg);
  CHECK((same - calibrate_ac1(two_sample_store(), Vec2(3, 3), cfg)).norm() < 1e-12);

  SampleStore orth;
  orth.record(sample(Vec2(1, 1), Vec2(3, 2), Vec3(1, 0, 0)));
  CHECK(calibrate_ac2(orth, Vec2(4, 4), q, cfg) == Vec2(4, 4));

  SampleStore opposed;
  opposed.record(sample(Vec2(1, 1), Vec2(3, 2), Vec3(0, 0, -1)));
  CHECK(calibrate_ac2(opposed, Vec2(4, 4), q, cfg) == Vec2(4, 4));
  CalibratorConfig raw = cfg;
  raw.clamp_negative_cosine = false;
  CHECK((calibrate_ac2(opposed, Vec2(4, 4), q, raw) - Vec2(2, 3)).norm() < 1e-12);

  CHECK_THROWS_AS(calibrate_ac2(orth, Vec2(4, 4), Vec3(0, 0, 2), cfg), InvalidInput);
}

TEST_CASE("poseless samples and queries") {
  const CalibratorConfig cfg = config(Strategy::AC2);
  const Vec3 q(0, 0, 1);
  // A poseless sample counts with h = 1.
  const auto h = ac2_pose_weights(two_sample_store(std::nullopt, Vec3(1, 0, 0)), q, cfg);
  CHECK(h(0) == 1.0);
  CHECK(h(1) == 0.0);

  Calibrator c(cfg, two_sample_store(q, Vec3(1, 0, 0)));
  CHECK((c.apply(Vec2(3, 3), std::nullopt) - calibrate_ac1(two_sample_store(), Vec2(3, 3), cfg)).norm() < 1e-12);
}

TEST_CASE("calibration matches the literal oracle") {
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(64));
    SampleStore store;
    for (int i = 0; i < n; ++i) {
      const Vec2 est(rng.uniform(0, 7), rng.uniform(0, 15));
      // Some exact samples exercise the epsilon floor.
      const Vec2 gt = i % 9 == 0 ? est : Vec2(est + rng.normal2(1.5));
      std::optional<Vec3> pose;
      if (i % 5) pose = pose_walk_step(Vec3(0, 0, 1), 0.8, rng);
      store.record(sample(est, gt, pose));
    }
    const Vec2 q(rng.uniform(0, 7), rng.uniform(0, 15));
    const Vec3 qp = pose_walk_step(Vec3(0, 0, 1), 0.8, rng);
    const auto os = to_oracle(store);
    for (const bool by_offset : {true, false}) {
      for (const bool clamp : {true, false}) {
        CalibratorConfig cfg = config(Strategy::AC2);
        cfg.weighting_mode = by_offset ? WeightingMode::OffsetMagnitude : WeightingMode::EstimateDistance;
        cfg.clamp_negative_cosine = clamp;
        const auto r1 = oracle::calibrate(os, {q.x(), q.y()}, false, {}, clamp, by_offset, cfg.epsilon_cm);
        const auto r2 = oracle::calibrate(os, {q.x(), q.y()}, true, {qp.x(), qp.y(), qp.z()}, clamp, by_offset,
                                          cfg.epsilon_cm);
        const Vec2 a1 = calibrate_ac1(store, q, cfg);
        const Vec2 a2 = calibrate_ac2(store, q, qp, cfg);
        CHECK((a1 - Vec2(r1.x, r1.y)).norm() < 1e-9);
        CHECK((a2 - Vec2(r2.x, r2.y)).norm() < 1e-9);
      }
    }
  }
}

TEST_CASE("AC1 invariants") {
  Rng rng(31);
  const CalibratorConfig cfg = config(Strategy::AC1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(20));
    SampleStore store, constant;
    const Vec2 d = rng.normal2(1.0);
    for (int i = 0; i < n; ++i) {
      const Vec2 est(rng.uniform(0, 7), rng.uniform(0, 15));
      store.record(sample(est, Vec2(est + rng.normal2(1.0))));
      constant.record(sample(est, Vec2(est + d)));
    }
    const Vec2 q(rng.uniform(0, 7), rng.uniform(0, 15));
    const auto w = ac1_weights(store, q, cfg);
    CHECK((w.array() >= 0.0).all());
    CHECK(std::abs(w.sum() - 1.0) < 1e-12);
    CHECK((calibrate_ac1(constant, q, cfg) - (q + d)).norm() < 1e-12);

    // AC2 correction is bounded by sum lambda_i |dG_i|.
    const Vec3 qp = pose_walk_step(Vec3(0, 0, 1), 0.5, rng);
    SampleStore posed;
    for (const auto& s : store.samples()) posed.record(sample(s.g_est_cm, s.g_gt_cm, pose_walk_step(qp, 0.7, rng)));
    double bound = 0.0;
    for (int i = 0; i < n; ++i) bound += w(i) * store.samples()[i].offset().norm();
    CHECK((calibrate_ac2(posed, q, qp, config(Strategy::AC2)) - q).norm() <= bound + 1e-12);

    // Determinism.
    CHECK(calibrate_ac1(store, q, cfg) == calibrate_ac1(store, q, cfg));
  }

  // Two samples: the correction is a convex combination of the offsets.
  for (int trial = 0; trial < 200; ++trial) {
    SampleStore store;
    const Vec2 e1(rng.uniform(0, 7), rng.uniform(0, 15)), e2(rng.uniform(0, 7), rng.uniform(0, 15));
    const Vec2 d1 = rng.normal2(1.0), d2 = rng.normal2(1.0);
    store.record(sample(e1, Vec2(e1 + d1)));
    store.record(sample(e2, Vec2(e2 + d2)));
    const Vec2 q(rng.uniform(0, 7), rng.uniform(0, 15));
    const Vec2 c = calibrate_ac1(store, q, cfg) - q;
    const Vec2 seg = d2 - d1;
    const double t = (c - d1).dot(seg) / seg.squaredNorm();
    CHECK(t >= -1e-12);
    CHECK(t <= 1.0 + 1e-12);
    CHECK((d1 + t * seg - c).norm() < 1e-9);
  }
}

TEST_CASE("explicit calibration") {
  const DeviceProfile phone = profile_by_name("phone");
  const auto grid = explicit_calibration_targets_pt(phone);
  REQUIRE(grid.size() == 9);
  const double xs[] = {180, 540, 900};
  const double ys[] = {378, 1134, 1890};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      CHECK(grid[r * 3 + c].x() == doctest::Approx(xs[c]));
      CHECK(grid[r * 3 + c].y() == doctest::Approx(ys[r]));
    }
  }

  std::vector<Vec3> poses(9, Vec3(0, 0, 1));
  std::vector<Vec2> perfect, shifted;
  for (const auto& g : grid) {
    perfect.push_back(screen_pt_to_cm(g, phone));
    shifted.push_back(screen_pt_to_cm(g, phone) - Vec2(1, 0));
  }
  Calibrator ec(config(Strategy::EC), build_explicit_calibration(phone, grid, perfect, poses));
  CHECK(ec.store().frozen());
  CHECK_FALSE(ec.collects_samples());
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const Vec2 q(rng.uniform(0, 7), rng.uniform(0, 15));
    CHECK((ec.apply(q, std::nullopt) - q).norm() < 1e-12);
  }

  Calibrator biased(config(Strategy::EC), build_explicit_calibration(phone, grid, shifted, poses));
  for (int i = 0; i < 50; ++i) {
    const Vec2 q(rng.uniform(0, 7), rng.uniform(0, 15));
    CHECK((biased.apply(q, Vec3(0, 0, 1)) - (q + Vec2(1, 0))).norm() < 1e-12);
  }
  CHECK_FALSE(biased.offer(sample(Vec2(0, 0), Vec2(1, 1))));
  CHECK(biased.store().size() == 9);
  CHECK_THROWS_AS(biased.store().record(sample(Vec2(0, 0), Vec2(1, 1))), ProtocolError);

  std::vector<Vec2> eight(grid.begin(), grid.end() - 1);
  CHECK_THROWS_AS(build_explicit_calibration(phone, eight, perfect, poses), InvalidInput);
  auto off = grid;
  off[4] += Vec2(10, 0);
  CHECK_THROWS_AS(build_explicit_calibration(phone, off, perfect, poses), InvalidInput);
}

TEST_CASE("calibrator strategies") {
  Calibrator c(config(Strategy::NC));
  CHECK_FALSE(c.offer(sample(Vec2(0, 0), Vec2(1, 1))));
  CHECK(c.apply(Vec2(2, 2), std::nullopt) == Vec2(2, 2));

  c.set_strategy(Strategy::AC1);
  CHECK(c.offer(sample(Vec2(0, 0), Vec2(1, 1))));
  CHECK(c.apply(Vec2(2, 2), std::nullopt) == Vec2(3, 3));
  c.set_strategy(Strategy::AC2);
  CHECK(c.store().empty());

  CalibratorConfig bad;
  bad.epsilon_cm = 0.0;
  CHECK_THROWS_AS(Calibrator{bad}, ConfigError);
}
