#pragma once

#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazeswipe/calibration.hpp"
#include "gazeswipe/geometry.hpp"
#include "gazeswipe/one_euro.hpp"
#include "gazeswipe/rng.hpp"
#include "gazeswipe/types.hpp"

namespace gazeswipe {

/// One raw gaze estimate in camera-plane cm (x right, y down, origin at the camera).
struct GazeFrame {
  double timestamp_s = 0.0;
  Vec2 raw_cm{0.0, 0.0};
  std::optional<Vec3> head_pose;
};

void validate(const GazeFrame& frame);

/// Error model of the synthetic estimator for one user:
///   raw = camera(true) + user_bias + pose_gain * (pose - base_pose) + N(0, noise^2 I).
struct SyntheticGazeConfig {
  Vec2 user_bias_cm = Vec2::Zero();
  PoseGain pose_gain_cm = PoseGain::Zero();
  Vec3 base_pose{0.0, 0.0, 1.0};
  double noise_sigma_cm = 0.0;
  double pose_walk_sigma = 0.0;
  double frame_rate_hz = 12.0;
};

void validate(const SyntheticGazeConfig& cfg);

/// Population the simulated users are drawn from.
struct GazeModel {
  double bias_sigma_cm = 2.2;
  /// Row norm of the pose gain matrix, cm per unit of pose deviation.
  double pose_gain_cm = 3.5;
  double noise_sigma_cm = 0.8;
  double pose_walk_sigma = 0.03;
  double frame_rate_hz = 12.0;
  Vec3 base_pose{0.0, 0.0, 1.0};
  /// Every user gets this bias instead of a drawn one (the draw still happens).
  std::optional<Vec2> fixed_bias_cm;

  /// Draws a user: bias ~ N(0, bias_sigma^2) per axis, pose gain diag(g, g) on the tangent axes.
  SyntheticGazeConfig draw_user(Rng& rng) const;
};

/// Defaults for "phone" and "tablet"; throws ConfigError otherwise.
GazeModel default_gaze_model(std::string_view device);

void to_json(nlohmann::json& j, const GazeModel& m);
/// Fields missing from `j` keep the values already in `m`.
void merge_from_json(const nlohmann::json& j, GazeModel& m);

/// Random tangent-space Gaussian step on the unit sphere, renormalized.
Vec3 pose_walk_step(const Vec3& pose, double sigma, Rng& rng);

/// Frame of a user whose true point of gaze is `true_gaze_cm` (screen cm).
GazeFrame synthetic_frame(const Vec2& true_gaze_cm, double t, const SyntheticGazeConfig& cfg, const Vec3& pose,
                          const DeviceProfile& profile, Rng& rng);

struct GazeEstimate {
  double timestamp_s = 0.0;
  /// G_E: transformed and filtered, uncalibrated. Screen cm.
  Vec2 estimated_cm{0.0, 0.0};
  /// G_C: after the active calibration strategy. Screen cm.
  Vec2 calibrated_cm{0.0, 0.0};
  std::optional<Vec3> head_pose;
};

/// G_E = H(T * raw): transform to the screen frame, then one-euro filter
/// (in screen cm), then calibrate.
class GazePipeline {
 public:
  explicit GazePipeline(DeviceProfile profile, OneEuroParams filter = {});

  GazeEstimate process(const GazeFrame& frame, const Calibrator& calibrator);

  /// Starts a new stream; the next frame passes through unfiltered.
  void reset() { filter_.reset(); }

  const DeviceProfile& profile() const { return profile_; }

 private:
  DeviceProfile profile_;
  PointFilter<double> filter_;
};

void to_json(nlohmann::json& j, const GazeFrame& f);
void from_json(const nlohmann::json& j, GazeFrame& f);

/// Frame log: one {t, raw_cm:[x,y], head_pose:[x,y,z]|null} object per line.
void write_frames_jsonl(std::ostream& out, const std::vector<GazeFrame>& frames);
/// Rejects non-increasing timestamps.
std::vector<GazeFrame> read_frames_jsonl(std::istream& in);

}  // namespace gazeswipe
