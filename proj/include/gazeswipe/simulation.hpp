#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazeswipe/calibration.hpp"
#include "gazeswipe/gaze.hpp"
#include "gazeswipe/geometry.hpp"
#include "gazeswipe/interaction.hpp"
#include "gazeswipe/metrics.hpp"
#include "gazeswipe/rng.hpp"

namespace gazeswipe {

enum class Technique { GazeSwipe, PureCursor };

std::string_view to_string(Technique t);
Technique parse_technique(std::string_view name);

/// Behavior of a simulated participant.
struct SimulatedUser {
  double fixation_jitter_cm = 0.15;
  double motor_noise_cm = 0.10;
  double reaction_time_s = 0.45;
  double drag_speed_cm_s = 2.5;
  int settle_frames = 8;
  /// Angular spread of the posture a session starts in, around the base pose.
  double initial_posture_sigma = 0.9;
  /// Trials over which the posture relaxes toward the base pose; 0 disables it.
  double posture_settle_trials = 4.0;
  /// Head wobble of each individual fixation around the current posture.
  double fixation_pose_jitter = 0.05;
  /// Resting thumb position as a fraction of the screen (x, y).
  Vec2 thumb_home_fraction{0.75, 0.8};
  double inter_trial_gap_s = 0.2;
};

void validate(const SimulatedUser& user);
void to_json(nlohmann::json& j, const SimulatedUser& u);
void merge_from_json(const nlohmann::json& j, SimulatedUser& u);

struct ExperimentConfig {
  std::string device = "phone";
  std::vector<Strategy> strategies{Strategy::NC, Strategy::EC, Strategy::AC1, Strategy::AC2};
  Technique technique = Technique::GazeSwipe;
  int targets_per_condition = 64;
  std::vector<std::uint64_t> seeds{0};
  GazeModel gaze;
  SimulatedUser user;
  InteractionConfig interaction;
  CalibratorConfig calibrator;
};

/// Defaults for a device; throws ConfigError for unknown devices.
ExperimentConfig default_experiment_config(std::string_view device);

/// Throws ConfigError for unknown names, empty lists or bad values.
void validate(const ExperimentConfig& cfg);

void to_json(nlohmann::json& j, const ExperimentConfig& cfg);
/// Starts from default_experiment_config(j["device"]) and applies every field
/// present in `j`; "gaze", "user", "interaction" and "calibrator" merge field by field.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

/// Random sources of one simulated participant. Each purpose has its own
/// stream so conditions that share a seed see the same users, layouts,
/// targets and noise regardless of strategy or technique.
struct SimulationStreams {
  Rng user;
  Rng targets;
  Rng pose;
  Rng noise;
  Rng motor;
  Rng explicit_calibration;

  explicit SimulationStreams(std::uint64_t seed);
};

/// Participant state carried from trial to trial.
struct Participant {
  SyntheticGazeConfig gaze;
  Vec3 posture{0.0, 0.0, 1.0};
};

Participant draw_participant(const GazeModel& model, const SimulatedUser& user, Rng& rng);

/// Relaxes the posture toward the base pose, then takes one walk step.
void advance_posture(Participant& participant, const SimulatedUser& user, Rng& rng);

/// Frozen EC store from nine simulated fixations on the 3x3 grid, each a
/// fresh filtered stream of settle_frames frames. Advances `t` per frame.
SampleStore simulate_explicit_calibration(const DeviceProfile& profile, const Participant& participant,
                                          const SimulatedUser& user, const OneEuroParams& filter, Rng& rng,
                                          double& t);

/// Everything one condition (seed x strategy) needs, driving the real engines.
class TrialRunner {
 public:
  TrialRunner(const ExperimentConfig& cfg, std::uint64_t seed, Strategy strategy);

  /// Simulates fixation, settling frames, touch-down and drag-release on
  /// `target_id`; under GazeSwipe the resulting sample is offered to the
  /// calibrator before returning.
  TrialRecord run_trial(int target_id);

  /// Nine fixations on the 3x3 grid; the store becomes the frozen EC store.
  void run_explicit_calibration();

  /// Relaxes the posture toward the base pose, then takes one walk step.
  void advance_posture();

  /// Next target, uniform over elements and never the previous one.
  int next_target();

  const Calibrator& calibrator() const { return calibrator_; }
  const TargetLayout& layout() const { return layout_; }
  const Participant& participant() const { return participant_; }
  double now() const { return t_; }

 private:
  void stream_fixation(const Vec2& true_gaze_cm, const Vec3& pose);
  std::vector<InteractionEvent> drag_path(double t_down, const Vec2& from_pt, const Vec2& to_pt) const;

  ExperimentConfig cfg_;
  std::uint64_t seed_;
  Strategy strategy_;
  DeviceProfile profile_;
  SimulationStreams rng_;
  Participant participant_;
  TargetLayout layout_;
  Calibrator calibrator_;
  GazeSwipeEngine gs_;
  PureCursorEngine pc_;
  double t_ = 0.0;
  int previous_target_ = -1;
  std::int64_t trial_idx_ = 0;
};

/// targets_per_condition records for one (seed, strategy) condition.
std::vector<TrialRecord> run_condition(const ExperimentConfig& cfg, std::uint64_t seed, Strategy strategy);

/// Seed-major, then strategy in configured order, then trial order.
std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg);

}  // namespace gazeswipe
