#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazeswipe/errors.hpp"
#include "gazeswipe/geometry.hpp"
#include "gazeswipe/types.hpp"

namespace gazeswipe {

enum class Strategy { NC, EC, AC1, AC2 };

std::string_view to_string(Strategy s);
/// Throws ConfigError for anything other than NC, EC, AC1, AC2.
Strategy parse_strategy(std::string_view name);

enum class WeightingMode {
  /// lambda_i ~ 1 / ||G_gt_i - G_E_i||, the sample's own offset magnitude.
  OffsetMagnitude,
  /// lambda_i ~ 1 / ||G_E - G_E_i||, distance from the current estimate.
  EstimateDistance,
};

std::string_view to_string(WeightingMode m);
WeightingMode parse_weighting_mode(std::string_view name);

/// One (estimate, ground truth) pair harvested at thumb release. Screen cm.
struct CalibrationSample {
  Vec2 g_est_cm{0.0, 0.0};
  Vec2 g_gt_cm{0.0, 0.0};
  std::optional<Vec3> head_pose;
  double timestamp_s = 0.0;
  std::int64_t trial_id = 0;

  Vec2 offset() const { return g_gt_cm - g_est_cm; }
};

void validate(const CalibrationSample& sample);

inline constexpr double kUnitTolerance = 1e-6;

inline bool is_unit(const Vec3& v) { return v.allFinite() && std::abs(v.norm() - 1.0) <= kUnitTolerance; }

/// Ordered calibration history with optional FIFO capacity.
class SampleStore {
 public:
  SampleStore() = default;
  explicit SampleStore(std::optional<std::size_t> capacity) : capacity_(capacity) {}

  /// Appends a validated sample, evicting the oldest beyond capacity.
  /// Throws ProtocolError on a frozen store.
  void record(const CalibrationSample& sample);

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  void clear();

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  std::optional<std::size_t> capacity() const { return capacity_; }
  const std::deque<CalibrationSample>& samples() const { return samples_; }

 private:
  std::deque<CalibrationSample> samples_;
  std::optional<std::size_t> capacity_;
  bool frozen_ = false;
};

struct CalibratorConfig {
  double epsilon_cm = 0.05;
  WeightingMode weighting_mode = WeightingMode::OffsetMagnitude;
  bool clamp_negative_cosine = true;
  Strategy strategy = Strategy::NC;
};

void validate(const CalibratorConfig& cfg);

/// Inverse-distance correction sum_i w_i * h_i * offset_i with
/// w_i = (1/max(eps, d_i)) / sum_j (1/max(eps, d_j)).
///
/// `offsets` is 2 x N, `distances` and `pose_weights` are length N. The pose
/// weights scale the normalized weights and are not renormalized.
template <typename Scalar>
Vector2<Scalar> inverse_distance_correction(const Eigen::Matrix<Scalar, 2, Eigen::Dynamic>& offsets,
                                            const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& distances,
                                            const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& pose_weights,
                                            Scalar epsilon) {
  if (offsets.cols() == 0) return Vector2<Scalar>::Zero();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inverse = distances.cwiseMax(epsilon).cwiseInverse();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights = inverse / inverse.sum();
  return offsets * weights.cwiseProduct(pose_weights);
}

/// Normalized inverse-distance weights lambda_i for a query, per `cfg.weighting_mode`.
Eigen::VectorXd ac1_weights(const SampleStore& store, const Vec2& g_est, const CalibratorConfig& cfg);

/// Head-pose weights h_i = H_query . H_i (clamped to [0, 1] when configured);
/// samples without a pose get 1.
Eigen::VectorXd ac2_pose_weights(const SampleStore& store, const Vec3& head_pose, const CalibratorConfig& cfg);

/// G_C = G_E + sum_i lambda_i dG_i. Empty store returns g_est.
Vec2 calibrate_ac1(const SampleStore& store, const Vec2& g_est, const CalibratorConfig& cfg);

/// G_C = G_E + sum_i lambda_i h_i dG_i. Throws InvalidInput for a non-unit pose.
Vec2 calibrate_ac2(const SampleStore& store, const Vec2& g_est, const Vec3& head_pose,
                   const CalibratorConfig& cfg);

/// The 3x3 explicit-calibration grid at {1/6, 1/2, 5/6} of each screen axis, in pt,
/// row-major from the top-left.
std::vector<Vec2> explicit_calibration_targets_pt(const DeviceProfile& profile);

/// Frozen store of the nine explicit-calibration samples. `targets_pt` must be
/// the grid above; `observed_cm` are the raw estimates while fixating them.
SampleStore build_explicit_calibration(const DeviceProfile& profile, std::span<const Vec2> targets_pt,
                                       std::span<const Vec2> observed_cm, std::span<const Vec3> poses);

/// Store plus configuration; applies the configured strategy.
class Calibrator {
 public:
  explicit Calibrator(CalibratorConfig cfg = {}, SampleStore store = {});

  /// Calibrated estimate for the active strategy. NC returns g_est unchanged;
  /// EC interpolates over the frozen explicit store like AC1; AC2 falls back
  /// to h_i = 1 when the query has no head pose.
  Vec2 apply(const Vec2& g_est, const std::optional<Vec3>& head_pose) const;

  /// True when samples harvested from interactions should be recorded.
  bool collects_samples() const {
    return cfg_.strategy == Strategy::AC1 || cfg_.strategy == Strategy::AC2;
  }

  /// Records the sample when the strategy collects samples; returns whether it did.
  bool offer(const CalibrationSample& sample);

  void set_strategy(Strategy s);
  void reset(SampleStore store = {});

  const CalibratorConfig& config() const { return cfg_; }
  const SampleStore& store() const { return store_; }
  SampleStore& store() { return store_; }

 private:
  CalibratorConfig cfg_;
  SampleStore store_;
};

void to_json(nlohmann::json& j, const CalibrationSample& s);
void from_json(const nlohmann::json& j, CalibrationSample& s);

/// JSON-lines, one CalibrationSample per line.
void write_samples_jsonl(std::ostream& out, const SampleStore& store);
SampleStore read_samples_jsonl(std::istream& in, std::optional<std::size_t> capacity = std::nullopt);

}  // namespace gazeswipe
