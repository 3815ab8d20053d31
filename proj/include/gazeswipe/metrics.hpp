#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazeswipe/types.hpp"

namespace gazeswipe {

/// Objective measurements of one interaction.
struct TrialRecord {
  std::int64_t trial_idx = 0;
  std::uint64_t seed = 0;
  std::string device;
  std::string strategy;
  std::string technique;
  double gaze_error_cm = 0.0;
  double thumb_distance_cm = 0.0;
  double completion_time_s = 0.0;
  bool success = false;
  std::string gesture;
  double timestamp_s = 0.0;

  bool operator==(const TrialRecord&) const = default;
};

/// Distance between the calibrated gaze estimate and the release position, cm.
double gaze_error(const Vec2& calibrated_gaze_cm, const Vec2& release_pos_cm);

struct WindowPoint {
  /// Mean trial index covered by the window.
  double center_idx = 0.0;
  double mean_error = 0.0;
};

/// Means over windows [k*step, k*step + window) for k = 0 .. floor((n - window) / step).
/// Throws InvalidInput when window > n or window/step < 1.
std::vector<WindowPoint> sliding_window_error(std::span<const double> errors, int window = 16, int step = 4);
std::vector<WindowPoint> sliding_window_error(std::span<const TrialRecord> records, int window = 16, int step = 4);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct MetricSummary {
  double mean = 0.0;
  /// Sample standard deviation; 0 for a single value.
  double sd = 0.0;
  /// Percentile bootstrap interval of the mean, widened to contain it.
  Interval ci95;
};

struct GroupSummary {
  std::string technique;
  std::string strategy;
  std::string device;
  std::size_t count = 0;
  MetricSummary gaze_error_cm;
  MetricSummary thumb_distance_cm;
  MetricSummary completion_time_s;
  MetricSummary success_rate;
};

struct SummaryStats {
  /// One group per (technique, strategy, device), in order of first appearance.
  std::vector<GroupSummary> groups;
};

inline constexpr int kBootstrapResamples = 1000;

MetricSummary describe(std::span<const double> values, std::uint64_t bootstrap_seed,
                       int resamples = kBootstrapResamples);

/// Throws InvalidInput on an empty record set.
SummaryStats summarize(std::span<const TrialRecord> records, std::uint64_t bootstrap_seed = 0,
                       int resamples = kBootstrapResamples);

void to_json(nlohmann::json& j, const MetricSummary& m);
void to_json(nlohmann::json& j, const GroupSummary& g);
void to_json(nlohmann::json& j, const SummaryStats& s);

inline constexpr const char* kCsvHeader =
    "trial_idx,seed,device,strategy,technique,gaze_error_cm,thumb_distance_cm,completion_time_s,success,gesture,"
    "timestamp_s";

void write_csv(std::ostream& out, std::span<const TrialRecord> records);
/// Throws Error when the file cannot be written.
void export_csv(std::span<const TrialRecord> records, const std::filesystem::path& path);
/// Throws InvalidInput on a bad header or row.
std::vector<TrialRecord> parse_csv(std::istream& in);

}  // namespace gazeswipe
