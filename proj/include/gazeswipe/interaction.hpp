#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazeswipe/calibration.hpp"
#include "gazeswipe/gaze.hpp"
#include "gazeswipe/geometry.hpp"
#include "gazeswipe/types.hpp"

namespace gazeswipe {

/// Axis-aligned rectangle in screen pt. Closed: edges count as inside.
struct Rect {
  double x = 0.0;
  double y = 0.0;
  double width = 0.0;
  double height = 0.0;

  Vec2 center() const { return Vec2(x + width / 2.0, y + height / 2.0); }
  bool contains(const Vec2& p) const { return p.x() >= x && p.x() <= x + width && p.y() >= y && p.y() <= y + height; }
  /// Squared distance from p to the nearest point of the rectangle.
  double squared_distance(const Vec2& p) const;
  double distance(const Vec2& p) const;
};

struct Element {
  int id = 0;
  Rect rect_pt;
  bool is_target = false;
};

/// 12 x 6 grid of square elements, one per cell, exactly one marked as target.
class TargetLayout {
 public:
  static constexpr int kRows = 12;
  static constexpr int kCols = 6;
  static constexpr int kCount = kRows * kCols;

  TargetLayout(std::uint64_t seed, Vec2 cell_size_pt, std::vector<Element> elements);

  std::uint64_t seed() const { return seed_; }
  Vec2 cell_size_pt() const { return cell_size_pt_; }
  const std::vector<Element>& elements() const { return elements_; }
  const Element& element(int id) const;
  int target_id() const { return target_id_; }
  const Element& target() const { return element(target_id_); }
  void set_target(int id);

 private:
  std::uint64_t seed_;
  Vec2 cell_size_pt_;
  std::vector<Element> elements_;
  int target_id_ = 0;
};

/// Random layout: each cell holds a 50 or 100 pt square at a uniform
/// position inside the cell; the target is uniform over elements.
/// Throws InvalidInput when the pt grid does not split into 12 x 6 cells.
TargetLayout generate_layout(std::uint64_t seed, const DeviceProfile& profile);

/// Element whose rectangle is nearest to p; ties go to the smaller center
/// distance, then the smaller id.
int snap_to_nearest(const Vec2& p_pt, const TargetLayout& layout);

/// Element containing p (smallest id when several do).
std::optional<int> element_at(const Vec2& p_pt, const TargetLayout& layout);

enum class Phase { Inactive, Hover, Locked, Dragging };
enum class EventKind { GazeFrameArrived, TouchDown, TouchMove, TouchUp, DoubleTapEdge };
enum class Gesture { DragRelease, TapOnly, Scroll, ShortTapAtFinger };

std::string_view to_string(Phase p);
std::string_view to_string(EventKind k);
std::string_view to_string(Gesture g);
EventKind parse_event_kind(std::string_view name);
Gesture parse_gesture(std::string_view name);

inline constexpr Phase kAllPhases[] = {Phase::Inactive, Phase::Hover, Phase::Locked, Phase::Dragging};
inline constexpr EventKind kAllEventKinds[] = {EventKind::GazeFrameArrived, EventKind::TouchDown, EventKind::TouchMove,
                                               EventKind::TouchUp, EventKind::DoubleTapEdge};

struct InteractionEvent {
  EventKind kind = EventKind::GazeFrameArrived;
  double t = 0.0;
  /// Touch position in screen pt (touch events only).
  Vec2 point_pt{0.0, 0.0};
  /// Present for GazeFrameArrived.
  std::optional<GazeFrame> frame;

  static InteractionEvent gaze(GazeFrame f);
  static InteractionEvent touch_down(double t, Vec2 p);
  static InteractionEvent touch_move(double t, Vec2 p);
  static InteractionEvent touch_up(double t, Vec2 p);
  static InteractionEvent double_tap_edge(double t);
};

struct TouchPoint {
  double t = 0.0;
  Vec2 pt{0.0, 0.0};
};

struct PreviousTap {
  double t_up = 0.0;
  Vec2 pt{0.0, 0.0};
};

struct InteractionConfig {
  double gs_gain = 1.0;
  double pc_gain = 3.0;
  double tap_max_displacement_cm = 0.2;
  double tap_max_duration_s = 0.3;
  double double_tap_window_s = 0.35;
  double double_tap_radius_cm = 0.5;
  double scroll_min_length_fraction = 0.25;
  double scroll_min_speed_cm_s = 10.0;
  OneEuroParams filter;
};

void to_json(nlohmann::json& j, const InteractionConfig& c);
void merge_from_json(const nlohmann::json& j, InteractionConfig& c);

/// Polyline length of a touch path, in cm.
double path_length_cm(std::span<const TouchPoint> path, const DeviceProfile& profile);

/// Tap: displacement < tap_max_displacement and duration < tap_max_duration;
/// a tap close in time and space to `previous_tap` is a ShortTapAtFinger.
/// Scroll: length above a fraction of the screen height at high mean speed.
/// Anything else is a DragRelease.
Gesture classify_gesture(std::span<const TouchPoint> path, const DeviceProfile& profile,
                         const InteractionConfig& cfg, std::optional<PreviousTap> previous_tap = std::nullopt);

struct CursorState {
  Phase phase = Phase::Inactive;
  Vec2 raw_gaze_cm{0.0, 0.0};
  Vec2 calibrated_cm{0.0, 0.0};
  std::optional<int> snapped_element;
  std::optional<Vec2> locked_pos_pt;
  std::optional<Vec2> current_pos_pt;
  std::optional<Vec2> touch_origin_pt;
};

struct SelectionOutcome {
  Vec2 released_pos_pt{0.0, 0.0};
  std::optional<int> hit_element;
  bool success = false;
  double thumb_distance_cm = 0.0;
  double duration_s = 0.0;
  Gesture gesture = Gesture::DragRelease;
  int target_id = 0;
  /// Calibrated, pre-snap gaze estimate at cursor lock (GazeSwipe only).
  std::optional<Vec2> gaze_at_lock_cm;
};

/// Result of one event: whether the cursor changed, plus anything emitted.
struct StepResult {
  bool state_changed = false;
  std::optional<SelectionOutcome> outcome;
  std::optional<CalibrationSample> sample;
  std::optional<Gesture> gesture;
};

/// Gaze cursor with touch-drag-release confirmation.
///
/// Starts Inactive; DoubleTapEdge toggles Inactive/Hover. In Hover each gaze
/// frame re-snaps the cursor. TouchDown locks it, TouchMove drags it with
/// gs_gain, TouchUp classifies the gesture and emits the selection and a
/// calibration sample (G_E at lock, release position). Events that do not
/// fit the phase throw ProtocolError and leave the state unchanged.
class GazeSwipeEngine {
 public:
  explicit GazeSwipeEngine(DeviceProfile profile, InteractionConfig cfg = {});

  StepResult handle(const InteractionEvent& ev, const TargetLayout& layout, const Calibrator& calibrator);

  /// Marks the start of a new fixation: the next gaze frame passes the
  /// filter unsmoothed. Hover only; throws ProtocolError otherwise.
  void restart_gaze_stream();

  const CursorState& state() const { return state_; }
  const DeviceProfile& profile() const { return profile_; }
  const InteractionConfig& config() const { return cfg_; }

 private:
  StepResult on_gaze(const InteractionEvent& ev, const TargetLayout& layout, const Calibrator& calibrator);
  StepResult on_touch_up(const InteractionEvent& ev, const TargetLayout& layout);

  DeviceProfile profile_;
  InteractionConfig cfg_;
  GazePipeline pipeline_;
  CursorState state_;
  std::optional<GazeEstimate> latest_;
  std::optional<GazeEstimate> at_lock_;
  std::vector<TouchPoint> path_;
  std::optional<PreviousTap> previous_tap_;
  std::optional<double> last_t_;
  std::int64_t next_trial_id_ = 0;
};

/// Baseline cursor that starts at the touch point and extends along the
/// swipe by pc_gain. Starts in Hover; gaze frames are accepted and ignored.
class PureCursorEngine {
 public:
  explicit PureCursorEngine(DeviceProfile profile, InteractionConfig cfg = {});

  StepResult handle(const InteractionEvent& ev, const TargetLayout& layout);

  const CursorState& state() const { return state_; }

 private:
  DeviceProfile profile_;
  InteractionConfig cfg_;
  CursorState state_;
  std::vector<TouchPoint> path_;
  std::optional<double> last_t_;
};

/// Event-log record: an InteractionEvent, or a change of target element.
struct TargetChange {
  double t = 0.0;
  int target_id = 0;
};
using EventLogRecord = std::variant<InteractionEvent, TargetChange>;

void to_json(nlohmann::json& j, const InteractionEvent& ev);
void from_json(const nlohmann::json& j, InteractionEvent& ev);
void to_json(nlohmann::json& j, const SelectionOutcome& o);

/// JSON-lines event log. Besides the five event kinds, a line
/// {"kind":"SetTarget","t":..,"target_id":..} selects the target element.
void write_event_log(std::ostream& out, const std::vector<EventLogRecord>& records);
std::vector<EventLogRecord> read_event_log(std::istream& in);

/// Runs a log through a fresh GazeSwipeEngine on generate_layout(layout_seed).
/// Samples are offered to the calibrator, so AC strategies adapt during replay.
std::vector<StepResult> replay_event_log(const std::vector<EventLogRecord>& records, const DeviceProfile& profile,
                                         std::uint64_t layout_seed, Calibrator& calibrator,
                                         const InteractionConfig& cfg = {});

}  // namespace gazeswipe
