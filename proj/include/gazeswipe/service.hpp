#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazeswipe/simulation.hpp"

namespace gazeswipe {

enum class GazeMode {
  /// The server simulates a user fixating the current target; gaze_frame
  /// messages only supply the clock.
  Synthetic,
  /// gaze_frame carries the client's pointer position (screen cm), corrupted
  /// server-side by a synthetic user's error model.
  ClientProxy,
};

std::string_view to_string(GazeMode m);
GazeMode parse_gaze_mode(std::string_view name);

struct SessionRequest {
  std::string profile = "phone";
  Strategy strategy = Strategy::AC2;
  Technique technique = Technique::GazeSwipe;
  std::uint64_t seed = 0;
  GazeMode gaze_mode = GazeMode::ClientProxy;
};

/// Throws ConfigError for unknown names or wrongly typed fields.
SessionRequest session_request_from_json(const nlohmann::json& j);

/// Error codes carried by "error" messages.
namespace error_code {
inline constexpr const char* kMalformed = "malformed";
inline constexpr const char* kProtocol = "protocol";
inline constexpr const char* kTimestamp = "timestamp";
inline constexpr const char* kUnknownType = "unknown_type";
inline constexpr const char* kInvalid = "invalid";
}  // namespace error_code

/// One interactive session: layout, engine, calibrator and metrics.
///
/// Responses are a pure function of the creation request and the ordered
/// client messages. Not thread-safe; SessionManager serializes access.
class Session {
 public:
  Session(std::string id, const SessionRequest& request);

  const std::string& id() const { return id_; }
  const SessionRequest& request() const { return request_; }

  /// id, request fields, profile and the full layout.
  nlohmann::json descriptor() const;

  /// Applies one client message and returns the server messages it produced.
  /// Rejected messages produce a single error message and change nothing.
  std::vector<nlohmann::json> handle_message(const nlohmann::json& msg);

  /// Parses `text` as JSON first; unparsable text yields a malformed error.
  std::vector<nlohmann::json> handle_text(std::string_view text);

  nlohmann::json metrics_snapshot();

 private:
  nlohmann::json envelope(std::string type, nlohmann::json payload);
  nlohmann::json error(const char* code, const std::string& message);
  nlohmann::json cursor_state_message();
  std::vector<nlohmann::json> dispatch(const std::string& type, const nlohmann::json& msg);
  std::vector<nlohmann::json> on_gaze(double t, const nlohmann::json& msg);
  std::vector<nlohmann::json> on_touch(EventKind kind, double t, const nlohmann::json& msg);
  std::vector<nlohmann::json> on_selection(const StepResult& r, double t);
  void set_strategy(Strategy s);
  void begin_fixation();
  void pick_next_target();

  std::string id_;
  SessionRequest request_;
  DeviceProfile profile_;
  ExperimentConfig sim_;
  SimulationStreams rng_;
  Participant participant_;
  TargetLayout layout_;
  Calibrator calibrator_;
  GazeSwipeEngine gs_;
  PureCursorEngine pc_;
  std::optional<Vec2> gaze_at_lock_cm_;
  std::optional<Vec2> fixation_cm_;
  Vec3 fixation_pose_{0.0, 0.0, 1.0};
  std::optional<double> last_t_;
  std::optional<double> last_gaze_t_;
  std::optional<double> target_shown_t_;
  int previous_target_ = -1;
  std::uint64_t seq_ = 0;
  std::vector<TrialRecord> records_;
};

/// Thread-safe registry with deterministic ids "session-1", "session-2", ...
class SessionManager {
 public:
  /// Throws ConfigError for a bad request; no session is created then.
  nlohmann::json create(const nlohmann::json& request);
  bool close(const std::string& id);
  nlohmann::json list() const;

  /// Runs `fn` with exclusive access to the session; false when it does not exist.
  bool with_session(const std::string& id, const std::function<void(Session&)>& fn);

 private:
  struct Slot {
    std::mutex mutex;
    std::unique_ptr<Session> session;
  };

  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::uint64_t next_id_ = 1;
};

}  // namespace gazeswipe
