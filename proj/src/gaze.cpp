#include "gazeswipe/gaze.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

namespace gazeswipe {

void validate(const GazeFrame& f) {
  if (!std::isfinite(f.timestamp_s) || !f.raw_cm.allFinite()) throw InvalidInput("gaze frame: non-finite values");
  if (f.head_pose && !is_unit(*f.head_pose)) throw InvalidInput("gaze frame: head pose not normalized");
}

void validate(const SyntheticGazeConfig& cfg) {
  if (!(cfg.noise_sigma_cm >= 0.0) || !(cfg.pose_walk_sigma >= 0.0)) {
    throw ConfigError("synthetic gaze: sigmas must be nonnegative");
  }
  if (!is_unit(cfg.base_pose)) throw ConfigError("synthetic gaze: base pose not normalized");
  if (!(cfg.frame_rate_hz >= 5.0 && cfg.frame_rate_hz <= 60.0)) {
    throw ConfigError("synthetic gaze: frame rate outside [5, 60] Hz");
  }
  if (!cfg.user_bias_cm.allFinite() || !cfg.pose_gain_cm.allFinite()) {
    throw ConfigError("synthetic gaze: non-finite bias or gain");
  }
}

SyntheticGazeConfig GazeModel::draw_user(Rng& rng) const {
  SyntheticGazeConfig cfg;
  cfg.user_bias_cm = rng.normal2(bias_sigma_cm);
  if (fixed_bias_cm) cfg.user_bias_cm = *fixed_bias_cm;
  cfg.pose_gain_cm << pose_gain_cm, 0.0, 0.0,
                      0.0, pose_gain_cm, 0.0;
  cfg.base_pose = base_pose;
  cfg.noise_sigma_cm = noise_sigma_cm;
  cfg.pose_walk_sigma = pose_walk_sigma;
  cfg.frame_rate_hz = frame_rate_hz;
  validate(cfg);
  return cfg;
}

GazeModel default_gaze_model(std::string_view device) {
  GazeModel m;
  if (device == "phone") return m;
  if (device == "tablet") {
    // Viewed from further away; larger projected error on screen.
    m.bias_sigma_cm = 2.65;
    m.pose_gain_cm = 4.2;
    m.noise_sigma_cm = 0.95;
    return m;
  }
  throw ConfigError("unknown device '" + std::string(device) + "'");
}

void to_json(nlohmann::json& j, const GazeModel& m) {
  j = nlohmann::json{
      {"bias_sigma_cm", m.bias_sigma_cm},
      {"pose_gain_cm", m.pose_gain_cm},
      {"noise_sigma_cm", m.noise_sigma_cm},
      {"pose_walk_sigma", m.pose_walk_sigma},
      {"frame_rate_hz", m.frame_rate_hz},
      {"base_pose", {m.base_pose.x(), m.base_pose.y(), m.base_pose.z()}},
      {"fixed_bias_cm", nullptr},
  };
  if (m.fixed_bias_cm) j["fixed_bias_cm"] = {m.fixed_bias_cm->x(), m.fixed_bias_cm->y()};
}

void merge_from_json(const nlohmann::json& j, GazeModel& m) {
  try {
    m.bias_sigma_cm = j.value("bias_sigma_cm", m.bias_sigma_cm);
    m.pose_gain_cm = j.value("pose_gain_cm", m.pose_gain_cm);
    m.noise_sigma_cm = j.value("noise_sigma_cm", m.noise_sigma_cm);
    m.pose_walk_sigma = j.value("pose_walk_sigma", m.pose_walk_sigma);
    m.frame_rate_hz = j.value("frame_rate_hz", m.frame_rate_hz);
    if (j.contains("base_pose")) {
      const auto& b = j.at("base_pose");
      m.base_pose = Vec3(b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>());
    }
    if (j.contains("fixed_bias_cm")) {
      const auto& b = j.at("fixed_bias_cm");
      if (b.is_null()) {
        m.fixed_bias_cm.reset();
      } else {
        m.fixed_bias_cm = Vec2(b.at(0).get<double>(), b.at(1).get<double>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("gaze model json: ") + e.what());
  }
  if (!(m.bias_sigma_cm >= 0.0) || !(m.noise_sigma_cm >= 0.0) || !(m.pose_walk_sigma >= 0.0) ||
      !std::isfinite(m.pose_gain_cm)) {
    throw ConfigError("gaze model: sigmas must be nonnegative");
  }
  if (!is_unit(m.base_pose)) throw ConfigError("gaze model: base pose not normalized");
}

Vec3 pose_walk_step(const Vec3& pose, double sigma, Rng& rng) {
  if (sigma == 0.0) return pose;
  const Vec3 helper = std::abs(pose.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u = pose.cross(helper).normalized();
  const Vec3 v = pose.cross(u);
  const double a = rng.normal();
  const double b = rng.normal();
  return (pose + sigma * (a * u + b * v)).normalized();
}

GazeFrame synthetic_frame(const Vec2& true_gaze_cm, double t, const SyntheticGazeConfig& cfg, const Vec3& pose,
                          const DeviceProfile& profile, Rng& rng) {
  GazeFrame f;
  f.timestamp_s = t;
  const Vec2 noise = rng.normal2(cfg.noise_sigma_cm);
  f.raw_cm = screen_cm_to_camera_cm(true_gaze_cm, profile) + cfg.user_bias_cm +
             cfg.pose_gain_cm * (pose - cfg.base_pose) + noise;
  f.head_pose = pose;
  return f;
}

GazePipeline::GazePipeline(DeviceProfile profile, OneEuroParams filter)
    : profile_(std::move(profile)), filter_(filter) {}

GazeEstimate GazePipeline::process(const GazeFrame& frame, const Calibrator& calibrator) {
  validate(frame);
  GazeEstimate e;
  e.timestamp_s = frame.timestamp_s;
  e.head_pose = frame.head_pose;
  e.estimated_cm = filter_.step(camera_cm_to_screen_cm(frame.raw_cm, profile_), frame.timestamp_s);
  e.calibrated_cm = calibrator.apply(e.estimated_cm, frame.head_pose);
  return e;
}

void to_json(nlohmann::json& j, const GazeFrame& f) {
  j = nlohmann::json{{"t", f.timestamp_s}, {"raw_cm", {f.raw_cm.x(), f.raw_cm.y()}}, {"head_pose", nullptr}};
  if (f.head_pose) j["head_pose"] = {f.head_pose->x(), f.head_pose->y(), f.head_pose->z()};
}

void from_json(const nlohmann::json& j, GazeFrame& f) {
  try {
    f.timestamp_s = j.at("t").get<double>();
    const auto& r = j.at("raw_cm");
    f.raw_cm = Vec2(r.at(0).get<double>(), r.at(1).get<double>());
    f.head_pose.reset();
    if (j.contains("head_pose") && !j.at("head_pose").is_null()) {
      const auto& h = j.at("head_pose");
      f.head_pose = Vec3(h.at(0).get<double>(), h.at(1).get<double>(), h.at(2).get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("gaze frame json: ") + e.what());
  }
  validate(f);
}

void write_frames_jsonl(std::ostream& out, const std::vector<GazeFrame>& frames) {
  for (const auto& f : frames) out << nlohmann::json(f).dump() << '\n';
}

std::vector<GazeFrame> read_frames_jsonl(std::istream& in) {
  std::vector<GazeFrame> frames;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw InvalidInput(std::string("frame log: ") + e.what());
    }
    auto f = j.get<GazeFrame>();
    if (!frames.empty() && !(f.timestamp_s > frames.back().timestamp_s)) {
      throw ProtocolError("frame log: timestamps must strictly increase");
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace gazeswipe
