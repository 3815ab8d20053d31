#include "gazeswipe/calibration.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>

namespace gazeswipe {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::NC: return "NC";
    case Strategy::EC: return "EC";
    case Strategy::AC1: return "AC1";
    case Strategy::AC2: return "AC2";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  for (Strategy s : {Strategy::NC, Strategy::EC, Strategy::AC1, Strategy::AC2}) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError("unknown calibration strategy '" + std::string(name) + "'");
}

std::string_view to_string(WeightingMode m) {
  return m == WeightingMode::OffsetMagnitude ? "offset-magnitude" : "estimate-distance";
}

WeightingMode parse_weighting_mode(std::string_view name) {
  if (name == "offset-magnitude") return WeightingMode::OffsetMagnitude;
  if (name == "estimate-distance") return WeightingMode::EstimateDistance;
  throw ConfigError("unknown weighting mode '" + std::string(name) + "'");
}

void validate(const CalibrationSample& s) {
  if (!s.g_est_cm.allFinite() || !s.g_gt_cm.allFinite() || !std::isfinite(s.timestamp_s)) {
    throw InvalidInput("calibration sample: non-finite coordinates");
  }
  if (s.head_pose && !is_unit(*s.head_pose)) throw InvalidInput("calibration sample: head pose not normalized");
}

void SampleStore::record(const CalibrationSample& sample) {
  if (frozen_) throw ProtocolError("sample store is frozen");
  validate(sample);
  samples_.push_back(sample);
  if (capacity_) {
    while (samples_.size() > *capacity_) samples_.pop_front();
  }
}

void SampleStore::clear() {
  if (frozen_) throw ProtocolError("sample store is frozen");
  samples_.clear();
}

void validate(const CalibratorConfig& cfg) {
  if (!(cfg.epsilon_cm > 0.0) || !std::isfinite(cfg.epsilon_cm)) {
    throw ConfigError("calibrator epsilon must be positive");
  }
}

namespace {

Eigen::Matrix2Xd offsets_of(const SampleStore& store) {
  Eigen::Matrix2Xd offsets(2, static_cast<Eigen::Index>(store.size()));
  Eigen::Index i = 0;
  for (const auto& s : store.samples()) offsets.col(i++) = s.offset();
  return offsets;
}

Eigen::VectorXd distances_of(const SampleStore& store, const Vec2& g_est, WeightingMode mode) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(store.size()));
  Eigen::Index i = 0;
  for (const auto& s : store.samples()) {
    d(i++) = mode == WeightingMode::OffsetMagnitude ? s.offset().norm() : (g_est - s.g_est_cm).norm();
  }
  return d;
}

void require_query(const Vec2& g_est) {
  if (!g_est.allFinite()) throw InvalidInput("calibration query: non-finite estimate");
}

}  // namespace

Eigen::VectorXd ac1_weights(const SampleStore& store, const Vec2& g_est, const CalibratorConfig& cfg) {
  validate(cfg);
  require_query(g_est);
  if (store.empty()) return {};
  const Eigen::VectorXd inverse = distances_of(store, g_est, cfg.weighting_mode).cwiseMax(cfg.epsilon_cm).cwiseInverse();
  return inverse / inverse.sum();
}

Eigen::VectorXd ac2_pose_weights(const SampleStore& store, const Vec3& head_pose, const CalibratorConfig& cfg) {
  if (!is_unit(head_pose)) throw InvalidInput("calibration query: head pose not normalized");
  Eigen::VectorXd h(static_cast<Eigen::Index>(store.size()));
  Eigen::Index i = 0;
  for (const auto& s : store.samples()) {
    double cosine = s.head_pose ? head_pose.dot(*s.head_pose) : 1.0;
    if (cfg.clamp_negative_cosine) cosine = std::clamp(cosine, 0.0, 1.0);
    h(i++) = cosine;
  }
  return h;
}

Vec2 calibrate_ac1(const SampleStore& store, const Vec2& g_est, const CalibratorConfig& cfg) {
  validate(cfg);
  require_query(g_est);
  if (store.empty()) return g_est;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(store.size()));
  return g_est + inverse_distance_correction<double>(offsets_of(store),
                                                     distances_of(store, g_est, cfg.weighting_mode), ones,
                                                     cfg.epsilon_cm);
}

Vec2 calibrate_ac2(const SampleStore& store, const Vec2& g_est, const Vec3& head_pose,
                   const CalibratorConfig& cfg) {
  validate(cfg);
  require_query(g_est);
  const Eigen::VectorXd h = ac2_pose_weights(store, head_pose, cfg);
  if (store.empty()) return g_est;
  return g_est + inverse_distance_correction<double>(offsets_of(store),
                                                     distances_of(store, g_est, cfg.weighting_mode), h,
                                                     cfg.epsilon_cm);
}

std::vector<Vec2> explicit_calibration_targets_pt(const DeviceProfile& profile) {
  const Vec2 size = profile.screen_pt_size();
  std::vector<Vec2> targets;
  targets.reserve(9);
  for (double fy : {1.0 / 6.0, 0.5, 5.0 / 6.0}) {
    for (double fx : {1.0 / 6.0, 0.5, 5.0 / 6.0}) targets.emplace_back(fx * size.x(), fy * size.y());
  }
  return targets;
}

SampleStore build_explicit_calibration(const DeviceProfile& profile, std::span<const Vec2> targets_pt,
                                       std::span<const Vec2> observed_cm, std::span<const Vec3> poses) {
  if (targets_pt.size() != 9 || observed_cm.size() != 9 || poses.size() != 9) {
    throw InvalidInput("explicit calibration needs exactly 9 targets, observations and poses");
  }
  const auto grid = explicit_calibration_targets_pt(profile);
  SampleStore store;
  for (std::size_t i = 0; i < 9; ++i) {
    const bool on_grid = std::any_of(grid.begin(), grid.end(),
                                     [&](const Vec2& g) { return (g - targets_pt[i]).norm() < 1e-6; });
    if (!on_grid) throw InvalidInput("explicit calibration target off the 3x3 grid");
    CalibrationSample s;
    s.g_est_cm = observed_cm[i];
    s.g_gt_cm = screen_pt_to_cm(targets_pt[i], profile);
    s.head_pose = poses[i];
    s.trial_id = -static_cast<std::int64_t>(i) - 1;
    store.record(s);
  }
  store.freeze();
  return store;
}

Calibrator::Calibrator(CalibratorConfig cfg, SampleStore store) : cfg_(cfg), store_(std::move(store)) {
  validate(cfg_);
}

Vec2 Calibrator::apply(const Vec2& g_est, const std::optional<Vec3>& head_pose) const {
  switch (cfg_.strategy) {
    case Strategy::NC:
      require_query(g_est);
      return g_est;
    case Strategy::EC:
    case Strategy::AC1:
      return calibrate_ac1(store_, g_est, cfg_);
    case Strategy::AC2:
      if (!head_pose) return calibrate_ac1(store_, g_est, cfg_);
      return calibrate_ac2(store_, g_est, *head_pose, cfg_);
  }
  return g_est;
}

bool Calibrator::offer(const CalibrationSample& sample) {
  if (!collects_samples()) return false;
  store_.record(sample);
  return true;
}

void Calibrator::set_strategy(Strategy s) {
  cfg_.strategy = s;
  store_ = SampleStore(store_.capacity());
}

void Calibrator::reset(SampleStore store) { store_ = std::move(store); }

void to_json(nlohmann::json& j, const CalibrationSample& s) {
  j = nlohmann::json{
      {"g_est_cm", {s.g_est_cm.x(), s.g_est_cm.y()}},
      {"g_gt_cm", {s.g_gt_cm.x(), s.g_gt_cm.y()}},
      {"head_pose", nullptr},
      {"timestamp_s", s.timestamp_s},
      {"trial_id", s.trial_id},
  };
  if (s.head_pose) j["head_pose"] = {s.head_pose->x(), s.head_pose->y(), s.head_pose->z()};
}

void from_json(const nlohmann::json& j, CalibrationSample& s) {
  try {
    const auto& est = j.at("g_est_cm");
    const auto& gt = j.at("g_gt_cm");
    s.g_est_cm = Vec2(est.at(0).get<double>(), est.at(1).get<double>());
    s.g_gt_cm = Vec2(gt.at(0).get<double>(), gt.at(1).get<double>());
    s.head_pose.reset();
    if (j.contains("head_pose") && !j.at("head_pose").is_null()) {
      const auto& h = j.at("head_pose");
      s.head_pose = Vec3(h.at(0).get<double>(), h.at(1).get<double>(), h.at(2).get<double>());
    }
    s.timestamp_s = j.at("timestamp_s").get<double>();
    s.trial_id = j.at("trial_id").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("calibration sample json: ") + e.what());
  }
  validate(s);
}

void write_samples_jsonl(std::ostream& out, const SampleStore& store) {
  for (const auto& s : store.samples()) out << nlohmann::json(s).dump() << '\n';
}

SampleStore read_samples_jsonl(std::istream& in, std::optional<std::size_t> capacity) {
  SampleStore store(capacity);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw InvalidInput(std::string("sample log: ") + e.what());
    }
    store.record(j.get<CalibrationSample>());
  }
  return store;
}

}  // namespace gazeswipe
