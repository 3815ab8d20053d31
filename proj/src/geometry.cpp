#include "gazeswipe/geometry.hpp"

#include <cmath>

namespace gazeswipe {

DeviceProfile make_profile(std::string name, Vec2i screen_px, Vec2i screen_pt, double diagonal_in) {
  DeviceProfile p;
  p.name = std::move(name);
  p.screen_px = screen_px;
  p.screen_pt = screen_pt;
  p.diagonal_cm = diagonal_in * kCmPerInch;
  const double aspect = static_cast<double>(screen_px.y()) / screen_px.x();
  const double width = p.diagonal_cm / std::sqrt(1.0 + aspect * aspect);
  p.physical_cm = Vec2(width, width * aspect);
  p.camera_offset_cm = Vec2(width / 2.0, 0.0);
  return p;
}

void validate(const DeviceProfile& p) {
  auto fail = [&](const std::string& why) {
    throw InvalidInput("device profile '" + p.name + "': " + why);
  };
  if ((p.screen_px.array() <= 0).any() || (p.screen_pt.array() <= 0).any()) fail("non-positive screen size");
  if (!(p.diagonal_cm > 0.0) || !std::isfinite(p.diagonal_cm)) fail("non-positive diagonal");
  if (!p.physical_cm.allFinite() || (p.physical_cm.array() <= 0.0).any()) fail("non-positive physical size");
  if (!p.camera_offset_cm.allFinite()) fail("non-finite camera offset");
  if (std::abs(p.physical_cm.norm() - p.diagonal_cm) > 0.005 * p.diagonal_cm) {
    fail("physical size inconsistent with diagonal");
  }
  const double px_aspect = static_cast<double>(p.screen_px.y()) / p.screen_px.x();
  const double cm_aspect = p.physical_cm.y() / p.physical_cm.x();
  if (std::abs(cm_aspect - px_aspect) > 0.005 * px_aspect) fail("physical aspect differs from pixel aspect");
  if (p.camera_offset_cm.y() > 0.5) fail("camera below the top edge");
}

std::vector<DeviceProfile> builtin_profiles() {
  // Tablet pt grid is the px grid scaled by 2/3.
  return {
      make_profile("phone", Vec2i(1440, 3200), Vec2i(1080, 2268), 6.67),
      make_profile("tablet", Vec2i(1800, 2880), Vec2i(1200, 1920), 11.0),
  };
}

DeviceProfile profile_by_name(std::string_view name) {
  for (auto& p : builtin_profiles()) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown device profile '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const DeviceProfile& p) {
  j = nlohmann::json{
      {"name", p.name},
      {"screen_px", {p.screen_px.x(), p.screen_px.y()}},
      {"screen_pt", {p.screen_pt.x(), p.screen_pt.y()}},
      {"diagonal_cm", p.diagonal_cm},
      {"physical_cm", {p.physical_cm.x(), p.physical_cm.y()}},
      {"camera_offset_cm", {p.camera_offset_cm.x(), p.camera_offset_cm.y()}},
  };
}

void from_json(const nlohmann::json& j, DeviceProfile& p) {
  try {
    p.name = j.at("name").get<std::string>();
    const auto& px = j.at("screen_px");
    const auto& pt = j.at("screen_pt");
    const auto& phys = j.at("physical_cm");
    const auto& cam = j.at("camera_offset_cm");
    p.screen_px = Vec2i(px.at(0).get<int>(), px.at(1).get<int>());
    p.screen_pt = Vec2i(pt.at(0).get<int>(), pt.at(1).get<int>());
    p.diagonal_cm = j.at("diagonal_cm").get<double>();
    p.physical_cm = Vec2(phys.at(0).get<double>(), phys.at(1).get<double>());
    p.camera_offset_cm = Vec2(cam.at(0).get<double>(), cam.at(1).get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("device profile json: ") + e.what());
  }
  validate(p);
}

}  // namespace gazeswipe
