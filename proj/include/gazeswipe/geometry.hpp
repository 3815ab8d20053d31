#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazeswipe/errors.hpp"
#include "gazeswipe/types.hpp"

namespace gazeswipe {

inline constexpr double kCmPerInch = 2.54;

/// Screen geometry of a device held in portrait orientation.
///
/// Screen frame: origin at the top-left corner, x right, y down. The camera
/// frame shares the axes but has its origin at the front camera, whose
/// position in the screen frame is `camera_offset_cm`.
struct DeviceProfile {
  std::string name;
  Vec2i screen_px{0, 0};
  Vec2i screen_pt{0, 0};
  double diagonal_cm = 0.0;
  Vec2 physical_cm{0.0, 0.0};
  Vec2 camera_offset_cm{0.0, 0.0};

  Vec2 pt_per_cm() const {
    return Vec2(screen_pt.x() / physical_cm.x(), screen_pt.y() / physical_cm.y());
  }
  Vec2 screen_pt_size() const { return screen_pt.cast<double>(); }
};

/// Builds a profile whose physical size follows from the diagonal and the
/// pixel aspect ratio, with the camera at the top center.
DeviceProfile make_profile(std::string name, Vec2i screen_px, Vec2i screen_pt, double diagonal_in);

/// Throws InvalidInput when any DeviceProfile invariant is violated.
void validate(const DeviceProfile& profile);

/// The phone (6.67", 1440x3200 px) and tablet (11", 1800x2880 px) profiles.
std::vector<DeviceProfile> builtin_profiles();

/// Throws ConfigError for unknown names.
DeviceProfile profile_by_name(std::string_view name);

namespace detail {
template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& p, const char* what) {
  if (!p.allFinite()) throw InvalidInput(std::string(what) + ": non-finite coordinates");
}
}  // namespace detail

/// Transform T: camera-plane cm to screen pt. No clamping.
template <typename Derived>
Vector2<typename Derived::Scalar> camera_cm_to_screen_pt(const Eigen::MatrixBase<Derived>& p,
                                                         const DeviceProfile& profile) {
  using Scalar = typename Derived::Scalar;
  detail::require_finite(p, "camera_cm_to_screen_pt");
  const Vector2<Scalar> screen_cm = p + profile.camera_offset_cm.cast<Scalar>();
  return screen_cm.cwiseProduct(profile.pt_per_cm().cast<Scalar>());
}

template <typename Derived>
Vector2<typename Derived::Scalar> camera_cm_to_screen_cm(const Eigen::MatrixBase<Derived>& p,
                                                         const DeviceProfile& profile) {
  detail::require_finite(p, "camera_cm_to_screen_cm");
  return p + profile.camera_offset_cm.cast<typename Derived::Scalar>();
}

template <typename Derived>
Vector2<typename Derived::Scalar> screen_cm_to_camera_cm(const Eigen::MatrixBase<Derived>& p,
                                                         const DeviceProfile& profile) {
  detail::require_finite(p, "screen_cm_to_camera_cm");
  return p - profile.camera_offset_cm.cast<typename Derived::Scalar>();
}

template <typename Derived>
Vector2<typename Derived::Scalar> screen_pt_to_cm(const Eigen::MatrixBase<Derived>& p,
                                                  const DeviceProfile& profile) {
  detail::require_finite(p, "screen_pt_to_cm");
  return p.cwiseQuotient(profile.pt_per_cm().cast<typename Derived::Scalar>());
}

template <typename Derived>
Vector2<typename Derived::Scalar> screen_cm_to_pt(const Eigen::MatrixBase<Derived>& p,
                                                  const DeviceProfile& profile) {
  detail::require_finite(p, "screen_cm_to_pt");
  return p.cwiseProduct(profile.pt_per_cm().cast<typename Derived::Scalar>());
}

void to_json(nlohmann::json& j, const DeviceProfile& profile);
void from_json(const nlohmann::json& j, DeviceProfile& profile);

}  // namespace gazeswipe
