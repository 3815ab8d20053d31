#pragma once

#include <Eigen/Dense>

namespace gazeswipe {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

using Vec2 = Vector2<double>;
using Vec3 = Vector3<double>;
using Vec2i = Eigen::Vector2i;

/// Linear map from head-pose deviation (unit-vector difference) to gaze offset in cm.
using PoseGain = Eigen::Matrix<double, 2, 3>;

}  // namespace gazeswipe
