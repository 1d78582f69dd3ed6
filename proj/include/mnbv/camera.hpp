#pragma once

#include "mnbv/common.hpp"

namespace mnbv {

struct ObjectPose2D {
  Vec2 position = Vec2::Zero();
  double heading = 0.0;

  Pose3 world_from_object() const { return planar_embedding(position, heading); }
};

struct RobotState {
  Vec2 position = Vec2::Zero();
  double heading = 0.0;

  Pose3 world_from_base() const { return planar_embedding(position, heading); }
};

/// Robot base (x forward, z up) to camera optical frame (z forward, x right,
/// y down), mounted at `height` and pitched down by `pitch` radians.
inline Pose3 camera_extrinsics(double height, double pitch) {
  Mat3 R;
  R.col(0) = Vec3(0.0, -1.0, 0.0);
  R.col(2) = Vec3(std::cos(pitch), 0.0, -std::sin(pitch));
  R.col(1) = R.col(2).cross(R.col(0));
  Pose3 T = Pose3::Identity();
  T.linear() = R;
  T.translation() = Vec3(0.0, 0.0, height);
  return T;
}

struct CameraModel {
  Mat3 K = Mat3::Identity();
  int width = 0;
  int height = 0;
  Pose3 base_to_camera = Pose3::Identity();
  double depth_min = 0.1;
  double depth_max = 10.0;

  double fx() const { return K(0, 0); }
  double fy() const { return K(1, 1); }
  double cx() const { return K(0, 2); }
  double cy() const { return K(1, 2); }

  void validate() const {
    if (!(K(0, 0) > 0.0 && K(1, 1) > 0.0) || K(1, 0) != 0.0 || K(2, 0) != 0.0 || K(2, 1) != 0.0 ||
        K(2, 2) != 1.0)
      throw InvalidArgument("camera: K must be upper triangular with positive focal lengths");
    if (width <= 0 || height <= 0) throw InvalidArgument("camera: image size must be positive");
    if (!(depth_min >= 0.0 && depth_min < depth_max))
      throw InvalidArgument("camera: require 0 <= depth_min < depth_max");
  }

  Pose3 world_from_camera(const RobotState& robot) const {
    return robot.world_from_base() * base_to_camera;
  }

  /// Ray direction in the camera frame through pixel coordinate (u, v), with z = 1.
  Vec3 ray(double u, double v) const {
    const double y = (v - cy()) / fy();
    const double x = (u - cx() - K(0, 1) * y) / fx();
    return Vec3(x, y, 1.0);
  }

  static CameraModel pinhole(int width, int height, double focal, double mount_height,
                             double pitch, double depth_min, double depth_max) {
    CameraModel c;
    c.K << focal, 0.0, 0.5 * width, 0.0, focal, 0.5 * height, 0.0, 0.0, 1.0;
    c.width = width;
    c.height = height;
    c.base_to_camera = camera_extrinsics(mount_height, pitch);
    c.depth_min = depth_min;
    c.depth_max = depth_max;
    c.validate();
    return c;
  }

  // 320x240 with a 60 degree horizontal field of view, 0.5 m above the base,
  // pitched 10 degrees down.
  static CameraModel make_default() {
    return pinhole(320, 240, 160.0 / std::tan(kPi / 6.0), 0.5, 10.0 * kPi / 180.0, 0.2, 6.0);
  }
};

}  // namespace mnbv
