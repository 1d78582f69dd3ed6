#pragma once

// Ground-truth world: object motion, position measurements, a ray-cast depth
// camera and unicycle execution.

#include <limits>
#include <optional>
#include <vector>

#include "mnbv/camera.hpp"
#include "mnbv/gaussian.hpp"
#include "mnbv/mesh.hpp"
#include "mnbv/trajectory_belief.hpp"

namespace mnbv {

enum class TrajectoryKind { WhiteNoiseAcceleration, SCurve, ConstantVelocity };

struct TrajectoryScript {
  TrajectoryKind kind = TrajectoryKind::WhiteNoiseAcceleration;
  ObjectState initial;
  double q_c = 0.01;        // white-noise-acceleration kind
  double amplitude = 0.0;   // s-curve lateral amplitude, m
  double period = 10.0;     // s-curve period, s
  double speed_threshold = 0.02;

  void validate() const {
    if (!initial.position.allFinite() || !initial.velocity.allFinite())
      throw InvalidArgument("trajectory: non-finite initial state");
    if (kind == TrajectoryKind::WhiteNoiseAcceleration && q_c < 0.0)
      throw InvalidArgument("trajectory: q_c must be >= 0");
    if (kind == TrajectoryKind::SCurve && !(period > 0.0))
      throw InvalidArgument("trajectory: s-curve period must be > 0");
  }

  /// Nominal object displacement over one interval of length dt.
  double nominal_displacement(double dt) const { return initial.velocity.norm() * dt; }
};

/// True object state: pose, velocity and elapsed script time.
struct ObjectTruth {
  ObjectPose2D pose;
  Vec2 velocity = Vec2::Zero();
  double time = 0.0;
};

/// Deterministic script state at time t (t may be negative). The stochastic
/// kind evaluates its constant-velocity mean.
inline ObjectTruth scripted_truth(const TrajectoryScript& script, double t) {
  ObjectTruth out;
  out.time = t;
  const Vec2 v0 = script.initial.velocity;
  out.pose.position = script.initial.position + v0 * t;
  out.velocity = v0;
  if (script.kind == TrajectoryKind::SCurve) {
    const Vec2 dir = v0.norm() > 0 ? v0.normalized() : Vec2::UnitX();
    const Vec2 lateral(-dir.y(), dir.x());
    const double w = 2.0 * kPi / script.period;
    out.pose.position += lateral * script.amplitude * std::sin(w * t);
    out.velocity += lateral * script.amplitude * w * std::cos(w * t);
  }
  out.pose.heading = nominal_heading(out.velocity, 0.0, script.speed_threshold);
  return out;
}

inline ObjectTruth initial_truth(const TrajectoryScript& script) { return scripted_truth(script, 0.0); }

inline ObjectTruth step_object(const ObjectTruth& current, double dt, const TrajectoryScript& script,
                               Rng& rng) {
  if (!(dt > 0.0)) throw InvalidArgument("step_object: dt must be > 0");
  ObjectTruth next;
  next.time = current.time + dt;
  switch (script.kind) {
    case TrajectoryKind::WhiteNoiseAcceleration: {
      const Transition tr = build_transition(dt, script.q_c);
      Vec4 x;
      x << current.pose.position, current.velocity;
      x = sample_gaussian<4>(Vec4(tr.phi * x), covariance_factor<4>(tr.q), rng);
      next.pose.position = x.head<2>();
      next.velocity = x.tail<2>();
      break;
    }
    case TrajectoryKind::ConstantVelocity:
      next.pose.position = current.pose.position + dt * current.velocity;
      next.velocity = current.velocity;
      break;
    case TrajectoryKind::SCurve: {
      const ObjectTruth s = scripted_truth(script, next.time);
      next.pose.position = s.pose.position;
      next.velocity = s.velocity;
      break;
    }
  }
  next.pose.heading = nominal_heading(next.velocity, current.pose.heading, script.speed_threshold);
  return next;
}

inline PositionMeasurement measure_position(const Vec2& true_position, double timestamp, double sigma,
                                            Rng& rng) {
  if (sigma < 0.0) throw InvalidArgument("measure_position: sigma must be >= 0");
  PositionMeasurement m;
  m.timestamp = timestamp;
  m.value = true_position + sigma * standard_normal<2>(rng);
  return m;
}

/// Nearest ray-triangle hit (Moller-Trumbore), two-sided.
inline std::optional<double> intersect_ray(const TriangleMesh& mesh, const Vec3& origin,
                                           const Vec3& dir) {
  // Slab test against the mesh bounds first.
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-300) {
      if (origin[a] < mesh.bounds_min()[a] || origin[a] > mesh.bounds_max()[a]) return std::nullopt;
      continue;
    }
    double ta = (mesh.bounds_min()[a] - origin[a]) / dir[a];
    double tb = (mesh.bounds_max()[a] - origin[a]) / dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < mesh.triangles().size(); ++f) {
    const Vec3& v0 = mesh.corner(f, 0);
    const Vec3 e1 = mesh.corner(f, 1) - v0;
    const Vec3 e2 = mesh.corner(f, 2) - v0;
    const Vec3 p = dir.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < 1e-14) continue;
    const double inv = 1.0 / det;
    const Vec3 s = origin - v0;
    const double u = s.dot(p) * inv;
    if (u < 0.0 || u > 1.0) continue;
    const Vec3 q = s.cross(e1);
    const double v = dir.dot(q) * inv;
    if (v < 0.0 || u + v > 1.0) continue;
    const double t = e2.dot(q) * inv;
    if (t > 1e-12 && t < best) best = t;
  }
  if (!std::isfinite(best)) return std::nullopt;
  return best;
}

struct DepthScan {
  std::vector<Vec3> hits;    // world frame
  std::vector<Vec3> misses;  // world-frame ray ends at depth_max for pixels with no return
};

/// Simulated depth image. One ray per sampled pixel centre (every `stride`
/// pixels). Hits outside the depth range count as misses.
inline DepthScan render_scan(const Pose3& world_from_camera, const ObjectPose2D& object,
                             const TriangleMesh& mesh, const CameraModel& camera, int stride) {
  if (stride < 1) throw InvalidArgument("render_depth: stride must be >= 1");
  const Pose3 world_from_body = object.world_from_object();
  const Pose3 body_from_camera = world_from_body.inverse() * world_from_camera;
  const Vec3 origin = body_from_camera.translation();
  const Mat3 R = body_from_camera.linear();

  DepthScan scan;
  for (int row = stride / 2; row < camera.height; row += stride) {
    for (int col = stride / 2; col < camera.width; col += stride) {
      const Vec3 d_cam = camera.ray(col + 0.5, row + 0.5);
      const auto t = intersect_ray(mesh, origin, R * d_cam);
      // d_cam.z() == 1, so the ray parameter is the depth.
      if (t && *t >= camera.depth_min && *t <= camera.depth_max)
        scan.hits.push_back(world_from_camera * Vec3(*t * d_cam));
      else
        scan.misses.push_back(world_from_camera * Vec3(camera.depth_max * d_cam));
    }
  }
  return scan;
}

/// Hit points of render_scan; misses and out-of-range depths are omitted.
inline std::vector<Vec3> render_depth(const Pose3& world_from_camera, const ObjectPose2D& object,
                                      const TriangleMesh& mesh, const CameraModel& camera,
                                      int stride) {
  return render_scan(world_from_camera, object, mesh, camera, stride).hits;
}

/// Perturbs each point along its viewing ray by N(0, std^2).
inline void add_depth_noise(std::vector<Vec3>& cloud, const Vec3& camera_origin, double std_dev,
                            Rng& rng) {
  if (std_dev <= 0.0) return;
  std::normal_distribution<double> nd(0.0, std_dev);
  for (auto& p : cloud) {
    const Vec3 dir = (p - camera_origin).normalized();
    p += nd(rng) * dir;
  }
}

/// One control interval of a unicycle that translates toward the target
/// position and rotates toward the target yaw, each clamped to its limit.
inline RobotState execute_motion(const RobotState& robot, const Vec2& target_position,
                                 double target_yaw, double v_max, double omega_max, double dt) {
  if (!(v_max > 0.0 && omega_max > 0.0 && dt > 0.0))
    throw InvalidArgument("execute_motion: limits must be positive");
  RobotState next = robot;
  const Vec2 delta = target_position - robot.position;
  const double reach = v_max * dt;
  const double dist = delta.norm();
  next.position = dist <= reach ? target_position : Vec2(robot.position + delta * (reach / dist));

  const double turn = angle_diff(target_yaw, robot.heading);
  const double max_turn = omega_max * dt;
  if (std::abs(turn) <= max_turn)
    next.heading = wrap_angle(target_yaw);
  else
    next.heading = wrap_angle(robot.heading + std::copysign(max_turn, turn));
  return next;
}

/// Merged body-frame cloud from inward-facing views on a circle of radius
/// stand_off around the object, spaced angular_step radians apart.
inline std::vector<Vec3> build_gt_cloud(const TriangleMesh& mesh, const CameraModel& camera,
                                        double stand_off, double angular_step = kPi / 12.0,
                                        int stride = 2) {
  if (!(stand_off >= camera.depth_min && stand_off <= camera.depth_max))
    throw InvalidArgument("build_gt_cloud: stand_off outside the depth range");
  if (!(angular_step > 0.0)) throw InvalidArgument("build_gt_cloud: angular_step must be > 0");
  const int views = std::max(1, static_cast<int>(std::lround(2.0 * kPi / angular_step)));
  const ObjectPose2D identity;
  std::vector<Vec3> cloud;
  for (int i = 0; i < views; ++i) {
    const double phi = i * angular_step;
    RobotState r;
    r.position = stand_off * Vec2(std::cos(phi), std::sin(phi));
    r.heading = wrap_angle(phi + kPi);
    const auto view = render_depth(camera.world_from_camera(r), identity, mesh, camera, stride);
    cloud.insert(cloud.end(), view.begin(), view.end());
  }
  return cloud;
}

}  // namespace mnbv
