#pragma once

// Projection-based coverage score: frontier and occupied voxel sets are
// summarised as ellipsoids, projected to image silhouettes and combined into
// a depth-weighted signed pixel area.

#include <algorithm>
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

#include "mnbv/camera.hpp"
#include "mnbv/gmm.hpp"
#include "mnbv/mvee.hpp"

namespace mnbv {

struct EllipsoidSummary {
  std::vector<Ellipsoid> frontier;
  std::vector<Ellipsoid> occupied;

  bool empty() const { return frontier.empty() && occupied.empty(); }
};

struct SummaryConfig {
  int points_per_cluster = 150;
  int max_clusters = 6;
  std::size_t max_points = 2000;
  GmmOptions gmm;
  MveeOptions mvee;
};

/// ceil(n / points_per_cluster) clamped to [1, max_clusters]; 0 for an empty set.
inline int cluster_count(std::size_t n, const SummaryConfig& cfg) {
  if (n == 0) return 0;
  const auto k = static_cast<int>((n + cfg.points_per_cluster - 1) / cfg.points_per_cluster);
  return std::clamp(k, 1, cfg.max_clusters);
}

/// Every ceil(n / max_points)-th point.
inline std::vector<Vec3> subsample(std::span<const Vec3> pts, std::size_t max_points) {
  if (pts.size() <= max_points) return {pts.begin(), pts.end()};
  const std::size_t step = (pts.size() + max_points - 1) / max_points;
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < pts.size(); i += step) out.push_back(pts[i]);
  return out;
}

inline std::vector<Ellipsoid> summarize_set(std::span<const Vec3> pts, const SummaryConfig& cfg, Rng& rng) {
  std::vector<Ellipsoid> out;
  if (pts.empty()) return out;
  const int k = cluster_count(pts.size(), cfg);
  const auto sample = subsample(pts, cfg.max_points);
  for (const auto& group : cluster(sample, k, rng, cfg.gmm)) out.push_back(mvee(group, cfg.mvee));
  return out;
}

inline EllipsoidSummary summarize(std::span<const Vec3> frontier, std::span<const Vec3> occupied,
                                  const SummaryConfig& cfg, Rng& rng) {
  EllipsoidSummary s;
  s.frontier = summarize_set(frontier, cfg, rng);
  s.occupied = summarize_set(occupied, cfg, rng);
  return s;
}

/// "set m_x m_y m_z a11 a12 a13 a22 a23 a33" per ellipsoid, set F or O.
inline void write_ellipsoids(std::ostream& out, const EllipsoidSummary& s) {
  auto emit = [&](char tag, const Ellipsoid& e) {
    const Mat3& A = e.shape;
    out << tag << ' ' << e.center.x() << ' ' << e.center.y() << ' ' << e.center.z() << ' ' << A(0, 0)
        << ' ' << A(0, 1) << ' ' << A(0, 2) << ' ' << A(1, 1) << ' ' << A(1, 2) << ' ' << A(2, 2) << '\n';
  };
  for (const auto& e : s.frontier) emit('F', e);
  for (const auto& e : s.occupied) emit('O', e);
}

struct SilhouetteRegion {
  double pixel_area = 0.0;
  double mean_depth = 0.0;
  bool valid = false;
};

/**
 * Rasterised silhouette of an ellipsoid seen from `object_from_camera`.
 *
 * Pixel centres are sampled every `stride` pixels and each sample counts
 * stride^2. A sample is inside when its viewing ray meets the ellipsoid at a
 * positive depth. Sampling is restricted to the silhouette's bounding box,
 * obtained from the projected dual conic when the ellipsoid lies fully in
 * front of the camera plane.
 */
inline SilhouetteRegion project(const Ellipsoid& E, const Pose3& object_from_camera,
                                const CameraModel& camera, int stride = 2) {
  if (stride < 1) throw InvalidArgument("project: stride must be >= 1");
  const Pose3 cam_from_obj = object_from_camera.inverse();
  const Mat3 R = cam_from_obj.linear();
  const Vec3 m = cam_from_obj * E.center;
  const Mat3 A = R * E.shape * R.transpose();
  const Mat3 S = A.inverse();  // A^{-1}: "covariance" of the ellipsoid

  SilhouetteRegion out;
  const double z_half = std::sqrt(std::max(S(2, 2), 0.0));
  if (m.z() + z_half <= camera.depth_min) return out;

  const double full = static_cast<double>(camera.width) * camera.height;
  const double c0 = m.dot(A * m) - 1.0;
  out.valid = true;
  out.mean_depth = std::max(m.z(), 1e-9);
  if (c0 < 0.0) {
    out.pixel_area = full;  // camera inside the ellipsoid
    return out;
  }

  double u_lo = 0.0, u_hi = camera.width, v_lo = 0.0, v_hi = camera.height;
  if (m.z() - z_half > 0.0) {
    // Dual conic C* = K (S - m m^T) K^T; tangent lines u = const and v = const.
    const Mat3 C = camera.K * (S - m * m.transpose()) * camera.K.transpose();
    auto bounds = [&](int r, double& lo, double& hi) {
      const double disc = C(r, 2) * C(r, 2) - C(r, r) * C(2, 2);
      if (disc < 0.0) return;
      const double s = std::sqrt(disc);
      double a = (C(r, 2) - s) / C(2, 2), b = (C(r, 2) + s) / C(2, 2);
      if (a > b) std::swap(a, b);
      lo = std::max(lo, a - 1.0);
      hi = std::min(hi, b + 1.0);
    };
    bounds(0, u_lo, u_hi);
    bounds(1, v_lo, v_hi);
  }

  // Sample centres are at (col + 0.5, row + 0.5), col = stride/2 + i*stride.
  const int off = stride / 2;
  auto first = [&](double lo) { return std::max(0, static_cast<int>(std::ceil((lo - 0.5 - off) / stride))); };
  const int col_end = (camera.width - 1 - off) / stride;
  const int row_end = (camera.height - 1 - off) / stride;
  const int i0 = first(u_lo), j0 = first(v_lo);
  const int i1 = std::min(col_end, static_cast<int>(std::floor((u_hi - 0.5 - off) / stride)));
  const int j1 = std::min(row_end, static_cast<int>(std::floor((v_hi - 0.5 - off) / stride)));

  const Vec3 Am = A * m;
  long hits = 0;
  for (int j = j0; j <= j1; ++j) {
    for (int i = i0; i <= i1; ++i) {
      const Vec3 d = camera.ray(off + i * stride + 0.5, off + j * stride + 0.5);
      // s^2 d'Ad - 2 s d'Am + c0 <= 0 for some s > 0
      const double a2 = d.dot(A * d);
      const double b1 = d.dot(Am);
      const double disc = b1 * b1 - a2 * c0;
      if (disc < 0.0) continue;
      if (b1 + std::sqrt(disc) > 0.0) ++hits;
    }
  }
  out.pixel_area = static_cast<double>(hits) * stride * stride;
  return out;
}

/// alpha^(rank - 1) by increasing mean depth over valid regions (stable on
/// ties); invalid regions get 0.
inline std::vector<double> depth_weights(std::span<const SilhouetteRegion> regions, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("depth_weights: alpha must be in (0, 1]");
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < regions.size(); ++i)
    if (regions[i].valid) order.push_back(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return regions[a].mean_depth < regions[b].mean_depth; });
  std::vector<double> w(regions.size(), 0.0);
  double weight = 1.0;
  for (std::size_t i : order) {
    w[i] = weight;
    weight *= alpha;
  }
  return w;
}

struct ScoreConfig {
  double alpha = 0.5;
  int stride = 2;
};

/// Weighted frontier silhouette area minus weighted occupied silhouette area,
/// with depth ranks taken jointly over both sets.
inline double score(const Pose3& object_from_camera, const EllipsoidSummary& summary,
                    const CameraModel& camera, const ScoreConfig& cfg = {}) {
  if (summary.empty()) return 0.0;
  std::vector<SilhouetteRegion> regions;
  regions.reserve(summary.frontier.size() + summary.occupied.size());
  for (const auto& e : summary.frontier) regions.push_back(project(e, object_from_camera, camera, cfg.stride));
  for (const auto& e : summary.occupied) regions.push_back(project(e, object_from_camera, camera, cfg.stride));
  const auto w = depth_weights(regions, cfg.alpha);
  double s = 0.0;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const double term = w[i] * regions[i].pixel_area;
    s += i < summary.frontier.size() ? term : -term;
  }
  return s;
}

}  // namespace mnbv
