#pragma once

// Bounded object-centric occupancy proxy.

#include <array>
#include <cstdint>
#include <ostream>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

#include "mnbv/camera.hpp"
#include "mnbv/trajectory_belief.hpp"

namespace mnbv {

enum class VoxelLabel : std::uint8_t { Unknown = 0, Free = 1, Occupied = 2 };

struct GridIndex {
  int i = 0, j = 0, k = 0;
  friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

class VoxelGrid {
 public:
  VoxelGrid(const Vec3& min_corner, const Vec3& max_corner, double resolution)
      : lo_(min_corner), resolution_(resolution) {
    if (!(resolution > 0.0)) throw InvalidArgument("voxel grid: resolution must be > 0");
    for (int a = 0; a < 3; ++a) {
      if (!(max_corner[a] > min_corner[a])) throw InvalidArgument("voxel grid: empty extent");
      dims_[a] = std::max(1, static_cast<int>(std::ceil((max_corner[a] - min_corner[a]) / resolution - 1e-9)));
    }
    hi_ = lo_ + resolution_ * Vec3(dims_[0], dims_[1], dims_[2]);
    labels_.assign(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2], VoxelLabel::Unknown);
  }

  /// Cube of side `extent` centred on `center`.
  static VoxelGrid cube(const Vec3& center, double extent, double resolution) {
    const Vec3 h = Vec3::Constant(0.5 * extent);
    return VoxelGrid(center - h, center + h, resolution);
  }

  double resolution() const { return resolution_; }
  const std::array<int, 3>& dims() const { return dims_; }
  const Vec3& min_corner() const { return lo_; }
  const Vec3& max_corner() const { return hi_; }
  std::size_t size() const { return labels_.size(); }

  bool in_bounds(const GridIndex& g) const {
    return g.i >= 0 && g.j >= 0 && g.k >= 0 && g.i < dims_[0] && g.j < dims_[1] && g.k < dims_[2];
  }

  std::optional<GridIndex> index_of(const Vec3& p) const {
    const Vec3 q = (p - lo_) / resolution_;
    GridIndex g{static_cast<int>(std::floor(q.x())), static_cast<int>(std::floor(q.y())),
                static_cast<int>(std::floor(q.z()))};
    if (!in_bounds(g)) return std::nullopt;
    return g;
  }

  Vec3 center(const GridIndex& g) const {
    return lo_ + resolution_ * Vec3(g.i + 0.5, g.j + 0.5, g.k + 0.5);
  }

  VoxelLabel label(const GridIndex& g) const { return labels_[flat(g)]; }
  void set_label(const GridIndex& g, VoxelLabel l) { labels_[flat(g)] = l; }

  /// Free unless already Occupied.
  void mark_free(const GridIndex& g) {
    auto& l = labels_[flat(g)];
    if (l != VoxelLabel::Occupied) l = VoxelLabel::Free;
  }
  void mark_occupied(const GridIndex& g) { labels_[flat(g)] = VoxelLabel::Occupied; }

  std::size_t count(VoxelLabel l) const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), l));
  }

  template <class F>
  void for_each(F&& f) const {
    for (int k = 0; k < dims_[2]; ++k)
      for (int j = 0; j < dims_[1]; ++j)
        for (int i = 0; i < dims_[0]; ++i) {
          const GridIndex g{i, j, k};
          f(g, label(g));
        }
  }

  std::vector<Vec3> centers_with(VoxelLabel l) const {
    std::vector<Vec3> out;
    for_each([&](const GridIndex& g, VoxelLabel v) {
      if (v == l) out.push_back(center(g));
    });
    return out;
  }

  /// Voxel sequence visited by the segment a->b (both in grid coordinates of
  /// the owning frame), clipped to the grid. `visit(index, is_endpoint)`.
  template <class F>
  void traverse(const Vec3& a, const Vec3& b, F&& visit) const;

 private:
  std::size_t flat(const GridIndex& g) const {
    return (static_cast<std::size_t>(g.k) * dims_[1] + g.j) * dims_[0] + g.i;
  }

  Vec3 lo_, hi_;
  double resolution_;
  std::array<int, 3> dims_{};
  std::vector<VoxelLabel> labels_;
};

// Amanatides & Woo integer traversal.
template <class F>
void VoxelGrid::traverse(const Vec3& a, const Vec3& b, F&& visit) const {
  const Vec3 d = b - a;
  double t_enter = 0.0, t_exit = 1.0;
  for (int ax = 0; ax < 3; ++ax) {
    if (d[ax] == 0.0) {
      if (a[ax] < lo_[ax] || a[ax] >= hi_[ax]) return;
      continue;
    }
    double t0 = (lo_[ax] - a[ax]) / d[ax];
    double t1 = (hi_[ax] - a[ax]) / d[ax];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  if (t_enter > t_exit) return;

  const Vec3 start = a + t_enter * d;
  const Vec3 qs = (start - lo_) / resolution_;
  std::array<int, 3> cur{}, step{};
  std::array<double, 3> t_max{}, t_delta{};
  for (int ax = 0; ax < 3; ++ax) {
    cur[ax] = std::clamp(static_cast<int>(std::floor(qs[ax])), 0, dims_[ax] - 1);
    if (d[ax] > 0.0) {
      step[ax] = 1;
      t_delta[ax] = resolution_ / d[ax];
      t_max[ax] = (lo_[ax] + (cur[ax] + 1) * resolution_ - a[ax]) / d[ax];
    } else if (d[ax] < 0.0) {
      step[ax] = -1;
      t_delta[ax] = -resolution_ / d[ax];
      t_max[ax] = (lo_[ax] + cur[ax] * resolution_ - a[ax]) / d[ax];
    } else {
      step[ax] = 0;
      t_delta[ax] = t_max[ax] = std::numeric_limits<double>::infinity();
    }
  }

  const std::optional<GridIndex> end = index_of(b);
  const int max_steps = dims_[0] + dims_[1] + dims_[2] + 3;
  for (int n = 0; n < max_steps; ++n) {
    const GridIndex g{cur[0], cur[1], cur[2]};
    const bool is_end = end && g == *end;
    visit(g, is_end);
    if (is_end) return;
    int ax = 0;
    if (t_max[1] < t_max[ax]) ax = 1;
    if (t_max[2] < t_max[ax]) ax = 2;
    if (t_max[ax] > t_exit) return;
    cur[ax] += step[ax];
    if (cur[ax] < 0 || cur[ax] >= dims_[ax]) return;
    t_max[ax] += t_delta[ax];
  }
}

struct MapFrame {
  ObjectPose2D pose;

  Pose3 world_from_frame() const { return pose.world_from_object(); }
};

/// Object-centric map frame at the posterior mean, aligned with the tangential
/// heading.
inline MapFrame set_frame(const Belief& posterior, double previous_heading, double speed_threshold) {
  MapFrame f;
  f.pose.position = posterior.position();
  f.pose.heading = nominal_heading(posterior, previous_heading, speed_threshold);
  return f;
}

/// Registers a world-frame cloud into `frame` and carves the grid: voxels
/// crossed by each camera-to-point ray become Free (Occupied wins), the voxel
/// holding the point becomes Occupied. Points outside the grid only carve.
inline void integrate_cloud(VoxelGrid& grid, const MapFrame& frame, const Vec3& camera_origin_world,
                            std::span<const Vec3> cloud_world) {
  const Pose3 frame_from_world = frame.world_from_frame().inverse();
  const Vec3 origin = frame_from_world * camera_origin_world;
  std::vector<GridIndex> endpoints;
  endpoints.reserve(cloud_world.size());
  for (const Vec3& pw : cloud_world) {
    if (!pw.allFinite()) throw InvalidArgument("integrate_cloud: non-finite point");
    const Vec3 p = frame_from_world * pw;
    grid.traverse(origin, p, [&](const GridIndex& g, bool is_end) {
      if (is_end)
        endpoints.push_back(g);
      else
        grid.mark_free(g);
    });
  }
  for (const auto& g : endpoints) grid.mark_occupied(g);
}

/// Marks every voxel along each ray Free (Occupied voxels are kept). Used for
/// pixels without a depth return.
inline void carve_free(VoxelGrid& grid, const MapFrame& frame, const Vec3& camera_origin_world,
                       std::span<const Vec3> ray_ends_world) {
  const Pose3 frame_from_world = frame.world_from_frame().inverse();
  const Vec3 origin = frame_from_world * camera_origin_world;
  for (const Vec3& pw : ray_ends_world) {
    if (!pw.allFinite()) throw InvalidArgument("carve_free: non-finite point");
    grid.traverse(origin, frame_from_world * pw, [&](const GridIndex& g, bool) { grid.mark_free(g); });
  }
}

/// Centres of Unknown voxels with at least one Free 6-neighbour.
inline std::vector<Vec3> extract_frontier(const VoxelGrid& grid) {
  static constexpr int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  std::vector<Vec3> out;
  grid.for_each([&](const GridIndex& g, VoxelLabel l) {
    if (l != VoxelLabel::Unknown) return;
    for (const auto& o : nb) {
      const GridIndex n{g.i + o[0], g.j + o[1], g.k + o[2]};
      if (grid.in_bounds(n) && grid.label(n) == VoxelLabel::Free) {
        out.push_back(grid.center(g));
        return;
      }
    }
  });
  return out;
}

/// Re-expresses a grid accumulated in `from` in the frame `to`. Every target
/// voxel takes the label found at its centre in the old frame; old Occupied
/// centres are additionally pushed forward so no surface voxel is lost.
inline VoxelGrid reframe(const VoxelGrid& grid, const MapFrame& from, const MapFrame& to) {
  VoxelGrid out(grid.min_corner(), grid.max_corner(), grid.resolution());
  const Pose3 from_T_to = from.world_from_frame().inverse() * to.world_from_frame();
  const Pose3 to_T_from = from_T_to.inverse();
  out.for_each([&](const GridIndex& g, VoxelLabel) {
    const auto src = grid.index_of(from_T_to * out.center(g));
    if (src) out.set_label(g, grid.label(*src));
  });
  grid.for_each([&](const GridIndex& g, VoxelLabel l) {
    if (l != VoxelLabel::Occupied) return;
    if (const auto dst = out.index_of(to_T_from * grid.center(g))) out.mark_occupied(*dst);
  });
  return out;
}

/// "i j k label" per non-Unknown voxel, label 1 = Free, 2 = Occupied.
inline void write_grid_dump(std::ostream& out, const VoxelGrid& grid) {
  grid.for_each([&](const GridIndex& g, VoxelLabel l) {
    if (l != VoxelLabel::Unknown) out << g.i << ' ' << g.j << ' ' << g.k << ' ' << static_cast<int>(l) << '\n';
  });
}

namespace detail {

inline std::uint64_t voxel_key(const Vec3& p, double resolution) {
  auto c = [&](double v) {
    return static_cast<std::uint64_t>(static_cast<std::int64_t>(std::floor(v / resolution)) + (1 << 20)) &
           0x1fffff;
  };
  return (c(p.x()) << 42) | (c(p.y()) << 21) | c(p.z());
}

inline std::unordered_set<std::uint64_t> voxelize(std::span<const Vec3> cloud, double resolution) {
  std::unordered_set<std::uint64_t> keys;
  keys.reserve(cloud.size());
  for (const auto& p : cloud) keys.insert(voxel_key(p, resolution));
  return keys;
}

}  // namespace detail

/// Percentage of ground-truth voxels also present in the reconstruction.
inline double completeness(std::span<const Vec3> reconstructed, std::span<const Vec3> ground_truth,
                           double resolution) {
  if (ground_truth.empty()) throw InvalidArgument("completeness: empty ground truth");
  if (!(resolution > 0.0)) throw InvalidArgument("completeness: resolution must be > 0");
  const auto gt = detail::voxelize(ground_truth, resolution);
  const auto rec = detail::voxelize(reconstructed, resolution);
  std::size_t hit = 0;
  for (auto k : gt) hit += rec.count(k);
  return 100.0 * static_cast<double>(hit) / static_cast<double>(gt.size());
}

/// Incremental form of completeness() for a growing reconstruction.
class CompletenessTracker {
 public:
  CompletenessTracker(std::span<const Vec3> ground_truth, double resolution)
      : resolution_(resolution), gt_(detail::voxelize(ground_truth, resolution)) {
    if (gt_.empty()) throw InvalidArgument("completeness: empty ground truth");
  }

  void add(std::span<const Vec3> points) {
    for (const auto& p : points) {
      const auto k = detail::voxel_key(p, resolution_);
      if (gt_.count(k)) seen_.insert(k);
    }
  }

  double percent() const { return 100.0 * static_cast<double>(seen_.size()) / static_cast<double>(gt_.size()); }
  std::size_t ground_truth_voxels() const { return gt_.size(); }

 private:
  double resolution_;
  std::unordered_set<std::uint64_t> gt_;
  std::unordered_set<std::uint64_t> seen_;
};

}  // namespace mnbv
