#pragma once

// Experiment configuration, replanning episodes and sweep grids.

#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mnbv/planner.hpp"
#include "mnbv/voxel_map.hpp"

namespace mnbv {

inline const char* to_string(PlanningMethod m) {
  switch (m) {
    case PlanningMethod::Predictive: return "predictive";
    case PlanningMethod::NonPredictive: return "non_predictive";
    case PlanningMethod::TrackingOnly: return "tracking_only";
  }
  return "?";
}
inline const char* to_string(CandidateShape s) { return s == CandidateShape::Ellipse ? "ellipse" : "ring"; }
inline const char* to_string(ViewScorer s) {
  switch (s) {
    case ViewScorer::MonteCarlo: return "mc";
    case ViewScorer::PredictedMean: return "pred_mean";
    case ViewScorer::Random: return "random";
  }
  return "?";
}
inline const char* to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::WhiteNoiseAcceleration: return "white_noise_acceleration";
    case TrajectoryKind::SCurve: return "s_curve";
    case TrajectoryKind::ConstantVelocity: return "constant_velocity";
  }
  return "?";
}

inline PlanningMethod parse_method(const std::string& s) {
  if (s == "predictive") return PlanningMethod::Predictive;
  if (s == "non_predictive") return PlanningMethod::NonPredictive;
  if (s == "tracking_only") return PlanningMethod::TrackingOnly;
  throw InvalidArgument("unknown method '" + s + "'");
}
inline CandidateShape parse_shape(const std::string& s) {
  if (s == "ellipse") return CandidateShape::Ellipse;
  if (s == "ring") return CandidateShape::Ring;
  throw InvalidArgument("unknown candidate shape '" + s + "'");
}
inline ViewScorer parse_scorer(const std::string& s) {
  if (s == "mc") return ViewScorer::MonteCarlo;
  if (s == "pred_mean") return ViewScorer::PredictedMean;
  if (s == "random") return ViewScorer::Random;
  throw InvalidArgument("unknown scorer '" + s + "'");
}
inline TrajectoryKind parse_trajectory_kind(const std::string& s) {
  if (s == "white_noise_acceleration") return TrajectoryKind::WhiteNoiseAcceleration;
  if (s == "s_curve") return TrajectoryKind::SCurve;
  if (s == "constant_velocity") return TrajectoryKind::ConstantVelocity;
  throw InvalidArgument("unknown trajectory kind '" + s + "'");
}

struct CameraConfig {
  int width = 320;
  int height = 240;
  double hfov_deg = 60.0;
  double mount_height = 0.5;
  double pitch_deg = 10.0;
  double depth_min = 0.2;
  double depth_max = 6.0;

  CameraModel build() const {
    const double focal = 0.5 * width / std::tan(0.5 * hfov_deg * kPi / 180.0);
    return CameraModel::pinhole(width, height, focal, mount_height, pitch_deg * kPi / 180.0, depth_min, depth_max);
  }
};

struct MapConfig {
  double resolution = 0.03;
  double extent = 1.2;  // horizontal side, centred on the frame origin
  double z_min = -0.1;
  double z_max = 0.7;
  bool register_with_gt = false;
  bool carve_misses = true;  // clear space along rays without a depth return
};

/// One sweep axis per list; an empty list means "use the base value".
struct SweepConfig {
  std::vector<double> sigmas;
  std::vector<double> q_cs;
  std::vector<double> speed_factors;
  std::vector<CandidateShape> shapes;
  std::vector<ViewScorer> scorers;
  std::vector<int> samples;
};

struct ExperimentConfig {
  std::string mesh = "builtin";
  TrajectoryScript trajectory = [] {
    TrajectoryScript t;
    t.initial.velocity = Vec2(0.5, 0.0);
    return t;
  }();
  double sigma = 0.10;
  double q_c = 0.015;
  int window_length = 8;
  double anchor_variance = 1e4;
  PlannerConfig planner;
  std::vector<PlanningMethod> methods{PlanningMethod::Predictive, PlanningMethod::NonPredictive,
                                      PlanningMethod::TrackingOnly};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  int iterations = 10;
  double speed_factor = 2.0;  // <= 0 keeps planner.v_max
  double robot_start_azimuth_deg = -90.0;  // relative to the object heading
  CameraConfig camera;
  int render_stride = 4;
  double depth_noise = 0.0;
  MapConfig map;
  SummaryConfig summary;
  double gt_stand_off = 1.2;
  double gt_angular_step_deg = 15.0;
  int gt_stride = 2;
  double completeness_resolution = 0.03;
  SweepConfig sweep;
  std::string output_dir = "out";

  void validate() const {
    if (iterations < 1) throw InvalidArgument("config: iterations must be >= 1");
    if (seeds.empty()) throw InvalidArgument("config: seed list is empty");
    if (methods.empty()) throw InvalidArgument("config: method list is empty");
    if (sigma < 0.0) throw InvalidArgument("config: sigma must be >= 0");
    if (!(q_c > 0.0)) throw InvalidArgument("config: q_c must be > 0");
    if (window_length < 2) throw InvalidArgument("config: window_length must be >= 2");
    if (render_stride < 1) throw InvalidArgument("config: render_stride must be >= 1");
    trajectory.validate();
    planner.validate();
    for (double s : sweep.sigmas)
      if (s < 0.0) throw InvalidArgument("config: sweep sigma must be >= 0");
    for (int n : sweep.samples)
      if (n < 1) throw InvalidArgument("config: sweep samples must be >= 1");
  }

  /// Robot speed limit after applying the speed factor.
  double effective_v_max() const {
    const double disp = trajectory.nominal_displacement(planner.dt);
    if (speed_factor > 0.0 && disp > 0.0) return speed_factor * disp / planner.dt;
    return planner.v_max;
  }
};

namespace detail {

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline Vec2 read_vec2(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw InvalidArgument("config: expected a 2-element array");
  return Vec2(j[0].get<double>(), j[1].get<double>());
}

template <class E, class F>
std::vector<E> read_enum_list(const nlohmann::json& j, F parse) {
  std::vector<E> out;
  for (const auto& v : j) out.push_back(parse(v.get<std::string>()));
  return out;
}

}  // namespace detail

inline void apply_json(ExperimentConfig& c, const nlohmann::json& j) {
  using detail::read;
  read(j, "mesh", c.mesh);
  read(j, "sigma", c.sigma);
  read(j, "q_c", c.q_c);
  read(j, "iterations", c.iterations);
  read(j, "speed_factor", c.speed_factor);
  read(j, "robot_start_azimuth_deg", c.robot_start_azimuth_deg);
  read(j, "render_stride", c.render_stride);
  read(j, "depth_noise", c.depth_noise);
  read(j, "completeness_resolution", c.completeness_resolution);
  read(j, "output_dir", c.output_dir);
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("methods")) c.methods = detail::read_enum_list<PlanningMethod>(j.at("methods"), parse_method);

  if (j.contains("trajectory")) {
    const auto& t = j.at("trajectory");
    if (t.contains("kind")) c.trajectory.kind = parse_trajectory_kind(t.at("kind").get<std::string>());
    if (t.contains("initial_position")) c.trajectory.initial.position = detail::read_vec2(t.at("initial_position"));
    if (t.contains("initial_velocity")) c.trajectory.initial.velocity = detail::read_vec2(t.at("initial_velocity"));
    read(t, "amplitude", c.trajectory.amplitude);
    read(t, "period", c.trajectory.period);
  }
  if (j.contains("smoother")) {
    const auto& s = j.at("smoother");
    read(s, "window_length", c.window_length);
    read(s, "anchor_variance", c.anchor_variance);
  }
  if (j.contains("planner")) {
    const auto& p = j.at("planner");
    auto& pc = c.planner;
    read(p, "v_max", pc.v_max);
    read(p, "omega_max", pc.omega_max);
    read(p, "dt", pc.dt);
    read(p, "samples", pc.samples);
    read(p, "stand_off", pc.stand_off);
    read(p, "inflation", pc.inflation);
    read(p, "azimuths", pc.azimuths);
    read(p, "speed_threshold", pc.speed_threshold);
    read(p, "alpha", pc.scoring.alpha);
    read(p, "score_stride", pc.scoring.stride);
    if (p.contains("shape")) pc.shape = parse_shape(p.at("shape").get<std::string>());
    if (p.contains("scorer")) pc.scorer = parse_scorer(p.at("scorer").get<std::string>());
  }
  if (j.contains("camera")) {
    const auto& s = j.at("camera");
    read(s, "width", c.camera.width);
    read(s, "height", c.camera.height);
    read(s, "hfov_deg", c.camera.hfov_deg);
    read(s, "mount_height", c.camera.mount_height);
    read(s, "pitch_deg", c.camera.pitch_deg);
    read(s, "depth_min", c.camera.depth_min);
    read(s, "depth_max", c.camera.depth_max);
  }
  if (j.contains("map")) {
    const auto& s = j.at("map");
    read(s, "resolution", c.map.resolution);
    read(s, "extent", c.map.extent);
    read(s, "z_min", c.map.z_min);
    read(s, "z_max", c.map.z_max);
    read(s, "register_with_gt", c.map.register_with_gt);
    read(s, "carve_misses", c.map.carve_misses);
  }
  if (j.contains("summary")) {
    const auto& s = j.at("summary");
    read(s, "points_per_cluster", c.summary.points_per_cluster);
    read(s, "max_clusters", c.summary.max_clusters);
    read(s, "max_points", c.summary.max_points);
    read(s, "em_max_iters", c.summary.gmm.max_iters);
    read(s, "em_tol", c.summary.gmm.tol);
    read(s, "mvee_tol", c.summary.mvee.tol);
  }
  if (j.contains("ground_truth")) {
    const auto& s = j.at("ground_truth");
    read(s, "stand_off", c.gt_stand_off);
    read(s, "angular_step_deg", c.gt_angular_step_deg);
    read(s, "stride", c.gt_stride);
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    if (s.contains("sigmas")) c.sweep.sigmas = s.at("sigmas").get<std::vector<double>>();
    if (s.contains("q_cs")) c.sweep.q_cs = s.at("q_cs").get<std::vector<double>>();
    if (s.contains("speed_factors")) c.sweep.speed_factors = s.at("speed_factors").get<std::vector<double>>();
    if (s.contains("samples")) c.sweep.samples = s.at("samples").get<std::vector<int>>();
    if (s.contains("shapes")) c.sweep.shapes = detail::read_enum_list<CandidateShape>(s.at("shapes"), parse_shape);
    if (s.contains("scorers")) c.sweep.scorers = detail::read_enum_list<ViewScorer>(s.at("scorers"), parse_scorer);
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("config '" + path + "': " + e.what());
  }
  ExperimentConfig c;
  try {
    apply_json(c, j);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("config '" + path + "': " + e.what());
  }
  return c;
}

/// Mesh, camera and the cached ground-truth cloud shared by the episodes of one
/// configuration.
struct Scene {
  TriangleMesh mesh;
  CameraModel camera;
  std::vector<Vec3> gt_cloud;

  static std::shared_ptr<const Scene> build(const ExperimentConfig& c) {
    TriangleMesh mesh = load_mesh(c.mesh);
    CameraModel cam = c.camera.build();
    auto gt = build_gt_cloud(mesh, cam, c.gt_stand_off, c.gt_angular_step_deg * kPi / 180.0, c.gt_stride);
    if (gt.empty()) throw InvalidArgument("scene: ground-truth cloud is empty (object not visible)");
    return std::make_shared<const Scene>(Scene{std::move(mesh), cam, std::move(gt)});
  }
};

struct EpisodeRecord {
  int iteration = 0;
  double time = 0.0;
  PositionMeasurement measurement;
  Belief posterior;
  Belief planning_belief;
  MapFrame frame;
  ObjectPose2D truth;
  RobotState robot;       // pose the view was taken from and planning started at
  RobotState next_robot;  // pose after executing the selected motion
  CandidateViewpoint selected;
  double expected_score = 0.0;
  std::size_t feasible_count = 0;
  bool fallback = false;
  std::size_t frontier_voxels = 0;
  std::size_t occupied_voxels = 0;
  std::size_t frontier_ellipsoids = 0;
  std::size_t occupied_ellipsoids = 0;
  double completeness = 0.0;
  double scoring_ms = 0.0;
};

struct EpisodeLog {
  PlanningMethod method = PlanningMethod::Predictive;
  std::uint64_t seed = 0;
  double v_max = 0.0;
  double omega_max = 0.0;
  double dt = 0.0;
  std::vector<EpisodeRecord> records;

  double final_completeness() const { return records.empty() ? 0.0 : records.back().completeness; }
};

/// Planning-step state exposed for inspection (score-debug).
struct StepSnapshot {
  EllipsoidSummary summary;
  PlanResult plan;
  std::optional<VoxelGrid> grid;
  std::optional<CompletenessTracker> tracker;
};

namespace detail {

inline bool needs_summary(const PlannerConfig& p) {
  return p.method != PlanningMethod::TrackingOnly && p.scorer != ViewScorer::Random;
}

}  // namespace detail

/**
 * Runs one replanning episode. Each iteration measures the object position,
 * smooths the window, sets the map frame, integrates the current depth view,
 * summarises the map, plans, executes the motion and advances the object.
 *
 * The window is pre-filled with L-1 measurements of the object's scripted
 * (noise-free) history before t = 0; stochastic motion starts at t = 0.
 * Random streams for object motion, measurements, planning and clustering are
 * separate, so every method sees the same object
 * trajectory and measurements for a given seed.
 */
inline EpisodeLog run_episode(const ExperimentConfig& cfg, std::uint64_t seed, PlanningMethod method,
                              std::shared_ptr<const Scene> scene = nullptr,
                              std::optional<int> snapshot_at = std::nullopt, StepSnapshot* snapshot = nullptr) {
  cfg.validate();
  if (!scene) scene = Scene::build(cfg);
  const CameraModel& camera = scene->camera;

  PlannerConfig pc = cfg.planner;
  pc.method = method;
  pc.process_psd = cfg.q_c;
  pc.v_max = cfg.effective_v_max();
  pc.seed = seed;

  SmootherConfig sc;
  sc.window_length = cfg.window_length;
  sc.process_psd = cfg.q_c;
  sc.measurement_variance = std::max(cfg.sigma * cfg.sigma, 1e-8);
  sc.anchor_variance = cfg.anchor_variance;

  TrajectoryScript script = cfg.trajectory;
  script.q_c = cfg.q_c;
  script.speed_threshold = pc.speed_threshold;

  Rng motion_rng = make_rng(seed, 1);
  Rng meas_rng = make_rng(seed, 2);
  Rng plan_rng = make_rng(seed, 3);
  Rng cluster_rng = make_rng(seed, 4);
  Rng depth_rng = make_rng(seed, 5);

  std::deque<PositionMeasurement> window;
  for (int w = cfg.window_length - 1; w >= 1; --w) {
    const ObjectTruth past = scripted_truth(script, -w * pc.dt);
    window.push_back(measure_position(past.pose.position, past.time, cfg.sigma, meas_rng));
  }
  ObjectTruth truth = initial_truth(script);

  RobotState robot;
  {
    const double az = truth.pose.heading + cfg.robot_start_azimuth_deg * kPi / 180.0;
    robot.position = truth.pose.position + pc.stand_off * Vec2(std::cos(az), std::sin(az));
    robot.heading = wrap_angle(az + kPi);
  }

  const double half = 0.5 * cfg.map.extent;
  VoxelGrid grid(Vec3(-half, -half, cfg.map.z_min), Vec3(half, half, cfg.map.z_max), cfg.map.resolution);
  CompletenessTracker tracker(scene->gt_cloud, cfg.completeness_resolution);
  MapFrame frame;
  double heading = 0.0;

  EpisodeLog log;
  log.method = method;
  log.seed = seed;
  log.v_max = pc.v_max;
  log.omega_max = pc.omega_max;
  log.dt = pc.dt;

  for (int k = 0; k < cfg.iterations; ++k) {
    EpisodeRecord rec;
    rec.iteration = k;
    rec.time = truth.time;
    rec.truth = truth.pose;
    rec.robot = robot;

    rec.measurement = measure_position(truth.pose.position, truth.time, cfg.sigma, meas_rng);
    window.push_back(rec.measurement);
    while (static_cast<int>(window.size()) > cfg.window_length) window.pop_front();
    const std::vector<PositionMeasurement> win(window.begin(), window.end());
    rec.posterior = smooth(win, sc);

    MapFrame next_frame;
    if (cfg.map.register_with_gt)
      next_frame.pose = truth.pose;
    else
      next_frame = set_frame(rec.posterior, heading, pc.speed_threshold);
    if (k > 0) grid = reframe(grid, frame, next_frame);
    frame = next_frame;
    heading = frame.pose.heading;
    rec.frame = frame;

    const Pose3 cam_pose = camera.world_from_camera(robot);
    DepthScan scan = render_scan(cam_pose, truth.pose, scene->mesh, camera, cfg.render_stride);
    auto& cloud = scan.hits;
    add_depth_noise(cloud, cam_pose.translation(), cfg.depth_noise, depth_rng);
    if (cfg.map.carve_misses) carve_free(grid, frame, cam_pose.translation(), scan.misses);
    integrate_cloud(grid, frame, cam_pose.translation(), cloud);
    const Pose3 body_from_world = truth.pose.world_from_object().inverse();
    for (auto& p : cloud) p = body_from_world * p;
    tracker.add(cloud);
    rec.completeness = tracker.percent();

    const auto frontier = extract_frontier(grid);
    const auto occupied = grid.centers_with(VoxelLabel::Occupied);
    rec.frontier_voxels = frontier.size();
    rec.occupied_voxels = occupied.size();
    EllipsoidSummary summary;
    if (detail::needs_summary(pc)) summary = summarize(frontier, occupied, cfg.summary, cluster_rng);
    rec.frontier_ellipsoids = summary.frontier.size();
    rec.occupied_ellipsoids = summary.occupied.size();

    PlanResult plan = plan_step(rec.posterior, heading, robot, summary, camera, pc, plan_rng);
    rec.planning_belief = plan.planning_belief;
    rec.selected = plan.selected;
    rec.expected_score = plan.expected_score;
    rec.feasible_count = plan.feasible_count;
    rec.fallback = plan.fallback;
    rec.scoring_ms = plan.scoring_ms;

    robot = execute_motion(robot, plan.selected.position, plan.selected.yaw, pc.v_max, pc.omega_max, pc.dt);
    rec.next_robot = robot;
    if (snapshot && snapshot_at && *snapshot_at == k) *snapshot = StepSnapshot{summary, plan, grid, tracker};

    truth = step_object(truth, pc.dt, script, motion_rng);
    log.records.push_back(rec);
  }
  return log;
}

inline EpisodeLog run_episode(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return run_episode(cfg, seed, cfg.methods.front());
}

/// True when the executed motion respects the single-step translation and
/// rotation bounds (to `tol`).
inline bool motion_within_limits(const EpisodeRecord& r, const EpisodeLog& log, double tol = 1e-9) {
  const double moved = (r.next_robot.position - r.robot.position).norm();
  const double turned = std::abs(angle_diff(r.next_robot.heading, r.robot.heading));
  return moved <= log.v_max * log.dt + tol && turned <= log.omega_max * log.dt + tol;
}

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline const char* episode_csv_header() {
  return "iteration,time,meas_x,meas_y,post_px,post_py,post_vx,post_vy,post_pos_trace,post_vel_trace,"
         "plan_px,plan_py,plan_vx,plan_vy,plan_pos_trace,plan_vel_trace,frame_x,frame_y,frame_heading,"
         "true_x,true_y,true_heading,robot_x,robot_y,robot_yaw,cand_x,cand_y,cand_yaw,cand_index,"
         "expected_score,feasible,fallback,next_robot_x,next_robot_y,next_robot_yaw,frontier_voxels,"
         "occupied_voxels,frontier_ellipsoids,occupied_ellipsoids,completeness";
}

/// One row per iteration. Wall-clock timings are kept out of this file so that
/// reruns are byte-identical; see write_timing_csv.
inline void write_episode_csv(std::ostream& out, const EpisodeLog& log) {
  using detail::fmt;
  out << episode_csv_header() << '\n';
  for (const auto& r : log.records) {
    const auto& po = r.posterior;
    const auto& pl = r.planning_belief;
    out << r.iteration << ',' << fmt(r.time) << ',' << fmt(r.measurement.value.x()) << ','
        << fmt(r.measurement.value.y()) << ',' << fmt(po.mean[0]) << ',' << fmt(po.mean[1]) << ','
        << fmt(po.mean[2]) << ',' << fmt(po.mean[3]) << ',' << fmt(po.position_covariance().trace()) << ','
        << fmt(po.velocity_covariance().trace()) << ',' << fmt(pl.mean[0]) << ',' << fmt(pl.mean[1]) << ','
        << fmt(pl.mean[2]) << ',' << fmt(pl.mean[3]) << ',' << fmt(pl.position_covariance().trace()) << ','
        << fmt(pl.velocity_covariance().trace()) << ',' << fmt(r.frame.pose.position.x()) << ','
        << fmt(r.frame.pose.position.y()) << ',' << fmt(r.frame.pose.heading) << ','
        << fmt(r.truth.position.x()) << ',' << fmt(r.truth.position.y()) << ',' << fmt(r.truth.heading) << ','
        << fmt(r.robot.position.x()) << ',' << fmt(r.robot.position.y()) << ',' << fmt(r.robot.heading) << ','
        << fmt(r.selected.position.x()) << ',' << fmt(r.selected.position.y()) << ',' << fmt(r.selected.yaw)
        << ',' << r.selected.azimuth_index << ',' << fmt(r.expected_score) << ',' << r.feasible_count << ','
        << (r.fallback ? 1 : 0) << ',' << fmt(r.next_robot.position.x()) << ','
        << fmt(r.next_robot.position.y()) << ',' << fmt(r.next_robot.heading) << ',' << r.frontier_voxels
        << ',' << r.occupied_voxels << ',' << r.frontier_ellipsoids << ',' << r.occupied_ellipsoids << ','
        << fmt(r.completeness) << '\n';
  }
}

inline void write_timing_csv(std::ostream& out, const EpisodeLog& log) {
  out << "iteration,scoring_ms,feasible\n";
  for (const auto& r : log.records) out << r.iteration << ',' << detail::fmt(r.scoring_ms) << ',' << r.feasible_count << '\n';
}

inline std::string episode_file_name(std::uint64_t seed) { return "episode_s" + std::to_string(seed) + ".csv"; }

inline void write_episode_files(const std::filesystem::path& dir, const EpisodeLog& log) {
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / episode_file_name(log.seed));
  if (!csv) throw InvalidArgument("cannot write to " + dir.string());
  write_episode_csv(csv, log);
  std::ofstream timing(dir / ("timing_s" + std::to_string(log.seed) + ".csv"));
  write_timing_csv(timing, log);
}

/// One point of the sweep cross product.
struct GridCell {
  PlanningMethod method;
  CandidateShape shape;
  ViewScorer scorer;
  int samples;
  double sigma;
  double q_c;
  double speed_factor;

  std::string name() const {
    std::ostringstream s;
    s << to_string(method) << '_' << to_string(shape) << '_' << to_string(scorer);
    if (scorer == ViewScorer::MonteCarlo) s << samples;
    s << "_sig" << sigma << "_qc" << q_c << "_sf" << speed_factor;
    return s.str();
  }

  ExperimentConfig apply(ExperimentConfig c) const {
    c.planner.shape = shape;
    c.planner.scorer = scorer;
    c.planner.samples = samples;
    c.sigma = sigma;
    c.q_c = q_c;
    c.speed_factor = speed_factor;
    c.methods = {method};
    return c;
  }
};

inline std::vector<GridCell> expand_grid(const ExperimentConfig& c) {
  auto or_base = [](const auto& list, auto base) {
    using T = std::decay_t<decltype(base)>;
    return list.empty() ? std::vector<T>{base} : std::vector<T>(list.begin(), list.end());
  };
  std::vector<GridCell> cells;
  for (auto m : c.methods)
    for (auto shape : or_base(c.sweep.shapes, c.planner.shape))
      for (auto scorer : or_base(c.sweep.scorers, c.planner.scorer))
        for (int n : or_base(c.sweep.samples, c.planner.samples))
          for (double sg : or_base(c.sweep.sigmas, c.sigma))
            for (double q : or_base(c.sweep.q_cs, c.q_c))
              for (double sf : or_base(c.sweep.speed_factors, c.speed_factor))
                cells.push_back({m, shape, scorer, n, sg, q, sf});
  return cells;
}

struct CellResult {
  GridCell cell;
  bool ok = true;
  std::string error;
  std::vector<EpisodeLog> episodes;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Mean and sample standard deviation (n - 1); std is 0 for a single value.
inline MeanStd mean_std(std::span<const double> v) {
  MeanStd r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return r;
}

inline void write_summary_csv(std::ostream& out, std::span<const CellResult> results, int iterations) {
  using detail::fmt;
  out << "cell,method,shape,scorer,samples,sigma,q_c,speed_factor,row,iteration,n,mean,std,status\n";
  for (const auto& r : results) {
    const auto& c = r.cell;
    const std::string prefix = r.cell.name() + ',' + to_string(c.method) + ',' + to_string(c.shape) + ',' +
                               to_string(c.scorer) + ',' + std::to_string(c.samples) + ',' + fmt(c.sigma) + ',' +
                               fmt(c.q_c) + ',' + fmt(c.speed_factor) + ',';
    if (!r.ok) {
      out << prefix << "failed,,0,,,\"" << r.error << "\"\n";
      continue;
    }
    for (int k = 0; k < iterations; ++k) {
      std::vector<double> v;
      for (const auto& e : r.episodes) v.push_back(e.records.at(static_cast<std::size_t>(k)).completeness);
      const auto ms = mean_std(v);
      out << prefix << "iteration," << k << ',' << v.size() << ',' << fmt(ms.mean) << ',' << fmt(ms.std) << ",ok\n";
    }
    std::vector<double> v;
    for (const auto& e : r.episodes) v.push_back(e.final_completeness());
    const auto ms = mean_std(v);
    out << prefix << "final," << iterations - 1 << ',' << v.size() << ',' << fmt(ms.mean) << ',' << fmt(ms.std)
        << ",ok\n";
  }
}

/**
 * Runs every cell of the sweep for every seed. Episode files go to
 * <out>/<cell>/episode_s<seed>.csv and the aggregate to <out>/summary.csv. A
 * failing cell is reported in the summary and the remaining cells still run.
 */
inline std::vector<CellResult> run_grid(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  const auto scene = Scene::build(cfg);
  std::vector<CellResult> results;
  for (const auto& cell : expand_grid(cfg)) {
    CellResult r;
    r.cell = cell;
    try {
      const ExperimentConfig cc = cell.apply(cfg);
      for (auto seed : cfg.seeds) {
        r.episodes.push_back(run_episode(cc, seed, cell.method, scene));
        write_episode_files(out_dir / cell.name(), r.episodes.back());
      }
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
      r.episodes.clear();
    }
    results.push_back(std::move(r));
  }
  std::filesystem::create_directories(out_dir);
  std::ofstream summary(out_dir / "summary.csv");
  write_summary_csv(summary, results, cfg.iterations);
  return results;
}

}  // namespace mnbv
