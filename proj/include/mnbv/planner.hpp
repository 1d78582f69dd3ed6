#pragma once

// Prediction-conditioned viewpoint generation, reachability filtering and
// Monte Carlo expected-score selection, plus the comparison baselines.

#include <algorithm>
#include <chrono>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mnbv/gaussian.hpp"
#include "mnbv/pbnbv_score.hpp"
#include "mnbv/trajectory_belief.hpp"
#include "mnbv/world_sim.hpp"

namespace mnbv {

enum class PlanningMethod { Predictive, NonPredictive, TrackingOnly };
enum class CandidateShape { Ellipse, Ring };
enum class ViewScorer { MonteCarlo, PredictedMean, Random };

struct PlannerConfig {
  double v_max = 1.0;          // m/s
  double omega_max = kPi / 2;  // rad/s
  double dt = 1.0;             // s, one planning step
  int samples = 40;
  double process_psd = 0.01;  // q_c used to propagate the belief
  PlanningMethod method = PlanningMethod::Predictive;
  CandidateShape shape = CandidateShape::Ellipse;
  ViewScorer scorer = ViewScorer::MonteCarlo;
  double stand_off = 1.2;  // m
  double inflation = 2.0;
  int azimuths = 32;
  double speed_threshold = 0.02;
  ScoreConfig scoring;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(v_max > 0.0 && omega_max > 0.0 && dt > 0.0)) throw InvalidArgument("planner: limits must be positive");
    if (samples < 1) throw InvalidArgument("planner: samples must be >= 1");
    if (!(process_psd > 0.0)) throw InvalidArgument("planner: process_psd must be > 0");
    if (!(stand_off > 0.0) || !(inflation >= 0.0)) throw InvalidArgument("planner: bad ellipse parameters");
    if (azimuths < 3) throw InvalidArgument("planner: need at least 3 azimuths");
    if (!(speed_threshold > 0.0)) throw InvalidArgument("planner: speed_threshold must be > 0");
  }
};

struct CandidateViewpoint {
  Vec2 position = Vec2::Zero();
  double yaw = 0.0;
  Pose3 camera_pose = Pose3::Identity();  // world_from_camera
  int azimuth_index = 0;

  RobotState robot_state() const { return {position, yaw}; }
};

struct EllipseParams {
  Vec2 center = Vec2::Zero();
  double heading = 0.0;
  double a = 0.0;
  double b = 0.0;
  double stand_off = 0.0;
  double inflation = 0.0;
  int azimuths = 0;
};

/// Candidate ellipse around the belief's mean position: axes aligned with the
/// nominal heading, semi-axes inflated by the heading-frame position std devs
/// (or by sqrt of the largest eigenvalue for the ring shape).
inline EllipseParams candidate_ellipse(const Belief& belief, double previous_heading, const PlannerConfig& cfg) {
  EllipseParams e;
  e.center = belief.position();
  e.heading = nominal_heading(belief, previous_heading, cfg.speed_threshold);
  e.stand_off = cfg.stand_off;
  e.inflation = cfg.inflation;
  e.azimuths = cfg.azimuths;
  const Mat2 cov = belief.position_covariance();
  if (cfg.shape == CandidateShape::Ellipse) {
    const Mat2 R = Eigen::Rotation2Dd(e.heading).toRotationMatrix();
    const Mat2 local = R.transpose() * cov * R;
    e.a = cfg.stand_off + cfg.inflation * std::sqrt(std::max(local(0, 0), 0.0));
    e.b = cfg.stand_off + cfg.inflation * std::sqrt(std::max(local(1, 1), 0.0));
  } else {
    Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (cov + cov.transpose()));
    const double r = cfg.stand_off + cfg.inflation * std::sqrt(std::max(es.eigenvalues().maxCoeff(), 0.0));
    e.a = e.b = r;
  }
  return e;
}

inline std::vector<CandidateViewpoint> candidates_on(const EllipseParams& e, const CameraModel& camera) {
  const Mat2 R = Eigen::Rotation2Dd(e.heading).toRotationMatrix();
  std::vector<CandidateViewpoint> out;
  out.reserve(static_cast<std::size_t>(e.azimuths));
  for (int i = 0; i < e.azimuths; ++i) {
    const double phi = 2.0 * kPi * i / e.azimuths;
    CandidateViewpoint c;
    c.azimuth_index = i;
    c.position = e.center + R * Vec2(e.a * std::cos(phi), e.b * std::sin(phi));
    const Vec2 to_center = e.center - c.position;
    c.yaw = wrap_angle(std::atan2(to_center.y(), to_center.x()));
    c.camera_pose = camera.world_from_camera(c.robot_state());
    out.push_back(c);
  }
  return out;
}

inline std::vector<CandidateViewpoint> generate_candidates(const Belief& belief, double previous_heading,
                                                           const PlannerConfig& cfg, const CameraModel& camera) {
  return candidates_on(candidate_ellipse(belief, previous_heading, cfg), camera);
}

inline bool reachable(const CandidateViewpoint& c, const RobotState& robot, const PlannerConfig& cfg) {
  return (c.position - robot.position).norm() <= cfg.v_max * cfg.dt &&
         std::abs(angle_diff(c.yaw, robot.heading)) <= cfg.omega_max * cfg.dt;
}

struct FeasibleSet {
  std::vector<CandidateViewpoint> candidates;
  bool fallback = false;  // nothing was reachable; holds the nearest candidate
};

inline FeasibleSet filter_reachable(std::span<const CandidateViewpoint> candidates, const RobotState& robot,
                                    const PlannerConfig& cfg) {
  FeasibleSet out;
  for (const auto& c : candidates)
    if (reachable(c, robot, cfg)) out.candidates.push_back(c);
  if (out.candidates.empty() && !candidates.empty()) {
    const auto nearest = std::min_element(candidates.begin(), candidates.end(), [&](const auto& a, const auto& b) {
      return (a.position - robot.position).norm() < (b.position - robot.position).norm();
    });
    out.candidates.push_back(*nearest);
    out.fallback = true;
  }
  return out;
}

struct ObjectSample {
  ObjectPose2D pose;
  Vec2 velocity = Vec2::Zero();
};

/// Draws from the 4-d belief; headings follow each draw's own velocity and
/// fall back to `nominal` for slow draws.
inline std::vector<ObjectSample> sample_object_states(const Belief& belief, int n, double nominal,
                                                      double speed_threshold, Rng& rng) {
  const Mat4 L = covariance_factor<4>(belief.covariance);
  std::vector<ObjectSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Vec4 x = sample_gaussian<4>(belief.mean, L, rng);
    ObjectSample s;
    s.pose.position = x.head<2>();
    s.velocity = x.tail<2>();
    s.pose.heading = nominal_heading(s.velocity, nominal, speed_threshold);
    out.push_back(s);
  }
  return out;
}

/// Mean deterministic score over sampled object frames. The summary lives in
/// the object-centric frame and is re-posed with each sample.
inline double expected_score(const CandidateViewpoint& candidate, std::span<const ObjectSample> samples,
                             const EllipsoidSummary& summary, const CameraModel& camera, const ScoreConfig& cfg) {
  if (samples.empty()) throw InvalidArgument("expected_score: no samples");
  double total = 0.0;
  for (const auto& s : samples) {
    const Pose3 object_from_camera = s.pose.world_from_object().inverse() * candidate.camera_pose;
    total += score(object_from_camera, summary, camera, cfg);
  }
  return total / static_cast<double>(samples.size());
}

/// Argmax; ties go to the lowest azimuth index.
inline std::size_t select(std::span<const CandidateViewpoint> candidates, std::span<const double> scores) {
  if (candidates.empty() || candidates.size() != scores.size())
    throw InvalidArgument("select: need one score per candidate");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (scores[i] > scores[best] ||
        (scores[i] == scores[best] && candidates[i].azimuth_index < candidates[best].azimuth_index))
      best = i;
  }
  return best;
}

struct PlanResult {
  CandidateViewpoint selected;
  double expected_score = 0.0;
  std::size_t feasible_count = 0;
  bool fallback = false;
  Belief planning_belief;  // predictive, or the posterior for the non-predictive baseline
  EllipseParams ellipse;
  std::vector<CandidateViewpoint> feasible;
  std::vector<double> scores;
  double scoring_ms = 0.0;
};

/// One receding-horizon planning step from the posterior at t_k.
///
/// predictive: candidates and samples from the belief propagated by dt.
/// non_predictive: the same pipeline on the unpropagated posterior.
/// tracking_only: the feasible candidate closest to the predicted centre.
inline PlanResult plan_step(const Belief& posterior, double previous_heading, const RobotState& robot,
                            const EllipsoidSummary& summary, const CameraModel& camera, const PlannerConfig& cfg,
                            Rng& rng) {
  cfg.validate();
  PlanResult out;
  out.planning_belief = cfg.method == PlanningMethod::NonPredictive ? posterior
                                                                    : predict(posterior, cfg.dt, cfg.process_psd);
  const Belief& belief = out.planning_belief;
  const double heading = nominal_heading(belief, previous_heading, cfg.speed_threshold);

  out.ellipse = candidate_ellipse(belief, previous_heading, cfg);
  const auto candidates = candidates_on(out.ellipse, camera);
  FeasibleSet feasible = filter_reachable(candidates, robot, cfg);
  out.fallback = feasible.fallback;
  out.feasible = std::move(feasible.candidates);
  out.feasible_count = out.fallback ? 0 : out.feasible.size();

  std::size_t chosen = 0;
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.method == PlanningMethod::TrackingOnly) {
    for (const auto& c : out.feasible) out.scores.push_back(-(c.position - out.ellipse.center).norm());
    chosen = select(out.feasible, out.scores);
  } else if (cfg.scorer == ViewScorer::Random) {
    out.scores.assign(out.feasible.size(), 0.0);
    std::uniform_int_distribution<std::size_t> pick(0, out.feasible.size() - 1);
    chosen = pick(rng);
  } else {
    std::vector<ObjectSample> samples;
    if (cfg.scorer == ViewScorer::PredictedMean) {
      ObjectSample mean;
      mean.pose.position = belief.position();
      mean.pose.heading = heading;
      mean.velocity = belief.velocity();
      samples.push_back(mean);
    } else {
      samples = sample_object_states(belief, cfg.samples, heading, cfg.speed_threshold, rng);
    }
    for (const auto& c : out.feasible)
      out.scores.push_back(expected_score(c, samples, summary, camera, cfg.scoring));
    chosen = select(out.feasible, out.scores);
  }
  out.scoring_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  out.selected = out.feasible[chosen];
  out.expected_score = out.scores[chosen];
  return out;
}

}  // namespace mnbv
