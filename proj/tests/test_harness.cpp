#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "mnbv/harness.hpp"

using namespace mnbv;
namespace fs = std::filesystem;

namespace {

// Small, quick configuration for end-to-end checks.
ExperimentConfig quick_config() {
  ExperimentConfig c;
  c.iterations = 3;
  c.seeds = {0, 1};
  c.render_stride = 8;
  c.gt_stride = 4;
  c.planner.samples = 4;
  c.planner.azimuths = 12;
  return c;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mnbv_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::string csv_of(const EpisodeLog& log) {
  std::ostringstream out;
  write_episode_csv(out, log);
  return out.str();
}

}  // namespace

TEST(Config, DefaultsAreValid) {
  ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.iterations, 10);
  EXPECT_EQ(c.seeds.size(), 10u);
  EXPECT_EQ(c.methods.size(), 3u);
  EXPECT_DOUBLE_EQ(c.sigma, 0.10);
}

TEST(Config, ValidationRejectsBadValues) {
  auto bad = [](auto mutate) {
    ExperimentConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), InvalidArgument);
  };
  bad([](ExperimentConfig& c) { c.methods.clear(); });
  bad([](ExperimentConfig& c) { c.seeds.clear(); });
  bad([](ExperimentConfig& c) { c.iterations = 0; });
  bad([](ExperimentConfig& c) { c.sigma = -0.1; });
  bad([](ExperimentConfig& c) { c.q_c = 0.0; });
  bad([](ExperimentConfig& c) { c.window_length = 1; });
  bad([](ExperimentConfig& c) { c.planner.samples = 0; });
  bad([](ExperimentConfig& c) { c.sweep.samples = {10, 0}; });
}

TEST(Config, JsonOverridesFields) {
  const fs::path dir = scratch_dir("config");
  fs::create_directories(dir);
  const fs::path file = dir / "c.json";
  std::ofstream(file) << R"({"sigma": 0.2, "iterations": 4, "seeds": [7, 8], "methods": ["tracking_only"],
    "trajectory": {"kind": "s_curve", "initial_velocity": [0.4, 0.1], "amplitude": 0.3},
    "planner": {"samples": 10, "shape": "ring", "scorer": "random", "alpha": 0.7},
    "map": {"resolution": 0.05, "carve_misses": false},
    "sweep": {"q_cs": [0.005, 0.01], "scorers": ["mc", "pred_mean"]}})";
  const auto c = load_config(file.string());
  EXPECT_DOUBLE_EQ(c.sigma, 0.2);
  EXPECT_EQ(c.iterations, 4);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{7, 8}));
  EXPECT_EQ(c.methods, (std::vector<PlanningMethod>{PlanningMethod::TrackingOnly}));
  EXPECT_EQ(c.trajectory.kind, TrajectoryKind::SCurve);
  EXPECT_EQ(c.trajectory.initial.velocity, Vec2(0.4, 0.1));
  EXPECT_EQ(c.planner.samples, 10);
  EXPECT_EQ(c.planner.shape, CandidateShape::Ring);
  EXPECT_EQ(c.planner.scorer, ViewScorer::Random);
  EXPECT_DOUBLE_EQ(c.planner.scoring.alpha, 0.7);
  EXPECT_DOUBLE_EQ(c.map.resolution, 0.05);
  EXPECT_FALSE(c.map.carve_misses);
  EXPECT_EQ(c.sweep.q_cs.size(), 2u);
  EXPECT_EQ(c.sweep.scorers[1], ViewScorer::PredictedMean);
  EXPECT_EQ(c.window_length, ExperimentConfig{}.window_length);
}

TEST(Config, LoadErrors) {
  EXPECT_THROW(load_config("/nonexistent/config.json"), InvalidArgument);
  const fs::path dir = scratch_dir("config_err");
  fs::create_directories(dir);
  std::ofstream(dir / "broken.json") << "{ not json";
  EXPECT_THROW(load_config((dir / "broken.json").string()), InvalidArgument);
  std::ofstream(dir / "enum.json") << R"({"methods": ["clairvoyant"]})";
  EXPECT_THROW(load_config((dir / "enum.json").string()), InvalidArgument);
  std::ofstream(dir / "type.json") << R"({"sigma": "high"})";
  EXPECT_THROW(load_config((dir / "type.json").string()), InvalidArgument);
}

TEST(Config, EnumNamesRoundTrip) {
  for (auto m : {PlanningMethod::Predictive, PlanningMethod::NonPredictive, PlanningMethod::TrackingOnly})
    EXPECT_EQ(parse_method(to_string(m)), m);
  for (auto s : {CandidateShape::Ellipse, CandidateShape::Ring}) EXPECT_EQ(parse_shape(to_string(s)), s);
  for (auto s : {ViewScorer::MonteCarlo, ViewScorer::PredictedMean, ViewScorer::Random})
    EXPECT_EQ(parse_scorer(to_string(s)), s);
  for (auto k : {TrajectoryKind::WhiteNoiseAcceleration, TrajectoryKind::SCurve, TrajectoryKind::ConstantVelocity})
    EXPECT_EQ(parse_trajectory_kind(to_string(k)), k);
  EXPECT_THROW(parse_shape("square"), InvalidArgument);
}

TEST(Config, SpeedFactorScalesTheObjectDisplacement) {
  ExperimentConfig c;
  c.trajectory.initial.velocity = Vec2(0.3, 0.4);
  c.speed_factor = 2.0;
  EXPECT_DOUBLE_EQ(c.effective_v_max(), 1.0);
  c.speed_factor = 0.0;
  EXPECT_DOUBLE_EQ(c.effective_v_max(), c.planner.v_max);
}

TEST(Config, ShippedFilesLoad) {
  const std::filesystem::path dir = MNBV_DATA_DIR;
  const auto d = load_config((dir / "default_config.json").string());
  const ExperimentConfig ref;
  EXPECT_EQ(d.seeds, ref.seeds);
  EXPECT_EQ(d.methods, ref.methods);
  EXPECT_EQ(d.planner.samples, ref.planner.samples);
  EXPECT_DOUBLE_EQ(d.planner.stand_off, ref.planner.stand_off);
  EXPECT_DOUBLE_EQ(d.planner.inflation, ref.planner.inflation);
  EXPECT_DOUBLE_EQ(d.planner.scoring.alpha, ref.planner.scoring.alpha);
  EXPECT_DOUBLE_EQ(d.planner.omega_max, ref.planner.omega_max);
  EXPECT_DOUBLE_EQ(d.map.extent, ref.map.extent);
  EXPECT_DOUBLE_EQ(d.map.z_min, ref.map.z_min);
  EXPECT_DOUBLE_EQ(d.map.z_max, ref.map.z_max);
  EXPECT_DOUBLE_EQ(d.gt_stand_off, ref.gt_stand_off);
  EXPECT_DOUBLE_EQ(d.summary.gmm.tol, ref.summary.gmm.tol);
  EXPECT_EQ(d.trajectory.initial.velocity, ref.trajectory.initial.velocity);

  for (const char* name : {"grid_config.json", "acceptance_config.json"})
    EXPECT_NO_THROW(load_config((dir / name).string()).validate()) << name;
  EXPECT_EQ(expand_grid(load_config((dir / "grid_config.json").string())).size(), 9u);
}

TEST(Grid, CellCounts) {
  ExperimentConfig c;
  EXPECT_EQ(expand_grid(c).size(), 3u);
  c.methods = {PlanningMethod::Predictive};
  c.sweep.shapes = {CandidateShape::Ring, CandidateShape::Ellipse};
  c.sweep.scorers = {ViewScorer::Random, ViewScorer::MonteCarlo, ViewScorer::PredictedMean};
  const auto cells = expand_grid(c);
  EXPECT_EQ(cells.size(), 6u);
  std::set<std::string> names;
  for (const auto& cell : cells) names.insert(cell.name());
  EXPECT_EQ(names.size(), 6u);
}

TEST(Grid, MeanStdUsesTheSampleDeviation) {
  const std::vector<double> v{1, 2, 3, 4};
  const auto ms = mean_std(v);
  EXPECT_DOUBLE_EQ(ms.mean, 2.5);
  EXPECT_DOUBLE_EQ(ms.std, std::sqrt(5.0 / 3.0));
  EXPECT_EQ(mean_std(std::vector<double>{3.0}).std, 0.0);
}

TEST(Episode, SingleIterationMatchesSingleViewCoverage) {
  auto c = quick_config();
  c.iterations = 1;
  const auto scene = Scene::build(c);
  const auto log = run_episode(c, 0, PlanningMethod::Predictive, scene);
  ASSERT_EQ(log.records.size(), 1u);

  const auto& r = log.records[0];
  const Pose3 cam = scene->camera.world_from_camera(r.robot);
  auto cloud = render_depth(cam, r.truth, scene->mesh, scene->camera, c.render_stride);
  const Pose3 body_from_world = r.truth.world_from_object().inverse();
  for (auto& p : cloud) p = body_from_world * p;
  EXPECT_DOUBLE_EQ(r.completeness, completeness(cloud, scene->gt_cloud, c.completeness_resolution));
  EXPECT_GT(r.completeness, 0.0);
}

TEST(Episode, StaticObjectKeepsRevealingSurface) {
  auto c = quick_config();
  c.iterations = 10;
  c.trajectory.kind = TrajectoryKind::ConstantVelocity;
  c.trajectory.initial.velocity = Vec2::Zero();
  c.render_stride = 4;
  c.planner.samples = 10;
  c.planner.azimuths = 32;
  const auto log = run_episode(c, 0, PlanningMethod::Predictive);
  ASSERT_EQ(log.records.size(), 10u);
  for (int k = 1; k <= 3; ++k) EXPECT_GT(log.records[k].completeness, log.records[k - 1].completeness) << k;
}

TEST(Episode, RecordsAreConsistent) {
  const auto c = quick_config();
  const auto scene = Scene::build(c);
  for (auto m : c.methods) {
    const auto log = run_episode(c, 1, m, scene);
    ASSERT_EQ(log.records.size(), static_cast<std::size_t>(c.iterations));
    for (std::size_t k = 0; k < log.records.size(); ++k) {
      const auto& r = log.records[k];
      EXPECT_EQ(r.iteration, static_cast<int>(k));
      if (k > 0) {
        EXPECT_GE(r.completeness, log.records[k - 1].completeness);
        EXPECT_EQ(r.robot.position, log.records[k - 1].next_robot.position);
      }
      EXPECT_LE(r.completeness, 100.0);
      if (!r.fallback) EXPECT_TRUE(motion_within_limits(r, log));
    }
  }
}

TEST(Episode, MethodsShareTheObjectTrajectory) {
  const auto c = quick_config();
  const auto scene = Scene::build(c);
  const auto a = run_episode(c, 3, PlanningMethod::Predictive, scene);
  const auto b = run_episode(c, 3, PlanningMethod::TrackingOnly, scene);
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    EXPECT_EQ(a.records[k].truth.position, b.records[k].truth.position);
    EXPECT_EQ(a.records[k].measurement.value, b.records[k].measurement.value);
  }
}

TEST(Episode, RerunIsByteIdentical) {
  const auto c = quick_config();
  const auto scene = Scene::build(c);
  EXPECT_EQ(csv_of(run_episode(c, 5, PlanningMethod::Predictive, scene)),
            csv_of(run_episode(c, 5, PlanningMethod::Predictive, Scene::build(c))));
}

TEST(Episode, CsvHasOneRowPerIterationAndAFixedHeader) {
  const auto c = quick_config();
  const auto csv = csv_of(run_episode(c, 0));
  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, episode_csv_header());
  const auto columns = std::count(header.begin(), header.end(), ',') + 1;
  int rows = 0;
  for (std::string line; std::getline(in, line); ++rows)
    EXPECT_EQ(std::count(line.begin(), line.end(), ',') + 1, columns);
  EXPECT_EQ(rows, c.iterations);
}

TEST(Grid, WritesOneFilePerEpisodeAndARecomputableSummary) {
  auto c = quick_config();
  c.iterations = 2;
  const fs::path out = scratch_dir("grid");
  const auto results = run_grid(c, out);
  ASSERT_EQ(results.size(), 3u);

  int episode_files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(out))
    if (entry.path().filename().string().rfind("episode_s", 0) == 0) ++episode_files;
  EXPECT_EQ(episode_files, 3 * 2);
  ASSERT_TRUE(fs::exists(out / "summary.csv"));

  const auto summary = read_csv(out / "summary.csv");
  ASSERT_EQ(summary[0][8], "row");
  int finals = 0;
  for (std::size_t i = 1; i < summary.size(); ++i) {
    const auto& row = summary[i];
    if (row[8] != "final") continue;
    ++finals;
    std::vector<double> finals_from_files;
    for (auto seed : c.seeds) {
      const auto ep = read_csv(out / row[0] / episode_file_name(seed));
      finals_from_files.push_back(std::stod(ep.back().back()));
    }
    const auto ms = mean_std(finals_from_files);
    EXPECT_EQ(row[11], detail::fmt(ms.mean));
    EXPECT_EQ(row[12], detail::fmt(ms.std));
  }
  EXPECT_EQ(finals, 3);
}

TEST(Grid, FailingCellIsMarkedAndOthersContinue) {
  auto c = quick_config();
  c.iterations = 1;
  c.seeds = {0};
  c.methods = {PlanningMethod::TrackingOnly};
  c.sweep.q_cs = {0.0, 0.01};
  const fs::path out = scratch_dir("grid_fail");
  const auto results = run_grid(c, out);
  ASSERT_EQ(results.size(), 2u);
  EXPECT_FALSE(results[0].ok);
  EXPECT_TRUE(results[1].ok);
  const auto text = slurp(out / "summary.csv");
  EXPECT_NE(text.find(",failed,"), std::string::npos);
  EXPECT_NE(text.find(",final,"), std::string::npos);
}
