// Command-line front end: single episodes, sweeps, ground-truth dumps and
// per-step score inspection.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mnbv/mnbv.hpp"

namespace fs = std::filesystem;
using namespace mnbv;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> mesh;
  std::optional<std::string> method;
  std::optional<int> iterations;
  std::optional<double> sigma;
  std::optional<double> q_c;
  std::optional<double> speed_factor;
  std::optional<int> samples;
  std::optional<std::string> shape;
  std::optional<std::string> scorer;
  std::optional<double> alpha;
  std::optional<bool> register_with_gt;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON configuration file");
    app->add_option("--seed", seed, "episode seed (replaces the seed list)");
    app->add_option("--out", out, "output directory");
    app->add_option("--mesh", mesh, "object mesh (.off/.stl) or 'builtin'");
    app->add_option("--method", method, "predictive | non_predictive | tracking_only");
    app->add_option("--iterations", iterations, "planning iterations per episode");
    app->add_option("--sigma", sigma, "position measurement noise (m)");
    app->add_option("--q-c", q_c, "process noise spectral density");
    app->add_option("--speed-factor", speed_factor, "robot step relative to object step");
    app->add_option("--samples", samples, "Monte Carlo samples per candidate");
    app->add_option("--shape", shape, "ellipse | ring");
    app->add_option("--scorer", scorer, "mc | pred_mean | random");
    app->add_option("--alpha", alpha, "depth-rank discount in (0, 1]");
    app->add_option("--register-with-gt", register_with_gt, "register clouds with the true object pose");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c = config.empty() ? ExperimentConfig{} : load_config(config);
    if (seed) c.seeds = {*seed};
    if (out) c.output_dir = *out;
    if (mesh) c.mesh = *mesh;
    if (method) c.methods = {parse_method(*method)};
    if (iterations) c.iterations = *iterations;
    if (sigma) c.sigma = *sigma;
    if (q_c) c.q_c = *q_c;
    if (speed_factor) c.speed_factor = *speed_factor;
    if (samples) c.planner.samples = *samples;
    if (shape) c.planner.shape = parse_shape(*shape);
    if (scorer) c.planner.scorer = parse_scorer(*scorer);
    if (alpha) c.planner.scoring.alpha = *alpha;
    if (register_with_gt) c.map.register_with_gt = *register_with_gt;
    c.validate();
    return c;
  }
};

int cmd_run(const ExperimentConfig& c) {
  const auto scene = Scene::build(c);
  const fs::path out = c.output_dir;
  for (auto m : c.methods) {
    const fs::path dir = c.methods.size() > 1 ? out / to_string(m) : out;
    for (auto seed : c.seeds) {
      const auto log = run_episode(c, seed, m, scene);
      write_episode_files(dir, log);
      std::cout << to_string(m) << " seed " << seed << ": final completeness " << log.final_completeness()
                << "% -> " << (dir / episode_file_name(seed)).string() << '\n';
    }
  }
  return 0;
}

int cmd_grid(const ExperimentConfig& c) {
  const auto results = run_grid(c, c.output_dir);
  int failed = 0;
  for (const auto& r : results) {
    if (!r.ok) {
      ++failed;
      std::cerr << "cell " << r.cell.name() << " failed: " << r.error << '\n';
      continue;
    }
    std::vector<double> finals;
    for (const auto& e : r.episodes) finals.push_back(e.final_completeness());
    const auto ms = mean_std(finals);
    std::cout << r.cell.name() << ": " << ms.mean << " +/- " << ms.std << '\n';
  }
  std::cout << "summary: " << (fs::path(c.output_dir) / "summary.csv").string() << '\n';
  return failed ? 1 : 0;
}

int cmd_gt(const ExperimentConfig& c) {
  const auto scene = Scene::build(c);
  const fs::path out = c.output_dir;
  fs::create_directories(out);
  std::ofstream ply(out / "gt.ply");
  write_ply(ply, scene->gt_cloud);

  Vec3 lo = scene->gt_cloud.front(), hi = lo;
  for (const auto& p : scene->gt_cloud) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double res = c.completeness_resolution;
  VoxelGrid grid(lo - Vec3::Constant(res), hi + Vec3::Constant(res), res);
  for (const auto& p : scene->gt_cloud) grid.mark_occupied(*grid.index_of(p));
  std::ofstream vox(out / "gt_voxels.txt");
  write_grid_dump(vox, grid);
  std::cout << scene->gt_cloud.size() << " points, " << grid.count(VoxelLabel::Occupied) << " voxels -> "
            << (out / "gt.ply").string() << '\n';
  return 0;
}

int cmd_score_debug(const ExperimentConfig& c, int step) {
  if (step < 0 || step >= c.iterations) throw InvalidArgument("--step must be in [0, iterations)");
  const auto seed = c.seeds.front();
  const auto method = c.methods.front();
  StepSnapshot snap;
  const auto log = run_episode(c, seed, method, nullptr, step, &snap);
  const fs::path out = c.output_dir;
  fs::create_directories(out);

  std::ofstream ell(out / "ellipsoids.txt");
  write_ellipsoids(ell, snap.summary);
  std::ofstream cand(out / "candidates.csv");
  cand << "azimuth_index,x,y,yaw,score,selected\n";
  for (std::size_t i = 0; i < snap.plan.feasible.size(); ++i) {
    const auto& v = snap.plan.feasible[i];
    cand << v.azimuth_index << ',' << detail::fmt(v.position.x()) << ',' << detail::fmt(v.position.y()) << ','
         << detail::fmt(v.yaw) << ',' << detail::fmt(snap.plan.scores[i]) << ','
         << (v.azimuth_index == snap.plan.selected.azimuth_index ? 1 : 0) << '\n';
  }
  if (snap.grid) {
    std::ofstream vox(out / "grid.txt");
    write_grid_dump(vox, *snap.grid);
  }
  std::cout << "step " << step << ": " << snap.summary.frontier.size() << " frontier / "
            << snap.summary.occupied.size() << " occupied ellipsoids, " << snap.plan.feasible.size()
            << " feasible candidates" << (snap.plan.fallback ? " (fallback)" : "") << ", selected "
            << snap.plan.selected.azimuth_index << ", completeness "
            << log.records[static_cast<std::size_t>(step)].completeness << "%\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion-uncertainty-aware next-best-view planning for moving objects"};
  app.require_subcommand(1);

  Overrides run_o, grid_o, gt_o, dbg_o;
  auto* run = app.add_subcommand("run", "run single episodes, one CSV per method and seed");
  run_o.attach(run);
  auto* grid = app.add_subcommand("grid", "run the configured sweep and write summary.csv");
  grid_o.attach(grid);
  auto* gt = app.add_subcommand("gt", "build the ground-truth cloud and dump it as PLY and voxels");
  gt_o.attach(gt);
  auto* dbg = app.add_subcommand("score-debug", "dump ellipsoids and candidate scores for one step");
  dbg_o.attach(dbg);
  int step = 0;
  dbg->add_option("--step", step, "iteration to inspect");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_o.resolve());
    if (grid->parsed()) return cmd_grid(grid_o.resolve());
    if (gt->parsed()) return cmd_gt(gt_o.resolve());
    if (dbg->parsed()) return cmd_score_debug(dbg_o.resolve(), step);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
