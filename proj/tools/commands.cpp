#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "mars/eval/trajectory_eval.hpp"
#include "mars/io/config.hpp"
#include "mars/io/formats.hpp"
#include "mars/pipeline.hpp"
#include "mars/sim/simulator.hpp"

namespace mars {

namespace fs = std::filesystem;

namespace {

/// Both loaders run on every command so a shared config file holding the
/// other command's keys still validates; only keys outside the whole schema
/// are rejected.
void load_full(const std::string& path, PipelineConfig* pipeline, SimConfig* sim) {
  Config cfg = Config::parse_file(path);
  PipelineConfig p = load_pipeline_config(cfg);
  SimConfig s = load_sim_config(cfg);
  cfg.reject_unknown();
  if (pipeline != nullptr) *pipeline = p;
  if (sim != nullptr) *sim = s;
}

int guarded(const char* what, const std::function<int()>& body) {
  try {
    return body();
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "%s: %s\n", what, e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s: %s\n", what, e.what());
    return 2;
  }
}

}  // namespace

int run_simulate(const std::string& config_path, const std::string& out_dir) {
  return guarded("simulate", [&] {
    SimConfig sc;
    load_full(config_path, nullptr, &sc);

    fs::create_directories(out_dir);
    Scene scene = make_room_scene(sc.scene_extent);
    TrajectoryModel traj = TrajectoryModel::parse(sc.trajectory);
    traj.amplitude = sc.traj_amplitude;
    traj.period = sc.traj_period;
    traj.yaw_follows = sc.yaw_follows;

    SensorModel sensor;
    sensor.beam_elevations_rad = SensorModel::even_elevations(sc.beams, -15.0, 15.0);
    sensor.azimuth_steps = sc.azimuth_steps;
    sensor.max_range = sc.max_range;
    sensor.period = 1.0 / sc.rate;
    sensor.range_noise_std = sc.noise_std;

    std::mt19937_64 rng(sc.seed);
    Trajectory gt;
    std::size_t points_total = 0;
    for (int i = 0; i < sc.scans; ++i) {
      double t = i / sc.rate;
      ScanFrame frame =
          simulate_scan(scene, sensor, traj, t, static_cast<std::uint32_t>(i), rng);
      points_total += frame.points.size();
      char name[32];
      std::snprintf(name, sizeof(name), "%06d.scan", i);
      write_scan_file((fs::path(out_dir) / name).string(), frame);
      gt.push_back({t, traj.pose(t)});
    }
    write_trajectory_file((fs::path(out_dir) / "ground_truth.txt").string(), gt);
    std::printf("scans=%d points=%zu out=%s\n", sc.scans, points_total, out_dir.c_str());
    return 0;
  });
}

int run_odometry(const std::string& config_path, const std::string& scan_dir,
                 const std::string& out_path) {
  return guarded("odometry", [&] {
    PipelineConfig pc;
    load_full(config_path, &pc, nullptr);

    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(scan_dir))
      if (entry.is_regular_file() && entry.path().extension() == ".scan")
        files.push_back(entry.path().string());
    if (files.empty()) throw std::runtime_error("no .scan files in " + scan_dir);
    std::sort(files.begin(), files.end());

    OdometryPipeline pipeline(pc);
    Trajectory est;
    for (const std::string& f : files) {
      PoseEstimate e = pipeline.process_scan(read_scan_file(f));
      est.push_back({e.timestamp, e.world_pose});
      const ScanDiagnostics& d = pipeline.diagnostics().back();
      std::printf(
          "scan=%u t=%.3f surfels=%zu cells=%zu em=%d reg_ms=%.3f keyframe=%d "
          "shift=%d,%d,%d nll_monotone=%d degenerate=%d unconstrained=%d outlier=%.3f\n",
          d.scan_id, d.timestamp, d.scan_surfels, d.map_cells, d.em_iterations,
          1e3 * d.registration_seconds, d.keyframed ? 1 : 0, d.shift[0], d.shift[1],
          d.shift[2], d.nll_monotone ? 1 : 0, d.degenerate ? 1 : 0, d.unconstrained ? 1 : 0,
          d.outlier_mass);
    }
    write_trajectory_file(out_path, est);
    return 0;
  });
}

int run_eval_ate(const std::string& est_path, const std::string& gt_path, double max_dt) {
  return guarded("eval-ate", [&] {
    AteResult r =
        ate_rmse(read_trajectory_file(est_path), read_trajectory_file(gt_path), max_dt);
    if (r.degenerate)
      std::fprintf(stderr, "warning: degenerate trajectory geometry, alignment is weak\n");
    std::printf("%.6f\n", r.rmse);
    return 0;
  });
}

}  // namespace mars
