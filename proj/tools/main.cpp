#include <string>

#include "CLI11.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Continuous-time LiDAR odometry on multi-resolution surfel maps"};
  app.require_subcommand(1);

  std::string config_path;
  std::string scan_dir;
  std::string out_path;
  std::string est_path;
  std::string gt_path;
  double max_dt = 0.05;

  CLI::App* sim = app.add_subcommand("simulate", "Generate synthetic scans and ground truth");
  sim->add_option("--config", config_path, "Configuration file")->required();
  sim->add_option("out_dir", out_path, "Output directory")->required();

  CLI::App* odo = app.add_subcommand("odometry", "Run odometry over a directory of scans");
  odo->add_option("--config", config_path, "Configuration file")->required();
  odo->add_option("scan_dir", scan_dir, "Directory of .scan files")->required();
  odo->add_option("trajectory", out_path, "Output trajectory file")->required();

  CLI::App* ate = app.add_subcommand("eval-ate", "Print ATE RMSE between two trajectories");
  ate->add_option("estimate", est_path, "Estimated trajectory file")->required();
  ate->add_option("ground_truth", gt_path, "Ground-truth trajectory file")->required();
  ate->add_option("--max-dt", max_dt, "Association window in seconds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;  // help/version exit clean, usage errors are 1
  }

  if (sim->parsed()) return mars::run_simulate(config_path, out_path);
  if (odo->parsed()) return mars::run_odometry(config_path, scan_dir, out_path);
  return mars::run_eval_ate(est_path, gt_path, max_dt);
}
