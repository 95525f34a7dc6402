#pragma once

#include <string>

namespace mars {

/// CLI entry points, callable in-process. Exit codes: 0 success, 1 usage or
/// configuration error, 2 runtime (I/O, parse, processing) error.
int run_simulate(const std::string& config_path, const std::string& out_dir);
int run_odometry(const std::string& config_path, const std::string& scan_dir,
                 const std::string& out_path);
int run_eval_ate(const std::string& est_path, const std::string& gt_path, double max_dt);

}  // namespace mars
