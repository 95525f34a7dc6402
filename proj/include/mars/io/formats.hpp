#pragma once

#include <string>

#include "mars/eval/trajectory_eval.hpp"
#include "mars/types.hpp"

namespace mars {

/// Plain-text scan file: header "MARS-SCAN v1 <scan_id> <base_timestamp>
/// <num_points>", then one "x y z t_offset" line per point. '#' starts a
/// comment, blank lines are ignored. Values are written with enough digits to
/// round-trip doubles exactly.
void write_scan_file(const std::string& path, const ScanFrame& frame);
ScanFrame read_scan_file(const std::string& path);

/// Plain-text trajectory file: one "timestamp tx ty tz qx qy qz qw" record
/// per line, '#' comments. Readers report the file and line on malformed
/// input.
void write_trajectory_file(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory_file(const std::string& path);

}  // namespace mars
