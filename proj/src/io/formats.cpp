#include "mars/io/formats.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mars {

namespace {

[[noreturn]] void fail_at(const std::string& path, std::size_t line, const std::string& msg) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

/// Strip comment and surrounding whitespace; empty result means skip.
std::string payload(const std::string& line) {
  std::string s = line.substr(0, line.find('#'));
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_scan_file(const std::string& path, const ScanFrame& frame) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "MARS-SCAN v1 " << frame.scan_id << ' ' << fmt(frame.base_timestamp) << ' '
      << frame.points.size() << '\n';
  for (std::size_t i = 0; i < frame.points.size(); ++i)
    out << fmt(frame.points.x[i]) << ' ' << fmt(frame.points.y[i]) << ' '
        << fmt(frame.points.z[i]) << ' ' << fmt(frame.points.t[i]) << '\n';
  if (!out) throw std::runtime_error(path + ": write failed");
}

ScanFrame read_scan_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  ScanFrame frame;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string body = payload(line);
    if (body.empty()) continue;
    std::istringstream ss(body);
    if (!have_header) {
      std::string magic;
      std::string version;
      ss >> magic >> version >> frame.scan_id >> frame.base_timestamp >> expected;
      if (!ss || magic != "MARS-SCAN" || version != "v1")
        fail_at(path, lineno, "expected header 'MARS-SCAN v1 <id> <time> <count>'");
      have_header = true;
      continue;
    }
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double t = 0.0;
    ss >> x >> y >> z >> t;
    std::string extra;
    if (!ss || (ss >> extra)) fail_at(path, lineno, "expected 'x y z t_offset'");
    frame.points.add(Vec3(x, y, z), t);
  }
  if (!have_header) fail_at(path, lineno, "missing header");
  if (frame.points.size() != expected)
    fail_at(path, lineno,
            "header announces " + std::to_string(expected) + " points, file has " +
                std::to_string(frame.points.size()));
  return frame;
}

void write_trajectory_file(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "# timestamp tx ty tz qx qy qz qw\n";
  for (const TimedPose& p : traj) {
    const Eigen::Quaterniond& q = p.pose.rotation.quat();
    const Vec3& t = p.pose.translation;
    out << fmt(p.t) << ' ' << fmt(t.x()) << ' ' << fmt(t.y()) << ' ' << fmt(t.z()) << ' '
        << fmt(q.x()) << ' ' << fmt(q.y()) << ' ' << fmt(q.z()) << ' ' << fmt(q.w()) << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

Trajectory read_trajectory_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  Trajectory traj;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string body = payload(line);
    if (body.empty()) continue;
    std::istringstream ss(body);
    double t = 0.0;
    double tx = 0.0;
    double ty = 0.0;
    double tz = 0.0;
    double qx = 0.0;
    double qy = 0.0;
    double qz = 0.0;
    double qw = 0.0;
    ss >> t >> tx >> ty >> tz >> qx >> qy >> qz >> qw;
    std::string extra;
    if (!ss || (ss >> extra))
      fail_at(path, lineno, "expected 'timestamp tx ty tz qx qy qz qw'");
    traj.push_back({t, SE3(SO3(Eigen::Quaterniond(qw, qx, qy, qz)), Vec3(tx, ty, tz))});
  }
  return traj;
}

}  // namespace mars
