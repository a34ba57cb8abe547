#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pixelmpc/vision.hpp"

namespace pixelmpc {

enum class Outcome { Success, Crash, Timeout };

std::string_view to_string(Outcome o);
Outcome outcome_from_string(std::string_view s);

struct TickRecord {
  double t = 0.0;
  RobotStated x;
  ControlInputd u;
  std::optional<PixelStated> target;
  double visibility = 0.0;
  int active_gate = 0;
  double cost_robot = 0.0;
  double cost_pixel = 0.0;
  double cov_trace = 0.0;
};

struct RunLog {
  std::string mode = "nominal";
  std::string state_source = "truth";
  std::uint64_t seed = 0;
  double desired_speed = 0.0;
  double c_pixel = 0.0;
  double t_f = 0.0;
  double dt = 0.025;
  Outcome outcome = Outcome::Timeout;
  double lap_time = 0.0;  // valid for Success
  bool estimator_diverged = false;
  std::vector<TickRecord> ticks;
};

/// CSV with `# key=value` header lines followed by one row per tick:
/// t, px, py, pz, qw, qx, qy, qz, vx, vy, vz, wx, wy, wz, thrust, target_u, target_v, visibility,
/// active_gate, cost_robot, cost_pixel, cov_trace. Target columns are empty without a detection.
void write_runlog(const RunLog& log, const std::filesystem::path& path);
std::string format_runlog(const RunLog& log);
RunLog read_runlog(const std::filesystem::path& path);
RunLog parse_runlog(const std::string& text);

}  // namespace pixelmpc
