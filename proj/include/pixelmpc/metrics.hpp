#pragma once

#include <array>
#include <vector>

#include "pixelmpc/course.hpp"
#include "pixelmpc/dof.hpp"
#include "pixelmpc/runlog.hpp"

namespace pixelmpc {

struct VisibilityTimes {
  double below_half = 0.0;  // [s] with visibility <= 0.5
  double zero = 0.0;        // [s] with visibility <= 0
};

/// Time the active gate spends at or below each threshold, counted from the first tick the gate is
/// detected until it is crossed.
VisibilityTimes visibility_metrics(const RunLog& log);
double time_below(const RunLog& log, double threshold);

/// Total variation of unwrapped Z-Y-X Euler angles, (roll, pitch, yaw) [rad].
Vec3<double> total_variation(const RunLog& log);
Vec3<double> total_variation(const std::vector<Quat<double>>& attitudes);

double max_covariance_trace(const RunLog& log);

/// Sample mean and twice the sample standard deviation (n - 1 denominator).
struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double two_sigma = 0.0;
};
Summary summarize(const std::vector<double>& values);

struct LapMetrics {
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::Timeout;
  double lap_time = 0.0;
  VisibilityTimes visibility;
  Vec3<double> tv = Vec3<double>::Zero();
  double max_cov_trace = 0.0;
  bool estimator_diverged = false;
};
LapMetrics lap_metrics(const RunLog& log);

/// Laps sharing one controller configuration.
struct GroupKey {
  std::string mode;
  std::string state_source;
  double desired_speed = 0.0;
  double t_f = 0.0;
  double c_pixel = 0.0;

  auto operator<=>(const GroupKey&) const = default;
};

struct GroupReport {
  GroupKey key;
  std::vector<LapMetrics> laps;
  int successes = 0;
  Summary below_half, zero;  // visibility times [s]
  Summary lap_time;          // successful laps only
  Summary max_cov_trace;
  Summary tv_roll, tv_pitch, tv_yaw, tv_total;
};

/// Groups logs by configuration, ordered by key; laps keep their input order.
std::vector<GroupReport> group_reports(const std::vector<RunLog>& logs);

/// table2.csv (visibility), table3.csv (lap time), table4.csv (covariance), tv.csv (per-lap total
/// variation) and laps.csv (every per-lap metric).
void write_evaluation(const std::vector<GroupReport>& reports, const std::filesystem::path& dir);

/// Mean absolute pixel error of multi-step flow-model rollouts against the true reprojection of
/// world points along logged trajectories, one entry per horizon. Segments start at random ticks
/// and track a gate or background point that stays in front of the camera over the longest horizon.
struct HorizonError {
  int horizon = 0;
  std::size_t segments = 0;
  double mae = 0.0;  // mean of |du| + |dv| over segments, normalized image units
};
std::vector<HorizonError> horizon_errors(const DofModel& model, const std::vector<RunLog>& logs,
                                         const GateCourse& course, const CameraModel& cam,
                                         const std::vector<int>& horizons, int segments, std::uint64_t seed);

}  // namespace pixelmpc
