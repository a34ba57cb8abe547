#pragma once

#include <vector>

#include "pixelmpc/course.hpp"

namespace pixelmpc {

struct CostParams {
  double c1 = 400.0;
  double c2 = 250.0;
  double c3 = 8.0;
  double c_pixel = 0.0;
  double t_f_pixel = 1.0;        // [s]
  double crash_value = 1000.0;   // value of h inside an obstacle
  double desired_speed = 14.0;   // [m/s]
  Vec2<double> image_center = Vec2<double>(0.5, 0.5);

  /// Number of pixel-cost steps: those with t * dt < t_f_pixel.
  int pixel_steps(double dt) const;
  void validate(int horizon, double dt) const;
};

/// Desired attitude and velocity for the segment leading to the active gate.
struct PathTarget {
  Vec3<double> a, b;     // segment endpoints
  Vec3<double> dir;      // unit direction a -> b
  Quat<double> q_d;      // heading along the segment, level roll and pitch
  Vec3<double> v_d;      // desired_speed * dir
};

PathTarget path_target(const GateCourse& course, int active, double desired_speed);

/// Distance from p to the segment [a, b].
double segment_distance(const Vec3<double>& p, const Vec3<double>& a, const Vec3<double>& b);

/// crash_value inside an obstacle, otherwise clamp(2 d / d_max - 1, -1, 1) with d the distance to
/// the active segment.
double h_path_indicator(const Vec3<double>& p, const GateCourse& course, int active, double crash_value = 1000.0);

/// One step of the racing cost, already multiplied by dt.
double robot_cost(const RobotStated& x, const CostParams& params, const GateCourse& course, int active, double dt);

/// Same with a precomputed target; `h` must be h_path_indicator(x.p, ...).
double robot_cost_terms(const RobotStated& x, double h, const PathTarget& target, const CostParams& params,
                        double dt);

/// c_pixel * sum over steps with t * dt < t_f of L1(pixel_t, O) * dt; zero without a detection.
double pixel_cost(const std::vector<PixelStated>& trajectory, const CostParams& params, bool detection, double dt);

}  // namespace pixelmpc
