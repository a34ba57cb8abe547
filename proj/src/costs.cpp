#include "pixelmpc/costs.hpp"

namespace pixelmpc {

int CostParams::pixel_steps(double dt) const {
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  if (t_f_pixel <= 0.0) return 0;
  return static_cast<int>(std::ceil(t_f_pixel / dt - 1e-9));
}

void CostParams::validate(int horizon, double dt) const {
  if (c1 < 0.0 || c2 < 0.0 || c3 < 0.0 || c_pixel < 0.0) throw InvalidArgument("cost weights must be >= 0");
  if (t_f_pixel < 0.0) throw InvalidArgument("pixel horizon must be >= 0");
  if (pixel_steps(dt) > horizon) throw InvalidArgument("pixel horizon exceeds the planning horizon");
  if (!(desired_speed >= 0.0)) throw InvalidArgument("desired speed must be >= 0");
}

PathTarget path_target(const GateCourse& course, int active, double desired_speed) {
  PathTarget t;
  std::tie(t.a, t.b) = course.segment(active);
  t.dir = (t.b - t.a).normalized();
  t.q_d = yaw_quat(std::atan2(t.dir.y(), t.dir.x()));
  t.v_d = desired_speed * t.dir;
  return t;
}

double segment_distance(const Vec3<double>& p, const Vec3<double>& a, const Vec3<double>& b) {
  const Vec3<double> ab = b - a;
  const double len2 = ab.squaredNorm();
  const double s = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + s * ab)).norm();
}

double h_path_indicator(const Vec3<double>& p, const GateCourse& course, int active, double crash_value) {
  if (in_obstacle(course, p)) return crash_value;
  const auto [a, b] = course.segment(active);
  const double d = segment_distance(p, a, b);
  return std::clamp(2.0 * d / course.corridor_half_width - 1.0, -1.0, 1.0);
}

double robot_cost_terms(const RobotStated& x, double h, const PathTarget& target, const CostParams& params,
                        double dt) {
  const Quat<double> q = x.q.dot(target.q_d) >= 0.0 ? x.q : Quat<double>(-x.q);
  return (params.c1 * h * h + params.c2 * (target.q_d - q).squaredNorm() +
          params.c3 * (target.v_d - x.v).squaredNorm()) *
         dt;
}

double robot_cost(const RobotStated& x, const CostParams& params, const GateCourse& course, int active, double dt) {
  const double h = h_path_indicator(x.p, course, active, params.crash_value);
  return robot_cost_terms(x, h, path_target(course, active, params.desired_speed), params, dt);
}

double pixel_cost(const std::vector<PixelStated>& trajectory, const CostParams& params, bool detection, double dt) {
  if (!detection || params.c_pixel == 0.0) return 0.0;
  const int n = std::min<int>(params.pixel_steps(dt), static_cast<int>(trajectory.size()));
  double sum = 0.0;
  for (int t = 0; t < n; ++t) {
    const PixelStated& px = trajectory[std::size_t(t)];
    sum += (std::abs(px.u - params.image_center.x()) + std::abs(px.v - params.image_center.y())) * dt;
  }
  return params.c_pixel * sum;
}

}  // namespace pixelmpc
