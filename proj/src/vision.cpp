#include "pixelmpc/vision.hpp"

namespace pixelmpc {

CameraModel CameraModel::forward_looking(double hfov, int width, int height, double pitch_up) {
  CameraModel cam;
  cam.hfov = hfov;
  cam.width = width;
  cam.height = height;
  cam.vfov = 2.0 * std::atan(std::tan(hfov / 2.0) * double(height) / double(width));
  const double c = std::cos(pitch_up), s = std::sin(pitch_up);
  const Vec3<double> cz(c, 0.0, s);
  const Vec3<double> cx(0.0, -1.0, 0.0);
  const Vec3<double> cy = cz.cross(cx);
  cam.body_to_camera.col(0) = cx;
  cam.body_to_camera.col(1) = cy;
  cam.body_to_camera.col(2) = cz;
  cam.validate();
  return cam;
}

void CameraModel::validate() const {
  if (!(hfov > 0.0 && hfov < M_PI) || !(vfov > 0.0 && vfov < M_PI)) {
    throw InvalidArgument("camera field of view must lie in (0, pi)");
  }
  if (width <= 0 || height <= 0) throw InvalidArgument("camera image size must be positive");
}

Gate Gate::square(int id, int class_id, const Vec3<double>& center, const Vec3<double>& facing,
                  double half_size) {
  Gate g;
  g.id = id;
  g.class_id = class_id;
  g.center = center;
  g.normal = facing.normalized();
  g.half_size = half_size;
  Vec3<double> up = Vec3<double>::UnitZ() - g.normal * g.normal.z();
  if (up.norm() < 1e-9) up = Vec3<double>::UnitX() - g.normal * g.normal.x();
  up.normalize();
  const Vec3<double> right = up.cross(g.normal).normalized();
  g.up = up;
  g.right = right;
  g.corners = {center - half_size * right + half_size * up, center + half_size * right + half_size * up,
               center + half_size * right - half_size * up, center - half_size * right - half_size * up};
  return g;
}

bool gate_faces_camera(const RobotStated& x, const CameraModel& cam, const Gate& gate) {
  const CameraPose<double> pose = camera_pose(x, cam);
  return gate.normal.dot(pose.origin - gate.center) > 0.0;
}

std::optional<Detection> detect_gate(const RobotStated& x, const CameraModel& cam, const Gate& gate,
                                     double noise_std, Rng* rng) {
  const CameraPose<double> pose = camera_pose(x, cam);
  if (!(gate.normal.dot(pose.origin - gate.center) > 0.0)) return std::nullopt;
  const auto center = project_camera_point(to_camera(pose, gate.center), cam);
  if (!center || !center->in_frame()) return std::nullopt;

  Detection det;
  det.gate_id = gate.id;
  det.center = *center;
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec3<double> pc = to_camera(pose, gate.corners[i]);
    // A corner behind the camera is reported on the image border along its direction.
    const auto px = project_camera_point(pc, cam);
    if (px) {
      det.corners[i] = *px;
    } else {
      det.corners[i].u = pc.x() >= 0.0 ? 2.0 : -1.0;
      det.corners[i].v = pc.y() >= 0.0 ? 2.0 : -1.0;
    }
  }
  if (noise_std > 0.0 && rng != nullptr) {
    std::normal_distribution<double> n(0.0, noise_std);
    det.center.u += n(*rng);
    det.center.v += n(*rng);
    for (auto& c : det.corners) {
      c.u += n(*rng);
      c.v += n(*rng);
    }
  }
  return det;
}

double visibility_fraction(const RobotStated& x, const CameraModel& cam, const Gate& gate) {
  const CameraPose<double> pose = camera_pose(x, cam);
  if (!(gate.normal.dot(pose.origin - gate.center) > 0.0)) return 0.0;
  int visible = 0;
  for (const auto& corner : gate.corners) {
    const auto px = project_camera_point(to_camera(pose, corner), cam);
    if (px && px->in_frame()) ++visible;
  }
  return visible / 4.0;
}

}  // namespace pixelmpc
