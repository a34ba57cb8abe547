#pragma once

#include <array>
#include <cmath>
#include <optional>

#include "pixelmpc/dynamics.hpp"

namespace pixelmpc {

/// Pinhole camera rigidly mounted on the body.
///
/// Camera frame: z along the optical axis, x to the image right, y to the image bottom.
/// Body frame: x forward, y left, z up. Normalized image coordinates have their origin at
/// the top-left corner and span [0, 1] across the field of view.
struct CameraModel {
  double hfov = M_PI / 2.0;
  double vfov = 2.0 * std::atan(0.75);
  int width = 320;
  int height = 240;
  Mat3<double> body_to_camera = Mat3<double>::Identity();  // columns: camera axes in body coordinates
  Vec3<double> offset = Vec3<double>::Zero();              // camera origin in body coordinates

  /// Forward-looking mount; `pitch_up` tilts the optical axis above the body x axis.
  static CameraModel forward_looking(double hfov, int width, int height, double pitch_up = 0.0);

  double tan_half_h() const { return std::tan(hfov / 2.0); }
  double tan_half_v() const { return std::tan(vfov / 2.0); }
  void validate() const;
};

/// Normalized image position in [0,1]^2 when in frame.
template <typename Scalar>
struct PixelState {
  Scalar u = Scalar(0.5);
  Scalar v = Scalar(0.5);

  bool in_frame() const { return u >= Scalar(0) && u <= Scalar(1) && v >= Scalar(0) && v <= Scalar(1); }
  Vec2<Scalar> vec() const { return Vec2<Scalar>(u, v); }
};

using PixelStated = PixelState<double>;

/// Flow in polar form: magnitude [normalized units / s] and direction atan2(v_dot, u_dot).
template <typename Scalar>
struct FlowVector {
  Scalar l = Scalar(0);
  Scalar theta = Scalar(0);
};

using FlowVectord = FlowVector<double>;

struct Gate {
  int id = 0;
  int class_id = 0;
  Vec3<double> center = Vec3<double>::Zero();
  std::array<Vec3<double>, 4> corners{};
  Vec3<double> normal = Vec3<double>::UnitX();  // points toward the approach side
  double half_size = 1.25;
  Vec3<double> right = -Vec3<double>::UnitY();  // in-plane axes, set by square()
  Vec3<double> up = Vec3<double>::UnitZ();

  /// Square gate of side 2*half_size whose in-plane vertical axis follows world z.
  static Gate square(int id, int class_id, const Vec3<double>& center, const Vec3<double>& facing,
                     double half_size);
  /// In-plane unit axes (right, up) spanning the opening.
  std::pair<Vec3<double>, Vec3<double>> plane_axes() const { return {right, up}; }
};

struct Detection {
  int gate_id = 0;
  PixelStated center;
  std::array<PixelStated, 4> corners{};
};

/// Camera origin and world-to-camera rotation for a body pose.
template <typename Scalar>
struct CameraPose {
  Vec3<Scalar> origin;
  Mat3<Scalar> world_to_camera;
};

template <typename Scalar>
CameraPose<Scalar> camera_pose(const RobotState<Scalar>& x, const CameraModel& cam) {
  const Mat3<Scalar> r_wb = rotation_matrix_unchecked(x.q);
  const Mat3<Scalar> r_bc = cam.body_to_camera.template cast<Scalar>();
  CameraPose<Scalar> pose;
  pose.origin = x.p + r_wb * cam.offset.template cast<Scalar>();
  pose.world_to_camera = r_bc.transpose() * r_wb.transpose();
  return pose;
}

/// Camera-frame coordinates of a world point.
template <typename Scalar>
Vec3<Scalar> to_camera(const CameraPose<Scalar>& pose, const Vec3<Scalar>& point) {
  return pose.world_to_camera * (point - pose.origin);
}

template <typename Scalar>
std::optional<PixelState<Scalar>> project_camera_point(const Vec3<Scalar>& pc, const CameraModel& cam) {
  if (!(pc.z() > Scalar(0))) return std::nullopt;
  PixelState<Scalar> px;
  px.u = Scalar(0.5) + pc.x() / pc.z() / Scalar(2.0 * cam.tan_half_h());
  px.v = Scalar(0.5) + pc.y() / pc.z() / Scalar(2.0 * cam.tan_half_v());
  return px;
}

/// Project a world point. Returns nullopt for points behind the image plane; the result may
/// lie outside [0,1]^2. Throws DegenerateProjection for a point at the camera origin.
template <typename Scalar>
std::optional<PixelState<Scalar>> project(const RobotState<Scalar>& x, const CameraModel& cam,
                                          const Vec3<Scalar>& point) {
  const CameraPose<Scalar> pose = camera_pose(x, cam);
  const Vec3<Scalar> pc = to_camera(pose, point);
  if (!(pc.norm() > Scalar(1e-12))) throw DegenerateProjection("point coincides with the camera origin");
  return project_camera_point(pc, cam);
}

/// Polar form of an image-plane velocity. A zero vector maps to (0, 0).
template <typename Scalar>
FlowVector<Scalar> to_polar(Scalar u_dot, Scalar v_dot) {
  using std::atan2;
  using std::hypot;
  FlowVector<Scalar> f;
  f.l = hypot(u_dot, v_dot);
  f.theta = f.l > Scalar(0) ? atan2(v_dot, u_dot) : Scalar(0);
  return f;
}

/// Instantaneous normalized-pixel velocity (u_dot, v_dot) of a static world point as the
/// camera translates with the state velocity and rotates with the commanded body rates.
template <typename Scalar>
Vec2<Scalar> image_velocity(const RobotState<Scalar>& x, const Vec3<Scalar>& omega,
                            const Vec3<Scalar>& point, const CameraModel& cam) {
  const Mat3<Scalar> r_wb = rotation_matrix_unchecked(x.q);
  const Mat3<Scalar> r_bc = cam.body_to_camera.template cast<Scalar>();
  const Vec3<Scalar> t = cam.offset.template cast<Scalar>();
  const Vec3<Scalar> pb = r_wb.transpose() * (point - x.p);  // body-frame point
  const Vec3<Scalar> pc = r_bc.transpose() * (pb - t);
  if (!(pc.z() > Scalar(0))) throw DegenerateProjection("flow requested for a point behind the camera");
  // d/dt of the body-frame point for a static world point: -omega x pb - R^T v
  const Vec3<Scalar> pb_dot = -omega.cross(pb) - r_wb.transpose() * x.v;
  const Vec3<Scalar> pc_dot = r_bc.transpose() * pb_dot;
  const Scalar z2 = pc.z() * pc.z();
  const Scalar xn_dot = (pc_dot.x() * pc.z() - pc.x() * pc_dot.z()) / z2;
  const Scalar yn_dot = (pc_dot.y() * pc.z() - pc.y() * pc_dot.z()) / z2;
  return Vec2<Scalar>(xn_dot / Scalar(2.0 * cam.tan_half_h()), yn_dot / Scalar(2.0 * cam.tan_half_v()));
}

template <typename Scalar>
FlowVector<Scalar> flow_oracle(const RobotState<Scalar>& x, const ControlInput<Scalar>& u,
                               const Vec3<Scalar>& point, const CameraModel& cam) {
  const Vec2<Scalar> d = image_velocity(x, u.omega, point, cam);
  return to_polar(d.x(), d.y());
}

/// True iff the camera sits on the approach side of the gate.
bool gate_faces_camera(const RobotStated& x, const CameraModel& cam, const Gate& gate);

/// Geometric stand-in for a learned detector. Present iff the center projects in frame, in
/// front of the camera, and the gate faces the camera; noise is added to every coordinate.
std::optional<Detection> detect_gate(const RobotStated& x, const CameraModel& cam, const Gate& gate,
                                     double noise_std, Rng* rng);

/// Fraction of the four corners that project in front of the camera and inside [0,1]^2.
double visibility_fraction(const RobotStated& x, const CameraModel& cam, const Gate& gate);

}  // namespace pixelmpc
