#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>

#include "pixelmpc/errors.hpp"
#include "pixelmpc/random.hpp"

namespace pixelmpc {

template <typename Scalar> using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar> using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar> using Vec4 = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar> using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

/// Quaternion stored as (qw, qx, qy, qz), body-to-world.
template <typename Scalar> using Quat = Vec4<Scalar>;

template <typename Scalar>
Quat<Scalar> identity_quat() {
  return Quat<Scalar>(Scalar(1), Scalar(0), Scalar(0), Scalar(0));
}

/// Quadrotor state: world position, body-to-world attitude, world velocity.
template <typename Scalar>
struct RobotState {
  Vec3<Scalar> p = Vec3<Scalar>::Zero();
  Quat<Scalar> q = identity_quat<Scalar>();
  Vec3<Scalar> v = Vec3<Scalar>::Zero();

  bool all_finite() const { return p.allFinite() && q.allFinite() && v.allFinite(); }
};

/// Body angular rates [rad/s] and total thrust [N].
template <typename Scalar>
struct ControlInput {
  Vec3<Scalar> omega = Vec3<Scalar>::Zero();
  Scalar thrust = Scalar(0);

  Vec4<Scalar> as_vector() const { return Vec4<Scalar>(omega.x(), omega.y(), omega.z(), thrust); }
  static ControlInput from_vector(const Vec4<Scalar>& u) {
    return ControlInput{Vec3<Scalar>(u(0), u(1), u(2)), u(3)};
  }
};

template <typename Scalar>
struct StateDerivative {
  Vec3<Scalar> p_dot = Vec3<Scalar>::Zero();
  Quat<Scalar> q_dot = Quat<Scalar>::Zero();
  Vec3<Scalar> v_dot = Vec3<Scalar>::Zero();
};

struct VehicleParams {
  double mass = 1.0;
  Vec3<double> gravity = Vec3<double>(0.0, 0.0, -9.81);
  double drag = 0.1;  // linear isotropic drag f_D = -drag * mass * v
  Vec3<double> force_noise_std = Vec3<double>::Zero();
  double rate_limit = 3.0;

  double hover_thrust() const { return mass * gravity.norm(); }
  double max_thrust() const { return 2.0 * hover_thrust(); }
  void validate() const;
};

using RobotStated = RobotState<double>;
using ControlInputd = ControlInput<double>;

namespace detail {
template <typename Scalar>
void require_unit(const Quat<Scalar>& q, double tol) {
  const double n = static_cast<double>(q.norm());
  if (!(std::abs(n - 1.0) <= tol)) {
    throw InvalidArgument("quaternion is not unit: norm = " + std::to_string(n));
  }
}
}  // namespace detail

/// Body-to-world rotation, written out entry by entry. No normalization is applied.
template <typename Scalar>
Mat3<Scalar> rotation_matrix_unchecked(const Quat<Scalar>& q) {
  const Scalar w = q(0), x = q(1), y = q(2), z = q(3);
  const Scalar one(1), two(2);
  Mat3<Scalar> r;
  r << one - two * (y * y + z * z), two * (x * y - z * w), two * (x * z + y * w),
       two * (x * y + z * w), one - two * (x * x + z * z), two * (y * z - x * w),
       two * (x * z - y * w), two * (y * z + x * w), one - two * (x * x + y * y);
  return r;
}

/// Body-to-world rotation matrix. Throws InvalidArgument unless |q| = 1 within 1e-6.
template <typename Scalar>
Mat3<Scalar> rotation_matrix(const Quat<Scalar>& q) {
  detail::require_unit(q, 1e-6);
  return rotation_matrix_unchecked(q);
}

template <typename Scalar>
Quat<Scalar> quat_derivative_unchecked(const Quat<Scalar>& q, const Vec3<Scalar>& omega) {
  const Scalar w = q(0), x = q(1), y = q(2), z = q(3);
  Eigen::Matrix<Scalar, 4, 3> m;
  m << -x, -y, -z,
        w, -z,  y,
        z,  w, -x,
       -y,  x,  w;
  return Scalar(0.5) * (m * omega);
}

/// q_dot = 1/2 M(q) omega for body-frame angular rates.
template <typename Scalar>
Quat<Scalar> quat_derivative(const Quat<Scalar>& q, const Vec3<Scalar>& omega) {
  detail::require_unit(q, 1e-6);
  return quat_derivative_unchecked(q, omega);
}

template <typename Scalar>
StateDerivative<Scalar> robot_derivative_unchecked(const RobotState<Scalar>& x,
                                                   const ControlInput<Scalar>& u,
                                                   const VehicleParams& params,
                                                   const Vec3<Scalar>& noise) {
  const Scalar mass = Scalar(params.mass);
  const Mat3<Scalar> r = rotation_matrix_unchecked(x.q);
  const Vec3<Scalar> thrust_world = r.col(2) * u.thrust;
  const Vec3<Scalar> drag = -Scalar(params.drag) * mass * x.v;
  StateDerivative<Scalar> d;
  d.p_dot = x.v;
  d.v_dot = params.gravity.template cast<Scalar>() + (thrust_world + drag + noise) / mass;
  d.q_dot = quat_derivative_unchecked(x.q, u.omega);
  return d;
}

/// Rigid-body derivative: p_dot = v, v_dot = g + (R f_T + f_D + w_f) / m, q_dot from body rates.
template <typename Scalar>
StateDerivative<Scalar> robot_derivative(const RobotState<Scalar>& x, const ControlInput<Scalar>& u,
                                         const VehicleParams& params, const Vec3<Scalar>& noise) {
  detail::require_unit(x.q, 1e-6);
  return robot_derivative_unchecked(x, u, params, noise);
}

template <typename Scalar>
RobotState<Scalar> euler_update(const RobotState<Scalar>& x, const StateDerivative<Scalar>& d,
                                Scalar dt) {
  RobotState<Scalar> next;
  next.p = x.p + d.p_dot * dt;
  next.v = x.v + d.v_dot * dt;
  next.q = (x.q + d.q_dot * dt).normalized();
  return next;
}

/// One explicit-Euler step with quaternion renormalization. With no rng the process noise is zero.
template <typename Scalar>
RobotState<Scalar> step(const RobotState<Scalar>& x, const ControlInput<Scalar>& u,
                        const VehicleParams& params, Scalar dt, Rng* rng = nullptr) {
  if (!(dt > Scalar(0))) throw InvalidArgument("step: dt must be positive");
  Vec3<Scalar> noise = Vec3<Scalar>::Zero();
  if (rng != nullptr) {
    std::normal_distribution<double> n01(0.0, 1.0);
    for (int i = 0; i < 3; ++i) noise(i) = Scalar(params.force_noise_std(i) * n01(*rng));
  }
  RobotState<Scalar> next = euler_update(x, robot_derivative(x, u, params, noise), dt);
  if (!next.all_finite()) throw IntegrationFailure("step produced a non-finite state");
  return next;
}

template <typename Scalar>
Quat<Scalar> quat_multiply(const Quat<Scalar>& a, const Quat<Scalar>& b) {
  return Quat<Scalar>(a(0) * b(0) - a(1) * b(1) - a(2) * b(2) - a(3) * b(3),
                      a(0) * b(1) + a(1) * b(0) + a(2) * b(3) - a(3) * b(2),
                      a(0) * b(2) - a(1) * b(3) + a(2) * b(0) + a(3) * b(1),
                      a(0) * b(3) + a(1) * b(2) - a(2) * b(1) + a(3) * b(0));
}

/// Rotation by `angle` about a unit `axis`.
template <typename Scalar>
Quat<Scalar> axis_angle_quat(const Vec3<Scalar>& axis, Scalar angle) {
  using std::cos;
  using std::sin;
  const Scalar h = angle / Scalar(2);
  return Quat<Scalar>(cos(h), axis.x() * sin(h), axis.y() * sin(h), axis.z() * sin(h));
}

template <typename Scalar>
Quat<Scalar> yaw_quat(Scalar yaw) {
  return axis_angle_quat<Scalar>(Vec3<Scalar>::UnitZ(), yaw);
}

/// Z-Y-X Euler angles (roll, pitch, yaw) of a body-to-world quaternion.
template <typename Scalar>
Vec3<Scalar> euler_zyx(const Quat<Scalar>& q) {
  using std::asin;
  using std::atan2;
  const Scalar w = q(0), x = q(1), y = q(2), z = q(3);
  const Scalar roll = atan2(Scalar(2) * (w * x + y * z), Scalar(1) - Scalar(2) * (x * x + y * y));
  Scalar s = Scalar(2) * (w * y - z * x);
  s = std::clamp(s, Scalar(-1), Scalar(1));
  const Scalar pitch = asin(s);
  const Scalar yaw = atan2(Scalar(2) * (w * z + x * y), Scalar(1) - Scalar(2) * (y * y + z * z));
  return Vec3<Scalar>(roll, pitch, yaw);
}

template <typename Scalar>
Quat<Scalar> quat_from_euler_zyx(Scalar roll, Scalar pitch, Scalar yaw) {
  const Quat<Scalar> qz = axis_angle_quat<Scalar>(Vec3<Scalar>::UnitZ(), yaw);
  const Quat<Scalar> qy = axis_angle_quat<Scalar>(Vec3<Scalar>::UnitY(), pitch);
  const Quat<Scalar> qx = axis_angle_quat<Scalar>(Vec3<Scalar>::UnitX(), roll);
  return quat_multiply(quat_multiply(qz, qy), qx);
}

/// Clamp rates to the vehicle rate limit and thrust to [0, 2 m |g|].
ControlInputd clamp_control(const ControlInputd& u, const VehicleParams& params);

ControlInputd hover_control(const VehicleParams& params);

}  // namespace pixelmpc
