#include "pixelmpc/dynamics.hpp"

#include <algorithm>

namespace pixelmpc {

void VehicleParams::validate() const {
  if (!(mass > 0.0)) throw InvalidArgument("vehicle mass must be positive");
  if (!(drag >= 0.0)) throw InvalidArgument("drag coefficient must be non-negative");
  if (!(force_noise_std.array() >= 0.0).all()) throw InvalidArgument("noise scale must be non-negative");
  if (!(rate_limit > 0.0)) throw InvalidArgument("rate limit must be positive");
  if (!gravity.allFinite()) throw InvalidArgument("gravity must be finite");
}

ControlInputd clamp_control(const ControlInputd& u, const VehicleParams& params) {
  ControlInputd out;
  for (int i = 0; i < 3; ++i) out.omega(i) = std::clamp(u.omega(i), -params.rate_limit, params.rate_limit);
  out.thrust = std::clamp(u.thrust, 0.0, params.max_thrust());
  return out;
}

ControlInputd hover_control(const VehicleParams& params) {
  return ControlInputd{Vec3<double>::Zero(), params.hover_thrust()};
}

}  // namespace pixelmpc
