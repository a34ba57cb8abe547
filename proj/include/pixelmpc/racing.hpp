#pragma once

#include <functional>

#include "pixelmpc/estimation.hpp"
#include "pixelmpc/planner.hpp"
#include "pixelmpc/runlog.hpp"

namespace pixelmpc {

enum class ControllerMode { Nominal, PixelMpc };
enum class StateSource { Truth, ParticleFilter };

std::string_view to_string(ControllerMode m);
std::string_view to_string(StateSource s);

struct RacingConfig {
  ControllerMode mode = ControllerMode::Nominal;
  StateSource source = StateSource::Truth;
  VehicleParams vehicle;
  CameraModel camera = CameraModel::forward_looking(M_PI / 2.0, 320, 240);
  CostParams cost;
  MppiConfig mppi;
  FilterConfig filter;
  ImuNoise imu;
  double detector_noise = 0.0;       // normalized image units
  double timeout = 60.0;             // [s]
  double divergence_trace = 100.0;   // covariance trace flagged as divergence [m^2]

  /// Cost parameters with the pixel term disabled in nominal mode.
  CostParams effective_cost() const;
  void validate() const;
};

/// Called once per tick with the true state before the step and the applied control.
using TickObserver = std::function<void(int tick, const RobotStated& truth, const ControlInputd& applied)>;

/// Closed-loop race over the course. `model` may be null when the pixel cost is off.
RunLog pixelmpc_loop(const GateCourse& course, const DofModel* model, const RacingConfig& cfg, std::uint64_t seed,
                     const TickObserver& observer = {});

}  // namespace pixelmpc
