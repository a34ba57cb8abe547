#pragma once

#include <vector>

#include "pixelmpc/dof.hpp"
#include "pixelmpc/racing.hpp"

namespace pixelmpc {

struct CollectConfig {
  int laps = 10;
  double speed_min = 6.0;
  double speed_max = 14.0;
  int pixels_per_frame = 100;
  double min_depth = 0.5;  // skip points closer than this to the image plane [m]
};

/// Desired speed of each lap, evenly spaced over [speed_min, speed_max].
std::vector<double> collect_speeds(const CollectConfig& cfg);

/// Laps held out for testing: round(n/3) and round(2n/3), distinct, when n >= 3.
std::vector<int> holdout_laps(int laps);

/// Points sampled on one frame: visible gate centers and corners first, then random background
/// points that project into the image.
std::vector<Vec3<double>> sample_frame_points(const RobotStated& x, const CameraModel& cam, const GateCourse& course,
                                              const CollectConfig& cfg, Rng& rng);

/// Fly the nominal controller and record flow-oracle targets at sampled pixels every tick.
/// A crash stops collection and marks the dataset partial.
DofDataset collect_dataset(const GateCourse& course, const RacingConfig& racing, const CollectConfig& cfg,
                           std::uint64_t seed, std::vector<RunLog>* logs = nullptr);

}  // namespace pixelmpc
