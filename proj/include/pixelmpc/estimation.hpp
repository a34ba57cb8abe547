#pragma once

#include <vector>

#include "pixelmpc/course.hpp"

namespace pixelmpc {

struct ImuReading {
  Vec3<double> accel = Vec3<double>::Zero();  // body-frame specific force [m/s^2]
  Vec3<double> rates = Vec3<double>::Zero();  // body angular rates [rad/s]
};

/// Sensor noise of the simulated IMU (standard deviations).
struct ImuNoise {
  double accel_std = 0.2;
  double rate_std = 0.1;
};

struct Particle {
  RobotStated x;
  double weight = 0.0;
};

struct FilterConfig {
  int particles = 6400;
  double position_noise = 0.2;   // std injected on position every motion update [m]
  double accel_noise = 0.2;      // per-particle std on the IMU acceleration [m/s^2]
  double rate_noise = 0.1;       // per-particle std on the IMU rates [rad/s]
  double missing_penalty = 4.0;  // multiples of the image width
  double measurement_std = 8.0;  // reprojection likelihood std [px]
  double resample_threshold = 0.5;  // resample when ESS < threshold * N
  double init_position_std = 0.1;
  double init_velocity_std = 0.05;

  void validate() const;
};

/// Body-frame specific force R^T (v_dot - g) and body rates, plus seeded Gaussian noise.
ImuReading simulate_imu(const RobotStated& x, const StateDerivative<double>& d, const ControlInputd& u,
                        const VehicleParams& params, const ImuNoise& noise, Rng* rng);

/// Integrate the IMU through each particle with independent noise draws, then jitter position.
void motion_update(std::vector<Particle>& particles, const ImuReading& imu, double dt, const FilterConfig& cfg,
                   const VehicleParams& params, Rng& rng);

struct SensorReport {
  bool applied = false;   // false when there were no detections
  bool diverged = false;  // weights underflowed and were reset to uniform
};

/// Squared reprojection error sum [px^2] of a pose against a detection list, including the
/// missing-detection penalty for gates expected in view but not detected.
double reprojection_error(const RobotStated& x, const std::vector<Detection>& detections, const GateCourse& course,
                          const CameraModel& cam, const FilterConfig& cfg);

SensorReport sensor_update(std::vector<Particle>& particles, const std::vector<Detection>& detections,
                           const GateCourse& course, const CameraModel& cam, const FilterConfig& cfg);

double effective_sample_size(const std::vector<Particle>& particles);

/// Low-variance systematic resampling; output weights are uniform.
void systematic_resample(std::vector<Particle>& particles, Rng& rng);

/// Resample only when ESS < threshold * N. Returns whether it happened.
bool resample(std::vector<Particle>& particles, Rng& rng, double threshold);

struct StateEstimate {
  RobotStated mean;
  Mat3<double> position_covariance = Mat3<double>::Zero();
};

StateEstimate estimate(const std::vector<Particle>& particles);

class ParticleFilter {
 public:
  ParticleFilter(const RobotStated& start, const FilterConfig& cfg, const VehicleParams& params, std::uint64_t seed);

  void predict(const ImuReading& imu, double dt);
  SensorReport correct(const std::vector<Detection>& detections, const GateCourse& course, const CameraModel& cam);
  StateEstimate current() const { return estimate(particles_); }
  const std::vector<Particle>& particles() const { return particles_; }

 private:
  FilterConfig cfg_;
  VehicleParams params_;
  Rng rng_;
  std::vector<Particle> particles_;
};

}  // namespace pixelmpc
