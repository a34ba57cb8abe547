#include "pixelmpc/estimation.hpp"

#include <limits>

namespace pixelmpc {

void FilterConfig::validate() const {
  if (particles < 1) throw InvalidArgument("filter needs at least one particle");
  if (position_noise < 0.0 || accel_noise < 0.0 || rate_noise < 0.0 || init_position_std < 0.0 ||
      init_velocity_std < 0.0) {
    throw InvalidArgument("filter noise levels must be >= 0");
  }
  if (!(measurement_std > 0.0)) throw InvalidArgument("measurement std must be positive");
  if (missing_penalty < 0.0) throw InvalidArgument("missing-detection penalty must be >= 0");
}

ImuReading simulate_imu(const RobotStated& x, const StateDerivative<double>& d, const ControlInputd& u,
                        const VehicleParams& params, const ImuNoise& noise, Rng* rng) {
  ImuReading r;
  r.accel = rotation_matrix(x.q).transpose() * (d.v_dot - params.gravity);
  r.rates = u.omega;
  if (rng != nullptr) {
    std::normal_distribution<double> n01(0.0, 1.0);
    for (int i = 0; i < 3; ++i) r.accel(i) += noise.accel_std * n01(*rng);
    for (int i = 0; i < 3; ++i) r.rates(i) += noise.rate_std * n01(*rng);
  }
  return r;
}

void motion_update(std::vector<Particle>& particles, const ImuReading& imu, double dt, const FilterConfig& cfg,
                   const VehicleParams& params, Rng& rng) {
  if (!(dt > 0.0)) throw InvalidArgument("motion_update: dt must be positive");
  std::normal_distribution<double> n01(0.0, 1.0);
  for (Particle& pt : particles) {
    Vec3<double> a = imu.accel, w = imu.rates;
    for (int i = 0; i < 3; ++i) a(i) += cfg.accel_noise * n01(rng);
    for (int i = 0; i < 3; ++i) w(i) += cfg.rate_noise * n01(rng);
    RobotStated& x = pt.x;
    const Vec3<double> v_dot = rotation_matrix_unchecked(x.q) * a + params.gravity;
    const Quat<double> q_dot = quat_derivative_unchecked(x.q, w);
    x.p += x.v * dt;
    x.v += v_dot * dt;
    x.q = (x.q + q_dot * dt).normalized();
    for (int i = 0; i < 3; ++i) x.p(i) += cfg.position_noise * n01(rng);
  }
}

double reprojection_error(const RobotStated& x, const std::vector<Detection>& detections, const GateCourse& course,
                          const CameraModel& cam, const FilterConfig& cfg) {
  const CameraPose<double> pose = camera_pose(x, cam);
  const double penalty = cfg.missing_penalty * cam.width;
  const double w = cam.width, h = cam.height;
  double err = 0.0;
  std::vector<char> seen(course.gates.size(), 0);
  for (const Detection& det : detections) {
    if (det.gate_id < 0 || std::size_t(det.gate_id) >= course.gates.size()) {
      throw InvalidArgument("detection refers to an unknown gate");
    }
    seen[std::size_t(det.gate_id)] = 1;
    const Gate& g = course.gates[std::size_t(det.gate_id)];
    for (std::size_t c = 0; c < 4; ++c) {
      const auto px = project_camera_point(to_camera(pose, g.corners[c]), cam);
      if (!px) {
        err += penalty * penalty;
        continue;
      }
      const double du = w * (px->u - det.corners[c].u), dv = h * (px->v - det.corners[c].v);
      err += du * du + dv * dv;
    }
  }
  for (std::size_t i = 0; i < course.gates.size(); ++i) {
    if (seen[i]) continue;
    const Gate& g = course.gates[i];
    if (!(g.normal.dot(pose.origin - g.center) > 0.0)) continue;
    const auto px = project_camera_point(to_camera(pose, g.center), cam);
    if (px && px->in_frame()) err += penalty * penalty;
  }
  return err;
}

SensorReport sensor_update(std::vector<Particle>& particles, const std::vector<Detection>& detections,
                           const GateCourse& course, const CameraModel& cam, const FilterConfig& cfg) {
  SensorReport rep;
  if (detections.empty() || particles.empty()) return rep;
  rep.applied = true;
  const double inv = 1.0 / (2.0 * cfg.measurement_std * cfg.measurement_std);
  std::vector<double> logw(particles.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < particles.size(); ++i) {
    const double e = reprojection_error(particles[i].x, detections, course, cam, cfg);
    logw[i] = std::log(particles[i].weight) - e * inv;
    best = std::max(best, logw[i]);
  }
  double total = 0.0;
  if (std::isfinite(best)) {
    for (std::size_t i = 0; i < particles.size(); ++i) {
      particles[i].weight = std::exp(logw[i] - best);
      total += particles[i].weight;
    }
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    rep.diverged = true;
    for (Particle& p : particles) p.weight = 1.0 / double(particles.size());
    return rep;
  }
  for (Particle& p : particles) p.weight /= total;
  return rep;
}

double effective_sample_size(const std::vector<Particle>& particles) {
  double sq = 0.0;
  for (const Particle& p : particles) sq += p.weight * p.weight;
  return sq > 0.0 ? 1.0 / sq : 0.0;
}

void systematic_resample(std::vector<Particle>& particles, Rng& rng) {
  const std::size_t n = particles.size();
  if (n == 0) return;
  std::vector<Particle> out;
  out.reserve(n);
  const double step = 1.0 / double(n);
  double u = unit_uniform(rng) * step;
  double cumulative = particles[0].weight;
  std::size_t i = 0;
  for (std::size_t k = 0; k < n; ++k) {
    while (u > cumulative && i + 1 < n) cumulative += particles[++i].weight;
    out.push_back(Particle{particles[i].x, step});
    u += step;
  }
  particles = std::move(out);
}

bool resample(std::vector<Particle>& particles, Rng& rng, double threshold) {
  if (particles.empty()) return false;
  if (!(effective_sample_size(particles) < threshold * double(particles.size()))) return false;
  systematic_resample(particles, rng);
  return true;
}

StateEstimate estimate(const std::vector<Particle>& particles) {
  if (particles.empty()) throw InvalidArgument("estimate: no particles");
  std::size_t best = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < particles.size(); ++i) {
    if (particles[i].weight > particles[best].weight) best = i;
    total += particles[i].weight;
  }
  if (!(total > 0.0)) throw InvalidArgument("estimate: weights sum to zero");
  const Quat<double> ref = particles[best].x.q;
  StateEstimate est;
  est.mean.p.setZero();
  est.mean.v.setZero();
  Quat<double> q = Quat<double>::Zero();
  for (const Particle& pt : particles) {
    const double w = pt.weight / total;
    est.mean.p += w * pt.x.p;
    est.mean.v += w * pt.x.v;
    q += (pt.x.q.dot(ref) >= 0.0 ? w : -w) * pt.x.q;
  }
  est.mean.q = q.norm() > 0.0 ? Quat<double>(q.normalized()) : ref;
  for (const Particle& pt : particles) {
    const Vec3<double> d = pt.x.p - est.mean.p;
    est.position_covariance += (pt.weight / total) * d * d.transpose();
  }
  return est;
}

ParticleFilter::ParticleFilter(const RobotStated& start, const FilterConfig& cfg, const VehicleParams& params,
                               std::uint64_t seed)
    : cfg_(cfg), params_(params), rng_(seed) {
  cfg_.validate();
  std::normal_distribution<double> n01(0.0, 1.0);
  particles_.resize(std::size_t(cfg_.particles));
  for (Particle& p : particles_) {
    p.x = start;
    for (int i = 0; i < 3; ++i) p.x.p(i) += cfg_.init_position_std * n01(rng_);
    for (int i = 0; i < 3; ++i) p.x.v(i) += cfg_.init_velocity_std * n01(rng_);
    p.weight = 1.0 / double(cfg_.particles);
  }
}

void ParticleFilter::predict(const ImuReading& imu, double dt) { motion_update(particles_, imu, dt, cfg_, params_, rng_); }

SensorReport ParticleFilter::correct(const std::vector<Detection>& detections, const GateCourse& course,
                                     const CameraModel& cam) {
  SensorReport rep = sensor_update(particles_, detections, course, cam, cfg_);
  if (rep.applied) resample(particles_, rng_, cfg_.resample_threshold);
  return rep;
}

}  // namespace pixelmpc
