#include "pixelmpc/racing.hpp"

#include <memory>

namespace pixelmpc {

std::string_view to_string(ControllerMode m) { return m == ControllerMode::Nominal ? "nominal" : "pixelmpc"; }
std::string_view to_string(StateSource s) { return s == StateSource::Truth ? "truth" : "particle-filter"; }

CostParams RacingConfig::effective_cost() const {
  CostParams c = cost;
  if (mode == ControllerMode::Nominal) c.c_pixel = 0.0;
  return c;
}

void RacingConfig::validate() const {
  vehicle.validate();
  camera.validate();
  mppi.validate();
  cost.validate(mppi.horizon, mppi.dt);
  if (source == StateSource::ParticleFilter) filter.validate();
  if (detector_noise < 0.0) throw InvalidArgument("detector noise must be >= 0");
  if (!(timeout > 0.0)) throw InvalidArgument("timeout must be positive");
}

RunLog pixelmpc_loop(const GateCourse& course, const DofModel* model, const RacingConfig& cfg, std::uint64_t seed,
                     const TickObserver& observer) {
  cfg.validate();
  course.validate();
  const CostParams cost = cfg.effective_cost();
  if (cost.c_pixel > 0.0 && model == nullptr) throw ConfigurationError("pixel cost requires a flow model");
  const double dt = cfg.mppi.dt;
  const VehicleParams& vp = cfg.vehicle;
  QuadrotorPlanner planner(course, vp, cost, cfg.mppi, model);

  Rng plan_rng = make_rng(seed, Stream::Planner);
  Rng plant_rng = make_rng(seed, Stream::Plant);
  Rng det_rng = make_rng(seed, Stream::Detector);
  Rng imu_rng = make_rng(seed, Stream::Imu);
  std::unique_ptr<ParticleFilter> filter;
  if (cfg.source == StateSource::ParticleFilter) {
    filter = std::make_unique<ParticleFilter>(course.start, cfg.filter, vp, stream_seed(seed, std::uint64_t(Stream::Filter)));
  }
  const bool plant_noise = (vp.force_noise_std.array() > 0.0).any();

  RunLog log;
  log.mode = std::string(to_string(cfg.mode));
  log.state_source = std::string(to_string(cfg.source));
  log.seed = seed;
  log.desired_speed = cost.desired_speed;
  log.c_pixel = cost.c_pixel;
  log.t_f = cost.t_f_pixel;
  log.dt = dt;
  log.outcome = Outcome::Timeout;

  RobotStated truth = course.start;
  int active = 0;
  const int final_gate = course.final_gate();
  QuadSeq u = hover_sequence(vp, cfg.mppi.horizon);
  const int max_ticks = static_cast<int>(std::ceil(cfg.timeout / dt - 1e-9));
  std::normal_distribution<double> n01(0.0, 1.0);

  for (int k = 0; k < max_ticks; ++k) {
    TickRecord rec;
    rec.t = k * dt;
    rec.x = truth;
    rec.active_gate = active;

    std::vector<Detection> detections;
    std::optional<PixelStated> target;
    for (const Gate& g : course.gates) {
      auto det = detect_gate(truth, cfg.camera, g, cfg.detector_noise, &det_rng);
      if (!det) continue;
      if (g.id == active) target = det->center;
      detections.push_back(*det);
    }
    rec.target = target;
    rec.visibility = visibility_fraction(truth, cfg.camera, course.gates[std::size_t(active)]);

    RobotStated est = truth;
    if (filter) {
      const SensorReport sr = filter->correct(detections, course, cfg.camera);
      if (sr.diverged) log.estimator_diverged = true;
      const StateEstimate e = filter->current();
      est = e.mean;
      rec.cov_trace = e.position_covariance.trace();
      if (rec.cov_trace > cfg.divergence_trace) log.estimator_diverged = true;
    }

    PlanReport rep;
    try {
      u = planner.mppi_step(PlanInput{est, active, target}, u, plan_rng, &rep);
      rec.cost_robot = rep.best_robot_cost;
      rec.cost_pixel = rep.best_pixel_cost;
    } catch (const OptimizerFailure&) {
      // keep the previous sequence
      rec.cost_robot = std::numeric_limits<double>::infinity();
    }
    const ControlInputd u0 = clamp_control(control_at(u, 0), vp);
    rec.u = u0;
    if (observer) observer(k, truth, u0);

    Vec3<double> noise = Vec3<double>::Zero();
    if (plant_noise) {
      for (int i = 0; i < 3; ++i) noise(i) = vp.force_noise_std(i) * n01(plant_rng);
    }
    const StateDerivative<double> d = robot_derivative(truth, u0, vp, noise);
    RobotStated next = euler_update(truth, d, dt);
    if (!next.all_finite()) throw IntegrationFailure("plant state became non-finite");
    log.ticks.push_back(rec);

    const SweepResult sw = sweep(course, truth.p, next.p, active);
    if (sw.crashed) {
      log.outcome = Outcome::Crash;
      break;
    }
    truth = next;
    if (sw.passed_active) {
      ++active;
      if (active > final_gate) {
        log.outcome = Outcome::Success;
        log.lap_time = (k + 1) * dt;
        break;
      }
    }
    if (filter) filter->predict(simulate_imu(rec.x, d, u0, vp, cfg.imu, &imu_rng), dt);
    u = shift_sequence(u, vp);
  }
  return log;
}

}  // namespace pixelmpc
