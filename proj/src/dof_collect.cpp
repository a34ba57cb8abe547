#include "pixelmpc/collect.hpp"

#include <cmath>

namespace pixelmpc {

std::vector<double> collect_speeds(const CollectConfig& cfg) {
  std::vector<double> out;
  for (int i = 0; i < cfg.laps; ++i) {
    const double s = cfg.laps > 1 ? double(i) / double(cfg.laps - 1) : 0.5;
    out.push_back(cfg.speed_min + s * (cfg.speed_max - cfg.speed_min));
  }
  return out;
}

std::vector<int> holdout_laps(int laps) {
  if (laps < 3) return {};
  const int a = static_cast<int>(std::lround(laps / 3.0));
  int b = static_cast<int>(std::lround(2.0 * laps / 3.0));
  if (b == a) ++b;
  return {a, std::min(b, laps - 1)};
}

namespace {

bool usable(const CameraPose<double>& pose, const CameraModel& cam, const Vec3<double>& p, double min_depth) {
  const Vec3<double> pc = to_camera(pose, p);
  if (!(pc.z() >= min_depth)) return false;
  const auto px = project_camera_point(pc, cam);
  return px && px->in_frame();
}

}  // namespace

std::vector<Vec3<double>> sample_frame_points(const RobotStated& x, const CameraModel& cam, const GateCourse& course,
                                              const CollectConfig& cfg, Rng& rng) {
  const std::size_t want = static_cast<std::size_t>(std::max(cfg.pixels_per_frame, 0));
  std::vector<Vec3<double>> pts;
  const CameraPose<double> pose = camera_pose(x, cam);
  for (const Gate& g : course.gates) {
    if (pts.size() < want && usable(pose, cam, g.center, cfg.min_depth)) pts.push_back(g.center);
    for (const auto& c : g.corners) {
      if (pts.size() < want && usable(pose, cam, c, cfg.min_depth)) pts.push_back(c);
    }
  }
  const auto& bg = course.background_points;
  if (bg.empty()) return pts;
  std::uniform_int_distribution<std::size_t> pick(0, bg.size() - 1);
  const std::size_t max_attempts = 50 * want;
  for (std::size_t attempt = 0; pts.size() < want && attempt < max_attempts; ++attempt) {
    const Vec3<double>& p = bg[pick(rng)];
    if (usable(pose, cam, p, cfg.min_depth)) pts.push_back(p);
  }
  return pts;
}

DofDataset collect_dataset(const GateCourse& course, const RacingConfig& racing, const CollectConfig& cfg,
                           std::uint64_t seed, std::vector<RunLog>* logs) {
  DofDataset ds;
  ds.meta.seed = seed;
  ds.meta.course = course.name;
  ds.meta.speed_min = cfg.speed_min;
  ds.meta.speed_max = cfg.speed_max;
  if (cfg.laps <= 0) {
    ds.partial = true;
    ds.warning = "no laps requested";
    return ds;
  }
  if (cfg.pixels_per_frame < 1) throw InvalidArgument("collect: pixels per frame must be >= 1");

  RacingConfig rc = racing;
  rc.mode = ControllerMode::Nominal;
  const DofModel encoder = DofModel::zero(rc.vehicle);
  const std::vector<double> speeds = collect_speeds(cfg);
  for (int lap = 0; lap < cfg.laps; ++lap) {
    const std::uint64_t s = lap_seed(seed, std::uint64_t(lap));
    rc.cost.desired_speed = speeds[std::size_t(lap)];
    Rng sampler = make_rng(s, Stream::PixelSampler);
    const std::size_t before = ds.samples.size();
    auto record = [&](int, const RobotStated& x, const ControlInputd& u) {
      const CameraPose<double> pose = camera_pose(x, rc.camera);
      for (const Vec3<double>& p : sample_frame_points(x, rc.camera, course, cfg, sampler)) {
        const auto px = project_camera_point(to_camera(pose, p), rc.camera);
        const FlowVectord f = flow_oracle(x, u, p, rc.camera);
        DofSample sample;
        sample.input = encoder.encode(x.q, *px, u);
        sample.target = {float(f.l), float(f.theta)};
        ds.samples.push_back(sample);
      }
    };
    RunLog log = pixelmpc_loop(course, nullptr, rc, s, record);
    ds.meta.lap_records.push_back(static_cast<std::uint32_t>(ds.samples.size() - before));
    const Outcome outcome = log.outcome;
    if (logs != nullptr) logs->push_back(std::move(log));
    if (outcome != Outcome::Success) {
      ds.partial = true;
      ds.warning = "lap " + std::to_string(lap) + " ended with " + std::string(to_string(outcome));
      break;
    }
  }
  return ds;
}

}  // namespace pixelmpc
