#include "pixelmpc/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace pixelmpc {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigurationError("bad number '" + std::string(s) + "'");
  return v;
}

template <typename T>
std::string show(T v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
std::vector<T> parse_list(std::string_view s) {
  std::vector<T> out;
  for (std::string_view w : split_ws(s)) out.push_back(parse_number<T>(w));
  if (out.empty()) throw ConfigurationError("empty list");
  return out;
}

template <typename T>
std::string show_list(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + show(v[i]);
  return out;
}

double deg(double rad) { return rad * 180.0 / M_PI; }
double rad(double deg) { return deg * M_PI / 180.0; }

double camera_pitch_up(const CameraModel& cam) {
  const Vec3<double> axis = cam.body_to_camera.col(2);
  return std::atan2(axis.z(), axis.x());
}

struct Binding {
  std::function<void(std::string_view)> set;
  std::function<std::string()> get;
};

using Table = std::vector<std::pair<std::string, Binding>>;

template <typename T>
Binding number(T& field) {
  return {[&field](std::string_view s) { field = parse_number<T>(s); }, [&field] { return show(field); }};
}

Binding path(std::filesystem::path& field, const std::filesystem::path* base) {
  return {[&field, base](std::string_view s) {
            std::filesystem::path p{std::string(s)};
            field = (base != nullptr && !base->empty() && p.is_relative()) ? *base / p : p;
          },
          [&field] { return field.string(); }};
}

Table make_table(AppConfig& c, const std::filesystem::path* base) {
  ExperimentConfig& e = c.experiment;
  RacingConfig& r = e.racing;
  Table t;
  t.push_back({"run.mode",
               {[&r](std::string_view s) {
                  if (s == "nominal") r.mode = ControllerMode::Nominal;
                  else if (s == "pixelmpc") r.mode = ControllerMode::PixelMpc;
                  else throw ConfigurationError("run.mode must be nominal or pixelmpc");
                },
                [&r] { return std::string(to_string(r.mode)); }}});
  t.push_back({"run.state_source",
               {[&r](std::string_view s) {
                  if (s == "truth") r.source = StateSource::Truth;
                  else if (s == "particle-filter") r.source = StateSource::ParticleFilter;
                  else throw ConfigurationError("run.state_source must be truth or particle-filter");
                },
                [&r] { return std::string(to_string(r.source)); }}});
  t.push_back({"run.laps", number(e.laps)});
  t.push_back({"run.seed", number(e.seed)});
  t.push_back({"run.course",
               {[&e, base](std::string_view s) {
                  std::string v(s);
                  if (v != "desk7" && v != "straight" && base != nullptr && !base->empty() &&
                      std::filesystem::path(v).is_relative()) {
                    v = (*base / v).string();
                  }
                  e.course = v;
                },
                [&e] { return e.course; }}});
  t.push_back({"run.weights", path(e.weights, base)});
  t.push_back({"run.timeout", number(r.timeout)});
  t.push_back({"run.detector_noise", number(r.detector_noise)});
  t.push_back({"run.divergence_trace", number(r.divergence_trace)});

  VehicleParams& v = r.vehicle;
  t.push_back({"vehicle.mass", number(v.mass)});
  t.push_back({"vehicle.gravity",
               {[&v](std::string_view s) { v.gravity = Vec3<double>(0.0, 0.0, -parse_number<double>(s)); },
                [&v] { return show(-v.gravity.z()); }}});
  t.push_back({"vehicle.drag", number(v.drag)});
  t.push_back({"vehicle.rate_limit", number(v.rate_limit)});
  t.push_back({"vehicle.force_noise_std",
               {[&v](std::string_view s) {
                  const auto l = parse_list<double>(s);
                  if (l.size() == 1) v.force_noise_std.setConstant(l[0]);
                  else if (l.size() == 3) v.force_noise_std = Vec3<double>(l[0], l[1], l[2]);
                  else throw ConfigurationError("vehicle.force_noise_std takes 1 or 3 values");
                },
                [&v] { return show_list(std::vector<double>{v.force_noise_std.x(), v.force_noise_std.y(), v.force_noise_std.z()}); }}});

  CameraModel& cam = r.camera;
  auto rebuild = [&cam](double hfov, int w, int h, double pitch) { cam = CameraModel::forward_looking(hfov, w, h, pitch); };
  t.push_back({"camera.hfov_deg",
               {[&cam, rebuild](std::string_view s) { rebuild(rad(parse_number<double>(s)), cam.width, cam.height, camera_pitch_up(cam)); },
                [&cam] { return show(deg(cam.hfov)); }}});
  t.push_back({"camera.width",
               {[&cam, rebuild](std::string_view s) { rebuild(cam.hfov, parse_number<int>(s), cam.height, camera_pitch_up(cam)); },
                [&cam] { return show(cam.width); }}});
  t.push_back({"camera.height",
               {[&cam, rebuild](std::string_view s) { rebuild(cam.hfov, cam.width, parse_number<int>(s), camera_pitch_up(cam)); },
                [&cam] { return show(cam.height); }}});
  t.push_back({"camera.pitch_up_deg",
               {[&cam, rebuild](std::string_view s) { rebuild(cam.hfov, cam.width, cam.height, rad(parse_number<double>(s))); },
                [&cam] { return show(deg(camera_pitch_up(cam))); }}});

  CostParams& k = r.cost;
  t.push_back({"cost.c1", number(k.c1)});
  t.push_back({"cost.c2", number(k.c2)});
  t.push_back({"cost.c3", number(k.c3)});
  t.push_back({"cost.c_pixel", number(k.c_pixel)});
  t.push_back({"cost.t_f", number(k.t_f_pixel)});
  t.push_back({"cost.crash_value", number(k.crash_value)});
  t.push_back({"cost.desired_speed", number(k.desired_speed)});

  MppiConfig& m = r.mppi;
  t.push_back({"mppi.horizon", number(m.horizon)});
  t.push_back({"mppi.samples", number(m.samples)});
  t.push_back({"mppi.iterations", number(m.iterations)});
  t.push_back({"mppi.dt", number(m.dt)});
  t.push_back({"mppi.lambda", number(m.lambda)});
  t.push_back({"mppi.threads", number(m.threads)});
  t.push_back({"mppi.sigma",
               {[&m](std::string_view s) {
                  const auto l = parse_list<double>(s);
                  if (l.size() != 4) throw ConfigurationError("mppi.sigma takes 4 values: roll pitch yaw thrust");
                  m.sigma = Vec4<double>(l[0], l[1], l[2], l[3]);
                },
                [&m] { return show_list(std::vector<double>{m.sigma(0), m.sigma(1), m.sigma(2), m.sigma(3)}); }}});

  FilterConfig& f = r.filter;
  t.push_back({"filter.particles", number(f.particles)});
  t.push_back({"filter.position_noise", number(f.position_noise)});
  t.push_back({"filter.accel_noise", number(f.accel_noise)});
  t.push_back({"filter.rate_noise", number(f.rate_noise)});
  t.push_back({"filter.missing_penalty", number(f.missing_penalty)});
  t.push_back({"filter.measurement_std", number(f.measurement_std)});
  t.push_back({"filter.resample_threshold", number(f.resample_threshold)});
  t.push_back({"filter.init_position_std", number(f.init_position_std)});
  t.push_back({"filter.init_velocity_std", number(f.init_velocity_std)});
  t.push_back({"imu.accel_std", number(r.imu.accel_std)});
  t.push_back({"imu.rate_std", number(r.imu.rate_std)});

  t.push_back({"collect.laps", number(c.collect.laps)});
  t.push_back({"collect.speed_min", number(c.collect.speed_min)});
  t.push_back({"collect.speed_max", number(c.collect.speed_max)});
  t.push_back({"collect.pixels_per_frame", number(c.collect.pixels_per_frame)});
  t.push_back({"collect.min_depth", number(c.collect.min_depth)});

  t.push_back({"train.dataset", path(c.dataset, base)});
  t.push_back({"train.epochs", number(c.train.epochs)});
  t.push_back({"train.batch_size", number(c.train.batch_size)});
  t.push_back({"train.learning_rate", number(c.train.learning_rate)});
  t.push_back({"train.seed", number(c.train.seed)});
  t.push_back({"train.target_mode",
               {[&c](std::string_view s) {
                  if (s == "polar") c.train.target_mode = TargetMode::Polar;
                  else if (s == "cartesian") c.train.target_mode = TargetMode::Cartesian;
                  else throw ConfigurationError("train.target_mode must be polar or cartesian");
                },
                [&c] { return std::string(c.train.target_mode == TargetMode::Polar ? "polar" : "cartesian"); }}});
  t.push_back({"train.dropout",
               {[&c](std::string_view s) { c.network.dropout = float(parse_number<double>(s)); },
                [&c] { return show(double(c.network.dropout)); }}});
  t.push_back({"train.hidden",
               {[&c](std::string_view s) {
                  std::vector<int> w{kDofInputWidth};
                  for (int h : parse_list<int>(s)) w.push_back(h);
                  w.push_back(2);
                  c.network.widths = w;
                  c.network.activations.clear();
                },
                [&c] {
                  return show_list(std::vector<int>(c.network.widths.begin() + 1, c.network.widths.end() - 1));
                }}});

  t.push_back({"bench.batches", {[&c](std::string_view s) { c.bench.batches = parse_list<int>(s); },
                                 [&c] { return show_list(c.bench.batches); }}});
  t.push_back({"bench.horizons", {[&c](std::string_view s) { c.bench.horizons = parse_list<int>(s); },
                                  [&c] { return show_list(c.bench.horizons); }}});
  t.push_back({"bench.repetitions", number(c.bench.repetitions)});
  t.push_back({"bench.budget_ms", number(c.bench.budget_ms)});
  return t;
}

}  // namespace

AppConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  AppConfig cfg;
  Table table = make_table(cfg, &base_dir);
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(line_no);
    if (eq == std::string_view::npos) throw ConfigurationError(where + ": expected 'section.key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    auto it = std::find_if(table.begin(), table.end(), [&](const auto& kv) { return kv.first == key; });
    if (it == table.end()) throw ConfigurationError(where + ": unknown key '" + key + "'");
    if (value.empty()) throw ConfigurationError(where + ": missing value for '" + key + "'");
    try {
      it->second.set(value);
    } catch (const ConfigurationError& e) {
      throw ConfigurationError(where + ": " + key + ": " + e.what());
    } catch (const InvalidArgument& e) {
      throw ConfigurationError(where + ": " + key + ": " + e.what());
    }
  }
  return cfg;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string format_config(const AppConfig& cfg) {
  AppConfig copy = cfg;
  std::string out;
  for (const auto& [key, b] : make_table(copy, nullptr)) {
    const std::string v = b.get();
    if (!v.empty()) out += key + " = " + v + "\n";
  }
  return out;
}

GateCourse resolve_course(const std::string& name_or_path) {
  if (name_or_path == "desk7") return desk_course();
  if (name_or_path == "straight") return straight_course();
  return load_course(name_or_path);
}

}  // namespace pixelmpc
