#include "pixelmpc/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace pixelmpc {

double time_below(const RunLog& log, double threshold) {
  std::vector<bool> seen;
  double total = 0.0;
  for (const TickRecord& r : log.ticks) {
    const std::size_t g = static_cast<std::size_t>(std::max(r.active_gate, 0));
    if (seen.size() <= g) seen.resize(g + 1, false);
    if (r.target) seen[g] = true;
    if (seen[g] && r.visibility <= threshold) total += log.dt;
  }
  return total;
}

VisibilityTimes visibility_metrics(const RunLog& log) {
  if (log.ticks.empty()) throw InvalidArgument("visibility metrics need a non-empty log");
  return {time_below(log, 0.5), time_below(log, 0.0)};
}

namespace {

double wrap_pi(double a) { return std::remainder(a, 2.0 * M_PI); }

}  // namespace

Vec3<double> total_variation(const std::vector<Quat<double>>& attitudes) {
  Vec3<double> tv = Vec3<double>::Zero();
  if (attitudes.empty()) return tv;
  Vec3<double> prev = euler_zyx(attitudes.front());
  for (std::size_t i = 1; i < attitudes.size(); ++i) {
    const Vec3<double> cur = euler_zyx(attitudes[i]);
    for (int a = 0; a < 3; ++a) tv(a) += std::abs(wrap_pi(cur(a) - prev(a)));
    prev = cur;
  }
  return tv;
}

Vec3<double> total_variation(const RunLog& log) {
  if (log.ticks.empty()) throw InvalidArgument("total variation needs a non-empty log");
  std::vector<Quat<double>> q;
  q.reserve(log.ticks.size());
  for (const TickRecord& r : log.ticks) q.push_back(r.x.q);
  return total_variation(q);
}

double max_covariance_trace(const RunLog& log) {
  double m = 0.0;
  for (const TickRecord& r : log.ticks) m = std::max(m, r.cov_trace);
  return m;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.n = values.size();
  if (s.n == 0) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / double(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.two_sigma = 2.0 * std::sqrt(ss / double(s.n - 1));
  }
  return s;
}

LapMetrics lap_metrics(const RunLog& log) {
  LapMetrics m;
  m.seed = log.seed;
  m.outcome = log.outcome;
  m.lap_time = log.lap_time;
  m.visibility = visibility_metrics(log);
  m.tv = total_variation(log);
  m.max_cov_trace = max_covariance_trace(log);
  m.estimator_diverged = log.estimator_diverged;
  return m;
}

std::vector<HorizonError> horizon_errors(const DofModel& model, const std::vector<RunLog>& logs,
                                         const GateCourse& course, const CameraModel& cam,
                                         const std::vector<int>& horizons, int segments, std::uint64_t seed) {
  if (horizons.empty() || segments < 1) throw InvalidArgument("horizon errors need horizons and segments");
  const int longest = *std::max_element(horizons.begin(), horizons.end());
  if (longest < 1) throw InvalidArgument("horizons must be positive");

  std::vector<std::pair<std::size_t, std::size_t>> starts;
  for (std::size_t li = 0; li < logs.size(); ++li) {
    const std::size_t n = logs[li].ticks.size();
    for (std::size_t k = 0; k + std::size_t(longest) < n; ++k) starts.emplace_back(li, k);
  }
  if (starts.empty()) throw InvalidArgument("logs too short for the requested horizon");

  std::vector<Vec3<double>> points;
  for (const Gate& g : course.gates) {
    points.push_back(g.center);
    for (const auto& c : g.corners) points.push_back(c);
  }
  points.insert(points.end(), course.background_points.begin(), course.background_points.end());

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_start(0, starts.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_point(0, points.size() - 1);
  std::vector<double> sums(horizons.size(), 0.0);
  std::size_t found = 0;
  const std::size_t max_attempts = std::size_t(segments) * 2000;
  for (std::size_t attempt = 0; found < std::size_t(segments) && attempt < max_attempts; ++attempt) {
    const auto [li, k0] = starts[pick_start(rng)];
    const Vec3<double>& p = points[pick_point(rng)];
    const auto& ticks = logs[li].ticks;
    std::vector<PixelStated> truth;
    truth.reserve(std::size_t(longest) + 1);
    bool ok = true;
    for (int h = 0; h <= longest && ok; ++h) {
      const RobotStated& x = ticks[k0 + std::size_t(h)].x;
      const auto px = project_camera_point(to_camera(camera_pose(x, cam), p), cam);
      if (!px || (h == 0 && !px->in_frame())) ok = false;
      else truth.push_back(*px);
    }
    if (!ok) continue;
    std::vector<Quat<double>> q;
    std::vector<ControlInputd> u;
    for (int h = 0; h < longest; ++h) {
      q.push_back(ticks[k0 + std::size_t(h)].x.q);
      u.push_back(ticks[k0 + std::size_t(h)].u);
    }
    const std::vector<PixelStated> pred = rollout_pixel(model, q, u, truth.front(), logs[li].dt, longest);
    for (std::size_t i = 0; i < horizons.size(); ++i) {
      const std::size_t h = std::size_t(horizons[i]);
      sums[i] += std::abs(pred[h].u - truth[h].u) + std::abs(pred[h].v - truth[h].v);
    }
    ++found;
  }
  std::vector<HorizonError> out;
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    out.push_back({horizons[i], found, found ? sums[i] / double(found) : 0.0});
  }
  return out;
}

std::vector<GroupReport> group_reports(const std::vector<RunLog>& logs) {
  std::map<GroupKey, GroupReport> groups;
  for (const RunLog& log : logs) {
    const GroupKey key{log.mode, log.state_source, log.desired_speed, log.t_f, log.c_pixel};
    GroupReport& g = groups[key];
    g.key = key;
    g.laps.push_back(lap_metrics(log));
  }
  std::vector<GroupReport> out;
  for (auto& [key, g] : groups) {
    std::vector<double> half, zero, lap, cov, r, p, y, tot;
    for (const LapMetrics& m : g.laps) {
      half.push_back(m.visibility.below_half);
      zero.push_back(m.visibility.zero);
      cov.push_back(m.max_cov_trace);
      r.push_back(m.tv(0));
      p.push_back(m.tv(1));
      y.push_back(m.tv(2));
      tot.push_back(m.tv.sum());
      if (m.outcome == Outcome::Success) {
        lap.push_back(m.lap_time);
        ++g.successes;
      }
    }
    g.below_half = summarize(half);
    g.zero = summarize(zero);
    g.lap_time = summarize(lap);
    g.max_cov_trace = summarize(cov);
    g.tv_roll = summarize(r);
    g.tv_pitch = summarize(p);
    g.tv_yaw = summarize(y);
    g.tv_total = summarize(tot);
    out.push_back(std::move(g));
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string key_cols(const GroupKey& k) {
  return k.mode + "," + k.state_source + "," + fmt(k.desired_speed) + "," + fmt(k.t_f) + "," + fmt(k.c_pixel);
}

std::string summary_cols(const Summary& s) { return fmt(s.mean) + "," + fmt(s.two_sigma); }

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

void write_evaluation(const std::vector<GroupReport>& reports, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string key = "mode,state_source,desired_speed,t_f,c_pixel";
  std::string t2 = key + ",laps,below_half_mean,below_half_2sigma,zero_mean,zero_2sigma\n";
  std::string t3 = key + ",laps,successes,lap_time_mean,lap_time_2sigma\n";
  std::string t4 = key + ",laps,successes,max_cov_trace_mean,max_cov_trace_2sigma\n";
  std::string tv = key + ",seed,roll,pitch,yaw,total\n";
  std::string laps = key + ",seed,outcome,lap_time,below_half,zero,tv_roll,tv_pitch,tv_yaw,max_cov_trace,estimator_diverged\n";
  for (const GroupReport& g : reports) {
    const std::string k = key_cols(g.key);
    const std::string n = std::to_string(g.laps.size());
    t2 += k + "," + n + "," + summary_cols(g.below_half) + "," + summary_cols(g.zero) + "\n";
    t3 += k + "," + n + "," + std::to_string(g.successes) + "," + summary_cols(g.lap_time) + "\n";
    t4 += k + "," + n + "," + std::to_string(g.successes) + "," + summary_cols(g.max_cov_trace) + "\n";
    for (const LapMetrics& m : g.laps) {
      tv += k + "," + std::to_string(m.seed) + "," + fmt(m.tv(0)) + "," + fmt(m.tv(1)) + "," + fmt(m.tv(2)) + "," +
            fmt(m.tv.sum()) + "\n";
      laps += k + "," + std::to_string(m.seed) + "," + std::string(to_string(m.outcome)) + "," + fmt(m.lap_time) + "," +
              fmt(m.visibility.below_half) + "," + fmt(m.visibility.zero) + "," + fmt(m.tv(0)) + "," + fmt(m.tv(1)) + "," +
              fmt(m.tv(2)) + "," + fmt(m.max_cov_trace) + "," + (m.estimator_diverged ? "1" : "0") + "\n";
    }
  }
  write_file(dir / "table2.csv", t2);
  write_file(dir / "table3.csv", t3);
  write_file(dir / "table4.csv", t4);
  write_file(dir / "tv.csv", tv);
  write_file(dir / "laps.csv", laps);
}

}  // namespace pixelmpc
