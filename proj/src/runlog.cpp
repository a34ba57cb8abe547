#include "pixelmpc/runlog.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace pixelmpc {

namespace {

constexpr const char* kColumns =
    "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,thrust,target_u,target_v,visibility,active_gate,cost_robot,"
    "cost_pixel,cov_trace";

// Shortest representation that round-trips exactly.
void put(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

double parse_double(std::string_view s, int line) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw CorruptFile("run log line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Success: return "success";
    case Outcome::Crash: return "crash";
    case Outcome::Timeout: return "timeout";
  }
  return "timeout";
}

Outcome outcome_from_string(std::string_view s) {
  if (s == "success") return Outcome::Success;
  if (s == "crash") return Outcome::Crash;
  if (s == "timeout") return Outcome::Timeout;
  throw CorruptFile("unknown outcome '" + std::string(s) + "'");
}

std::string format_runlog(const RunLog& log) {
  std::string out;
  out.reserve(256 + log.ticks.size() * 256);
  auto header = [&](const char* key, const std::string& value) {
    out += "# ";
    out += key;
    out += '=';
    out += value;
    out += '\n';
  };
  auto num = [](double v) {
    std::string s;
    put(s, v);
    return s;
  };
  header("format", "pixelmpc-runlog 1");
  header("mode", log.mode);
  header("state_source", log.state_source);
  header("seed", std::to_string(log.seed));
  header("desired_speed", num(log.desired_speed));
  header("c_pixel", num(log.c_pixel));
  header("t_f", num(log.t_f));
  header("dt", num(log.dt));
  header("outcome", std::string(to_string(log.outcome)));
  header("lap_time", num(log.lap_time));
  header("estimator_diverged", log.estimator_diverged ? "1" : "0");
  out += kColumns;
  out += '\n';
  for (const TickRecord& r : log.ticks) {
    const double row[] = {r.t,           r.x.p.x(),   r.x.p.y(),   r.x.p.z(),   r.x.q(0),    r.x.q(1),
                          r.x.q(2),      r.x.q(3),    r.x.v.x(),   r.x.v.y(),   r.x.v.z(),   r.u.omega.x(),
                          r.u.omega.y(), r.u.omega.z(), r.u.thrust};
    for (double v : row) {
      put(out, v);
      out += ',';
    }
    if (r.target) {
      put(out, r.target->u);
      out += ',';
      put(out, r.target->v);
      out += ',';
    } else {
      out += ",,";
    }
    put(out, r.visibility);
    out += ',';
    out += std::to_string(r.active_gate);
    out += ',';
    put(out, r.cost_robot);
    out += ',';
    put(out, r.cost_pixel);
    out += ',';
    put(out, r.cov_trace);
    out += '\n';
  }
  return out;
}

void write_runlog(const RunLog& log, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write run log " + path.string());
  f << format_runlog(log);
  if (!f) throw IoError("failed writing run log " + path.string());
}

RunLog parse_runlog(const std::string& text) {
  RunLog log;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool columns = false, format = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw CorruptFile("run log line " + std::to_string(line_no) + ": bad header");
      const std::string key = line.substr(2, eq - 2), value = line.substr(eq + 1);
      if (key == "format") {
        if (value != "pixelmpc-runlog 1") throw CorruptFile("unsupported run log format '" + value + "'");
        format = true;
      } else if (key == "mode") {
        log.mode = value;
      } else if (key == "state_source") {
        log.state_source = value;
      } else if (key == "seed") {
        log.seed = std::stoull(value);
      } else if (key == "desired_speed") {
        log.desired_speed = parse_double(value, line_no);
      } else if (key == "c_pixel") {
        log.c_pixel = parse_double(value, line_no);
      } else if (key == "t_f") {
        log.t_f = parse_double(value, line_no);
      } else if (key == "dt") {
        log.dt = parse_double(value, line_no);
      } else if (key == "outcome") {
        log.outcome = outcome_from_string(value);
      } else if (key == "lap_time") {
        log.lap_time = parse_double(value, line_no);
      } else if (key == "estimator_diverged") {
        log.estimator_diverged = value == "1";
      }
      continue;
    }
    if (!columns) {
      if (line != kColumns) throw CorruptFile("run log has an unexpected column header");
      columns = true;
      continue;
    }
    std::vector<std::string_view> f;
    std::string_view rest(line);
    while (true) {
      const auto c = rest.find(',');
      f.push_back(rest.substr(0, c));
      if (c == std::string_view::npos) break;
      rest.remove_prefix(c + 1);
    }
    if (f.size() != 22) throw CorruptFile("run log line " + std::to_string(line_no) + ": expected 22 fields");
    TickRecord r;
    double v[15];
    for (int i = 0; i < 15; ++i) v[i] = parse_double(f[std::size_t(i)], line_no);
    r.t = v[0];
    r.x.p = Vec3<double>(v[1], v[2], v[3]);
    r.x.q = Quat<double>(v[4], v[5], v[6], v[7]);
    r.x.v = Vec3<double>(v[8], v[9], v[10]);
    r.u.omega = Vec3<double>(v[11], v[12], v[13]);
    r.u.thrust = v[14];
    if (!f[15].empty() || !f[16].empty()) {
      r.target = PixelStated{parse_double(f[15], line_no), parse_double(f[16], line_no)};
    }
    r.visibility = parse_double(f[17], line_no);
    r.active_gate = static_cast<int>(parse_double(f[18], line_no));
    r.cost_robot = parse_double(f[19], line_no);
    r.cost_pixel = parse_double(f[20], line_no);
    r.cov_trace = parse_double(f[21], line_no);
    log.ticks.push_back(r);
  }
  if (!format || !columns) throw CorruptFile("not a run log");
  return log;
}

RunLog read_runlog(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open run log " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_runlog(ss.str());
}

}  // namespace pixelmpc
