#include "pixelmpc/course.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace pixelmpc {

void GateCourse::validate() const {
  if (gates.empty()) throw InvalidArgument("course needs at least one gate");
  Vec3<double> prev = start.p;
  for (const Gate& g : gates) {
    if ((g.center - prev).norm() < 1e-6) throw InvalidArgument("consecutive gate centers coincide");
    prev = g.center;
  }
  if (!(corridor_half_width > 0.0)) throw InvalidArgument("corridor half-width must be positive");
  if (!(frame_thickness > 0.0)) throw InvalidArgument("frame thickness must be positive");
}

void GateCourse::regenerate_background() {
  background_points.clear();
  Rng rng(background.seed);
  Vec3<double> lo = start.p, hi = start.p;
  for (const Gate& g : gates) {
    lo = lo.cwiseMin(g.center);
    hi = hi.cwiseMax(g.center);
  }
  const Vec3<double> mid = 0.5 * (lo + hi);
  std::uniform_real_distribution<double> ux(lo.x() - background.ground_margin, hi.x() + background.ground_margin);
  std::uniform_real_distribution<double> uy(lo.y() - background.ground_margin, hi.y() + background.ground_margin);
  for (int i = 0; i < background.ground_points; ++i) background_points.emplace_back(ux(rng), uy(rng), 0.0);
  std::uniform_real_distribution<double> angle(-M_PI, M_PI);
  std::uniform_real_distribution<double> height(0.0, background.shell_height);
  for (int i = 0; i < background.shell_points; ++i) {
    const double a = angle(rng);
    background_points.emplace_back(mid.x() + background.shell_radius * std::cos(a),
                                   mid.y() + background.shell_radius * std::sin(a), height(rng));
  }
  background_points.insert(background_points.end(), extra_points.begin(), extra_points.end());
}

std::pair<Vec3<double>, Vec3<double>> GateCourse::segment(int active) const {
  const int n = static_cast<int>(gates.size());
  if (active < n) {
    const Vec3<double> a = active == 0 ? start.p : gates[static_cast<std::size_t>(active) - 1].center;
    return {a, gates[static_cast<std::size_t>(active)].center};
  }
  const Vec3<double> last = gates.back().center;
  const Vec3<double> before = n >= 2 ? gates[static_cast<std::size_t>(n) - 2].center : start.p;
  return {last, last + 50.0 * (last - before).normalized()};
}

namespace {

// Chebyshev radius of an in-plane offset from the gate center.
double plane_radius(const Gate& g, const Vec3<double>& d) {
  return std::max(std::abs(g.right.dot(d)), std::abs(g.up.dot(d)));
}

}  // namespace

bool in_obstacle(const GateCourse& course, const Vec3<double>& p) {
  if (p.z() <= 0.0) return true;
  for (const Gate& g : course.gates) {
    const Vec3<double> d = p - g.center;
    if (std::abs(g.normal.dot(d)) > 0.5 * course.frame_thickness) continue;
    const double r = plane_radius(g, d);
    if (r > g.half_size && r <= course.frame_outer_half) return true;
  }
  return false;
}

SweepResult sweep(const GateCourse& course, const Vec3<double>& p0, const Vec3<double>& p1, int active) {
  SweepResult res;
  double first_crash = 2.0;
  if (p1.z() <= 0.0) {
    const double t = p0.z() > 0.0 ? p0.z() / (p0.z() - p1.z()) : 0.0;
    first_crash = t;
    res.stop = p0 + t * (p1 - p0);
    res.stop.z() = 0.0;
  }
  for (std::size_t i = 0; i < course.gates.size(); ++i) {
    const Gate& g = course.gates[i];
    const double s0 = g.normal.dot(p0 - g.center);
    const double s1 = g.normal.dot(p1 - g.center);
    if ((s0 > 0.0) == (s1 > 0.0)) continue;
    const double t = s0 / (s0 - s1);
    const Vec3<double> x = p0 + t * (p1 - p0);
    const double r = plane_radius(g, x - g.center);
    if (r <= g.half_size) {
      if (static_cast<int>(i) == active && s0 > 0.0) res.passed_active = true;
    } else if (r <= course.frame_outer_half && t < first_crash) {
      first_crash = t;
      res.stop = x;
    }
  }
  if (first_crash <= 1.0) {
    res.crashed = true;
    res.passed_active = false;
    return res;
  }
  if (in_obstacle(course, p1)) {
    res.crashed = true;
    res.passed_active = false;
    res.stop = p1;
  }
  return res;
}

namespace {

void orient_gates(GateCourse& c, const std::vector<Vec3<double>>& centers, double half) {
  c.gates.clear();
  Vec3<double> prev = c.start.p;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const Vec3<double> d_in = (centers[i] - prev).normalized();
    Vec3<double> dir = d_in;
    if (i + 1 < centers.size()) dir = (d_in + (centers[i + 1] - centers[i]).normalized()).normalized();
    dir.z() = 0.0;  // keep gates upright
    c.gates.push_back(Gate::square(static_cast<int>(i), static_cast<int>(i % 7), centers[i], -dir, half));
    prev = centers[i];
  }
}

}  // namespace

GateCourse desk_course() {
  GateCourse c;
  c.name = "desk7";
  c.start.p = Vec3<double>(0.0, 0.0, 2.0);
  c.corridor_half_width = 2.0;
  c.frame_outer_half = 12.0;
  const std::vector<Vec3<double>> centers{{18.0, 0.0, 2.5},  {36.0, 8.0, 3.5},  {52.0, 22.0, 2.5},
                                          {58.0, 42.0, 3.0}, {46.0, 60.0, 4.0}, {26.0, 66.0, 3.0},
                                          {8.0, 56.0, 2.5}};
  orient_gates(c, centers, 1.25);
  c.regenerate_background();
  return c;
}

GateCourse straight_course(int gate_count, double spacing, double altitude) {
  GateCourse c;
  c.name = "straight";
  c.start.p = Vec3<double>(0.0, 0.0, altitude);
  c.corridor_half_width = 2.0;
  c.frame_outer_half = 12.0;
  std::vector<Vec3<double>> centers;
  for (int i = 1; i <= gate_count; ++i) centers.emplace_back(spacing * i, 0.0, altitude);
  orient_gates(c, centers, 1.25);
  c.regenerate_background();
  return c;
}

GateCourse parse_course(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  GateCourse c;
  c.background = BackgroundSpec{};
  bool header = false;
  int line_no = 0;
  auto fail = [&](const std::string& why) {
    throw ConfigurationError("course line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (!header) {
      int version = 0;
      if (key != "pixelmpc-course" || !(ls >> version) || version != 1) fail("expected 'pixelmpc-course 1'");
      header = true;
      continue;
    }
    if (key == "name") {
      if (!(ls >> c.name)) fail("missing name");
    } else if (key == "start") {
      double x, y, z, yaw;
      if (!(ls >> x >> y >> z >> yaw)) fail("start needs x y z yaw");
      c.start.p = Vec3<double>(x, y, z);
      c.start.q = yaw_quat(yaw);
    } else if (key == "corridor_half_width") {
      if (!(ls >> c.corridor_half_width)) fail("missing value");
    } else if (key == "frame_thickness") {
      if (!(ls >> c.frame_thickness)) fail("missing value");
    } else if (key == "frame_outer_half") {
      if (!(ls >> c.frame_outer_half)) fail("missing value");
    } else if (key == "gate") {
      int id, cls;
      double cx, cy, cz, nx, ny, nz, half;
      if (!(ls >> id >> cls >> cx >> cy >> cz >> nx >> ny >> nz >> half)) fail("gate needs 9 fields");
      c.gates.push_back(Gate::square(id, cls, {cx, cy, cz}, {nx, ny, nz}, half));
    } else if (key == "background") {
      BackgroundSpec& b = c.background;
      if (!(ls >> b.seed >> b.ground_points >> b.shell_points >> b.shell_radius >> b.shell_height >>
            b.ground_margin)) {
        fail("background needs 6 fields");
      }
    } else if (key == "point") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) fail("point needs x y z");
      c.extra_points.emplace_back(x, y, z);
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  if (!header) throw ConfigurationError("course file is empty");
  for (std::size_t i = 0; i < c.gates.size(); ++i) {
    if (c.gates[i].id != static_cast<int>(i)) throw ConfigurationError("gate ids must be 0..n-1 in order");
  }
  c.validate();
  c.regenerate_background();
  return c;
}

GateCourse load_course(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open course file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_course(ss.str());
}

std::string format_course(const GateCourse& c) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "pixelmpc-course 1\n";
  out << "name " << c.name << "\n";
  out << "start " << c.start.p.x() << " " << c.start.p.y() << " " << c.start.p.z() << " "
      << euler_zyx(c.start.q).z() << "\n";
  out << "corridor_half_width " << c.corridor_half_width << "\n";
  out << "frame_thickness " << c.frame_thickness << "\n";
  out << "frame_outer_half " << c.frame_outer_half << "\n";
  for (const Gate& g : c.gates) {
    out << "gate " << g.id << " " << g.class_id << " " << g.center.x() << " " << g.center.y() << " "
        << g.center.z() << " " << g.normal.x() << " " << g.normal.y() << " " << g.normal.z() << " "
        << g.half_size << "\n";
  }
  const BackgroundSpec& b = c.background;
  out << "background " << b.seed << " " << b.ground_points << " " << b.shell_points << " " << b.shell_radius
      << " " << b.shell_height << " " << b.ground_margin << "\n";
  for (const auto& p : c.extra_points) out << "point " << p.x() << " " << p.y() << " " << p.z() << "\n";
  return out.str();
}

void save_course(const GateCourse& course, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write course file " + path.string());
  f << format_course(course);
}

}  // namespace pixelmpc
