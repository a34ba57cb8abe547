#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pixelmpc/vision.hpp"

namespace pixelmpc {

/// Procedural stand-in for the static scene used to synthesize flow training data.
struct BackgroundSpec {
  std::uint64_t seed = 1;
  int ground_points = 3000;    // scattered on z = 0 around the course
  int shell_points = 3000;     // on a vertical cylinder around the course
  double shell_radius = 90.0;  // [m]
  double shell_height = 30.0;  // [m]
  double ground_margin = 30.0; // [m] beyond the gate bounding box
};

/// Ordered gates with the geometry the racing cost and the crash test need.
struct GateCourse {
  std::string name = "course";
  std::vector<Gate> gates;
  RobotStated start;
  double corridor_half_width = 4.0;  // d_max of the path indicator [m]
  double frame_thickness = 0.3;      // [m]
  double frame_outer_half = 4.0;     // half-size of the gate panel around the opening [m]
  BackgroundSpec background;
  std::vector<Vec3<double>> extra_points;
  std::vector<Vec3<double>> background_points;  // generated from `background` plus `extra_points`

  int final_gate() const { return static_cast<int>(gates.size()) - 1; }
  void validate() const;
  void regenerate_background();

  /// Path segment for an active gate index: previous gate (or start) to the active gate. Past
  /// the final gate the last segment is extended straight ahead.
  std::pair<Vec3<double>, Vec3<double>> segment(int active) const;
};

/// Outcome of moving a point from p0 to p1 against the gates and the ground plane.
struct SweepResult {
  bool crashed = false;
  bool passed_active = false;
  Vec3<double> stop = Vec3<double>::Zero();  // crash location when crashed
};

/// True iff p lies inside a gate's frame slab outside the opening, or at/below the ground.
bool in_obstacle(const GateCourse& course, const Vec3<double>& p);

/// Swept test of the straight move p0 -> p1: crossing a gate plane through its panel is a crash,
/// crossing the active gate's opening from its approach side counts as passing it.
SweepResult sweep(const GateCourse& course, const Vec3<double>& p0, const Vec3<double>& p1, int active);

/// Seven gates over roughly 145 m with turns and altitude changes.
GateCourse desk_course();

/// Collinear gates every `spacing` metres at constant altitude.
GateCourse straight_course(int gate_count = 7, double spacing = 25.0, double altitude = 3.0);

/// Text course format, version 1:
///   pixelmpc-course 1
///   name <string>
///   start <x> <y> <z> <yaw>
///   corridor_half_width <m> | frame_thickness <m> | frame_outer_half <m>
///   gate <id> <class> <cx> <cy> <cz> <nx> <ny> <nz> <half_size>
///   background <seed> <ground_points> <shell_points> <shell_radius> <shell_height> <ground_margin>
///   point <x> <y> <z>
/// Blank lines and lines starting with '#' are ignored.
GateCourse load_course(const std::filesystem::path& path);
GateCourse parse_course(const std::string& text);
std::string format_course(const GateCourse& course);
void save_course(const GateCourse& course, const std::filesystem::path& path);

}  // namespace pixelmpc
