#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "pixelmpc/collect.hpp"
#include "pixelmpc/neural.hpp"

namespace pixelmpc {

struct BenchConfig {
  std::vector<int> batches{1, 512};
  std::vector<int> horizons{1, 80};
  int repetitions = 200;
  double budget_ms = 25.0;
};

struct ExperimentConfig {
  RacingConfig racing;
  int laps = 10;
  std::uint64_t seed = 1;
  std::string course = "desk7";      // built-in name or path to a course file
  std::filesystem::path weights;     // flow model, required when the pixel cost is on
};

/// Everything a config file can set. Unset keys keep the library defaults.
struct AppConfig {
  ExperimentConfig experiment;
  CollectConfig collect;
  TrainConfig train;
  NetworkSpec network;
  BenchConfig bench;
  std::filesystem::path dataset;  // train-dof input
};

/// Flat `section.key = value` text; `#` starts a comment. Unknown keys or malformed values throw
/// ConfigurationError naming the line. Relative paths resolve against `base_dir`.
AppConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
AppConfig load_config(const std::filesystem::path& path);

/// Reproducible serialization of every key, readable by parse_config.
std::string format_config(const AppConfig& cfg);

/// Built-in course name ("desk7", "straight") or course file.
GateCourse resolve_course(const std::string& name_or_path);

}  // namespace pixelmpc
