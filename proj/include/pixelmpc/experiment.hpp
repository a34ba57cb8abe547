#pragma once

#include "pixelmpc/config.hpp"
#include "pixelmpc/metrics.hpp"

namespace pixelmpc {

/// Runs `cfg.laps` independent laps. Lap i uses seed lap_seed(cfg.seed, i).
std::vector<RunLog> run_experiment(const ExperimentConfig& cfg, const GateCourse& course, const DofModel* model);

/// Resolves the course and loads the weights named by the config.
std::vector<RunLog> run_experiment(const ExperimentConfig& cfg);

/// Loads the model when the configuration needs one; null otherwise.
std::optional<DofModel> load_model_for(const ExperimentConfig& cfg);

}  // namespace pixelmpc
