#include "pixelmpc/experiment.hpp"

namespace pixelmpc {

std::vector<RunLog> run_experiment(const ExperimentConfig& cfg, const GateCourse& course, const DofModel* model) {
  if (cfg.laps < 0) throw ConfigurationError("lap count must be >= 0");
  std::vector<RunLog> logs;
  logs.reserve(std::size_t(cfg.laps));
  for (int lap = 0; lap < cfg.laps; ++lap) {
    logs.push_back(pixelmpc_loop(course, model, cfg.racing, lap_seed(cfg.seed, std::uint64_t(lap))));
  }
  return logs;
}

std::optional<DofModel> load_model_for(const ExperimentConfig& cfg) {
  if (cfg.racing.effective_cost().c_pixel <= 0.0) return std::nullopt;
  if (cfg.weights.empty()) throw ConfigurationError("pixelmpc mode needs run.weights");
  if (!std::filesystem::exists(cfg.weights)) throw ConfigurationError("weights file not found: " + cfg.weights.string());
  return DofModel::load(cfg.weights);
}

std::vector<RunLog> run_experiment(const ExperimentConfig& cfg) {
  const GateCourse course = resolve_course(cfg.course);
  const std::optional<DofModel> model = load_model_for(cfg);
  return run_experiment(cfg, course, model ? &*model : nullptr);
}

}  // namespace pixelmpc
