#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "pixelmpc/bench.hpp"
#include "pixelmpc/experiment.hpp"

using namespace pixelmpc;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* app, Common& c, bool need_out = true) {
  app->add_option("--config", c.config, "Configuration file (section.key = value)")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Master seed");
  auto* out = app->add_option("--out", c.out, "Output directory");
  if (need_out) out->required();
}

AppConfig load(const Common& c) { return c.config.empty() ? AppConfig{} : load_config(c.config); }

std::uint64_t master_seed(const Common& c, const AppConfig& cfg) { return c.seed.value_or(cfg.experiment.seed); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string lap_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "lap_%03zu.csv", i);
  return buf;
}

int collect(const Common& c) {
  AppConfig cfg = load(c);
  const std::uint64_t seed = master_seed(c, cfg);
  const GateCourse course = resolve_course(cfg.experiment.course);
  fs::create_directories(c.out);
  std::vector<RunLog> logs;
  const DofDataset ds = collect_dataset(course, cfg.experiment.racing, cfg.collect, seed, &logs);
  if (ds.samples.empty()) throw InvalidArgument("collected no samples: " + ds.warning);
  save_dataset(ds, fs::path(c.out) / "dataset.dfds");
  fs::create_directories(fs::path(c.out) / "laps");
  for (std::size_t i = 0; i < logs.size(); ++i) write_runlog(logs[i], fs::path(c.out) / "laps" / lap_name(i));
  std::cout << "samples=" << ds.samples.size() << " laps=" << ds.meta.lap_records.size() << "\n";
  if (ds.partial) std::cout << "warning: " << ds.warning << "\n";
  return 0;
}

int train(const Common& c, const std::string& dataset_flag) {
  AppConfig cfg = load(c);
  if (c.seed) cfg.train.seed = *c.seed;
  fs::path dataset = !dataset_flag.empty() ? fs::path(dataset_flag) : cfg.dataset;
  if (dataset.empty()) dataset = fs::path(c.out) / "dataset.dfds";
  if (!fs::exists(dataset)) throw ConfigurationError("dataset not found: " + dataset.string());
  const DofDataset ds = load_dataset(dataset);
  const auto [train_set, test_set] = ds.split_laps(holdout_laps(int(ds.meta.lap_records.size())));
  if (train_set.samples.empty()) throw InvalidArgument("training split is empty");
  fs::create_directories(c.out);
  std::string history = "epoch,train_loss,test_loss\n";
  const DofDataset* test = test_set.samples.empty() ? nullptr : &test_set;
  const TrainResult r = train_dof(train_set, test, cfg.network, cfg.train, cfg.experiment.racing.vehicle,
                                  [&](const EpochReport& e) {
                                    char line[128];
                                    std::snprintf(line, sizeof line, "%d,%.9g,%.9g\n", e.epoch, e.train_loss, e.test_loss);
                                    history += line;
                                    std::cout << "epoch " << e.epoch << " train " << e.train_loss << " test " << e.test_loss << "\n";
                                  });
  r.model.save(fs::path(c.out) / "dof.weights");
  write_text(fs::path(c.out) / "train_history.csv", history);
  if (test != nullptr) {
    const AeeResult a = aee(r.model, *test, cfg.experiment.racing.camera, cfg.experiment.racing.mppi.dt);
    char line[256];
    std::snprintf(line, sizeof line, "aee_per_second=%.9g\naee_per_frame=%.9g\naee_pixels_per_frame=%.9g\n",
                  a.per_second, a.per_frame, a.pixels_per_frame);
    write_text(fs::path(c.out) / "aee.txt", line);
    std::cout << line;
  }
  return 0;
}

int race(const Common& c, const std::string& weights_flag) {
  AppConfig cfg = load(c);
  ExperimentConfig e = cfg.experiment;
  e.seed = master_seed(c, cfg);
  if (!weights_flag.empty()) e.weights = weights_flag;
  const std::vector<RunLog> logs = run_experiment(e);
  fs::create_directories(c.out);
  for (std::size_t i = 0; i < logs.size(); ++i) write_runlog(logs[i], fs::path(c.out) / lap_name(i));
  for (std::size_t i = 0; i < logs.size(); ++i) {
    std::cout << "lap " << i << " seed " << logs[i].seed << " " << to_string(logs[i].outcome);
    if (logs[i].outcome == Outcome::Success) std::cout << " " << logs[i].lap_time << " s";
    std::cout << "\n";
  }
  return 0;
}

bool is_runlog(const fs::path& p) {
  std::ifstream in(p);
  std::string first;
  return std::getline(in, first) && first == "# format=pixelmpc-runlog 1";
}

int evaluate(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<fs::path> files;
  for (const std::string& dir : inputs) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv" && is_runlog(entry.path())) {
        files.push_back(entry.path());
      }
    }
  }
  if (files.empty()) throw InvalidArgument("no run logs found");
  std::sort(files.begin(), files.end());
  std::vector<RunLog> logs;
  for (const fs::path& f : files) logs.push_back(read_runlog(f));
  const std::vector<GroupReport> reports = group_reports(logs);
  write_evaluation(reports, out);
  for (const GroupReport& g : reports) {
    std::cout << g.key.mode << " c_pixel=" << g.key.c_pixel << " t_f=" << g.key.t_f << " laps=" << g.laps.size()
              << " success=" << g.successes << " below50=" << g.below_half.mean << "+-" << g.below_half.two_sigma
              << " lap=" << g.lap_time.mean << "+-" << g.lap_time.two_sigma << "\n";
  }
  return 0;
}

int bench(const Common& c, const std::string& weights_flag) {
  AppConfig cfg = load(c);
  const std::uint64_t seed = master_seed(c, cfg);
  fs::path weights = !weights_flag.empty() ? fs::path(weights_flag) : cfg.experiment.weights;
  std::optional<DofModel> model;
  if (!weights.empty()) {
    if (!fs::exists(weights)) throw ConfigurationError("weights file not found: " + weights.string());
    model = DofModel::load(weights);
  } else {
    model = DofModel(cfg.network, init_weights<float>(cfg.network, stream_seed(seed, std::uint64_t(Stream::Init))),
                     DofModel::default_thrust_scale(cfg.experiment.racing.vehicle), cfg.train.target_mode);
  }
  const BenchResult r = bench_dof(*model, cfg.bench, seed);
  std::string csv = "batch,horizon,mean_ms,two_sigma_ms,max_ms\n";
  for (const BenchRow& row : r.rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%d,%d,%.6f,%.6f,%.6f\n", row.batch, row.horizon, row.mean_ms, row.two_sigma_ms,
                  row.max_ms);
    csv += line;
  }
  std::cout << csv;
  std::cout << "budget_ms=" << r.budget_ms << " fits_budget=" << (r.fits_budget ? "yes" : "no") << "\n";
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    write_text(fs::path(c.out) / "bench.csv", csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perception-aware MPPI quadrotor racing with learned single-pixel flow dynamics"};
  app.require_subcommand(1);

  Common collect_opts, train_opts, race_opts, bench_opts;
  std::string dataset, race_weights, bench_weights, eval_out;
  std::vector<std::string> eval_inputs;

  auto* cmd_collect = app.add_subcommand("collect-data", "Fly the nominal controller and record flow samples");
  add_common(cmd_collect, collect_opts);
  auto* cmd_train = app.add_subcommand("train-dof", "Train the flow dynamics network");
  add_common(cmd_train, train_opts);
  cmd_train->add_option("--dataset", dataset, "Dataset file (default: train.dataset or <out>/dataset.dfds)");
  auto* cmd_race = app.add_subcommand("race", "Race laps and write run logs");
  add_common(cmd_race, race_opts);
  cmd_race->add_option("--weights", race_weights, "Flow model weights (overrides run.weights)");
  auto* cmd_eval = app.add_subcommand("evaluate", "Aggregate run logs into result tables");
  cmd_eval->add_option("inputs", eval_inputs, "Directories holding run logs")->required();
  cmd_eval->add_option("--out", eval_out, "Output directory")->required();
  auto* cmd_bench = app.add_subcommand("bench", "Time multi-step flow rollouts");
  add_common(cmd_bench, bench_opts, false);
  cmd_bench->add_option("--weights", bench_weights, "Flow model weights (default: freshly initialized)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (*cmd_collect) return collect(collect_opts);
    if (*cmd_train) return train(train_opts, dataset);
    if (*cmd_race) return race(race_opts, race_weights);
    if (*cmd_eval) return evaluate(eval_inputs, eval_out);
    if (*cmd_bench) return bench(bench_opts, bench_weights);
  } catch (const pixelmpc::Error& e) {
    std::cerr << "error code=" << to_string(e.code()) << " message=\"" << e.what() << "\"\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error code=internal message=\"" << e.what() << "\"\n";
    return 1;
  }
  return 2;
}
