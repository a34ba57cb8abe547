#pragma once

#include <optional>
#include <vector>

#include "pixelmpc/costs.hpp"
#include "pixelmpc/dof.hpp"
#include "pixelmpc/mppi.hpp"

namespace pixelmpc {

struct MppiConfig {
  int horizon = 80;
  int samples = 512;
  int iterations = 1;
  double dt = 0.025;
  double lambda = 1.0;
  Vec4<double> sigma = Vec4<double>(0.2, 0.2, 0.3, 2.2);  // roll rate, pitch rate, yaw rate, thrust
  int threads = 1;

  void validate() const;
};

using QuadSeq = ControlSeq<4>;

/// Hover-equilibrium sequence (zero rates, thrust m |g|).
QuadSeq hover_sequence(const VehicleParams& params, int horizon);

/// Warm start: drop the first element, append hover.
QuadSeq shift_sequence(const QuadSeq& u, const VehicleParams& params);

ControlInputd control_at(const QuadSeq& u, Eigen::Index t);

/// Everything a rollout needs besides the control sequence.
struct PlanInput {
  RobotStated x0;
  int active = 0;
  std::optional<PixelStated> target;  // detected target pixel this cycle
};

/// Full record of one rollout (states after each step).
struct RolloutTrace {
  std::vector<RobotStated> robot;
  std::vector<int> active;
  std::vector<char> crashed;
  std::vector<PixelStated> pixel;  // pixel-cost steps only; empty without a target or pixel cost
  std::vector<double> robot_step_cost;
  double robot_cost = 0.0;
  double pixel_cost = 0.0;
  double total = 0.0;
};

struct PlanReport {
  MppiReport mppi;
  double best_robot_cost = 0.0;
  double best_pixel_cost = 0.0;
};

/// Batched rollout cost and MPPI step for the quadrotor racing problem over the combined
/// robot + pixel dynamics. Not safe for concurrent use of one instance.
class QuadrotorPlanner {
 public:
  QuadrotorPlanner(const GateCourse& course, const VehicleParams& vehicle, const CostParams& cost,
                   const MppiConfig& cfg, const DofModel* model);

  /// Costs of every candidate; robot and pixel parts are optional outputs.
  void evaluate(const PlanInput& in, const std::vector<QuadSeq>& candidates, std::vector<double>& total,
                std::vector<double>* robot = nullptr, std::vector<double>* pixel = nullptr);

  /// Single rollout with the full trajectory.
  RolloutTrace rollout(const PlanInput& in, const QuadSeq& u);

  QuadSeq mppi_step(const PlanInput& in, const QuadSeq& u_init, Rng& rng, PlanReport* report = nullptr);

  MppiSampling<4> sampling() const;
  const CostParams& cost() const { return cost_; }
  const MppiConfig& config() const { return cfg_; }
  bool pixel_enabled(const PlanInput& in) const;

 private:
  struct RobotPass {
    double cost = 0.0;
    bool finite = true;
  };
  RobotPass robot_rollout(const PlanInput& in, const QuadSeq& u, std::size_t column, RolloutTrace* trace);
  void pixel_rollout(const PlanInput& in, std::size_t n, std::vector<double>& pixel_cost, RolloutTrace* trace);

  const GateCourse& course_;
  VehicleParams vehicle_;
  CostParams cost_;
  MppiConfig cfg_;
  const DofModel* model_;
  int pixel_steps_ = 0;
  std::vector<PathTarget> targets_;  // per active index, including one past the final gate

  std::vector<BatchedMlp::RowMatrix> inputs_;  // per pixel step: 10 x n
  BatchedMlp::RowMatrix velocity_;
  BatchedMlp::Workspace ws_;
};

}  // namespace pixelmpc
