#include "pixelmpc/planner.hpp"

#include <thread>

namespace pixelmpc {

void MppiConfig::validate() const {
  if (horizon < 1 || samples < 1 || iterations < 1) throw InvalidArgument("mppi: T, N and K must be >= 1");
  if (!(dt > 0.0)) throw InvalidArgument("mppi: dt must be positive");
  if (!(lambda > 0.0)) throw InvalidArgument("mppi: temperature must be positive");
  if (!((sigma.array() > 0.0).all())) throw InvalidArgument("mppi: noise std must be positive");
  if (threads < 1) throw InvalidArgument("mppi: thread count must be >= 1");
}

QuadSeq hover_sequence(const VehicleParams& params, int horizon) {
  QuadSeq u = QuadSeq::Zero(4, horizon);
  u.row(3).setConstant(params.hover_thrust());
  return u;
}

QuadSeq shift_sequence(const QuadSeq& u, const VehicleParams& params) {
  QuadSeq out(4, u.cols());
  const Eigen::Index n = u.cols();
  if (n > 1) out.leftCols(n - 1) = u.rightCols(n - 1);
  out.col(n - 1) = Vec4<double>(0.0, 0.0, 0.0, params.hover_thrust());
  return out;
}

ControlInputd control_at(const QuadSeq& u, Eigen::Index t) {
  return ControlInputd{Vec3<double>(u(0, t), u(1, t), u(2, t)), u(3, t)};
}

QuadrotorPlanner::QuadrotorPlanner(const GateCourse& course, const VehicleParams& vehicle, const CostParams& cost,
                                   const MppiConfig& cfg, const DofModel* model)
    : course_(course), vehicle_(vehicle), cost_(cost), cfg_(cfg), model_(model) {
  cfg_.validate();
  vehicle_.validate();
  cost_.validate(cfg_.horizon, cfg_.dt);
  course_.validate();
  pixel_steps_ = cost_.pixel_steps(cfg_.dt);
  for (int a = 0; a <= course_.final_gate() + 1; ++a) targets_.push_back(path_target(course_, a, cost_.desired_speed));
}

MppiSampling<4> QuadrotorPlanner::sampling() const {
  MppiSampling<4> s;
  s.samples = cfg_.samples;
  s.iterations = cfg_.iterations;
  s.lambda = cfg_.lambda;
  s.sigma = cfg_.sigma;
  const double r = vehicle_.rate_limit;
  s.lower = Vec4<double>(-r, -r, -r, 0.0);
  s.upper = Vec4<double>(r, r, r, vehicle_.max_thrust());
  return s;
}

bool QuadrotorPlanner::pixel_enabled(const PlanInput& in) const {
  return model_ != nullptr && in.target.has_value() && cost_.c_pixel > 0.0 && pixel_steps_ > 0;
}

QuadrotorPlanner::RobotPass QuadrotorPlanner::robot_rollout(const PlanInput& in, const QuadSeq& u,
                                                            std::size_t column, RolloutTrace* trace) {
  const bool pixel = pixel_enabled(in);
  const double dt = cfg_.dt;
  const Vec3<double> zero = Vec3<double>::Zero();
  const int last = course_.final_gate() + 1;
  RobotStated x = in.x0;
  int active = std::min(in.active, last);
  bool crashed = false;
  RobotPass out;
  for (int t = 0; t < cfg_.horizon; ++t) {
    const ControlInputd ut = control_at(u, t);
    if (pixel && t < pixel_steps_) {
      auto col = inputs_[std::size_t(t)].col(Eigen::Index(column));
      col(0) = float(x.q(0));
      col(1) = float(x.q(1));
      col(2) = float(x.q(2));
      col(3) = float(x.q(3));
      col(6) = float(ut.omega.x());
      col(7) = float(ut.omega.y());
      col(8) = float(ut.omega.z());
      col(9) = float(ut.thrust * model_->thrust_scale());
    }
    if (!crashed) {
      RobotStated next = euler_update(x, robot_derivative_unchecked(x, ut, vehicle_, zero), dt);
      if (!next.all_finite()) {
        out.finite = false;
        out.cost = std::numeric_limits<double>::infinity();
        return out;
      }
      const SweepResult sw = sweep(course_, x.p, next.p, active);
      if (sw.crashed) {
        next.p = sw.stop;
        next.v.setZero();
        crashed = true;
      } else if (sw.passed_active && active < last) {
        ++active;
      }
      x = next;
    }
    const double h = crashed ? cost_.crash_value : h_path_indicator(x.p, course_, active, cost_.crash_value);
    const double c = robot_cost_terms(x, h, targets_[std::size_t(active)], cost_, dt);
    out.cost += c;
    if (trace != nullptr) {
      trace->robot.push_back(x);
      trace->active.push_back(active);
      trace->crashed.push_back(crashed ? 1 : 0);
      trace->robot_step_cost.push_back(c);
    }
  }
  return out;
}

void QuadrotorPlanner::pixel_rollout(const PlanInput& in, std::size_t n, std::vector<double>& pixel_cost,
                                     RolloutTrace* trace) {
  std::vector<double> pu(n, in.target->u), pv(n, in.target->v), sum(n, 0.0);
  const double dt = cfg_.dt;
  const double ou = cost_.image_center.x(), ov = cost_.image_center.y();
  for (int t = 0; t < pixel_steps_; ++t) {
    BatchedMlp::RowMatrix& x = inputs_[std::size_t(t)];
    for (std::size_t j = 0; j < n; ++j) {
      x(4, Eigen::Index(j)) = float(pu[j]);
      x(5, Eigen::Index(j)) = float(pv[j]);
    }
    model_->predict_velocity_batch(x, velocity_, ws_);
    for (std::size_t j = 0; j < n; ++j) {
      pu[j] += double(velocity_(0, Eigen::Index(j))) * dt;
      pv[j] += double(velocity_(1, Eigen::Index(j))) * dt;
      sum[j] += (std::abs(pu[j] - ou) + std::abs(pv[j] - ov)) * dt;
    }
    if (trace != nullptr) trace->pixel.push_back(PixelStated{pu[0], pv[0]});
  }
  for (std::size_t j = 0; j < n; ++j) pixel_cost[j] = cost_.c_pixel * sum[j];
}

void QuadrotorPlanner::evaluate(const PlanInput& in, const std::vector<QuadSeq>& candidates,
                                std::vector<double>& total, std::vector<double>* robot, std::vector<double>* pixel) {
  const std::size_t n = candidates.size();
  for (const QuadSeq& c : candidates) {
    if (c.rows() != 4 || c.cols() != cfg_.horizon) throw InvalidArgument("planner: candidate has the wrong shape");
  }
  const bool use_pixel = pixel_enabled(in);
  if (use_pixel) {
    inputs_.resize(std::size_t(pixel_steps_));
    for (auto& m : inputs_) m.resize(kDofInputWidth, Eigen::Index(n));
  }
  std::vector<RobotPass> passes(n);
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) passes[i] = robot_rollout(in, candidates[i], i, nullptr);
  };
  const std::size_t workers = std::min<std::size_t>(std::size_t(cfg_.threads), n);
  if (workers <= 1) {
    run(0, n);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk, e = std::min(n, b + chunk);
      if (b < e) pool.emplace_back(run, b, e);
    }
    for (auto& th : pool) th.join();
  }
  std::vector<double> pc(n, 0.0);
  if (use_pixel) pixel_rollout(in, n, pc, nullptr);

  total.resize(n);
  if (robot != nullptr) robot->resize(n);
  if (pixel != nullptr) pixel->resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool finite = passes[i].finite && std::isfinite(pc[i]);
    total[i] = finite ? passes[i].cost + pc[i] : std::numeric_limits<double>::infinity();
    if (robot != nullptr) (*robot)[i] = passes[i].cost;
    if (pixel != nullptr) (*pixel)[i] = pc[i];
  }
}

RolloutTrace QuadrotorPlanner::rollout(const PlanInput& in, const QuadSeq& u) {
  if (u.rows() != 4 || u.cols() != cfg_.horizon) throw InvalidArgument("planner: sequence has the wrong shape");
  RolloutTrace trace;
  const bool use_pixel = pixel_enabled(in);
  if (use_pixel) {
    inputs_.resize(std::size_t(pixel_steps_));
    for (auto& m : inputs_) m.resize(kDofInputWidth, 1);
  }
  const RobotPass pass = robot_rollout(in, u, 0, &trace);
  trace.robot_cost = pass.cost;
  if (!pass.finite) {
    trace.total = std::numeric_limits<double>::infinity();
    return trace;
  }
  std::vector<double> pc(1, 0.0);
  if (use_pixel) pixel_rollout(in, 1, pc, &trace);
  trace.pixel_cost = pc[0];
  trace.total = std::isfinite(pc[0]) ? trace.robot_cost + pc[0] : std::numeric_limits<double>::infinity();
  return trace;
}

QuadSeq QuadrotorPlanner::mppi_step(const PlanInput& in, const QuadSeq& u_init, Rng& rng, PlanReport* report) {
  const MppiSampling<4> s = sampling();
  std::vector<double> robot, pixel;
  MppiReport mr;
  QuadSeq u = mppi_optimize<4>(
      u_init, s, rng,
      [&](const std::vector<QuadSeq>& cands, std::vector<double>& costs) { evaluate(in, cands, costs, &robot, &pixel); },
      &mr);
  if (report != nullptr) {
    report->mppi = mr;
    report->best_robot_cost = robot[std::size_t(mr.best_sample)];
    report->best_pixel_cost = pixel[std::size_t(mr.best_sample)];
  }
  return u;
}

}  // namespace pixelmpc
