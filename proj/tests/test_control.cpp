#include <doctest.h>

#include <cstring>

#include "generators.hpp"
#include "pixelmpc/racing.hpp"
#include "toys.hpp"

using namespace pixelmpc;

namespace {

constexpr double kDt = 0.025;

RobotStated at(const Vec3<double>& p, const Vec3<double>& v = Vec3<double>(14, 0, 0)) {
  RobotStated x;
  x.p = p;
  x.v = v;
  return x;
}

DofModel random_model(std::uint64_t seed) {
  NetworkSpec spec;
  spec.widths = {10, 24, 24, 2};
  return DofModel(spec, init_weights<float>(spec, seed), DofModel::default_thrust_scale(VehicleParams{}),
                  TargetMode::Polar);
}

MppiConfig small_mppi(int horizon = 40, int samples = 16) {
  MppiConfig m;
  m.horizon = horizon;
  m.samples = samples;
  m.lambda = 10.0;
  return m;
}

std::vector<QuadSeq> random_sequences(Rng& rng, int n, int horizon) {
  const VehicleParams vp;
  std::vector<QuadSeq> out;
  for (int i = 0; i < n; ++i) {
    QuadSeq u = hover_sequence(vp, horizon);
    for (int t = 0; t < horizon; ++t) {
      u(0, t) = gen::uniform(rng, -0.5, 0.5);
      u(1, t) = gen::uniform(rng, -0.5, 0.5);
      u(2, t) = gen::uniform(rng, -0.5, 0.5);
      u(3, t) += gen::uniform(rng, -2, 4);
    }
    out.push_back(u);
  }
  return out;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

bool same_log(const RunLog& a, const RunLog& b) {
  if (a.outcome != b.outcome || a.ticks.size() != b.ticks.size() || !same_bits(a.lap_time, b.lap_time)) return false;
  for (std::size_t k = 0; k < a.ticks.size(); ++k) {
    const TickRecord &x = a.ticks[k], &y = b.ticks[k];
    if (x.x.p != y.x.p || x.x.q != y.x.q || x.x.v != y.x.v) return false;
    if (x.u.omega != y.u.omega || !same_bits(x.u.thrust, y.u.thrust)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("path indicator examples") {
  const GateCourse c = straight_course();
  CHECK(h_path_indicator(Vec3<double>(10, 0, 3), c, 0) == -1.0);
  CHECK(h_path_indicator(Vec3<double>(10, 0, 4), c, 0) == 0.0);
  CHECK(h_path_indicator(Vec3<double>(10, 0, 3.5), c, 0) == doctest::Approx(-0.5));
  CHECK(h_path_indicator(Vec3<double>(10, 0, 5), c, 0) == 1.0);
  CHECK(h_path_indicator(Vec3<double>(10, 6, 3), c, 0) == 1.0);
  CHECK(h_path_indicator(Vec3<double>(10, 0, -0.5), c, 0) == 1000.0);
  CHECK(h_path_indicator(Vec3<double>(25, 5, 3), c, 0) == 1000.0);  // gate panel
  CHECK(h_path_indicator(Vec3<double>(25, 0, 3), c, 0) == -1.0);    // opening
  CHECK(h_path_indicator(Vec3<double>(10, 0, -0.5), c, 0, 77.0) == 77.0);
  // Before the start the distance is to the segment endpoint.
  CHECK(h_path_indicator(Vec3<double>(-1, 0, 3), c, 0) == 0.0);
}

TEST_CASE("path indicator lies in [-1, 1] outside obstacles") {
  const GateCourse c = desk_course();
  Rng rng(61);
  for (int i = 0; i < 20000; ++i) {
    const Vec3<double> p = gen::vec3(rng, -60, 60) + Vec3<double>(0, 0, 60);
    const int active = gen::integer(rng, 0, c.final_gate() + 1);
    const double h = h_path_indicator(p, c, active);
    if (in_obstacle(c, p)) {
      REQUIRE(h == 1000.0);
    } else {
      REQUIRE(h >= -1.0);
      REQUIRE(h <= 1.0);
      const auto [a, b] = c.segment(active);
      REQUIRE(h == std::clamp(2.0 * segment_distance(p, a, b) / c.corridor_half_width - 1.0, -1.0, 1.0));
    }
  }
}

TEST_CASE("segment distance") {
  const Vec3<double> a(0, 0, 0), b(10, 0, 0);
  CHECK(segment_distance(Vec3<double>(5, 3, 4), a, b) == doctest::Approx(5.0));
  CHECK(segment_distance(Vec3<double>(-3, 4, 0), a, b) == doctest::Approx(5.0));
  CHECK(segment_distance(Vec3<double>(13, 0, 4), a, b) == doctest::Approx(5.0));
  CHECK(segment_distance(Vec3<double>(1, 1, 1), a, a) == doctest::Approx(std::sqrt(3.0)));
}

TEST_CASE("path target follows the active segment") {
  const GateCourse c = straight_course();
  const PathTarget t = path_target(c, 0, 14.0);
  CHECK(t.q_d == identity_quat<double>());
  CHECK(t.v_d == Vec3<double>(14, 0, 0));
  const PathTarget past = path_target(c, c.final_gate() + 1, 10.0);
  CHECK(past.a == c.gates.back().center);
  CHECK((past.b - past.a).norm() == doctest::Approx(50.0));
  CHECK((past.v_d - Vec3<double>(10, 0, 0)).norm() < 1e-12);

  const GateCourse d = desk_course();
  for (int a = 0; a <= d.final_gate(); ++a) {
    const PathTarget pt = path_target(d, a, 14.0);
    const Vec3<double> fwd = rotation_matrix(pt.q_d).col(0);
    REQUIRE(std::abs(fwd.z()) < 1e-12);
    // Level heading matches the horizontal projection of the segment.
    const Vec2<double> horiz = (pt.b - pt.a).head<2>().normalized();
    REQUIRE((fwd.head<2>() - horiz).norm() < 1e-12);
  }
}

TEST_CASE("racing cost examples") {
  const GateCourse c = straight_course();
  CostParams p;
  CHECK(robot_cost(at({10, 0, 3}), p, c, 0, kDt) == doctest::Approx(400 * kDt));
  CHECK(robot_cost(at({10, 0, 3}, Vec3<double>::Zero()), p, c, 0, kDt) == doctest::Approx((400 + 8 * 196) * kDt));
  CHECK(robot_cost(at({10, 0, 4}), p, c, 0, kDt) == doctest::Approx(0.0));
  CHECK(robot_cost(at({10, 0, -1}), p, c, 0, kDt) == doctest::Approx(400 * 1e6 * kDt));

  RobotStated flipped = at({10, 0, 4});
  flipped.q = Quat<double>(-1, 0, 0, 0);
  CHECK(robot_cost(flipped, p, c, 0, kDt) == 0.0);
  RobotStated turned = at({10, 0, 4});
  turned.q = Quat<double>(0, 0, 0, 1);
  CHECK(robot_cost(turned, p, c, 0, kDt) == doctest::Approx(250 * 2 * kDt));
  CHECK(robot_cost(at({10, 0, 4}), p, c, 0, 0.05) == doctest::Approx(0.0));
}

TEST_CASE("racing cost is invariant to the quaternion sign") {
  const GateCourse c = desk_course();
  const CostParams p;
  Rng rng(62);
  for (int i = 0; i < 5000; ++i) {
    RobotStated x = gen::state(rng);
    x.p.z() = std::abs(x.p.z()) + 0.5;
    const int active = gen::integer(rng, 0, c.final_gate() + 1);
    RobotStated y = x;
    y.q = -x.q;
    REQUIRE(robot_cost(x, p, c, active, kDt) == robot_cost(y, p, c, active, kDt));
    REQUIRE(robot_cost(x, p, c, active, kDt) >= 0.0);
  }
}

TEST_CASE("pixel cost examples") {
  CostParams p;
  p.c_pixel = 9e6;
  p.t_f_pixel = 1.0;
  CHECK(p.pixel_steps(kDt) == 40);
  const std::vector<PixelStated> offset(80, PixelStated{1.0, 0.5});
  CHECK(pixel_cost(offset, p, true, kDt) == doctest::Approx(4.5e6));
  CHECK(pixel_cost(offset, p, false, kDt) == 0.0);
  const std::vector<PixelStated> centered(80, PixelStated{0.5, 0.5});
  CHECK(pixel_cost(centered, p, true, kDt) == 0.0);
  p.t_f_pixel = 0.5;
  CHECK(pixel_cost(offset, p, true, kDt) == doctest::Approx(2.25e6));
  p.t_f_pixel = 0.0;
  CHECK(pixel_cost(offset, p, true, kDt) == 0.0);
  p.t_f_pixel = 1.0;
  p.c_pixel = 0.0;
  CHECK(pixel_cost(offset, p, true, kDt) == 0.0);

  CostParams q;
  q.t_f_pixel = 0.26;
  CHECK(q.pixel_steps(kDt) == 11);
  q.t_f_pixel = 2.0;
  CHECK_THROWS_AS(q.validate(40, kDt), InvalidArgument);
  CHECK_NOTHROW(q.validate(80, kDt));
}

TEST_CASE("pixel cost grows with the offset from the image center") {
  CostParams p;
  p.c_pixel = 1.0;
  Rng rng(63);
  for (int i = 0; i < 2000; ++i) {
    const double du = gen::uniform(rng, 0, 0.5), dv = gen::uniform(rng, 0, 0.5), s = gen::uniform(rng, 1, 2);
    const std::vector<PixelStated> a(40, PixelStated{0.5 + du, 0.5 - dv});
    const std::vector<PixelStated> b(40, PixelStated{0.5 + std::min(0.5, s * du), 0.5 - std::min(0.5, s * dv)});
    REQUIRE(pixel_cost(a, p, true, kDt) <= pixel_cost(b, p, true, kDt));
  }
}

TEST_CASE("planner rollout without a pixel term is the racing cost of the trajectory") {
  const GateCourse c = straight_course();
  const VehicleParams vp;
  CostParams cost;
  Rng rng(64);
  const auto seqs = random_sequences(rng, 12, 40);
  const DofModel m = random_model(6);
  QuadrotorPlanner plain(c, vp, cost, small_mppi(), nullptr);
  CostParams with_pixel = cost;
  with_pixel.c_pixel = 1e4;
  QuadrotorPlanner pixel(c, vp, with_pixel, small_mppi(), &m);
  QuadrotorPlanner zero_weight(c, vp, cost, small_mppi(), &m);

  const PlanInput in{at({2, 0.3, 3}, Vec3<double>(8, 0, 0)), 0, PixelStated{0.55, 0.45}};
  std::vector<double> a, b, d;
  plain.evaluate(in, seqs, a);
  zero_weight.evaluate(in, seqs, b);
  PlanInput no_target = in;
  no_target.target.reset();
  pixel.evaluate(no_target, seqs, d);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    REQUIRE(same_bits(a[i], b[i]));
    REQUIRE(same_bits(a[i], d[i]));
  }

  // Recompute each step from the traced states.
  for (const QuadSeq& u : seqs) {
    const RolloutTrace tr = plain.rollout(in, u);
    REQUIRE(tr.robot.size() == 40);
    REQUIRE(tr.pixel.empty());
    double total = 0.0;
    RobotStated x = in.x0;
    for (std::size_t t = 0; t < tr.robot.size(); ++t) {
      if (!tr.crashed[t]) {
        x = step(x, control_at(u, Eigen::Index(t)), vp, kDt);
        REQUIRE((x.p - tr.robot[t].p).norm() < 1e-12);
        REQUIRE((x.q - tr.robot[t].q).norm() < 1e-12);
        REQUIRE(same_bits(tr.robot_step_cost[t], robot_cost(tr.robot[t], cost, c, tr.active[t], kDt)));
      }
      total += tr.robot_step_cost[t];
    }
    REQUIRE(same_bits(total, tr.robot_cost));
    REQUIRE(tr.pixel_cost == 0.0);
  }
}

TEST_CASE("rollouts stop at a crash and keep paying the crash value") {
  const GateCourse c = straight_course();
  const VehicleParams vp;
  const CostParams cost;
  QuadrotorPlanner planner(c, vp, cost, small_mppi(), nullptr);
  QuadSeq fall = QuadSeq::Zero(4, 40);  // no thrust from 1 m
  const RolloutTrace tr = planner.rollout(PlanInput{at({5, 0, 1}, Vec3<double>::Zero()), 0, {}}, fall);
  int first = -1;
  for (std::size_t t = 0; t < tr.crashed.size(); ++t) {
    if (tr.crashed[t] && first < 0) first = int(t);
    if (first >= 0) REQUIRE(tr.crashed[t]);
  }
  REQUIRE(first > 0);
  const RobotStated& rest = tr.robot.back();
  CHECK(rest.p == tr.robot[std::size_t(first)].p);
  CHECK(rest.v == Vec3<double>::Zero());
  CHECK(std::abs(rest.p.z()) < 1e-9);
  CHECK(tr.robot_step_cost.back() == doctest::Approx((400.0 * 1e6 + 8 * 196) * kDt));
}

TEST_CASE("rollouts advance the active gate through the opening") {
  const GateCourse c = straight_course();
  const VehicleParams vp;
  CostParams cost;
  QuadrotorPlanner planner(c, vp, cost, small_mppi(80), nullptr);
  const PlanInput in{at({20, 0, 3}, Vec3<double>(10, 0, 0)), 0, {}};
  const RolloutTrace tr = planner.rollout(in, hover_sequence(vp, 80));
  CHECK(tr.active.front() == 0);
  CHECK(tr.active.back() == 1);
  CHECK_FALSE(tr.crashed.back());
}

TEST_CASE("zero flow model gives a constant pixel cost") {
  const GateCourse c = straight_course();
  const VehicleParams vp;
  const DofModel zero = DofModel::zero(vp);
  CostParams cost;
  cost.c_pixel = 9e6;
  Rng rng(65);
  for (double t_f : {0.25, 1.0}) {
    cost.t_f_pixel = t_f;
    QuadrotorPlanner planner(c, vp, cost, small_mppi(40), &zero);
    const PixelStated target{0.7, 0.4};
    const PlanInput in{at({2, 0, 3}), 0, target};
    for (const QuadSeq& u : random_sequences(rng, 4, 40)) {
      const RolloutTrace tr = planner.rollout(in, u);
      REQUIRE(tr.pixel.size() == std::size_t(cost.pixel_steps(kDt)));
      for (const auto& p : tr.pixel) REQUIRE(p.vec() == target.vec());
      const double expected = 9e6 * 0.3 * std::min(t_f, 40 * kDt);
      REQUIRE(tr.pixel_cost == doctest::Approx(expected).epsilon(1e-12));
      REQUIRE(tr.total == doctest::Approx(tr.robot_cost + expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("batched planner evaluation equals single rollouts") {
  const GateCourse c = desk_course();
  const VehicleParams vp;
  const DofModel m = random_model(7);
  CostParams cost;
  cost.c_pixel = 9e6;
  cost.t_f_pixel = 0.5;
  Rng rng(66);
  const auto seqs = random_sequences(rng, 33, 40);
  const PlanInput in{at(c.start.p, Vec3<double>(2, 0, 0)), 0, PixelStated{0.52, 0.48}};
  for (int threads : {1, 3}) {
    MppiConfig mc = small_mppi();
    mc.threads = threads;
    QuadrotorPlanner planner(c, vp, cost, mc, &m);
    std::vector<double> total, robot, pixel;
    planner.evaluate(in, seqs, total, &robot, &pixel);
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      const RolloutTrace tr = planner.rollout(in, seqs[i]);
      REQUIRE(same_bits(total[i], tr.total));
      REQUIRE(same_bits(robot[i], tr.robot_cost));
      REQUIRE(same_bits(pixel[i], tr.pixel_cost));
      REQUIRE(tr.pixel_cost == doctest::Approx(pixel_cost(tr.pixel, cost, true, kDt)).epsilon(1e-12));

      // The pixel trajectory follows the flow model along the traced attitudes.
      std::vector<Quat<double>> att{in.x0.q};
      for (std::size_t t = 0; t + 1 < tr.robot.size(); ++t) att.push_back(tr.robot[t].q);
      std::vector<ControlInputd> us;
      for (int t = 0; t < 40; ++t) us.push_back(control_at(seqs[i], t));
      const auto ref = rollout_pixel(m, att, us, *in.target, kDt, int(tr.pixel.size()));
      for (std::size_t t = 0; t < tr.pixel.size(); ++t) {
        REQUIRE(std::abs(tr.pixel[t].u - ref[t + 1].u) < 1e-5);
        REQUIRE(std::abs(tr.pixel[t].v - ref[t + 1].v) < 1e-5);
      }
    }
  }
  QuadrotorPlanner planner(c, vp, cost, small_mppi(), &m);
  std::vector<double> total;
  CHECK_THROWS_AS(planner.evaluate(in, {QuadSeq::Zero(4, 39)}, total), InvalidArgument);
}

TEST_CASE("weighted combination examples") {
  std::vector<ControlSeq<1>> c;
  for (double v : {1.0, 2.0, 3.0}) c.push_back(ControlSeq<1>::Constant(1, 3, v));
  std::vector<double> w;
  MppiReport r;
  const auto best = mppi_combine<1>(c, {5.0, 1.0, 9.0}, 1e-9, &r, &w);
  CHECK(best == c[1]);
  CHECK(r.best_sample == 1);
  CHECK(r.min_cost == 1.0);
  CHECK(w == std::vector<double>{0.0, 1.0, 0.0});
  CHECK(r.effective_samples == doctest::Approx(1.0));

  CHECK(mppi_combine<1>({c[2]}, {123.0}, 0.5) == c[2]);

  const auto even = mppi_combine<1>(c, {4.0, 4.0, 4.0}, 2.0, &r, &w);
  CHECK(even(0, 0) == doctest::Approx(2.0));
  CHECK(r.effective_samples == doctest::Approx(3.0));

  // Two candidates one temperature apart.
  const auto two = mppi_combine<1>({c[0], c[2]}, {0.0, 1.0}, 1.0, nullptr, &w);
  const double w0 = 1.0 / (1.0 + std::exp(-1.0));
  CHECK(w[0] == doctest::Approx(w0));
  CHECK(two(0, 0) == doctest::Approx(w0 * 1.0 + (1 - w0) * 3.0));
}

TEST_CASE("combination skips non-finite costs") {
  std::vector<ControlSeq<1>> c;
  for (double v : {1.0, 2.0, 3.0}) c.push_back(ControlSeq<1>::Constant(1, 2, v));
  const double inf = std::numeric_limits<double>::infinity(), nan = std::numeric_limits<double>::quiet_NaN();
  MppiReport r;
  std::vector<double> w;
  CHECK(mppi_combine<1>(c, {inf, 2.0, nan}, 1.0, &r, &w) == c[1]);
  CHECK(r.finite_samples == 1);
  CHECK(w[0] == 0.0);
  CHECK(w[2] == 0.0);
  CHECK_THROWS_AS(mppi_combine<1>(c, {inf, nan, inf}, 1.0), OptimizerFailure);
  CHECK_THROWS_AS(mppi_combine<1>(c, {1.0, 2.0}, 1.0), InvalidArgument);
  CHECK_THROWS_AS(mppi_combine<1>(c, {1.0, 2.0, 3.0}, 0.0), InvalidArgument);
}

TEST_CASE("combination weights: normalized, ordered and offset invariant") {
  Rng rng(67);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = gen::integer(rng, 1, 64);
    std::vector<ControlSeq<4>> c;
    std::vector<double> costs, shifted;
    for (int i = 0; i < n; ++i) {
      c.push_back(ControlSeq<4>::Random(4, 10));
      // Costs on a 2^-16 grid so that adding 2^20 is exact.
      const double s = std::ldexp(double(gen::integer(rng, 0, 1 << 24)), -16);
      costs.push_back(s);
      shifted.push_back(s + 1048576.0);
    }
    const double lambda = gen::uniform(rng, 0.1, 100);
    std::vector<double> w, ws;
    const auto a = mppi_combine<4>(c, costs, lambda, nullptr, &w);
    const auto b = mppi_combine<4>(c, shifted, lambda, nullptr, &ws);
    REQUIRE(std::memcmp(a.data(), b.data(), sizeof(double) * std::size_t(a.size())) == 0);
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      REQUIRE(w[i] >= 0.0);
      sum += w[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        if (costs[i] < costs[j]) REQUIRE(w[i] >= w[j]);
      }
    }
    REQUIRE(std::abs(sum - 1.0) < 1e-12);
    // The update is a convex combination.
    REQUIRE((a.array() <= 1.0 + 1e-12).all());
    REQUIRE((a.array() >= -1.0 - 1e-12).all());
  }
}

TEST_CASE("perturbation sampling respects the bounds") {
  MppiSampling<2> s;
  s.samples = 200;
  s.sigma << 5.0, 0.1;
  s.lower << -1.0, 0.0;
  s.upper << 1.0, 10.0;
  ControlSeq<2> u(2, 6);
  u.row(0).setConstant(0.5);
  u.row(1).setConstant(5.0);
  Rng rng(68);
  std::vector<ControlSeq<2>> c;
  mppi_sample<2>(u, s, rng, c);
  REQUIRE(c.size() == 200);
  int at_bound = 0;
  double mean = 0.0;
  for (const auto& x : c) {
    REQUIRE((x.row(0).array() >= -1.0).all());
    REQUIRE((x.row(0).array() <= 1.0).all());
    for (int t = 0; t < 6; ++t) at_bound += (std::abs(x(0, t)) == 1.0);
    mean += x.row(1).mean() / 200.0;
  }
  CHECK(at_bound > 600);
  CHECK(std::abs(mean - 5.0) < 0.01);

  Rng r1(5), r2(5);
  std::vector<ControlSeq<2>> c1, c2;
  mppi_sample<2>(u, s, r1, c1);
  mppi_sample<2>(u, s, r2, c2);
  for (std::size_t i = 0; i < c1.size(); ++i) REQUIRE(c1[i] == c2[i]);
}

TEST_CASE("warm start shift") {
  const VehicleParams vp;
  QuadSeq u = QuadSeq::Random(4, 5);
  const QuadSeq s = shift_sequence(u, vp);
  CHECK(s.leftCols(4) == u.rightCols(4));
  CHECK(s.col(4) == Vec4<double>(0, 0, 0, vp.hover_thrust()));
  const QuadSeq h = hover_sequence(vp, 3);
  CHECK(shift_sequence(h, vp) == h);
  CHECK(control_at(u, 2).omega == u.col(2).head<3>());
  CHECK(control_at(u, 2).thrust == u(3, 2));
}

TEST_CASE("optimizer validates its settings") {
  const toy::DoubleIntegrator toy;
  auto s = toy.sampling();
  Rng rng(1);
  auto eval = [&](const std::vector<ControlSeq<1>>& cands, std::vector<double>& costs) {
    for (std::size_t i = 0; i < cands.size(); ++i) costs[i] = toy.cost(toy::DoubleIntegrator::Seq(cands[i]));
  };
  ControlSeq<1> u = ControlSeq<1>::Zero(1, 4);
  s.samples = 0;
  CHECK_THROWS_AS(mppi_optimize<1>(u, s, rng, eval), InvalidArgument);
  s = toy.sampling();
  s.sigma << 0.0;
  CHECK_THROWS_AS(mppi_optimize<1>(u, s, rng, eval), InvalidArgument);
  MppiConfig mc;
  mc.lambda = -1.0;
  CHECK_THROWS_AS(mc.validate(), InvalidArgument);
}

TEST_CASE("toy problem: grid search agrees with the closed form") {
  const toy::DoubleIntegrator toy;
  const auto exact = toy.exact();
  REQUIRE((exact.array().abs() <= toy.bound).all());
  const auto grid = toy.grid_search();
  CHECK(toy.cost(grid) >= toy.cost(exact) - 1e-12);
  CHECK(toy.cost(grid) <= toy.cost(exact) * 1.001);
}

TEST_CASE("toy problem: MPPI approaches the optimum") {
  const toy::DoubleIntegrator toy;
  const double best = toy.cost(toy.grid_search());
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    const auto u = toy.mppi(rng);
    const Eigen::Vector2d s = toy.terminal_state(u);
    INFO("seed " << seed << " cost " << toy.cost(u) << " vs " << best);
    CHECK(toy.cost(u) <= best * 1.02);
    CHECK(std::abs(s(0) - toy.target) < 0.01);
    CHECK(std::abs(s(1)) < 0.01);
  }
}

TEST_CASE("planner MPPI step lowers the cost of the hover sequence") {
  const GateCourse c = straight_course();
  const VehicleParams vp;
  QuadrotorPlanner planner(c, vp, CostParams{}, small_mppi(40, 128), nullptr);
  const PlanInput in{at({2, 0, 3}, Vec3<double>(5, 0, 0)), 0, {}};
  QuadSeq u = hover_sequence(vp, 40);
  const double before = planner.rollout(in, u).total;
  Rng rng(69);
  PlanReport rep;
  for (int k = 0; k < 10; ++k) u = planner.mppi_step(in, u, rng, &rep);
  CHECK(planner.rollout(in, u).total < before);
  CHECK(rep.mppi.finite_samples == 128);
  CHECK(rep.best_pixel_cost == 0.0);
  const auto s = planner.sampling();
  CHECK(s.upper(3) == vp.max_thrust());
  CHECK(s.lower(0) == -vp.rate_limit);
}

TEST_CASE("closed loop: nominal controller completes the straight course") {
  const GateCourse c = straight_course();
  RacingConfig rc;
  rc.mppi = small_mppi(80, 128);
  rc.timeout = 30.0;
  std::vector<int> observed;
  const RunLog log = pixelmpc_loop(c, nullptr, rc, 3, [&](int k, const RobotStated&, const ControlInputd&) {
    observed.push_back(k);
  });
  REQUIRE(log.outcome == Outcome::Success);
  CHECK(log.lap_time == doctest::Approx(double(log.ticks.size()) * kDt));
  CHECK(observed.size() == log.ticks.size());
  CHECK(log.ticks.back().active_gate == c.final_gate());
  for (std::size_t k = 0; k < log.ticks.size(); ++k) {
    REQUIRE(observed[k] == int(k));
    REQUIRE(log.ticks[k].t == doctest::Approx(double(k) * kDt));
  }

  SUBCASE("pixel mode with no pixel weight flies the same lap") {
    RacingConfig pm = rc;
    pm.mode = ControllerMode::PixelMpc;
    pm.cost.c_pixel = 0.0;
    const DofModel zero = DofModel::zero(rc.vehicle);
    CHECK(same_log(log, pixelmpc_loop(c, &zero, pm, 3)));
  }
  SUBCASE("seed determinism") {
    CHECK(same_log(log, pixelmpc_loop(c, nullptr, rc, 3)));
  }
}

TEST_CASE("closed loop validation") {
  const GateCourse c = straight_course();
  RacingConfig rc;
  rc.mode = ControllerMode::PixelMpc;
  rc.cost.c_pixel = 1.0;
  CHECK_THROWS_AS(pixelmpc_loop(c, nullptr, rc, 1), ConfigurationError);
  rc.mode = ControllerMode::Nominal;
  CHECK(rc.effective_cost().c_pixel == 0.0);
  rc.timeout = 0.0;
  CHECK_THROWS_AS(pixelmpc_loop(c, nullptr, rc, 1), InvalidArgument);
}

TEST_CASE("closed loop times out when nothing moves") {
  const GateCourse c = straight_course();
  RacingConfig rc;
  rc.mppi = small_mppi(20, 8);
  rc.cost.desired_speed = 0.0;
  rc.cost.c1 = 0.0;
  rc.cost.t_f_pixel = 0.25;
  rc.timeout = 0.5;
  const RunLog log = pixelmpc_loop(c, nullptr, rc, 2);
  CHECK(log.outcome == Outcome::Timeout);
  CHECK(log.ticks.size() == 20);
}
