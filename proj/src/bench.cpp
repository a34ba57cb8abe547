#include "pixelmpc/bench.hpp"

#include <algorithm>
#include <chrono>

#include "pixelmpc/metrics.hpp"

namespace pixelmpc {

namespace {

double rollout_once(const DofModel& model, std::vector<BatchedMlp::RowMatrix>& inputs, BatchedMlp::RowMatrix& vel,
                    BatchedMlp::Workspace& ws, double dt) {
  const Eigen::Index n = inputs.front().cols();
  std::vector<float> u(std::size_t(n), 0.5f), v(std::size_t(n), 0.5f);
  double checksum = 0.0;
  for (auto& x : inputs) {
    for (Eigen::Index j = 0; j < n; ++j) {
      x(4, j) = u[std::size_t(j)];
      x(5, j) = v[std::size_t(j)];
    }
    model.predict_velocity_batch(x, vel, ws);
    for (Eigen::Index j = 0; j < n; ++j) {
      u[std::size_t(j)] += float(vel(0, j) * dt);
      v[std::size_t(j)] += float(vel(1, j) * dt);
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) checksum += u[std::size_t(j)] + v[std::size_t(j)];
  return checksum;
}

}  // namespace

BenchResult bench_dof(const DofModel& model, const BenchConfig& cfg, std::uint64_t seed) {
  if (cfg.repetitions < 1) throw InvalidArgument("bench needs at least one repetition");
  BenchResult result;
  result.budget_ms = cfg.budget_ms;
  Rng rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  const VehicleParams vp;
  volatile double sink = 0.0;
  for (int batch : cfg.batches) {
    for (int horizon : cfg.horizons) {
      if (batch < 1 || horizon < 1) throw InvalidArgument("bench batch and horizon must be positive");
      std::vector<BatchedMlp::RowMatrix> inputs(static_cast<std::size_t>(horizon));
      for (auto& x : inputs) {
        x.resize(kDofInputWidth, batch);
        for (int j = 0; j < batch; ++j) {
          ControlInputd u;
          u.omega = Vec3<double>(0.3 * n01(rng), 0.3 * n01(rng), 0.3 * n01(rng));
          u.thrust = vp.hover_thrust() * (1.0 + 0.2 * n01(rng));
          const Quat<double> q = quat_from_euler_zyx(0.2 * n01(rng), 0.2 * n01(rng), M_PI * n01(rng));
          const auto row = model.encode(q, PixelStated{}, u);
          for (int i = 0; i < kDofInputWidth; ++i) x(i, j) = row[std::size_t(i)];
        }
      }
      BatchedMlp::RowMatrix vel;
      BatchedMlp::Workspace ws;
      sink = sink + rollout_once(model, inputs, vel, ws, 0.025);  // warm-up
      std::vector<double> ms;
      ms.reserve(std::size_t(cfg.repetitions));
      for (int r = 0; r < cfg.repetitions; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        sink = sink + rollout_once(model, inputs, vel, ws, 0.025);
        ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
      }
      const Summary s = summarize(ms);
      result.rows.push_back({batch, horizon, s.mean, s.two_sigma, *std::max_element(ms.begin(), ms.end())});
    }
  }
  const auto largest = std::max_element(result.rows.begin(), result.rows.end(), [](const BenchRow& a, const BenchRow& b) {
    return double(a.batch) * a.horizon < double(b.batch) * b.horizon;
  });
  result.fits_budget = largest != result.rows.end() && largest->mean_ms < cfg.budget_ms;
  return result;
}

}  // namespace pixelmpc
