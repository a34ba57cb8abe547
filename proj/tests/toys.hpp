#pragma once

// One-dimensional double integrator used to sanity-check MPPI against exhaustive search.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "pixelmpc/mppi.hpp"

namespace toy {

struct DoubleIntegrator {
  static constexpr int kSteps = 4;
  double dt = 0.5;
  double target = 1.0;
  double effort = 1.0;       // weight on sum u^2 dt
  double terminal = 1000.0;  // weight on (x_T - target)^2 + v_T^2
  double bound = 4.0;        // |u| <= bound

  using Seq = Eigen::Matrix<double, 1, kSteps>;

  Eigen::Vector2d terminal_state(const Seq& u) const {
    double x = 0.0, v = 0.0;
    for (int t = 0; t < kSteps; ++t) {
      x += v * dt;
      v += u(t) * dt;
    }
    return {x, v};
  }

  double cost(const Seq& u) const {
    const Eigen::Vector2d s = terminal_state(u);
    return effort * u.squaredNorm() * dt + terminal * ((s(0) - target) * (s(0) - target) + s(1) * s(1));
  }

  /// Unconstrained minimizer in closed form (regularized least squares).
  Seq exact() const {
    // terminal state = A u with rows x_T and v_T
    Eigen::Matrix<double, 2, kSteps> a;
    for (int t = 0; t < kSteps; ++t) {
      a(0, t) = (kSteps - 1 - t) * dt * dt;
      a(1, t) = dt;
    }
    const Eigen::Vector2d b(target, 0.0);
    const Eigen::Matrix<double, kSteps, kSteps> h =
        terminal * a.transpose() * a + effort * dt * Eigen::Matrix<double, kSteps, kSteps>::Identity();
    return (h.ldlt().solve(terminal * a.transpose() * b)).transpose();
  }

  /// Two-level grid search: a coarse grid over the whole box, then a fine grid around the best point.
  Seq grid_search(int coarse = 33, int fine = 21) const {
    Seq best = Seq::Zero();
    double best_cost = std::numeric_limits<double>::infinity();
    auto scan = [&](const Seq& center, double half, int n) {
      Seq u;
      const double h = 2.0 * half / (n - 1);
      for (int i0 = 0; i0 < n; ++i0) {
        u(0) = std::clamp(center(0) - half + h * i0, -bound, bound);
        for (int i1 = 0; i1 < n; ++i1) {
          u(1) = std::clamp(center(1) - half + h * i1, -bound, bound);
          for (int i2 = 0; i2 < n; ++i2) {
            u(2) = std::clamp(center(2) - half + h * i2, -bound, bound);
            for (int i3 = 0; i3 < n; ++i3) {
              u(3) = std::clamp(center(3) - half + h * i3, -bound, bound);
              const double c = cost(u);
              if (c < best_cost) {
                best_cost = c;
                best = u;
              }
            }
          }
        }
      }
    };
    scan(Seq::Zero(), bound, coarse);
    const double step = 2.0 * bound / (coarse - 1);
    scan(best, step, fine);
    scan(best, step / 10.0, fine);
    return best;
  }

  pixelmpc::MppiSampling<1> sampling(int samples = 1024, double lambda = 0.05, double sigma = 0.1) const {
    pixelmpc::MppiSampling<1> s;
    s.samples = samples;
    s.iterations = 1;
    s.lambda = lambda;
    s.sigma << sigma;
    s.lower << -bound;
    s.upper << bound;
    return s;
  }

  /// `iterations` MPPI updates from the zero sequence.
  Seq mppi(pixelmpc::Rng& rng, int iterations = 200) const {
    pixelmpc::ControlSeq<1> u = pixelmpc::ControlSeq<1>::Zero(1, kSteps);
    const auto s = sampling();
    auto evaluate = [&](const std::vector<pixelmpc::ControlSeq<1>>& cands, std::vector<double>& costs) {
      for (std::size_t i = 0; i < cands.size(); ++i) costs[i] = cost(Seq(cands[i]));
    };
    for (int k = 0; k < iterations; ++k) u = pixelmpc::mppi_optimize<1>(u, s, rng, evaluate);
    return Seq(u);
  }
};

}  // namespace toy
