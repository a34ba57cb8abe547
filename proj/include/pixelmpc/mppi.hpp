#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "pixelmpc/errors.hpp"
#include "pixelmpc/random.hpp"

namespace pixelmpc {

/// Control sequence: one column per time step.
template <int Dim>
using ControlSeq = Eigen::Matrix<double, Dim, Eigen::Dynamic>;

template <int Dim>
struct MppiSampling {
  int samples = 512;
  int iterations = 1;
  double lambda = 1.0;
  Eigen::Matrix<double, Dim, 1> sigma;
  Eigen::Matrix<double, Dim, 1> lower;
  Eigen::Matrix<double, Dim, 1> upper;
};

struct MppiReport {
  double min_cost = 0.0;
  int best_sample = -1;
  double effective_samples = 0.0;
  int finite_samples = 0;
};

/// Exponentially weighted average of candidate sequences, weights exp(-(S_i - min S) / lambda).
/// Non-finite costs get zero weight. Throws OptimizerFailure if no cost is finite.
template <int Dim>
ControlSeq<Dim> mppi_combine(const std::vector<ControlSeq<Dim>>& candidates, const std::vector<double>& costs,
                             double lambda, MppiReport* report = nullptr, std::vector<double>* weights_out = nullptr) {
  if (candidates.empty() || candidates.size() != costs.size()) {
    throw InvalidArgument("mppi_combine: candidates and costs must be non-empty and equal in number");
  }
  if (!(lambda > 0.0)) throw InvalidArgument("mppi_combine: temperature must be positive");
  double min_cost = std::numeric_limits<double>::infinity();
  int best = -1;
  for (std::size_t i = 0; i < costs.size(); ++i) {
    if (std::isfinite(costs[i]) && costs[i] < min_cost) {
      min_cost = costs[i];
      best = static_cast<int>(i);
    }
  }
  if (best < 0) throw OptimizerFailure("every rollout has a non-finite cost");

  std::vector<double> w(costs.size(), 0.0);
  double total = 0.0;
  int finite = 0;
  for (std::size_t i = 0; i < costs.size(); ++i) {
    if (!std::isfinite(costs[i])) continue;
    ++finite;
    w[i] = std::exp(-(costs[i] - min_cost) / lambda);
    total += w[i];
  }
  ControlSeq<Dim> out = ControlSeq<Dim>::Zero(candidates.front().rows(), candidates.front().cols());
  double sq = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (w[i] == 0.0) continue;
    w[i] /= total;
    sq += w[i] * w[i];
    out += w[i] * candidates[i];
  }
  if (report != nullptr) {
    report->min_cost = min_cost;
    report->best_sample = best;
    report->effective_samples = 1.0 / sq;
    report->finite_samples = finite;
  }
  if (weights_out != nullptr) *weights_out = std::move(w);
  return out;
}

/// Gaussian perturbations of `u`, clamped to the bounds. Draw order: sample, step, channel.
template <int Dim>
void mppi_sample(const ControlSeq<Dim>& u, const MppiSampling<Dim>& cfg, Rng& rng,
                 std::vector<ControlSeq<Dim>>& candidates) {
  std::normal_distribution<double> n01(0.0, 1.0);
  candidates.resize(static_cast<std::size_t>(cfg.samples));
  for (auto& c : candidates) {
    c.resize(u.rows(), u.cols());
    for (Eigen::Index t = 0; t < u.cols(); ++t) {
      for (Eigen::Index d = 0; d < u.rows(); ++d) {
        const double value = u(d, t) + cfg.sigma(d) * n01(rng);
        c(d, t) = std::clamp(value, cfg.lower(d), cfg.upper(d));
      }
    }
  }
}

/// K rounds of sample / evaluate / combine. `evaluate(candidates, costs)` must fill one cost per
/// candidate and be deterministic.
template <int Dim, typename Evaluate>
ControlSeq<Dim> mppi_optimize(const ControlSeq<Dim>& u_init, const MppiSampling<Dim>& cfg, Rng& rng,
                              Evaluate&& evaluate, MppiReport* report = nullptr) {
  if (cfg.samples < 1 || cfg.iterations < 1) throw InvalidArgument("mppi: samples and iterations must be >= 1");
  if (!((cfg.sigma.array() > 0.0).all())) throw InvalidArgument("mppi: noise std must be positive");
  ControlSeq<Dim> u = u_init;
  std::vector<ControlSeq<Dim>> candidates;
  std::vector<double> costs;
  for (int k = 0; k < cfg.iterations; ++k) {
    mppi_sample(u, cfg, rng, candidates);
    costs.assign(candidates.size(), 0.0);
    evaluate(candidates, costs);
    u = mppi_combine(candidates, costs, cfg.lambda, report);
  }
  return u;
}

}  // namespace pixelmpc
