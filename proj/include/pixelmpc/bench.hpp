#pragma once

#include "pixelmpc/config.hpp"

namespace pixelmpc {

struct BenchRow {
  int batch = 0;
  int horizon = 0;
  double mean_ms = 0.0;
  double two_sigma_ms = 0.0;
  double max_ms = 0.0;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  double budget_ms = 25.0;
  bool fits_budget = false;  // largest batch x horizon mean below the budget
};

/// Wall-clock latency of multi-step single-pixel flow rollouts: `horizon` sequential batched
/// predictions over `batch` pixels, with Euler pixel updates, repeated cfg.repetitions times.
BenchResult bench_dof(const DofModel& model, const BenchConfig& cfg, std::uint64_t seed);

}  // namespace pixelmpc
