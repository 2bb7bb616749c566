// The saddle-escape experiment: repeated solves started a hair away from
// randomly sampled unstable fixed points, with per-trial convergence,
// plateau, and neighborhood bookkeeping.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "triofm/monitors.hpp"
#include "triofm/theory.hpp"

namespace triofm {

struct SaddleTrialResult {
  int index = 0;
  Outcome outcome = Outcome::MaxIter;
  std::int64_t iterations = 0;
  bool reached_stable = false;  // final e_vec < tol
  double evec_initial = 0.0;
  double evec_final = 0.0;
  /// e_vec drop across the first 10 iterations vs. the best drop over any
  /// later 10-iteration window; near a saddle the former must be smaller.
  double early_drop = 0.0;
  double best_late_drop = 0.0;
  bool plateau_ok = false;
  std::string saddle_desc;
  std::vector<MonitorReport> neighborhood_reports;  // per column when enabled
};

struct SaddleEscapeOptions {
  int trials = 100;
  double delta = 1e-6;
  std::uint64_t seed = 0;
  std::int64_t max_iter = 40000000;
  double tol = 1e-6;
  int workers = 0;  // 0 = hardware concurrency
  bool neighborhood_monitors = false;
};

struct SaddleEscapeResult {
  std::vector<SaddleTrialResult> trials;
  int successes = 0;      // trials with reached_stable
  int plateau_count = 0;  // trials with plateau_ok
  double alpha = 0.0;
};

/// Runs the trials (in parallel workers when available); trial i derives
/// its randomness from seed + i, so results are independent of worker
/// scheduling and are reported in trial order.
SaddleEscapeResult run_saddle_escape(const SparseSymMatrix& A, const Spectrum& S,
                                     int p, const SaddleEscapeOptions& opts);

std::string describe_spec(const FixedPointSpec& spec);

}  // namespace triofm
