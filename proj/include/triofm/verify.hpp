// Suite runners behind the `verify` command: fresh instrumented solves
// checked against every monitor, plus fixed-point family sweeps.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "triofm/io.hpp"
#include "triofm/monitors.hpp"
#include "triofm/theory.hpp"

namespace triofm {

enum class SuiteStatus { Pass, Fail, Refused };

struct SuiteResult {
  std::string suite;
  SuiteStatus status = SuiteStatus::Pass;
  std::vector<MonitorReport> reports;
  std::string note;
};

struct VerifyOptions {
  int p = 2;
  std::uint64_t seed = 1;
  std::int64_t max_iter = 2000000;
  double tol = 1e-6;
  /// The shared instrumented run converges to this much tighter target so
  /// the prefix-residual gate of the off-space monitor can open.
  double deep_tol = 1e-11;
  /// Cap on exhaustive fixed-point enumeration; beyond it the sweep
  /// samples this many random specs instead.
  std::int64_t enumeration_cap = 50000;
};

inline const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names = {
      "fixed-points", "bounds",   "tangent",       "norm-floor",
      "energy",       "offspace", "neighborhoods"};
  return names;
}

/// Runs one suite (or "all"). Degenerate spectra and p > q refuse with
/// SuiteStatus::Refused rather than producing meaningless checks.
std::vector<SuiteResult> run_verify(const SparseSymMatrix& A, const Spectrum& S,
                                    const std::string& suite,
                                    const VerifyOptions& opts);

/// Replay path: re-check trace-borne suites (bounds, tangent, norm-floor)
/// from a recorded CSV instead of a fresh solve.
std::vector<SuiteResult> run_verify_replay(const TraceCsvContents& trace,
                                           const SparseSymMatrix& A,
                                           const Spectrum& S,
                                           const std::string& suite,
                                           const VerifyOptions& opts);

bool all_passed(const std::vector<SuiteResult>& results);
bool any_refused(const std::vector<SuiteResult>& results);

}  // namespace triofm
