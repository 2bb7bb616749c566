// Runtime monitors: each convergence guarantee of the method turned into
// a per-iteration check over a realized trajectory. Monitors are pure
// observers; they never feed back into the iteration.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "triofm/engine.hpp"
#include "triofm/theory.hpp"

namespace triofm {

struct LemmaViolation {
  std::string lemma;
  std::int64_t iteration = 0;
  double observed = 0.0;
  double bound = 0.0;
  double slack = 0.0;
};

struct MonitorReport {
  std::string name;
  bool passed = true;
  std::vector<LemmaViolation> violations;  // beyond the slack band
  std::vector<LemmaViolation> warnings;    // inside the slack band
  std::int64_t checks = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::vector<std::pair<std::string, double>> stats;
};

/// Additive slack for strict inequalities: 1e-12 * (1 + |bound|).
inline double inequality_slack(double bound) {
  return 1e-12 * (1.0 + std::abs(bound));
}

/// Admissible-domain monitor: ||x_i^(t)|| <= R_i at every step, checked
/// exactly (no slack).
class BoundsMonitor {
 public:
  explicit BoundsMonitor(const DomainBounds& bounds);
  void observe(const StepView& view);
  MonitorReport finalize() const;

 private:
  std::vector<double> radii_;
  MonitorReport report_;
};

/// First-column angle contraction: with ratio = (1 - a*l2) / (1 - a*l1),
/// tan theta^(t+1) <= ratio * tan theta^(t) + 1e-12 * (1 + tan theta^(t))
/// whenever both tangents are finite. Comparisons happen in the
/// eigenbasis, reached through u_1 dot products.
class TangentContractionMonitor {
 public:
  TangentContractionMonitor(const Spectrum& S, double alpha);
  void observe(const StepView& view);
  /// Replay entry: feed a precomputed tangent value.
  void observe_tangent(std::int64_t t, double tan_value);
  MonitorReport finalize() const;
  double ratio() const { return ratio_; }

 private:
  const Spectrum* S_;
  double ratio_;
  double prev_ = -1.0;
  std::int64_t prev_t_ = -1;
  MonitorReport report_;
};

/// Column-norm floor: after some step N, ||x_i^(t)|| >= sqrt(-2*l_q)/4
/// through the end of the trace, for every column that converges to a
/// nonzero point. Reports the observed N per column.
class NormFloorMonitor {
 public:
  NormFloorMonitor(int p, double lambda_q);
  void observe(const StepView& view);
  void observe_norms(std::int64_t t, std::span<const double> col_norms);
  MonitorReport finalize() const;
  double floor() const { return floor_; }

 private:
  double floor_;
  std::vector<std::int64_t> last_below_;  // -1 = never below
  std::vector<double> final_norm_;
  std::int64_t final_t_ = -1;
};

/// Off-eigenspace decay for column i: components along u_k for
/// k in [1,i) u (q,n] must contract by (1 - a*eps^2/2) per step while
/// above eps (once the prefix residual ||E|| has dropped below
/// eps^3 / (2 R_i)), and end below final_tol. For i = 1 the
/// positive-eigenvalue components must decay monotonically from the
/// start.
class OffspaceDecayMonitor {
 public:
  OffspaceDecayMonitor(const Spectrum& S, int column_index, double alpha,
                       double r_i, double eps = 3e-2, double final_tol = 1e-6,
                       std::int64_t gate_check_every = 64);
  void observe(const StepView& view);
  MonitorReport finalize() const;
  bool gate_open() const { return gate_open_; }

 private:
  const Spectrum* S_;
  int i_;  // 1-based
  double alpha_, r_i_, eps_, final_tol_;
  std::int64_t gate_check_every_;
  std::vector<int> tracked_;  // eigenindices in [0,i-1) u [q,n)
  std::vector<double> prev_;
  bool prev_valid_ = false;
  bool gate_open_ = false;
  std::int64_t gate_t_ = -1;
  MonitorReport report_;
};

/// Energy descent for a frozen-prefix column run: at every step with
/// ||grad F|| > eps,
///   F(x^t) - F(x^{t+1}) > max( 0.5*||x^t - x^{t+1}||*eps, 0.25*a*eps^2 ).
MonitorReport monitor_energy_descent(const EnergyContext& ctx,
                                     const std::vector<std::vector<double>>& path,
                                     double alpha, double eps);

/// Stationary-neighborhood bookkeeping for one column:
///  (a) once a neighborhood is left, no later visit reaches a stationary
///      point of equal or higher energy;
///  (b) between two visits to the same point s, the distance to s stays
///      below 6*sqrt(n)*eps^{1/3};
///  (c) the number of distinct-neighborhood transitions never exceeds the
///      stationary-set size.
class NeighborhoodMonitor {
 public:
  NeighborhoodMonitor(const EnergyContext& ctx, const Spectrum& S, double eps);
  void observe_column(std::int64_t t, std::span<const double> x);
  MonitorReport finalize() const;
  int transitions() const { return transitions_; }

 private:
  double grad_norm(std::span<const double> x) const;

  const EnergyContext* ctx_;
  double eps_, radius_, revisit_radius_;
  std::vector<double> atilde_diag_;  // set when the deflated operator is diagonal
  mutable std::vector<double> grad_buf_;
  int cur_ = -1;   // stationary index currently visited, -1 = outside
  int last_ = -1;  // last visited stationary index
  struct PointState {
    bool left = false;        // visited and exited at least once
    double max_dist = 0.0;    // running max distance since leaving
  };
  std::vector<PointState> pts_;
  int transitions_ = 0;
  std::int64_t visits_ = 0;
  MonitorReport report_;
};

}  // namespace triofm
