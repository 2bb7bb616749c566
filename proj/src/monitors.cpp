#include "triofm/monitors.hpp"

#include <algorithm>
#include <cmath>

namespace triofm {

namespace {

enum class CheckResult { Pass, Warn, Fail };

// Strict inequality observed > bound, with the warn band inside the slack.
CheckResult check_strict_greater(double observed, double bound, double slack) {
  double deficit = bound - observed;
  if (deficit <= 0.0) return CheckResult::Pass;
  return deficit <= slack ? CheckResult::Warn : CheckResult::Fail;
}

// observed <= bound with slack.
CheckResult check_leq(double observed, double bound, double slack) {
  double excess = observed - bound;
  if (excess <= 0.0) return CheckResult::Pass;
  return excess <= slack ? CheckResult::Warn : CheckResult::Fail;
}

void record(MonitorReport& rep, CheckResult r, const std::string& lemma,
            std::int64_t t, double observed, double bound, double slack) {
  rep.checks++;
  if (r == CheckResult::Pass) return;
  LemmaViolation v{lemma, t, observed, bound, slack};
  if (r == CheckResult::Warn) {
    rep.warnings.push_back(std::move(v));
  } else {
    rep.violations.push_back(std::move(v));
    rep.passed = false;
  }
}

}  // namespace

// -- BoundsMonitor ------------------------------------------------------------

BoundsMonitor::BoundsMonitor(const DomainBounds& bounds) : radii_(bounds.radii) {
  report_.name = "bounded-domain";
}

void BoundsMonitor::observe(const StepView& view) {
  for (size_t i = 0; i < radii_.size(); ++i) {
    double norm = view.X.col_norms[i];
    report_.checks++;
    double margin = radii_[i] - norm;
    report_.worst_margin = std::min(report_.worst_margin, margin);
    if (norm > radii_[i]) {  // exact inequality, no slack
      report_.violations.push_back({"bounded-domain", view.t, norm, radii_[i], 0.0});
      report_.passed = false;
    }
  }
}

MonitorReport BoundsMonitor::finalize() const { return report_; }

// -- TangentContractionMonitor -------------------------------------------------

TangentContractionMonitor::TangentContractionMonitor(const Spectrum& S, double alpha)
    : S_(&S) {
  if (S.n < 2) throw std::invalid_argument("tangent monitor: need n >= 2");
  double l1 = S.eigenvalues[0], l2 = S.eigenvalues[1];
  if (std::abs(l2 - l1) < 1e-10)
    throw DegenerateSpectrumError("tangent monitor: leading eigenvalue gap below 1e-10");
  ratio_ = (1.0 - alpha * l2) / (1.0 - alpha * l1);
  report_.name = "tangent-contraction";
  report_.stats.push_back({"contraction_ratio", ratio_});
}

void TangentContractionMonitor::observe(const StepView& view) {
  double tan = view.X.col_norms[0] == 0.0
                   ? std::numeric_limits<double>::infinity()
                   : eigvec_tangent(*S_, 0, view.X.col(0));
  observe_tangent(view.t, tan);
}

void TangentContractionMonitor::observe_tangent(std::int64_t t, double tan_value) {
  if (prev_t_ >= 0 && std::isfinite(prev_) && t > prev_t_) {
    // Bound compounds over the stride; slack applied once.
    double factor = std::pow(ratio_, double(t - prev_t_));
    double bound = factor * prev_;
    double slack = 1e-12 * (1.0 + prev_);
    record(report_, check_leq(tan_value, bound, slack), "tangent-contraction", t,
           tan_value, bound, slack);
    if (std::isfinite(tan_value))
      report_.worst_margin = std::min(report_.worst_margin, bound + slack - tan_value);
  }
  prev_ = tan_value;
  prev_t_ = t;
}

MonitorReport TangentContractionMonitor::finalize() const { return report_; }

// -- NormFloorMonitor ----------------------------------------------------------

NormFloorMonitor::NormFloorMonitor(int p, double lambda_q) {
  if (lambda_q >= 0.0)
    throw std::invalid_argument("norm floor: lambda_q must be negative");
  floor_ = std::sqrt(-2.0 * lambda_q) / 4.0;
  last_below_.assign(p, -1);
  final_norm_.assign(p, 0.0);
}

void NormFloorMonitor::observe(const StepView& view) {
  observe_norms(view.t, view.X.col_norms);
}

void NormFloorMonitor::observe_norms(std::int64_t t,
                                     std::span<const double> col_norms) {
  for (size_t i = 0; i < last_below_.size(); ++i) {
    if (col_norms[i] < floor_) last_below_[i] = t;
    final_norm_[i] = col_norms[i];
  }
  final_t_ = t;
}

MonitorReport NormFloorMonitor::finalize() const {
  MonitorReport rep;
  rep.name = "norm-floor";
  rep.stats.push_back({"floor", floor_});
  for (size_t i = 0; i < last_below_.size(); ++i) {
    rep.checks++;
    if (final_norm_[i] < floor_) {
      // Converged to (or still heading to) zero; the floor does not apply.
      rep.stats.push_back({"col" + std::to_string(i + 1) + "_zero", 1.0});
      continue;
    }
    std::int64_t N = last_below_[i] + 1;  // floor holds from N to the end
    rep.stats.push_back({"col" + std::to_string(i + 1) + "_N", double(N)});
    if (N > final_t_) {
      rep.passed = false;
      rep.violations.push_back(
          {"norm-floor", final_t_, final_norm_[i], floor_, 0.0});
    }
    rep.worst_margin = std::min(rep.worst_margin, final_norm_[i] - floor_);
  }
  return rep;
}

// -- OffspaceDecayMonitor --------------------------------------------------------

OffspaceDecayMonitor::OffspaceDecayMonitor(const Spectrum& S, int column_index,
                                           double alpha, double r_i, double eps,
                                           double final_tol,
                                           std::int64_t gate_check_every)
    : S_(&S),
      i_(column_index),
      alpha_(alpha),
      r_i_(r_i),
      eps_(eps),
      final_tol_(final_tol),
      gate_check_every_(std::max<std::int64_t>(1, gate_check_every)) {
  if (i_ < 1) throw std::invalid_argument("offspace monitor: column index >= 1");
  for (int k = 0; k < i_ - 1; ++k) tracked_.push_back(k);
  for (int k = S.q; k < S.n; ++k) tracked_.push_back(k);
  prev_.assign(tracked_.size(), 0.0);
  report_.name = "offspace-decay";
  gate_open_ = (i_ == 1);  // empty prefix: no residual to wait for
  if (gate_open_) gate_t_ = 0;
}

void OffspaceDecayMonitor::observe(const StepView& view) {
  if (!gate_open_ && view.t % gate_check_every_ == 0) {
    double e = residual_E_norm(view.X, i_ - 1, *S_);
    if (e <= eps_ * eps_ * eps_ / (2.0 * r_i_)) {
      gate_open_ = true;
      gate_t_ = view.t;
      prev_valid_ = false;
    }
  }
  if (!gate_open_) return;

  std::span<const double> x = view.X.col(i_ - 1);
  const double contraction = 1.0 - alpha_ * eps_ * eps_ / 2.0;
  for (size_t idx = 0; idx < tracked_.size(); ++idx) {
    int k = tracked_[idx];
    double v = std::abs(S_->u_dot(k, x));
    if (prev_valid_) {
      if (i_ == 1 && k >= S_->q) {
        // No prefix noise: positive-eigenvalue components shrink every step.
        double bound = prev_[idx];
        record(report_, check_leq(v, bound, inequality_slack(bound)),
               "offspace-monotone", view.t, v, bound, inequality_slack(bound));
      } else if (prev_[idx] > eps_) {
        double bound = contraction * prev_[idx];
        record(report_, check_leq(v, bound, inequality_slack(bound)),
               "offspace-contraction", view.t, v, bound, inequality_slack(bound));
      }
    }
    prev_[idx] = v;
  }
  prev_valid_ = true;
}

MonitorReport OffspaceDecayMonitor::finalize() const {
  MonitorReport rep = report_;
  rep.stats.push_back({"column", double(i_)});
  rep.stats.push_back({"gate_open", gate_open_ ? 1.0 : 0.0});
  if (!gate_open_) {
    // Premise (prefix convergence) not realized in this run; the decay
    // assertions are vacuous and reported as such.
    rep.stats.push_back({"premise_realized", 0.0});
    return rep;
  }
  rep.stats.push_back({"premise_realized", 1.0});
  rep.stats.push_back({"gate_t", double(gate_t_)});
  double worst = 0.0;
  for (size_t idx = 0; idx < tracked_.size(); ++idx) worst = std::max(worst, prev_[idx]);
  rep.stats.push_back({"final_max_component", worst});
  if (prev_valid_) {
    rep.checks++;
    if (worst >= final_tol_) {
      rep.passed = false;
      rep.violations.push_back({"offspace-final", -1, worst, final_tol_, 0.0});
    }
  }
  return rep;
}

// -- energy descent ------------------------------------------------------------

MonitorReport monitor_energy_descent(const EnergyContext& ctx,
                                     const std::vector<std::vector<double>>& path,
                                     double alpha, double eps) {
  MonitorReport rep;
  rep.name = "energy-descent";
  std::int64_t active = 0;
  for (size_t t = 0; t + 1 < path.size(); ++t) {
    std::vector<double> g = energy_grad_F(ctx, path[t]);
    if (norm2(g) <= eps) continue;
    active++;
    double f0 = energy_F(ctx, path[t]);
    double f1 = energy_F(ctx, path[t + 1]);
    double step = 0.0;
    for (size_t r = 0; r < path[t].size(); ++r) {
      double d = path[t][r] - path[t + 1][r];
      step += d * d;
    }
    step = std::sqrt(step);
    double bound = std::max(0.5 * step * eps, 0.25 * alpha * eps * eps);
    double slack = inequality_slack(bound);
    record(rep, check_strict_greater(f0 - f1, bound, slack), "energy-descent",
           std::int64_t(t), f0 - f1, bound, slack);
    rep.worst_margin = std::min(rep.worst_margin, (f0 - f1) - bound);
  }
  rep.stats.push_back({"active_steps", double(active)});
  return rep;
}

// -- NeighborhoodMonitor ---------------------------------------------------------

NeighborhoodMonitor::NeighborhoodMonitor(const EnergyContext& ctx, const Spectrum& S,
                                         double eps)
    : ctx_(&ctx), eps_(eps) {
  double limit = stationary_epsilon_limit(ctx, S);
  if (!(eps > 0.0) || eps >= limit)
    throw std::invalid_argument("neighborhood monitor: eps violates the premise bound " +
                                std::to_string(limit));
  double sqrt_n = std::sqrt(double(ctx.A->n()));
  radius_ = sqrt_n * std::cbrt(eps);
  revisit_radius_ = 6.0 * radius_;
  grad_buf_.resize(ctx.A->n());
  pts_.resize(ctx.stationary_set.size());
  report_.name = "neighborhood-transitions";

  // When A is diagonal and every prefix column is a single scaled axis,
  // the deflated operator is diagonal too and grad F costs O(n).
  if (ctx.A->is_diagonal()) {
    std::vector<double> d(ctx.A->diagonal().begin(), ctx.A->diagonal().end());
    bool axis_prefix = true;
    for (int c = 0; c < ctx.prefix_cols && axis_prefix; ++c) {
      int nonzeros = 0, axis = -1;
      for (int r = 0; r < ctx.prefix.n; ++r)
        if (ctx.prefix.at(r, c) != 0.0) {
          nonzeros++;
          axis = r;
        }
      if (nonzeros == 1) {
        double v = ctx.prefix.at(axis, c);
        d[axis] += v * v;
      } else {
        axis_prefix = false;
      }
    }
    if (axis_prefix) atilde_diag_ = std::move(d);
  }
}

double NeighborhoodMonitor::grad_norm(std::span<const double> x) const {
  if (!atilde_diag_.empty()) {
    double r_sq = dot(x, x);
    for (size_t r = 0; r < x.size(); ++r)
      grad_buf_[r] = (atilde_diag_[r] + r_sq) * x[r];
    return norm2(grad_buf_);
  }
  energy_grad_F(*ctx_, x, grad_buf_);
  return norm2(grad_buf_);
}

void NeighborhoodMonitor::observe_column(std::int64_t t, std::span<const double> x) {
  // Distance tracking for already-left points (same-point revisit bound).
  for (size_t s = 0; s < pts_.size(); ++s) {
    if (!pts_[s].left) continue;
    double d2 = 0.0;
    const std::vector<double>& sx = ctx_->stationary_set[s].x;
    for (size_t r = 0; r < x.size(); ++r) {
      double diff = x[r] - sx[r];
      d2 += diff * diff;
    }
    pts_[s].max_dist = std::max(pts_[s].max_dist, std::sqrt(d2));
  }

  double gn = grad_norm(x);
  int inside = -1;
  if (gn < eps_) {
    double best = std::numeric_limits<double>::infinity();
    int best_s = -1;
    for (size_t s = 0; s < pts_.size(); ++s) {
      double d2 = 0.0;
      const std::vector<double>& sx = ctx_->stationary_set[s].x;
      for (size_t r = 0; r < x.size(); ++r) {
        double diff = x[r] - sx[r];
        d2 += diff * diff;
      }
      double d = std::sqrt(d2);
      if (d < best) {
        best = d;
        best_s = int(s);
      }
    }
    if (best < radius_) inside = best_s;
  }

  if (inside != cur_) {
    if (cur_ >= 0) {
      // Leaving cur_.
      pts_[cur_].left = true;
      pts_[cur_].max_dist = 0.0;
    }
    if (inside >= 0) {
      visits_++;
      double f_new = ctx_->stationary_set[inside].F;
      // (a) never enter an equal-or-higher-energy neighborhood after
      // leaving some point.
      for (size_t s = 0; s < pts_.size(); ++s) {
        if (!pts_[s].left || int(s) == inside) continue;
        double f_old = ctx_->stationary_set[s].F;
        double slack = inequality_slack(f_old);
        record(report_, check_strict_greater(f_old, f_new, slack),
               "neighborhood-energy-order", t, f_new, f_old, slack);
      }
      // (b) revisit: all intermediate points stayed near s.
      if (pts_[inside].left) {
        double slack = inequality_slack(revisit_radius_);
        record(report_, check_leq(pts_[inside].max_dist, revisit_radius_, slack),
               "neighborhood-revisit-radius", t, pts_[inside].max_dist,
               revisit_radius_, slack);
      }
      if (last_ >= 0 && last_ != inside) transitions_++;
      last_ = inside;
    }
    cur_ = inside;
  }
}

MonitorReport NeighborhoodMonitor::finalize() const {
  MonitorReport rep = report_;
  // (c) transition count bounded by the stationary-set size.
  int bound = int(ctx_->stationary_set.size());
  rep.checks++;
  if (transitions_ > bound) {
    rep.passed = false;
    rep.violations.push_back(
        {"neighborhood-transition-count", -1, double(transitions_), double(bound), 0.0});
  }
  rep.stats.push_back({"visits", double(visits_)});
  rep.stats.push_back({"transitions", double(transitions_)});
  rep.stats.push_back({"transition_bound", double(bound)});
  rep.stats.push_back({"radius", radius_});
  return rep;
}

}  // namespace triofm
