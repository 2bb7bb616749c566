#include "triofm/verify.hpp"

#include <algorithm>
#include <cmath>

namespace triofm {

namespace {

// Exhaustive count of fixed-point specs for (q, p):
// sum_k C(p,k) * q!/(q-k)! * 2^k over the number of nonzero columns.
double spec_count(int q, int p) {
  double total = 0.0;
  for (int k = 0; k <= p; ++k) {
    double c = 1.0;
    for (int j = 0; j < k; ++j) c *= double(p - j) / double(j + 1);
    double perm = 1.0;
    for (int j = 0; j < k; ++j) perm *= double(q - j);
    total += c * perm * std::pow(2.0, k);
  }
  return total;
}

SuiteResult refuse(const std::string& suite, const std::string& why) {
  SuiteResult r;
  r.suite = suite;
  r.status = SuiteStatus::Refused;
  r.note = why;
  return r;
}

std::string refusal_reason(const Spectrum& S, int p) {
  if (p > S.q) return "p exceeds the negative eigenvalue count q";
  if (spectrum_degenerate_up_to(S, p))
    return "degenerate spectrum: eigenvalue gap below 1e-10 within the leading block";
  return {};
}

struct InstrumentedRun {
  SolveResult result;
  MonitorReport bounds;
  MonitorReport tangent;
  MonitorReport floor;
  std::vector<MonitorReport> offspace;  // one per column
};

InstrumentedRun instrumented_solve(const SparseSymMatrix& A, const Spectrum& S,
                                   const VerifyOptions& opts) {
  double rho = A.has_rho() ? A.rho() : spectral_norm_estimate(A);
  DomainBounds bounds = DomainBounds::for_p(rho, opts.p);
  double alpha = auto_stepsize(bounds);

  BoundsMonitor bm(bounds);
  TangentContractionMonitor tm(S, alpha);
  NormFloorMonitor fm(opts.p, S.eigenvalues[S.q - 1]);
  std::vector<OffspaceDecayMonitor> om;
  for (int i = 1; i <= opts.p; ++i)
    om.emplace_back(S, i, alpha, bounds.r(i - 1));

  SolverConfig cfg;
  cfg.p = opts.p;
  cfg.alpha = alpha;
  cfg.max_iter = opts.max_iter;
  cfg.tol = std::min(opts.tol, opts.deep_tol);
  cfg.seed = opts.seed;
  cfg.trace_every = std::max<std::int64_t>(1, opts.max_iter / 512);

  SolveOptions sopts;
  sopts.observer = [&](const StepView& view) {
    bm.observe(view);
    tm.observe(view);
    fm.observe(view);
    for (auto& m : om) m.observe(view);
  };
  // The deep target runs on the relative-step rule: it stays meaningful
  // well below the cancellation floor of the oracle distance metrics.

  IterateBlock init = init_random(A.n(), bounds, opts.seed);
  InstrumentedRun run{solve(A, cfg, std::move(init), sopts),
                      bm.finalize(),
                      tm.finalize(),
                      fm.finalize(),
                      {}};
  for (auto& m : om) run.offspace.push_back(m.finalize());
  return run;
}

SuiteResult from_reports(const std::string& suite, std::vector<MonitorReport> reports,
                         const std::string& note = {}) {
  SuiteResult r;
  r.suite = suite;
  r.reports = std::move(reports);
  r.note = note;
  for (const MonitorReport& rep : r.reports)
    if (!rep.passed) r.status = SuiteStatus::Fail;
  return r;
}

SuiteResult fixed_point_suite(const SparseSymMatrix& A, const Spectrum& S,
                              const VerifyOptions& opts) {
  double rho = A.has_rho() ? A.rho() : spectral_norm_estimate(A);
  MonitorReport rep;
  rep.name = "fixed-point-residuals";
  MonitorReport cls;
  cls.name = "fixed-point-classification";

  std::vector<FixedPointSpec> specs;
  std::string note;
  if (spec_count(S.q, opts.p) <= double(opts.enumeration_cap)) {
    specs = enumerate_fixed_point_specs(S.q, opts.p);
    note = "exhaustive enumeration of " + std::to_string(specs.size()) + " specs";
  } else {
    GaussianRng rng(opts.seed);
    for (int k = 0; k < 2000; ++k)
      specs.push_back(sample_unstable_spec(S.q, opts.p, rng));
    FixedPointSpec stable;
    stable.selection.resize(opts.p);
    stable.signs.assign(opts.p, 1);
    for (int i = 0; i < opts.p; ++i) stable.selection[i] = i;
    specs.push_back(stable);
    note = "sampled 2001 specs (family too large to enumerate)";
  }

  for (size_t idx = 0; idx < specs.size(); ++idx) {
    IterateBlock X = construct_fixed_point(specs[idx], S);
    double g_norm = direction(A, X).fro_norm();
    double bound = 1e-10 * rho * (1.0 + X.fro_norm());
    rep.checks++;
    rep.worst_margin = std::min(rep.worst_margin, bound - g_norm);
    if (g_norm > bound) {
      rep.passed = false;
      rep.violations.push_back(
          {"fixed-point-residual", std::int64_t(idx), g_norm, bound, 0.0});
    }

    bool none_free = true;
    for (int v : specs[idx].selection)
      if (v == FixedPointSpec::kNone) none_free = false;
    FixedPointClass expect = (specs[idx].is_stable_form() && none_free)
                                 ? FixedPointClass::Stable
                                 : FixedPointClass::Unstable;
    FixedPointClass got = classify_fixed_point(X, S, 1e-8);
    cls.checks++;
    if (got != expect) {
      cls.passed = false;
      cls.violations.push_back({"fixed-point-classification", std::int64_t(idx),
                                double(int(got)), double(int(expect)), 0.0});
    }
  }
  return from_reports("fixed-points", {rep, cls}, note);
}

SuiteResult energy_suite(const SparseSymMatrix& A, const Spectrum& S,
                         const VerifyOptions& opts) {
  double rho = A.has_rho() ? A.rho() : spectral_norm_estimate(A);
  std::vector<MonitorReport> reports;
  for (int i = 2; i <= opts.p; ++i) {
    DomainBounds bounds = DomainBounds::for_p(rho, i);
    double alpha = auto_stepsize(bounds);
    EnergyContext ctx = make_energy_context(A, S, i, bounds);
    double eps = std::min(1e-3, stationary_epsilon_limit(ctx, S) / 10.0);

    GaussianRng rng(opts.seed + i);
    std::vector<double> x0(A.n());
    for (double& v : x0) v = rng.gaussian();
    double scale = bounds.r(i - 1) / 2.0 / norm2(x0);
    for (double& v : x0) v *= scale;

    auto path = run_frozen_prefix_column(ctx, x0, alpha, 200000, eps * 0.5);
    MonitorReport rep = monitor_energy_descent(ctx, path, alpha, eps);
    rep.stats.push_back({"column", double(i)});
    rep.stats.push_back({"epsilon", eps});
    rep.stats.push_back({"path_steps", double(path.size() - 1)});
    reports.push_back(std::move(rep));
  }
  if (reports.empty())
    return from_reports("energy", {}, "p < 2: no deflated columns to check");
  return from_reports("energy", std::move(reports));
}

SuiteResult neighborhoods_suite(const SparseSymMatrix& A, const Spectrum& S,
                                const VerifyOptions& opts) {
  double rho = A.has_rho() ? A.rho() : spectral_norm_estimate(A);
  DomainBounds bounds = DomainBounds::for_p(rho, opts.p);
  double alpha = auto_stepsize(bounds);

  std::vector<EnergyContext> contexts;
  std::vector<double> epsilons;
  for (int i = 1; i <= opts.p; ++i) {
    contexts.push_back(make_energy_context(A, S, i, bounds));
    epsilons.push_back(stationary_epsilon_limit(contexts.back(), S) / 10.0);
  }

  std::vector<MonitorReport> reports;
  GaussianRng rng(opts.seed);
  const int n_starts = 3;
  for (int trial = 0; trial < n_starts; ++trial) {
    FixedPointSpec spec = sample_unstable_spec(S.q, opts.p, rng);
    IterateBlock saddle = construct_fixed_point(spec, S);
    IterateBlock x0 = init_near_saddle(saddle, 1e-6, rng);

    std::vector<NeighborhoodMonitor> nm;
    for (int i = 1; i <= opts.p; ++i)
      nm.emplace_back(contexts[i - 1], S, epsilons[i - 1]);

    SolverConfig cfg;
    cfg.p = opts.p;
    cfg.alpha = alpha;
    cfg.max_iter = opts.max_iter;
    cfg.tol = opts.tol;
    cfg.trace_every = std::max<std::int64_t>(1, opts.max_iter / 64);
    SolveOptions sopts;
    sopts.observer = [&](const StepView& view) {
      for (int i = 0; i < opts.p; ++i) nm[i].observe_column(view.t, view.X.col(i));
    };
    sopts.stop_metric = make_evec_stop_metric(S);
    solve(A, cfg, std::move(x0), sopts);

    for (int i = 0; i < opts.p; ++i) {
      MonitorReport rep = nm[i].finalize();
      rep.stats.push_back({"start", double(trial)});
      rep.stats.push_back({"column", double(i + 1)});
      reports.push_back(std::move(rep));
    }
  }
  return from_reports("neighborhoods", std::move(reports));
}

}  // namespace

std::vector<SuiteResult> run_verify(const SparseSymMatrix& A, const Spectrum& S,
                                    const std::string& suite,
                                    const VerifyOptions& opts) {
  std::vector<std::string> wanted;
  if (suite == "all")
    wanted = verify_suite_names();
  else
    wanted.push_back(suite);

  std::vector<SuiteResult> out;
  std::string reason = refusal_reason(S, opts.p);
  if (!reason.empty()) {
    for (const std::string& name : wanted) out.push_back(refuse(name, reason));
    return out;
  }

  // The solve-based suites share one instrumented run.
  bool need_run = false;
  for (const std::string& name : wanted)
    need_run |= (name == "bounds" || name == "tangent" || name == "norm-floor" ||
                 name == "offspace");
  InstrumentedRun run;
  if (need_run) run = instrumented_solve(A, S, opts);

  for (const std::string& name : wanted) {
    if (name == "fixed-points") {
      out.push_back(fixed_point_suite(A, S, opts));
    } else if (name == "bounds") {
      out.push_back(from_reports(name, {run.bounds},
                                 std::string("run outcome: ") +
                                     to_string(run.result.outcome)));
    } else if (name == "tangent") {
      out.push_back(from_reports(name, {run.tangent}));
    } else if (name == "norm-floor") {
      out.push_back(from_reports(name, {run.floor}));
    } else if (name == "offspace") {
      out.push_back(from_reports(name, run.offspace));
    } else if (name == "energy") {
      out.push_back(energy_suite(A, S, opts));
    } else if (name == "neighborhoods") {
      out.push_back(neighborhoods_suite(A, S, opts));
    } else {
      throw std::invalid_argument("unknown verify suite: " + name);
    }
  }
  return out;
}

std::vector<SuiteResult> run_verify_replay(const TraceCsvContents& trace,
                                           const SparseSymMatrix& A,
                                           const Spectrum& S,
                                           const std::string& suite,
                                           const VerifyOptions& opts) {
  std::vector<std::string> wanted;
  if (suite == "all") {
    wanted = {"bounds", "tangent", "norm-floor"};
  } else if (suite == "bounds" || suite == "tangent" || suite == "norm-floor") {
    wanted.push_back(suite);
  } else {
    throw std::invalid_argument("suite '" + suite +
                                "' needs live iterates and cannot replay from CSV");
  }

  std::vector<SuiteResult> out;
  std::string reason = refusal_reason(S, opts.p);
  if (!reason.empty()) {
    for (const std::string& name : wanted) out.push_back(refuse(name, reason));
    return out;
  }

  double rho = A.has_rho() ? A.rho() : spectral_norm_estimate(A);
  DomainBounds bounds = DomainBounds::for_p(rho, opts.p);
  double alpha = auto_stepsize(bounds);

  for (const std::string& name : wanted) {
    if (name == "bounds") {
      MonitorReport rep;
      rep.name = "bounded-domain";
      for (const TraceRecord& rec : trace.records)
        for (int i = 0; i < opts.p && i < int(rec.col_norms.size()); ++i) {
          rep.checks++;
          double margin = bounds.r(i) - rec.col_norms[i];
          rep.worst_margin = std::min(rep.worst_margin, margin);
          if (rec.col_norms[i] > bounds.r(i)) {
            rep.passed = false;
            rep.violations.push_back(
                {"bounded-domain", rec.t, rec.col_norms[i], bounds.r(i), 0.0});
          }
        }
      out.push_back(from_reports(name, {rep}, "replayed from trace"));
    } else if (name == "tangent") {
      TangentContractionMonitor tm(S, alpha);
      for (const TraceRecord& rec : trace.records)
        if (!rec.tangents.empty() && !std::isnan(rec.tangents[0]))
          tm.observe_tangent(rec.t, rec.tangents[0]);
      out.push_back(from_reports(name, {tm.finalize()}, "replayed from trace"));
    } else {
      NormFloorMonitor fm(opts.p, S.eigenvalues[S.q - 1]);
      for (const TraceRecord& rec : trace.records)
        if (!rec.col_norms.empty()) fm.observe_norms(rec.t, rec.col_norms);
      out.push_back(from_reports(name, {fm.finalize()}, "replayed from trace"));
    }
  }
  return out;
}

bool all_passed(const std::vector<SuiteResult>& results) {
  for (const SuiteResult& r : results)
    if (r.status != SuiteStatus::Pass) return false;
  return true;
}

bool any_refused(const std::vector<SuiteResult>& results) {
  for (const SuiteResult& r : results)
    if (r.status == SuiteStatus::Refused) return true;
  return false;
}

}  // namespace triofm
