#include <doctest.h>

#include <cmath>

#include "triofm/experiment.hpp"
#include "triofm/io.hpp"
#include "triofm/monitors.hpp"
#include "triofm/verify.hpp"

using namespace triofm;

namespace {

const std::vector<double> kEigs{-4.0, -2.0, -1.0, 3.0};

struct Setup {
  SparseSymMatrix A;
  Spectrum S;
  double rho;
  DomainBounds bounds;
  double alpha;
};

Setup make_setup(int p) {
  Setup s{gen_diag(kEigs), diag_spectrum(kEigs), 0.0, {}, 0.0};
  s.rho = spectral_norm_estimate(s.A);
  s.bounds = DomainBounds::for_p(s.rho, p);
  s.alpha = auto_stepsize(s.bounds);
  return s;
}

}  // namespace

TEST_CASE("tangent monitor: contraction factor from the leading gap") {
  Spectrum S = diag_spectrum(std::vector<double>{-2.0, -1.0, 1.0, 3.0});
  TangentContractionMonitor m(S, 0.05);
  CHECK(m.ratio() == doctest::Approx(1.05 / 1.1));
}

TEST_CASE("tangent monitor: aligned column passes trivially") {
  Setup s = make_setup(1);
  TangentContractionMonitor m(s.S, s.alpha);
  IterateBlock X(4, 1);
  X.at(0, 0) = 1.5;  // exactly along u_1
  X.refresh_col_norms();
  for (int t = 0; t < 5; ++t) {
    StepView v{t, X, X, 0.0, 1.5, s.alpha};
    m.observe(v);
  }
  MonitorReport rep = m.finalize();
  CHECK(rep.passed);
  CHECK(rep.violations.empty());
}

TEST_CASE("tangent monitor: a thousand admissible steps satisfy the bound") {
  std::vector<double> eigs{-2.0, -1.0, 1.0, 3.0};
  SparseSymMatrix A = gen_diag(eigs);
  Spectrum S = diag_spectrum(eigs);
  double rho = spectral_norm_estimate(A);
  DomainBounds b = DomainBounds::for_p(rho, 1);
  double alpha = auto_stepsize(b);

  TangentContractionMonitor m(S, alpha);
  SolverConfig cfg;
  cfg.p = 1;
  cfg.alpha = alpha;
  cfg.max_iter = 1000;
  cfg.tol = 1e-15;
  SolveOptions opts;
  opts.observer = [&](const StepView& v) { m.observe(v); };
  solve(A, cfg, init_random(4, b, 31), opts);
  MonitorReport rep = m.finalize();
  CHECK(rep.checks >= 999);
  CHECK(rep.passed);
  CHECK(rep.violations.empty());
}

TEST_CASE("tangent monitor: refuses a degenerate leading pair") {
  Spectrum S = diag_spectrum(std::vector<double>{-1.0, -1.0, 1.0});
  CHECK_THROWS_AS(TangentContractionMonitor(S, 0.01), DegenerateSpectrumError);
}

TEST_CASE("norm floor: value and immediate attainment at a stable start") {
  NormFloorMonitor m(1, -1.0);
  CHECK(m.floor() == doctest::Approx(std::sqrt(2.0) / 4.0));

  // A trace that starts above the floor: N = 0.
  std::vector<double> norms{2.0};
  for (int t = 0; t < 4; ++t) m.observe_norms(t, norms);
  MonitorReport rep = m.finalize();
  CHECK(rep.passed);
  REQUIRE(!rep.stats.empty());
  bool found = false;
  for (auto& [k, v] : rep.stats)
    if (k == "col1_N") {
      CHECK(v == 0.0);
      found = true;
    }
  CHECK(found);
}

TEST_CASE("norm floor: a real solve produces a finite N per column") {
  Setup s = make_setup(2);
  NormFloorMonitor m(2, s.S.eigenvalues[s.S.q - 1]);  // lambda_q = -1
  SolverConfig cfg;
  cfg.p = 2;
  cfg.alpha = s.alpha;
  cfg.max_iter = 500000;
  cfg.tol = 1e-8;
  SolveOptions opts;
  opts.observer = [&](const StepView& v) { m.observe(v); };
  opts.stop_metric = make_evec_stop_metric(s.S);
  SolveResult res = solve(s.A, cfg, init_random(4, s.bounds, 5), opts);
  CHECK(res.outcome == Outcome::Converged);
  MonitorReport rep = m.finalize();
  CHECK(rep.passed);
  int n_stats = 0;
  for (auto& [k, v] : rep.stats)
    if (k == "col1_N" || k == "col2_N") {
      n_stats++;
      CHECK(v >= 0.0);
    }
  CHECK(n_stats == 2);
}

TEST_CASE("bounds monitor: zero violations on an admissible run") {
  Setup s = make_setup(2);
  BoundsMonitor m(s.bounds);
  SolverConfig cfg;
  cfg.p = 2;
  cfg.alpha = s.alpha;
  cfg.max_iter = 20000;
  cfg.tol = 1e-15;
  SolveOptions opts;
  opts.observer = [&](const StepView& v) { m.observe(v); };
  solve(s.A, cfg, init_random(4, s.bounds, 77), opts);
  MonitorReport rep = m.finalize();
  CHECK(rep.passed);
  CHECK(rep.worst_margin > 0.0);
}

TEST_CASE("offspace monitor: deflated and positive components die out") {
  Setup s = make_setup(2);
  OffspaceDecayMonitor m1(s.S, 1, s.alpha, s.bounds.r(0));
  OffspaceDecayMonitor m2(s.S, 2, s.alpha, s.bounds.r(1));
  CHECK(m1.gate_open());   // empty prefix
  CHECK(!m2.gate_open());  // waits for the residual

  SolverConfig cfg;
  cfg.p = 2;
  cfg.alpha = s.alpha;
  cfg.max_iter = 2000000;
  cfg.tol = 1e-11;  // deep convergence (relative-step rule) so the gate opens
  SolveOptions opts;
  opts.observer = [&](const StepView& v) {
    m1.observe(v);
    m2.observe(v);
  };
  SolveResult res = solve(s.A, cfg, init_random(4, s.bounds, 11), opts);
  CHECK(res.outcome == Outcome::Converged);

  MonitorReport r1 = m1.finalize();
  MonitorReport r2 = m2.finalize();
  CHECK(r1.passed);
  CHECK(r2.passed);
  CHECK(m2.gate_open());
  double final2 = -1.0;
  for (auto& [k, v] : r2.stats)
    if (k == "final_max_component") final2 = v;
  CHECK(final2 >= 0.0);
  CHECK(final2 < 1e-8);  // |u_1 . x_2| after deep convergence
}

TEST_CASE("offspace monitor: exact zero components stay zero on a diagonal matrix") {
  Setup s = make_setup(1);
  OffspaceDecayMonitor m(s.S, 1, s.alpha, s.bounds.r(0));
  SolverConfig cfg;
  cfg.p = 1;
  cfg.alpha = s.alpha;
  cfg.max_iter = 1000;
  cfg.tol = 1e-15;
  IterateBlock x0(4, 1);
  x0.at(0, 0) = 1.0;  // positive-eigenvalue components exactly zero
  x0.refresh_col_norms();
  bool stayed_zero = true;
  SolveOptions opts;
  opts.observer = [&](const StepView& v) {
    m.observe(v);
    stayed_zero &= (v.X.at(3, 0) == 0.0);
  };
  solve(s.A, cfg, x0, opts);
  CHECK(stayed_zero);
  CHECK(m.finalize().passed);
}

TEST_CASE("energy descent: frozen-prefix column run has zero violations") {
  Setup s = make_setup(2);
  EnergyContext ctx = make_energy_context(s.A, s.S, 2, s.bounds);
  double eps = 1e-3;

  GaussianRng rng(41);
  std::vector<double> x0(4);
  for (double& v : x0) v = rng.gaussian();
  double scale = s.bounds.r(1) / 2.0 / norm2(x0);
  for (double& v : x0) v *= scale;

  auto path = run_frozen_prefix_column(ctx, x0, s.alpha, 200000, eps * 0.5);
  MonitorReport rep = monitor_energy_descent(ctx, path, s.alpha, eps);
  CHECK(rep.passed);
  CHECK(rep.violations.empty());
  CHECK(rep.checks > 10);
  // Every checked decrement clears the weaker quarter-alpha-eps^2 bound.
  CHECK(rep.worst_margin > 0.0);

  // Starting at a stationary point the monitor passes vacuously.
  std::vector<double> x2(4, 0.0);
  x2[1] = std::sqrt(2.0);
  auto still = run_frozen_prefix_column(ctx, x2, s.alpha, 100, 0.0);
  MonitorReport vac = monitor_energy_descent(ctx, still, s.alpha, eps);
  CHECK(vac.passed);
  CHECK(vac.checks == 0);
}

TEST_CASE("neighborhood monitor: direct convergence is a single visit") {
  Setup s = make_setup(2);
  EnergyContext ctx = make_energy_context(s.A, s.S, 2, s.bounds);
  double eps = stationary_epsilon_limit(ctx, s.S) / 10.0;
  NeighborhoodMonitor m(ctx, s.S, eps);

  auto path = run_frozen_prefix_column(ctx, std::vector<double>{0.1, 1.0, 0.2, 0.1},
                                       s.alpha, 400000, eps * 0.05);
  for (size_t t = 0; t < path.size(); ++t) m.observe_column(std::int64_t(t), path[t]);
  MonitorReport rep = m.finalize();
  CHECK(rep.passed);
  CHECK(m.transitions() <= 1);
}

TEST_CASE("neighborhood monitor: saddle start visits ZERO then drops in energy") {
  Setup s = make_setup(2);
  EnergyContext ctx = make_energy_context(s.A, s.S, 2, s.bounds);
  double eps = stationary_epsilon_limit(ctx, s.S) / 10.0;
  NeighborhoodMonitor m(ctx, s.S, eps);

  // Column 2 starting a hair away from the zero column (an unstable
  // stationary point of its energy). No gradient-based stop: the gradient
  // is tiny at the saddle itself.
  GaussianRng rng(7);
  std::vector<double> x0(4);
  for (double& v : x0) v = 1e-7 * rng.gaussian();

  auto path = run_frozen_prefix_column(ctx, x0, s.alpha, 60000, 0.0);
  for (size_t t = 0; t < path.size(); ++t) m.observe_column(std::int64_t(t), path[t]);
  MonitorReport rep = m.finalize();
  CHECK(rep.passed);  // energies only decrease across visits
  double visits = 0, transitions = 0;
  for (auto& [k, v] : rep.stats) {
    if (k == "visits") visits = v;
    if (k == "transitions") transitions = v;
  }
  CHECK(visits >= 2.0);       // ZERO first, then a scaled eigenvector
  CHECK(transitions >= 1.0);  // strictly downhill transition
  CHECK(transitions <= double(ctx.stationary_set.size()));
  // Final point is one of the nonzero stationary points.
  ProximityResult pr = stationary_proximity(ctx, path.back(), eps, s.S);
  CHECK(pr.label != "0");
  CHECK(pr.distance < 1e-5);
}

TEST_CASE("verify: all suites pass on the reference diagonal matrix") {
  Setup s = make_setup(2);
  VerifyOptions opts;
  opts.p = 2;
  opts.seed = 9;
  std::vector<SuiteResult> results = run_verify(s.A, s.S, "all", opts);
  CHECK(results.size() == verify_suite_names().size());
  for (const SuiteResult& r : results) {
    INFO(r.suite);
    CHECK(r.status == SuiteStatus::Pass);
  }
}

TEST_CASE("verify: degenerate spectrum refuses") {
  SparseSymMatrix A = gen_laplacian2d(2, 2, 5.0);
  Spectrum S = dense_symmetric_eig(densify(A));
  CHECK(S.q == 3);
  VerifyOptions opts;
  opts.p = 2;
  std::vector<SuiteResult> results = run_verify(A, S, "tangent", opts);
  REQUIRE(results.size() == 1);
  CHECK(results[0].status == SuiteStatus::Refused);
}

TEST_CASE("verify: trace replay reproduces the live pass/fail verdicts") {
  Setup s = make_setup(2);
  // Produce a trace with per-step records, col norms and tangents.
  SolverConfig cfg;
  cfg.p = 2;
  cfg.alpha = s.alpha;
  cfg.max_iter = 300000;
  cfg.tol = 1e-6;
  cfg.trace_every = 1;
  EnricherOptions eopts;
  eopts.tangents = true;
  SolveOptions sopts;
  sopts.enricher = make_oracle_enricher(s.A, s.S, eopts);
  sopts.stop_metric = make_evec_stop_metric(s.S);
  SolveResult res = solve(s.A, cfg, init_random(4, s.bounds, 1), sopts);
  CHECK(res.outcome == Outcome::Converged);

  RunArchive archive;
  archive.config = cfg;
  archive.trace = res.trace;
  archive.outcome = res.outcome;
  archive.groups.col_norms = true;
  archive.groups.tangents = true;
  std::string path = "replay_test_trace.csv";
  write_trace_csv(archive, path);
  TraceCsvContents trace = read_trace_csv(path);

  VerifyOptions opts;
  opts.p = 2;
  opts.seed = 1;
  std::vector<SuiteResult> live = run_verify(s.A, s.S, "bounds", opts);
  std::vector<SuiteResult> replay = run_verify_replay(trace, s.A, s.S, "all", opts);
  REQUIRE(replay.size() == 3);
  for (const SuiteResult& r : replay) {
    INFO(r.suite);
    CHECK(r.status == SuiteStatus::Pass);
  }
  CHECK(live[0].status == SuiteStatus::Pass);
  std::remove(path.c_str());
}

TEST_CASE("saddle escape: small-scale trials all escape with a plateau") {
  Setup s = make_setup(2);
  SaddleEscapeOptions opts;
  opts.trials = 4;
  opts.seed = 123;
  opts.max_iter = 4000000;
  opts.neighborhood_monitors = true;
  SaddleEscapeResult res = run_saddle_escape(s.A, s.S, 2, opts);
  CHECK(res.successes == 4);
  for (const SaddleTrialResult& tr : res.trials) {
    CHECK(tr.reached_stable);
    CHECK(tr.evec_final < 1e-6);
    CHECK(tr.plateau_ok);
    for (const MonitorReport& rep : tr.neighborhood_reports) CHECK(rep.passed);
  }
}

TEST_CASE("saddle escape: deterministic per-trial seeds") {
  Setup s = make_setup(2);
  SaddleEscapeOptions opts;
  opts.trials = 2;
  opts.seed = 5;
  opts.max_iter = 4000000;
  SaddleEscapeResult a = run_saddle_escape(s.A, s.S, 2, opts);
  opts.workers = 1;
  SaddleEscapeResult b = run_saddle_escape(s.A, s.S, 2, opts);
  REQUIRE(a.trials.size() == b.trials.size());
  for (size_t i = 0; i < a.trials.size(); ++i) {
    CHECK(a.trials[i].iterations == b.trials[i].iterations);
    CHECK(a.trials[i].evec_final == b.trials[i].evec_final);
    CHECK(a.trials[i].saddle_desc == b.trials[i].saddle_desc);
  }
}
