// Command-line front end: solves, verification suites, the saddle-escape
// experiment, matrix generation, and spectrum inspection.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "triofm/experiment.hpp"
#include "triofm/io.hpp"
#include "triofm/verify.hpp"

using namespace triofm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitMaxIter = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitRefused = 4;
constexpr int kExitUsage = 64;

struct MatrixSource {
  SparseSymMatrix A;
  std::string provenance;
  std::optional<std::vector<double>> diag_eigs;  // free oracle for gen:diag
};

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  return out;
}

// Sources: gen:diag=e1,e2,..., gen:lap2d=nx,ny,shift, gen:rand=n,density,shift,
// file:path.mtx, or a bare path to a MatrixMarket file.
MatrixSource load_matrix(const std::string& source, std::uint64_t seed) {
  MatrixSource ms;
  ms.provenance = source;
  if (source.rfind("gen:diag=", 0) == 0) {
    std::vector<double> eigs = parse_number_list(source.substr(9));
    ms.A = gen_diag(eigs);
    ms.diag_eigs = std::move(eigs);
  } else if (source.rfind("gen:lap2d=", 0) == 0) {
    std::vector<double> v = parse_number_list(source.substr(10));
    if (v.size() != 3) throw std::invalid_argument("gen:lap2d needs nx,ny,shift");
    ms.A = gen_laplacian2d(int(v[0]), int(v[1]), v[2]);
  } else if (source.rfind("gen:rand=", 0) == 0) {
    std::vector<double> v = parse_number_list(source.substr(9));
    if (v.size() != 3) throw std::invalid_argument("gen:rand needs n,density,shift");
    ms.A = gen_random_sparse_shifted(int(v[0]), v[1], v[2], seed);
  } else if (source.rfind("file:", 0) == 0) {
    ms.A = read_matrix_market(source.substr(5));
  } else if (source.rfind("gen:", 0) == 0) {
    throw std::invalid_argument("unknown generator spec: " + source);
  } else {
    ms.A = read_matrix_market(source);
  }
  return ms;
}

Spectrum make_oracle(const MatrixSource& ms, int size_cap = 4096) {
  if (ms.diag_eigs) return diag_spectrum(*ms.diag_eigs);
  return dense_symmetric_eig(densify(ms.A), size_cap);
}

void print_report_lines(const SuiteResult& suite) {
  const char* status = suite.status == SuiteStatus::Pass      ? "PASS"
                       : suite.status == SuiteStatus::Refused ? "REFUSED"
                                                              : "FAIL";
  std::printf("%-9s %s", status, suite.suite.c_str());
  if (!suite.note.empty()) std::printf("  (%s)", suite.note.c_str());
  std::printf("\n");
  for (const MonitorReport& rep : suite.reports) {
    std::printf("  %-28s %s  checks=%lld violations=%zu warnings=%zu",
                rep.name.c_str(), rep.passed ? "ok" : "VIOLATED",
                (long long)rep.checks, rep.violations.size(), rep.warnings.size());
    if (std::isfinite(rep.worst_margin))
      std::printf(" worst_margin=%.3e", rep.worst_margin);
    std::printf("\n");
    for (const auto& v : rep.violations)
      std::printf("    violation %s t=%lld observed=%.12g bound=%.12g\n",
                  v.lemma.c_str(), (long long)v.iteration, v.observed, v.bound);
  }
}

int cmd_solve(const std::string& source, int p, std::optional<double> alpha_opt,
              bool auto_alpha, double tol, std::int64_t max_iter,
              std::uint64_t seed, const std::string& trace_path,
              std::int64_t trace_every, bool with_oracle,
              const std::string& stop_metric, const std::string& archive_path,
              const std::string& config_path) {
  MatrixSource ms = load_matrix(source, seed);

  SolverConfig cfg;
  cfg.p = p;
  cfg.tol = tol;
  cfg.max_iter = max_iter;
  cfg.seed = seed;
  cfg.trace_every = trace_every;
  if (alpha_opt && !auto_alpha) cfg.alpha = *alpha_opt;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw IoError("cannot open config " + config_path);
    std::stringstream buf;
    buf << in.rdbuf();
    cfg = config_from_json(buf.str());
  }

  std::optional<Spectrum> oracle;
  if (with_oracle || stop_metric == "evec") oracle = make_oracle(ms);
  cfg.monitors.clear();
  cfg.monitors.push_back("col_norms");
  if (oracle) cfg.monitors.push_back("tangents");

  double rho = spectral_norm_estimate(ms.A);
  DomainBounds bounds = DomainBounds::for_p(rho, cfg.p);

  if (oracle && cfg.p > oracle->q)
    std::fprintf(stderr,
                 "warning: p = %d exceeds q = %d negative eigenvalues; trailing "
                 "columns are expected to converge to zero\n",
                 cfg.p, oracle->q);

  SolveOptions sopts;
  if (oracle) {
    EnricherOptions eopts;
    eopts.tangents = true;
    sopts.enricher = make_oracle_enricher(ms.A, *oracle, eopts);
    if (stop_metric == "evec" && cfg.p <= oracle->q &&
        !spectrum_degenerate_up_to(*oracle, cfg.p))
      sopts.stop_metric = make_evec_stop_metric(*oracle);
  }

  IterateBlock init = init_random(ms.A.n(), bounds, cfg.seed);
  auto t0 = std::chrono::steady_clock::now();
  SolveResult res = solve(ms.A, cfg, std::move(init), sopts);
  double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::printf("matrix: %s (n = %d, nnz = %lld)\n", ms.provenance.c_str(), ms.A.n(),
              (long long)ms.A.nnz());
  std::printf("outcome: %s after %lld iterations (alpha = %.12g, wall %.3f s)\n",
              to_string(res.outcome), (long long)res.state.t, res.alpha, wall);
  if (!res.message.empty()) std::printf("note: %s\n", res.message.c_str());
  std::printf("eigenvalue estimates (-||x_i||^2):\n");
  for (int i = 0; i < cfg.p; ++i) {
    double nrm = res.state.X.col_norms[i];
    std::printf("  col %d: %.12g  (||x_%d|| = %.12g)\n", i + 1, -nrm * nrm, i + 1, nrm);
  }
  if (oracle && !res.trace.empty()) {
    const TraceRecord& last = res.trace.back();
    if (!std::isnan(last.e_vec)) std::printf("final e_vec = %.6e\n", last.e_vec);
    if (!std::isnan(last.e_obj)) std::printf("final e_obj = %.6e\n", last.e_obj);
  }

  if (!trace_path.empty() || !archive_path.empty()) {
    RunArchive archive;
    archive.config = cfg;
    archive.matrix_source = ms.provenance;
    archive.trace = res.trace;
    archive.outcome = res.outcome;
    archive.wall_time = wall;
    archive.groups.col_norms = true;
    archive.groups.tangents = bool(oracle);
    if (!trace_path.empty()) write_trace_csv(archive, trace_path);
    if (!archive_path.empty()) write_archive_json(archive, archive_path);
  }

  switch (res.outcome) {
    case Outcome::Converged: return kExitOk;
    case Outcome::MaxIter: return kExitMaxIter;
    case Outcome::Diverged: return kExitDiverged;
  }
  return kExitFail;
}

int cmd_verify(const std::string& source, int p, const std::string& suite,
               std::uint64_t seed, std::int64_t max_iter, double tol,
               const std::string& report_path, const std::string& replay_path) {
  MatrixSource ms = load_matrix(source, seed);
  Spectrum S = make_oracle(ms);
  spectral_norm_estimate(ms.A);

  VerifyOptions opts;
  opts.p = p;
  opts.seed = seed;
  opts.max_iter = max_iter;
  opts.tol = tol;

  std::vector<SuiteResult> results;
  if (replay_path.empty()) {
    results = run_verify(ms.A, S, suite, opts);
  } else {
    TraceCsvContents trace = read_trace_csv(replay_path);
    results = run_verify_replay(trace, ms.A, S, suite, opts);
  }

  for (const SuiteResult& r : results) print_report_lines(r);

  if (!report_path.empty()) {
    std::vector<MonitorReport> all;
    for (const SuiteResult& r : results)
      all.insert(all.end(), r.reports.begin(), r.reports.end());
    write_report_json(all, report_path);
  }

  if (any_refused(results)) return kExitRefused;
  return all_passed(results) ? kExitOk : kExitFail;
}

int cmd_saddle_escape(const std::string& source, int p, int trials, double delta,
                      std::uint64_t seed, std::int64_t max_iter, int workers,
                      bool monitors, const std::string& report_path) {
  MatrixSource ms = load_matrix(source, seed);
  Spectrum S = make_oracle(ms);
  spectral_norm_estimate(ms.A);

  SaddleEscapeOptions opts;
  opts.trials = trials;
  opts.delta = delta;
  opts.seed = seed;
  opts.max_iter = max_iter;
  opts.workers = workers;
  opts.neighborhood_monitors = monitors;

  SaddleEscapeResult res = run_saddle_escape(ms.A, S, p, opts);

  for (const SaddleTrialResult& tr : res.trials) {
    std::printf(
        "trial %3d: %s iters=%lld e_vec=%.3e saddle=%s plateau(first10=%.3e, "
        "best10=%.3e)%s\n",
        tr.index, tr.reached_stable ? "escaped " : "FAILED  ",
        (long long)tr.iterations, tr.evec_final, tr.saddle_desc.c_str(),
        tr.early_drop, tr.best_late_drop, tr.plateau_ok ? "" : " [no plateau]");
  }
  std::printf("escaped to the stable set: %d/%d (alpha = %.6g)\n", res.successes,
              trials, res.alpha);
  std::printf("plateau check passed: %d/%d\n", res.plateau_count, trials);

  if (monitors) {
    std::int64_t nb_violations = 0;
    for (const auto& tr : res.trials)
      for (const auto& rep : tr.neighborhood_reports)
        nb_violations += std::int64_t(rep.violations.size());
    std::printf("neighborhood monitor violations: %lld\n", (long long)nb_violations);
  }

  if (!report_path.empty()) {
    std::vector<MonitorReport> all;
    for (const auto& tr : res.trials)
      for (const auto& rep : tr.neighborhood_reports) all.push_back(rep);
    write_report_json(all, report_path);
  }

  return res.successes == trials ? kExitOk : kExitFail;
}

int cmd_gen(const std::string& spec, const std::string& out_path,
            std::uint64_t seed) {
  MatrixSource ms = load_matrix(spec, seed);
  write_matrix_market(ms.A, out_path);
  std::printf("wrote %s (n = %d, nnz = %lld)\n", out_path.c_str(), ms.A.n(),
              (long long)ms.A.nnz());
  return kExitOk;
}

int cmd_spectrum(const std::string& source, int p, int top, std::uint64_t seed) {
  MatrixSource ms = load_matrix(source, seed);
  Spectrum S = make_oracle(ms);
  double rho = spectral_norm_estimate(ms.A);

  std::printf("n = %d, q = %d (negative eigenvalues), rho estimate = %.12g\n", S.n,
              S.q, rho);
  int k = top > 0 ? std::min(top, S.n) : S.n;
  std::printf("lowest %d eigenvalues:\n", k);
  for (int i = 0; i < k; ++i) std::printf("  lambda_%d = %.12g\n", i + 1, S.eigenvalues[i]);

  DomainBounds bounds = DomainBounds::for_p(rho, p);
  std::printf("admissible radii (p = %d):\n", p);
  for (int i = 0; i < p; ++i) std::printf("  R_%d = %.12g\n", i + 1, bounds.r(i));
  std::printf("AUTO stepsize: %.12g\n", auto_stepsize(bounds));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TriOFM sparse symmetric eigensolver"};
  app.require_subcommand(1);

  std::string source, trace_path, archive_path, report_path, replay_path,
      config_path, out_path;
  std::string suite = "all", stop_metric = "step";
  int p = 1, trials = 100, workers = 0, top = 0;
  double tol = 1e-6, delta = 1e-6, alpha_value = 0.0;
  std::int64_t max_iter = 1000000, trace_every = 1;
  std::uint64_t seed = 0;
  bool auto_alpha = false, with_oracle = false, monitors = false;
  bool alpha_given = false;

  auto* solve_cmd = app.add_subcommand("solve", "run the iteration");
  solve_cmd->add_option("matrix", source, "matrix source")->required();
  solve_cmd->add_option("-p,--pairs", p, "number of eigenpairs")->required();
  auto* aopt = solve_cmd->add_option("--alpha", alpha_value, "explicit stepsize");
  solve_cmd->add_flag("--auto", auto_alpha, "derive the stepsize from the bounds");
  solve_cmd->add_option("--tol", tol, "stopping tolerance");
  solve_cmd->add_option("--max-iter", max_iter, "iteration cap");
  solve_cmd->add_option("--seed", seed, "RNG seed");
  solve_cmd->add_option("--trace", trace_path, "write trace CSV here");
  solve_cmd->add_option("--trace-every", trace_every, "trace sampling stride");
  solve_cmd->add_flag("--oracle", with_oracle, "attach the dense oracle");
  solve_cmd->add_option("--stop-metric", stop_metric, "step | evec")
      ->check(CLI::IsMember({"step", "evec"}));
  solve_cmd->add_option("--archive", archive_path, "write run archive JSON here");
  solve_cmd->add_option("--config", config_path, "JSON config overriding flags");

  auto* verify_cmd = app.add_subcommand("verify", "run monitor suites");
  verify_cmd->add_option("matrix", source, "matrix source")->required();
  verify_cmd->add_option("-p,--pairs", p, "number of eigenpairs")->required();
  verify_cmd->add_option("--suite", suite, "suite name or 'all'");
  verify_cmd->add_option("--seed", seed, "RNG seed");
  verify_cmd->add_option("--max-iter", max_iter, "iteration cap per run");
  verify_cmd->add_option("--tol", tol, "convergence tolerance");
  verify_cmd->add_option("--report", report_path, "write report JSON here");
  verify_cmd->add_option("--replay", replay_path, "re-check a recorded trace CSV");

  auto* saddle_cmd = app.add_subcommand("saddle-escape", "perturbed-saddle trials");
  saddle_cmd->add_option("matrix", source, "matrix source")->required();
  saddle_cmd->add_option("-p,--pairs", p, "number of eigenpairs")->required();
  saddle_cmd->add_option("--trials", trials, "number of trials");
  saddle_cmd->add_option("--delta", delta, "perturbation bound");
  saddle_cmd->add_option("--seed", seed, "base RNG seed");
  saddle_cmd->add_option("--max-iter", max_iter, "iteration cap per trial")
      ->default_val(std::int64_t(40000000));
  saddle_cmd->add_option("--workers", workers, "parallel workers (0 = auto)");
  saddle_cmd->add_flag("--monitors", monitors, "neighborhood monitors per trial");
  saddle_cmd->add_option("--report", report_path, "write report JSON here");

  auto* gen_cmd = app.add_subcommand("gen", "generate a matrix file");
  gen_cmd->add_option("spec", source, "generator spec (gen:...)")->required();
  gen_cmd->add_option("--out", out_path, "output MatrixMarket path")->required();
  gen_cmd->add_option("--seed", seed, "RNG seed");

  auto* spectrum_cmd = app.add_subcommand("spectrum", "inspect a matrix");
  spectrum_cmd->add_option("matrix", source, "matrix source")->required();
  spectrum_cmd->add_option("-p,--pairs", p, "ladder length")->default_val(2);
  spectrum_cmd->add_option("--top", top, "print this many lowest eigenpairs");
  spectrum_cmd->add_option("--seed", seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }
  alpha_given = aopt->count() > 0;

  try {
    if (solve_cmd->parsed()) {
      std::optional<double> alpha;
      if (alpha_given) alpha = alpha_value;
      if (!alpha_given && !auto_alpha) auto_alpha = true;  // default to AUTO
      return cmd_solve(source, p, alpha, auto_alpha, tol, max_iter, seed,
                       trace_path, trace_every, with_oracle, stop_metric,
                       archive_path, config_path);
    }
    if (verify_cmd->parsed())
      return cmd_verify(source, p, suite, seed, max_iter, tol, report_path,
                        replay_path);
    if (saddle_cmd->parsed())
      return cmd_saddle_escape(source, p, trials, delta, seed, max_iter, workers,
                               monitors, report_path);
    if (gen_cmd->parsed()) return cmd_gen(source, out_path, seed);
    if (spectrum_cmd->parsed()) return cmd_spectrum(source, p, top, seed);
  } catch (const DegenerateSpectrumError& e) {
    std::fprintf(stderr, "refused: %s\n", e.what());
    return kExitRefused;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "diverged: %s\n", e.what());
    return kExitDiverged;
  } catch (const CLI::Error& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFail;
  }
  return kExitUsage;
}
