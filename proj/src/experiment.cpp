#include "triofm/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace triofm {

std::string describe_spec(const FixedPointSpec& spec) {
  std::string s = "[";
  for (int k = 0; k < spec.p(); ++k) {
    if (k) s += ", ";
    if (spec.selection[k] == FixedPointSpec::kNone)
      s += "0";
    else
      s += (spec.signs[k] > 0 ? "+u" : "-u") + std::to_string(spec.selection[k] + 1);
  }
  return s + "]";
}

namespace {

// Sliding e_vec window over the last 11 iterations.
class PlateauTracker {
 public:
  void push(std::int64_t t, double value) {
    ring_[size_t(t % 11)] = value;
    if (t == 0) first_ = value;
    if (t == 10) early_drop_ = first_ - value;
    if (t >= 11) {
      double drop = ring_[size_t((t + 1) % 11)] - value;  // over 10 iterations
      best_late_drop_ = std::max(best_late_drop_, drop);
    }
    last_ = value;
  }
  double first() const { return first_; }
  double last() const { return last_; }
  double early_drop() const { return early_drop_; }
  double best_late_drop() const { return best_late_drop_; }

 private:
  double ring_[11] = {};
  double first_ = 0.0, last_ = 0.0;
  double early_drop_ = 0.0;
  double best_late_drop_ = 0.0;
};

}  // namespace

SaddleEscapeResult run_saddle_escape(const SparseSymMatrix& A, const Spectrum& S,
                                     int p, const SaddleEscapeOptions& opts) {
  if (p > S.q)
    throw std::invalid_argument("saddle escape: requires p <= q");
  double rho = A.has_rho() ? A.rho() : spectral_norm_estimate(A);
  DomainBounds bounds = DomainBounds::for_p(rho, p);
  const double alpha = auto_stepsize(bounds);

  // Shared immutable inputs for the per-column neighborhood monitors.
  std::vector<EnergyContext> contexts;
  std::vector<double> epsilons;
  if (opts.neighborhood_monitors) {
    for (int i = 1; i <= p; ++i) {
      contexts.push_back(make_energy_context(A, S, i, bounds));
      epsilons.push_back(stationary_epsilon_limit(contexts.back(), S) / 10.0);
    }
  }

  SaddleEscapeResult result;
  result.alpha = alpha;
  result.trials.resize(opts.trials);

  auto run_trial = [&](int index) {
    SaddleTrialResult& tr = result.trials[index];
    tr.index = index;
    GaussianRng rng(opts.seed + std::uint64_t(index));  // trial seed = seed + index
    FixedPointSpec spec = sample_unstable_spec(S.q, p, rng);
    tr.saddle_desc = describe_spec(spec);
    IterateBlock saddle = construct_fixed_point(spec, S);
    IterateBlock x0 = init_near_saddle(saddle, opts.delta, rng);

    PlateauTracker plateau;
    std::vector<NeighborhoodMonitor> nm;
    for (int i = 1; i <= p; ++i)
      if (opts.neighborhood_monitors)
        nm.emplace_back(contexts[i - 1], S, epsilons[i - 1]);

    SolverConfig cfg;
    cfg.p = p;
    cfg.alpha = alpha;
    cfg.max_iter = opts.max_iter;
    cfg.tol = opts.tol;
    cfg.trace_every = std::max<std::int64_t>(1, opts.max_iter);  // final record only

    SolveOptions sopts;
    sopts.observer = [&](const StepView& view) {
      plateau.push(view.t, e_vec_cached(view.X, S));
      for (size_t i = 0; i < nm.size(); ++i)
        nm[i].observe_column(view.t, view.X.col(int(i)));
    };
    // The observer runs before the stop check each iteration, so the
    // metric can reuse its value.
    sopts.stop_metric = [&](const StepView&) { return plateau.last(); };

    SolveResult res = solve(A, cfg, std::move(x0), sopts);
    tr.outcome = res.outcome;
    tr.iterations = res.state.t;
    tr.evec_initial = plateau.first();
    tr.evec_final = plateau.last();
    tr.reached_stable =
        res.outcome == Outcome::Converged && tr.evec_final < opts.tol;
    tr.early_drop = plateau.early_drop();
    tr.best_late_drop = plateau.best_late_drop();
    tr.plateau_ok = tr.early_drop < tr.best_late_drop;
    for (auto& m : nm) tr.neighborhood_reports.push_back(m.finalize());
  };

  int workers = opts.workers > 0 ? opts.workers
                                 : int(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, opts.trials));
  if (workers == 1) {
    for (int i = 0; i < opts.trials; ++i) run_trial(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (;;) {
          int i = next.fetch_add(1);
          if (i >= opts.trials) return;
          run_trial(i);
        }
      });
    for (auto& th : pool) th.join();
  }

  for (const SaddleTrialResult& tr : result.trials) {
    if (tr.reached_stable) result.successes++;
    if (tr.plateau_ok) result.plateau_count++;
  }
  return result;
}

}  // namespace triofm
