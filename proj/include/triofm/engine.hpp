// The iteration itself: triangularized update direction, fixed-stepsize
// stepping, the admissible-domain stepsize rule, initialization policies,
// stopping rules, and trace emission.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>

#include "triofm/linalg.hpp"
#include "triofm/trace.hpp"

namespace triofm {

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::int64_t iteration)
      : std::runtime_error(what), iteration(iteration) {}
  std::int64_t iteration;
};

/// Admissible-domain radii ladder: radii[i] = 2^i * sqrt(3*rho) for
/// i = 0..p-1, i.e. each column i may start anywhere within radius
/// radii[i] and the iteration provably never leaves that ball.
struct DomainBounds {
  double rho = 0.0;
  std::vector<double> radii;

  static DomainBounds for_p(double rho, int p);
  double r(int col) const { return radii[col]; }
  int p() const { return int(radii.size()); }
};

/// Largest admissible fixed stepsize, exactly 1 / (10 * R_p^2).
double auto_stepsize(const DomainBounds& bounds);

struct SolverConfig {
  int p = 1;
  std::optional<double> alpha;  // nullopt = AUTO (derive from bounds)
  std::int64_t max_iter = 1000000;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  std::int64_t trace_every = 1;
  std::int64_t stop_check_every = 1;
  std::vector<std::string> monitors;  // enabled monitor names (for archives)
};

struct SolverState {
  IterateBlock X;
  std::int64_t t = 0;
  double last_step_norm = 0.0;  // alpha * ||g||_F of the last applied step
  int converged_columns = 0;
};

/// Deterministic Gaussian source (Box-Muller over the raw mt19937_64
/// stream, so sequences do not depend on the standard library's
/// normal_distribution implementation).
class GaussianRng {
 public:
  explicit GaussianRng(std::uint64_t seed) : gen_(seed) {}
  double uniform();   // [0, 1)
  double gaussian();  // standard normal
  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// g(X) = A X + X triu(X^T X). Column i equals
/// A x_i + sum_{j<=i} x_j (x_j . x_i): columns 1..k of the result depend
/// only on columns 1..k of X.
IterateBlock direction(const SparseSymMatrix& A, const IterateBlock& X);

/// One update X <- X - alpha g(X); refreshes column norms, increments t,
/// and records alpha*||g||_F. Throws DivergenceError when non-finite
/// values appear.
SolverState step(const SolverState& state, const SparseSymMatrix& A, double alpha);

/// Column i is an isotropic Gaussian direction rescaled to norm
/// radii[i]/2, strictly inside the admissible ball. Reproducible from the
/// seed.
IterateBlock init_random(int n, const DomainBounds& bounds, std::uint64_t seed);

/// saddle + E with E a Gaussian block rescaled so ||E||_F = 0.99*delta.
IterateBlock init_near_saddle(const IterateBlock& saddle, double delta,
                              std::uint64_t seed);
/// Same, drawing from an existing stream.
IterateBlock init_near_saddle(const IterateBlock& saddle, double delta,
                              GaussianRng& rng);

/// Called once per iteration, before the step is applied.
struct StepView {
  std::int64_t t;
  const IterateBlock& X;
  const IterateBlock& dir;
  double dir_norm;
  double x_norm;
  double alpha;
};

using StepObserver = std::function<void(const StepView&)>;
using TraceEnricher = std::function<void(const StepView&, TraceRecord&)>;
/// Alternative stopping metric (e.g. distance to the stable set when an
/// oracle is available); the default rule is the relative step norm
/// alpha*||g||_F / max(1, ||X||_F) < tol.
using StopMetric = std::function<double(const StepView&)>;

struct SolveOptions {
  StepObserver observer;
  TraceEnricher enricher;
  StopMetric stop_metric;
};

struct SolveResult {
  SolverState state;
  std::vector<TraceRecord> trace;
  Outcome outcome = Outcome::MaxIter;
  std::string message;
  double alpha = 0.0;  // the stepsize actually used
};

/// Run the iteration from `init` until the stopping rule fires or
/// max_iter is reached. Emits a TraceRecord every trace_every iterations
/// and at the final iteration. Non-finite values abort with
/// Outcome::Diverged and the iteration index in the message; hitting
/// max_iter is reported distinctly as Outcome::MaxIter.
/// With alpha = AUTO the initial columns must satisfy the admissible
/// bounds ||x_i|| <= R_i.
SolveResult solve(const SparseSymMatrix& A, const SolverConfig& cfg,
                  IterateBlock init, const SolveOptions& opts = {});

}  // namespace triofm
