#include "triofm/engine.hpp"

#include <cmath>
#include <numbers>

namespace triofm {

DomainBounds DomainBounds::for_p(double rho, int p) {
  if (p < 1) throw std::invalid_argument("bounds: p >= 1 required");
  if (rho <= 0.0) throw std::invalid_argument("bounds: rho must be positive");
  DomainBounds b;
  b.rho = rho;
  b.radii.resize(p);
  double r = std::sqrt(3.0 * rho);
  for (int i = 0; i < p; ++i) {
    b.radii[i] = r;
    r *= 2.0;
  }
  return b;
}

double auto_stepsize(const DomainBounds& bounds) {
  double rp = bounds.radii.back();
  return 1.0 / (10.0 * rp * rp);
}

double GaussianRng::uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

double GaussianRng::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // u1 in (0,1] so the log is finite.
  double u1 = double((gen_() >> 11) + 1) * 0x1.0p-53;
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

// Non-allocating kernels used by the solve loop; buffers must be sized
// n x p / p x p already.
static void spmm_into(const SparseSymMatrix& A, const IterateBlock& X,
                      IterateBlock& Y) {
  for (int c = 0; c < X.p; ++c) A.apply(X.col(c), Y.col(c));
}

static void gram_into(const IterateBlock& X, DenseMatrix& G) {
  for (int c = 0; c < X.p; ++c)
    for (int r = 0; r <= c; ++r) {
      double g = dot(X.col(r), X.col(c));
      G.at(r, c) = g;
      G.at(c, r) = g;
    }
}

static void direction_into(const SparseSymMatrix& A, const IterateBlock& X,
                           DenseMatrix& G, IterateBlock& Y) {
  spmm_into(A, X, Y);
  gram_into(X, G);
  // X * triu(G): only j <= c contributes, so earlier columns never see
  // later ones.
  for (int c = 0; c < X.p; ++c) {
    std::span<double> y = Y.col(c);
    for (int j = 0; j <= c; ++j) {
      double gjc = G.at(j, c);
      std::span<const double> xj = X.col(j);
      for (int r = 0; r < X.n; ++r) y[r] += xj[r] * gjc;
    }
  }
}

IterateBlock direction(const SparseSymMatrix& A, const IterateBlock& X) {
  if (A.n() != X.n) throw std::invalid_argument("direction: dimension mismatch");
  IterateBlock Y(X.n, X.p);
  DenseMatrix G(X.p, X.p);
  direction_into(A, X, G, Y);
  Y.refresh_col_norms();
  return Y;
}

SolverState step(const SolverState& state, const SparseSymMatrix& A, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("step: alpha must be positive");
  SolverState next = state;
  IterateBlock g = direction(A, state.X);
  double gn = g.fro_norm();
  for (size_t k = 0; k < next.X.data.size(); ++k)
    next.X.data[k] = state.X.data[k] - alpha * g.data[k];
  next.X.refresh_col_norms();
  next.t = state.t + 1;
  next.last_step_norm = alpha * gn;
  if (!std::isfinite(next.X.fro_norm()))
    throw DivergenceError("step: non-finite values at iteration " +
                              std::to_string(next.t),
                          next.t);
  return next;
}

IterateBlock init_random(int n, const DomainBounds& bounds, std::uint64_t seed) {
  const int p = bounds.p();
  IterateBlock X(n, p);
  GaussianRng rng(seed);
  for (int c = 0; c < p; ++c) {
    std::span<double> x = X.col(c);
    for (int r = 0; r < n; ++r) x[r] = rng.gaussian();
    double target = bounds.r(c) / 2.0;
    double scale = target / norm2(x);
    for (int r = 0; r < n; ++r) x[r] *= scale;
    X.col_norms[c] = target;  // norm by construction
  }
  return X;
}

IterateBlock init_near_saddle(const IterateBlock& saddle, double delta,
                              GaussianRng& rng) {
  if (delta <= 0.0) throw std::invalid_argument("init_near_saddle: delta must be > 0");
  IterateBlock X = saddle;
  IterateBlock E(saddle.n, saddle.p);
  for (double& v : E.data) v = rng.gaussian();
  double scale = 0.99 * delta / E.fro_norm();
  for (size_t k = 0; k < X.data.size(); ++k) X.data[k] += scale * E.data[k];
  X.refresh_col_norms();
  return X;
}

IterateBlock init_near_saddle(const IterateBlock& saddle, double delta,
                              std::uint64_t seed) {
  GaussianRng rng(seed);
  return init_near_saddle(saddle, delta, rng);
}

SolveResult solve(const SparseSymMatrix& A, const SolverConfig& cfg,
                  IterateBlock init, const SolveOptions& opts) {
  if (init.p != cfg.p) throw std::invalid_argument("solve: init block has wrong p");
  if (A.n() != init.n) throw std::invalid_argument("solve: dimension mismatch");
  if (cfg.tol <= 0.0) throw std::invalid_argument("solve: tol must be positive");

  double alpha;
  if (cfg.alpha) {
    if (*cfg.alpha <= 0.0) throw std::invalid_argument("solve: alpha must be positive");
    alpha = *cfg.alpha;
  } else {
    double rho = A.has_rho() ? A.rho() : spectral_norm_estimate(A);
    DomainBounds bounds = DomainBounds::for_p(rho, cfg.p);
    alpha = auto_stepsize(bounds);
    for (int c = 0; c < cfg.p; ++c)
      if (init.recomputed_col_norm(c) > bounds.r(c))
        throw std::invalid_argument(
            "solve: AUTO stepsize requires ||x_i|| <= R_i at initialization");
  }

  SolveResult res;
  res.alpha = alpha;
  SolverState st;
  st.X = std::move(init);
  st.X.refresh_col_norms();

  const std::int64_t trace_every = std::max<std::int64_t>(1, cfg.trace_every);
  const std::int64_t check_every = std::max<std::int64_t>(1, cfg.stop_check_every);
  std::int64_t last_recorded = -1;

  // Buffers reused across iterations; the loop does not allocate.
  IterateBlock g(st.X.n, st.X.p);
  DenseMatrix G(st.X.p, st.X.p);

  // Diagnostic: leading run of columns whose relative step is below tol.
  auto count_converged_columns = [&](const IterateBlock& dir) {
    int cc = 0;
    for (int c = 0; c < st.X.p; ++c) {
      double rel =
          alpha * norm2(dir.col(c)) / std::max(1.0, st.X.col_norms[c]);
      if (rel < cfg.tol)
        cc++;
      else
        break;
    }
    return cc;
  };

  auto emit = [&](const StepView& view) {
    TraceRecord rec;
    rec.t = view.t;
    rec.dir_norm = view.dir_norm;
    rec.col_norms.assign(st.X.col_norms.begin(), st.X.col_norms.end());
    if (opts.enricher) opts.enricher(view, rec);
    res.trace.push_back(std::move(rec));
    st.converged_columns = count_converged_columns(view.dir);
    last_recorded = view.t;
  };

  for (;;) {
    direction_into(A, st.X, G, g);
    double dir_norm = g.fro_norm();
    // ||X||_F from the per-column cache kept fresh after every update.
    double x_norm = 0.0;
    for (double cn : st.X.col_norms) x_norm += cn * cn;
    x_norm = std::sqrt(x_norm);
    StepView view{st.t, st.X, g, dir_norm, x_norm, alpha};

    if (!std::isfinite(dir_norm) || !std::isfinite(x_norm)) {
      res.outcome = Outcome::Diverged;
      res.message = "non-finite values at iteration " + std::to_string(st.t);
      if (last_recorded != st.t) emit(view);
      break;
    }

    if (opts.observer) opts.observer(view);
    if (st.t % trace_every == 0) emit(view);

    bool stop = false;
    if (st.t % check_every == 0) {
      if (opts.stop_metric) {
        stop = opts.stop_metric(view) < cfg.tol;
      } else {
        stop = alpha * dir_norm / std::max(1.0, x_norm) < cfg.tol;
      }
    }
    if (stop) {
      res.outcome = Outcome::Converged;
      if (last_recorded != st.t) emit(view);
      break;
    }
    if (st.t >= cfg.max_iter) {
      res.outcome = Outcome::MaxIter;
      res.message = "max_iter reached without convergence";
      if (last_recorded != st.t) emit(view);
      break;
    }

    st.last_step_norm = alpha * dir_norm;
    for (size_t k = 0; k < st.X.data.size(); ++k) st.X.data[k] -= alpha * g.data[k];
    st.X.refresh_col_norms();
    st.t++;
  }

  res.state = std::move(st);
  return res;
}

}  // namespace triofm
