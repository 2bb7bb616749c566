#include "triofm/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace triofm {

bool FixedPointSpec::is_stable_form() const {
  for (int k = 0; k < p(); ++k)
    if (selection[k] != k) return false;
  return true;
}

void FixedPointSpec::validate(int q) const {
  if (selection.size() != signs.size() || selection.empty())
    throw std::invalid_argument("fixed-point spec: inconsistent sizes");
  for (int k = 0; k < p(); ++k) {
    if (selection[k] == kNone) continue;
    if (selection[k] < 0 || selection[k] >= q)
      throw std::invalid_argument("fixed-point spec: eigenindex outside [0, q)");
    if (signs[k] != 1 && signs[k] != -1)
      throw std::invalid_argument("fixed-point spec: sign must be +-1");
    for (int j = 0; j < k; ++j)
      if (selection[j] == selection[k])
        throw std::invalid_argument("fixed-point spec: repeated eigenindex");
  }
}

IterateBlock construct_fixed_point(const FixedPointSpec& spec, const Spectrum& S) {
  spec.validate(S.q);
  IterateBlock X(S.n, spec.p());
  for (int k = 0; k < spec.p(); ++k) {
    if (spec.selection[k] == FixedPointSpec::kNone) continue;
    int j = spec.selection[k];
    if (S.eigenvalues[j] >= 0.0)
      throw std::invalid_argument("fixed-point spec: selected eigenvalue not negative");
    double scale = spec.signs[k] * std::sqrt(-S.eigenvalues[j]);
    std::span<const double> uj = S.u(j);
    std::span<double> x = X.col(k);
    for (int r = 0; r < S.n; ++r) x[r] = scale * uj[r];
  }
  X.refresh_col_norms();
  return X;
}

FixedPointClass classify_fixed_point(const IterateBlock& X, const Spectrum& S,
                                     double tol) {
  if (spectrum_degenerate_up_to(S, X.p))
    throw DegenerateSpectrumError(
        "classify_fixed_point: eigenvalue gap below 1e-10, classification ambiguous");

  std::vector<int> matched(X.p, FixedPointSpec::kNone);
  std::vector<bool> used(S.q, false);
  bool any_none = false;
  for (int k = 0; k < X.p; ++k) {
    std::span<const double> x = X.col(k);
    if (norm2(x) <= tol) {
      any_none = true;
      continue;
    }
    bool found = false;
    for (int j = 0; j < S.q && !found; ++j) {
      double scale = std::sqrt(-S.eigenvalues[j]);
      for (int sign : {1, -1}) {
        double d2 = 0.0;
        std::span<const double> uj = S.u(j);
        for (int r = 0; r < S.n; ++r) {
          double diff = x[r] - sign * scale * uj[r];
          d2 += diff * diff;
        }
        if (std::sqrt(d2) <= tol) {
          if (used[j]) return FixedPointClass::NotFixed;
          used[j] = true;
          matched[k] = j;
          found = true;
          break;
        }
      }
    }
    if (!found) return FixedPointClass::NotFixed;
  }

  if (!any_none) {
    bool identity = true;
    for (int k = 0; k < X.p; ++k)
      if (matched[k] != k) identity = false;
    if (identity) return FixedPointClass::Stable;
  }
  return FixedPointClass::Unstable;
}

std::vector<FixedPointSpec> enumerate_fixed_point_specs(int q, int p) {
  std::vector<FixedPointSpec> out;
  FixedPointSpec cur;
  cur.selection.assign(p, FixedPointSpec::kNone);
  cur.signs.assign(p, 1);
  std::vector<bool> used(q, false);

  auto rec = [&](auto&& self, int slot) -> void {
    if (slot == p) {
      out.push_back(cur);
      return;
    }
    cur.selection[slot] = FixedPointSpec::kNone;
    cur.signs[slot] = 1;
    self(self, slot + 1);
    for (int j = 0; j < q; ++j) {
      if (used[j]) continue;
      used[j] = true;
      cur.selection[slot] = j;
      for (int sign : {1, -1}) {
        cur.signs[slot] = sign;
        self(self, slot + 1);
      }
      used[j] = false;
    }
    cur.selection[slot] = FixedPointSpec::kNone;
    cur.signs[slot] = 1;
  };
  rec(rec, 0);
  return out;
}

FixedPointSpec sample_unstable_spec(int q, int p, GaussianRng& rng) {
  // Rejection from the uniform slot distribution stays uniform over the
  // valid unstable specs.
  for (;;) {
    FixedPointSpec spec;
    spec.selection.resize(p);
    spec.signs.assign(p, 1);
    const std::uint64_t options = 1 + 2 * std::uint64_t(q);
    for (int k = 0; k < p; ++k) {
      std::uint64_t r = rng.raw() % options;
      if (r == 0) {
        spec.selection[k] = FixedPointSpec::kNone;
      } else {
        spec.selection[k] = int((r - 1) / 2);
        spec.signs[k] = (r % 2 == 1) ? 1 : -1;
      }
    }
    bool injective = true;
    for (int k = 0; k < p && injective; ++k)
      for (int j = 0; j < k; ++j)
        if (spec.selection[k] != FixedPointSpec::kNone &&
            spec.selection[k] == spec.selection[j]) {
          injective = false;
          break;
        }
    if (!injective || spec.is_stable_form()) continue;
    return spec;
  }
}

JacobianBlock::JacobianBlock(const SparseSymMatrix& A, const IterateBlock& X, int k)
    : A_(&A), cols_(X.n, k) {
  if (k < 1 || k > X.p) throw std::invalid_argument("jacobian_block: k out of range");
  for (int c = 0; c < k; ++c) {
    std::span<const double> src = X.col(c);
    std::span<double> dst = cols_.col(c);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  cols_.refresh_col_norms();
  xk_sq_ = dot(cols_.col(k - 1), cols_.col(k - 1));
}

void JacobianBlock::apply(std::span<const double> v, std::span<double> out) const {
  A_->apply(v, out);
  const int n = cols_.n;
  for (int c = 0; c < cols_.p; ++c) {
    std::span<const double> xc = cols_.col(c);
    double coef = dot(xc, v);
    for (int r = 0; r < n; ++r) out[r] += coef * xc[r];
  }
  std::span<const double> xk = cols_.col(cols_.p - 1);
  double coef = dot(xk, v);
  for (int r = 0; r < n; ++r) out[r] += xk_sq_ * v[r] + coef * xk[r];
}

DenseMatrix JacobianBlock::densify() const {
  const int n = cols_.n;
  DenseMatrix J(n, n);
  std::vector<double> e(n, 0.0), col(n);
  for (int c = 0; c < n; ++c) {
    e[c] = 1.0;
    apply(e, col);
    for (int r = 0; r < n; ++r) J.at(r, c) = col[r];
    e[c] = 0.0;
  }
  return J;
}

double JacobianBlock::min_eigenvalue(int size_cap) const {
  Spectrum S = dense_symmetric_eig(densify(), size_cap);
  return S.eigenvalues.front();
}

static double e_vec_impl(const IterateBlock& X, const Spectrum& S,
                         bool cached_norms) {
  const int p = X.p;
  if (p > S.q)
    throw std::invalid_argument("e_vec: requires p <= q (negative eigenvalue count)");
  if (p < S.n && std::abs(S.eigenvalues[p] - S.eigenvalues[p - 1]) < 1e-10)
    throw DegenerateSpectrumError("e_vec: degenerate spectrum at the p boundary");

  double num_sq = 0.0;
  double den_sq = 0.0;
  for (int i = 0; i < p; ++i) {
    double lam = S.eigenvalues[i];
    double scale = std::sqrt(-lam);
    double c = S.u_dot(i, X.col(i));
    double sign = c >= 0.0 ? 1.0 : -1.0;  // ties resolve to +1
    // ||x - s*scale*u||^2 expanded with ||u|| = 1.
    double r_sq = cached_norms ? X.col_norms[i] * X.col_norms[i]
                               : dot(X.col(i), X.col(i));
    double term = r_sq - 2.0 * sign * scale * c + (-lam);
    num_sq += std::max(0.0, term);
    den_sq += -lam;
  }
  return std::sqrt(num_sq) / std::sqrt(den_sq);
}

double e_vec(const IterateBlock& X, const Spectrum& S) {
  return e_vec_impl(X, S, false);
}

double e_vec_cached(const IterateBlock& X, const Spectrum& S) {
  return e_vec_impl(X, S, true);
}

double e_obj(const SparseSymMatrix& A, const IterateBlock& X, const Spectrum& S) {
  double f = objective(A, X);
  double fstar = 0.0;
  for (int i = X.p; i < S.n; ++i) fstar += S.eigenvalues[i] * S.eigenvalues[i];
  return f - fstar;
}

double tangent(std::span<const double> x, std::span<const double> u) {
  double r_sq = dot(x, x);
  if (r_sq == 0.0) throw std::invalid_argument("tangent: zero vector");
  double c = dot(u, x);
  if (c == 0.0) return std::numeric_limits<double>::infinity();
  // ||x - (u.x) u|| instead of sqrt(||x||^2 - c^2): no cancellation when
  // x is nearly aligned with u.
  double w_sq = 0.0;
  for (size_t r = 0; r < x.size(); ++r) {
    double w = x[r] - c * u[r];
    w_sq += w * w;
  }
  return std::sqrt(w_sq) / std::abs(c);
}

double eigvec_tangent(const Spectrum& S, int k, std::span<const double> x) {
  if (!S.axis_index.empty()) {
    int axis = S.axis_index[k];
    double c = x[axis];
    bool all_zero = true;
    for (size_t r = 0; r < x.size(); ++r) all_zero &= (x[r] == 0.0);
    if (all_zero) throw std::invalid_argument("tangent: zero vector");
    if (c == 0.0) return std::numeric_limits<double>::infinity();
    double w_sq = 0.0;
    for (size_t r = 0; r < x.size(); ++r)
      if (int(r) != axis) w_sq += x[r] * x[r];
    return std::sqrt(w_sq) / std::abs(c);
  }
  return tangent(x, S.u(k));
}

double residual_E_norm(const IterateBlock& X, int prefix_cols, const Spectrum& S) {
  if (prefix_cols < 1 || prefix_cols > X.p)
    throw std::invalid_argument("residual_E_norm: prefix must be nonempty");
  const int m = prefix_cols;
  // ||E||^2 = ||Xp^T Xp||^2 + sum lam_k^2 + 2 sum_kl lam_l (u_l . x_k)^2
  double total = 0.0;
  for (int k = 0; k < m; ++k)
    for (int l = 0; l < m; ++l) {
      double g = dot(X.col(k), X.col(l));
      total += g * g;
    }
  for (int l = 0; l < m; ++l) total += S.eigenvalues[l] * S.eigenvalues[l];
  for (int k = 0; k < m; ++k)
    for (int l = 0; l < m; ++l) {
      double d = S.u_dot(l, X.col(k));
      total += 2.0 * S.eigenvalues[l] * d * d;
    }
  return std::sqrt(std::max(0.0, total));
}

EnergyContext make_energy_context(const SparseSymMatrix& A, const Spectrum& S,
                                  int column_index, const DomainBounds& bounds) {
  if (column_index < 1 || column_index > S.q)
    throw std::invalid_argument("energy context: column index outside [1, q]");
  EnergyContext ctx;
  ctx.column_index = column_index;
  ctx.A = &A;
  ctx.prefix_cols = column_index - 1;
  ctx.r_i = bounds.r(column_index - 1);

  if (ctx.prefix_cols > 0) {
    FixedPointSpec spec;
    spec.selection.resize(ctx.prefix_cols);
    spec.signs.assign(ctx.prefix_cols, 1);
    for (int k = 0; k < ctx.prefix_cols; ++k) spec.selection[k] = k;
    ctx.prefix = construct_fixed_point(spec, S);
    ctx.atilde_fro_sq = objective(A, ctx.prefix);
  } else {
    ctx.prefix = IterateBlock();
    ctx.atilde_fro_sq = A.fro_norm_sq();
  }

  StationaryPoint zero;
  zero.label = "0";
  zero.x.assign(S.n, 0.0);
  ctx.stationary_set.push_back(std::move(zero));
  for (int j = column_index - 1; j < S.q; ++j) {
    double scale = std::sqrt(-S.eigenvalues[j]);
    for (int sign : {1, -1}) {
      StationaryPoint sp;
      sp.label = (sign > 0 ? "+u" : "-u") + std::to_string(j + 1);
      sp.x.resize(S.n);
      std::span<const double> uj = S.u(j);
      for (int r = 0; r < S.n; ++r) sp.x[r] = sign * scale * uj[r];
      ctx.stationary_set.push_back(std::move(sp));
    }
  }
  for (StationaryPoint& sp : ctx.stationary_set) sp.F = energy_F(ctx, sp.x);
  return ctx;
}

double energy_F(const EnergyContext& ctx, std::span<const double> x) {
  const int n = ctx.A->n();
  std::vector<double> ax(n);
  ctx.A->apply(x, ax);
  double cross = dot(x, ax);
  for (int c = 0; c < ctx.prefix_cols; ++c) {
    double d = dot(ctx.prefix.col(c), x);
    cross += d * d;
  }
  double r_sq = dot(x, x);
  double f = ctx.atilde_fro_sq + 2.0 * cross + r_sq * r_sq;
  return f < 0.0 ? 0.0 : f;
}

void energy_grad_F(const EnergyContext& ctx, std::span<const double> x,
                   std::span<double> out) {
  const int n = ctx.A->n();
  ctx.A->apply(x, out);
  for (int c = 0; c < ctx.prefix_cols; ++c) {
    std::span<const double> pc = ctx.prefix.col(c);
    double d = dot(pc, x);
    for (int r = 0; r < n; ++r) out[r] += d * pc[r];
  }
  double r_sq = dot(x, x);
  for (int r = 0; r < n; ++r) out[r] += r_sq * x[r];
}

std::vector<double> energy_grad_F(const EnergyContext& ctx,
                                  std::span<const double> x) {
  std::vector<double> g(ctx.A->n());
  energy_grad_F(ctx, x, g);
  return g;
}

double stationary_epsilon_limit(const EnergyContext& ctx, const Spectrum& S) {
  const int i = ctx.column_index;  // 1-based
  double min_gap = std::numeric_limits<double>::infinity();
  for (int k = i - 1; k < S.q - 1; ++k)
    min_gap = std::min(min_gap, S.eigenvalues[k + 1] - S.eigenvalues[k]);
  double cap = std::min(min_gap / 2.0, -S.eigenvalues[S.q - 1] / S.n);
  return std::pow(cap, 1.5);
}

ProximityResult stationary_proximity(const EnergyContext& ctx,
                                     std::span<const double> x, double epsilon,
                                     const Spectrum& S) {
  double limit = stationary_epsilon_limit(ctx, S);
  if (!(epsilon > 0.0) || epsilon >= limit)
    throw std::invalid_argument(
        "stationary_proximity: epsilon violates the premise bound " +
        std::to_string(limit));

  ProximityResult res;
  res.distance = std::numeric_limits<double>::infinity();
  for (const StationaryPoint& sp : ctx.stationary_set) {
    double d2 = 0.0;
    for (size_t r = 0; r < x.size(); ++r) {
      double diff = x[r] - sp.x[r];
      d2 += diff * diff;
    }
    double d = std::sqrt(d2);
    if (d < res.distance) {
      res.distance = d;
      res.label = sp.label;
    }
  }
  std::vector<double> g = energy_grad_F(ctx, x);
  double gn = norm2(g);
  res.bound_checked = gn < epsilon;
  res.bound_satisfied =
      !res.bound_checked ||
      res.distance <= std::sqrt(double(ctx.A->n())) * std::cbrt(epsilon);
  return res;
}

std::vector<std::vector<double>> run_frozen_prefix_column(
    const EnergyContext& ctx, std::span<const double> x0, double alpha,
    std::int64_t max_steps, double grad_stop_tol) {
  std::vector<std::vector<double>> path;
  std::vector<double> x(x0.begin(), x0.end());
  std::vector<double> g(x.size());
  path.push_back(x);
  for (std::int64_t t = 0; t < max_steps; ++t) {
    energy_grad_F(ctx, x, g);
    double gn = norm2(g);
    if (grad_stop_tol > 0.0 && gn < grad_stop_tol) break;
    for (size_t r = 0; r < x.size(); ++r) x[r] -= alpha * g[r];
    path.push_back(x);
  }
  return path;
}

bool spectrum_degenerate_up_to(const Spectrum& S, int p) {
  for (int i = 0; i < p && i + 1 < S.n; ++i)
    if (std::abs(S.eigenvalues[i + 1] - S.eigenvalues[i]) < 1e-10) return true;
  return false;
}

TraceEnricher make_oracle_enricher(const SparseSymMatrix& A, const Spectrum& S,
                                   EnricherOptions opts,
                                   const DomainBounds* bounds) {
  // Energy contexts are only buildable with a bounds ladder.
  std::shared_ptr<std::vector<EnergyContext>> contexts;
  if (opts.energy && bounds) {
    contexts = std::make_shared<std::vector<EnergyContext>>();
    for (int i = 1; i <= bounds->p() && i <= S.q; ++i)
      contexts->push_back(make_energy_context(A, S, i, *bounds));
  }
  const Spectrum* sp = &S;
  const SparseSymMatrix* ap = &A;
  return [sp, ap, opts, contexts](const StepView& view, TraceRecord& rec) {
    const IterateBlock& X = view.X;
    rec.e_obj = e_obj(*ap, X, *sp);
    if (rec.e_obj < 0.0 && rec.e_obj >= -1e-10) rec.e_obj = 0.0;
    if (X.p <= sp->q && !spectrum_degenerate_up_to(*sp, X.p))
      rec.e_vec = e_vec(X, *sp);
    if (opts.tangents) {
      rec.tangents.resize(X.p);
      for (int i = 0; i < X.p && i < sp->q; ++i)
        rec.tangents[i] = X.col_norms[i] == 0.0 ? kUndefined
                                                : eigvec_tangent(*sp, i, X.col(i));
      for (int i = sp->q; i < X.p; ++i) rec.tangents[i] = kUndefined;
    }
    if (opts.energy && contexts) {
      rec.energy.assign(X.p, kUndefined);
      for (size_t i = 0; i < contexts->size(); ++i)
        rec.energy[i] = energy_F((*contexts)[i], X.col(int(i)));
    }
    if (opts.residual) {
      rec.residual_E.assign(X.p, kUndefined);
      for (int i = 2; i <= X.p && i - 1 <= sp->q; ++i)
        rec.residual_E[i - 1] = residual_E_norm(X, i - 1, *sp);
      rec.residual_E[0] = 0.0;  // empty prefix
    }
  };
}

StopMetric make_evec_stop_metric(const Spectrum& S) {
  const Spectrum* sp = &S;
  return [sp](const StepView& view) { return e_vec_cached(view.X, *sp); };
}

}  // namespace triofm
