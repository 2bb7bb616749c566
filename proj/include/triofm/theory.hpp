// Fixed-point construction and classification, convergence metrics
// (e_vec / e_obj), angle tangents, prefix residual norms, and the
// per-column deflated energy function with its stationary set.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "triofm/engine.hpp"
#include "triofm/linalg.hpp"

namespace triofm {

/// Encodes a fixed point of the iteration: column k is
/// signs[k] * sqrt(-lambda_{selection[k]}) * u_{selection[k]}, or the zero
/// column when selection[k] == kNone. Non-none selections are pairwise
/// distinct indices into the strictly negative part of the spectrum.
struct FixedPointSpec {
  static constexpr int kNone = -1;
  std::vector<int> selection;  // 0-based eigenindex in [0, q) or kNone
  std::vector<int> signs;      // +1 / -1, ignored for kNone slots

  int p() const { return int(selection.size()); }
  /// The attracting form: identity selection, no zero columns.
  bool is_stable_form() const;
  void validate(int q) const;
};

IterateBlock construct_fixed_point(const FixedPointSpec& spec, const Spectrum& S);

enum class FixedPointClass { Stable, Unstable, NotFixed };

/// Match X against the fixed-point family within tol per column.
/// Refuses (DegenerateSpectrumError) when eigenvalue gaps below 1e-10
/// make the classification ambiguous.
FixedPointClass classify_fixed_point(const IterateBlock& X, const Spectrum& S,
                                     double tol);

/// Enumerate every FixedPointSpec for the given (q, p): all injective
/// selections with optional zero columns and both signs.
std::vector<FixedPointSpec> enumerate_fixed_point_specs(int q, int p);

/// Draw a uniformly random unstable spec (anything except the
/// identity-selection, no-zero-column form).
FixedPointSpec sample_unstable_spec(int q, int p, GaussianRng& rng);

/// Diagonal block of the update map's Jacobian at (X, column k):
///   J_kk = A + X_k X_k^T + (x_k . x_k) I + x_k x_k^T
/// with X_k the first k columns. Applied matrix-free; densify for the
/// small-n stability diagnostic.
class JacobianBlock {
 public:
  JacobianBlock(const SparseSymMatrix& A, const IterateBlock& X, int k);
  void apply(std::span<const double> v, std::span<double> out) const;
  DenseMatrix densify() const;
  /// Smallest eigenvalue via the dense oracle; positive means the block
  /// is locally stable.
  double min_eigenvalue(int size_cap = 4096) const;

 private:
  const SparseSymMatrix* A_;
  IterateBlock cols_;  // first k columns
  double xk_sq_;
};

inline JacobianBlock jacobian_block(const SparseSymMatrix& A, const IterateBlock& X,
                                    int k) {
  return JacobianBlock(A, X, k);
}

/// Sign-minimized relative distance to the stable set:
///   min_D ||X - U_p sqrt(-Lambda_p) D||_F / ||U_p sqrt(-Lambda_p)||_F,
/// the minimization decoupling per column (sign of u_i . x_i, ties +1).
/// Requires p <= q and a nondegenerate gap at the p boundary.
double e_vec(const IterateBlock& X, const Spectrum& S);

/// e_vec evaluated from the cached column norms (saves the per-column
/// dot products on hot paths); agrees with e_vec up to the norm-cache
/// tolerance, far below any stopping threshold in use.
double e_vec_cached(const IterateBlock& X, const Spectrum& S);

/// f(X) - f(X*) where f at the minimizer equals sum_{i>p} lambda_i^2.
double e_obj(const SparseSymMatrix& A, const IterateBlock& X, const Spectrum& S);

/// Tangent of the acute angle between x and span(u) for unit u:
/// sqrt(||x||^2 - (u.x)^2) / |u.x|; +inf when u.x == 0. Evaluated through
/// the orthogonal complement x - (u.x) u, which keeps full precision when
/// the angle is tiny.
double tangent(std::span<const double> x, std::span<const double> u);

/// tangent() against eigenvector k, using exact component reads when the
/// spectrum is axis-aligned.
double eigvec_tangent(const Spectrum& S, int k, std::span<const double> x);

/// Frobenius norm of E = sum_{k<i} (x_k x_k^T + lambda_k u_k u_k^T) for
/// the first `prefix_cols` columns of X, computed without forming the
/// n-by-n matrix (O(n * i^2)).
double residual_E_norm(const IterateBlock& X, int prefix_cols, const Spectrum& S);

/// A stationary point of the per-column energy, with its energy value.
struct StationaryPoint {
  std::string label;  // "0", "+u3", "-u3", ... (1-based index in labels)
  std::vector<double> x;
  double F;
};

/// Per-column energy context: the deflated operator
/// A~ = A + X*_{i-1} X*_{i-1}^T held as (sparse A, prefix columns), the
/// stationary set {0} u {+-sqrt(-lambda_j) u_j : i <= j <= q}, and the
/// Hessian norm bound 4 R_i^2.
struct EnergyContext {
  int column_index = 1;        // 1-based i
  const SparseSymMatrix* A = nullptr;
  IterateBlock prefix;         // exact X*_{i-1} (unused storage when i == 1)
  int prefix_cols = 0;
  double atilde_fro_sq = 0.0;  // ||A~||_F^2
  double r_i = 0.0;            // admissible radius for column i
  std::vector<StationaryPoint> stationary_set;

  double hessian_norm_bound() const { return 4.0 * r_i * r_i; }
};

EnergyContext make_energy_context(const SparseSymMatrix& A, const Spectrum& S,
                                  int column_index, const DomainBounds& bounds);

/// F(x) = ||A~ + x x^T||_F^2 via the expansion identity.
double energy_F(const EnergyContext& ctx, std::span<const double> x);

/// grad F(x) = A~ x + x (x.x) in the absorbed convention (the analytic
/// gradient's factor 4 lives in the stepsize, as for the main objective).
void energy_grad_F(const EnergyContext& ctx, std::span<const double> x,
                   std::span<double> out);
std::vector<double> energy_grad_F(const EnergyContext& ctx,
                                  std::span<const double> x);

/// Largest admissible epsilon for the stationary-proximity analysis:
/// (min(min gap / 2, -lambda_q / n))^{3/2} over gaps within [i, q].
double stationary_epsilon_limit(const EnergyContext& ctx, const Spectrum& S);

/// Nearest stationary point and its distance. When ||grad F(x)|| <
/// epsilon, the distance is asserted <= sqrt(n) * epsilon^{1/3}; the
/// returned flag reports that check. Throws when epsilon violates the
/// premise bound.
struct ProximityResult {
  std::string label;
  double distance;
  bool bound_checked;    // ||grad F|| was below epsilon
  bool bound_satisfied;  // distance within sqrt(n) * eps^{1/3}
};
ProximityResult stationary_proximity(const EnergyContext& ctx,
                                     std::span<const double> x, double epsilon,
                                     const Spectrum& S);

/// Gradient-descent steps on F with the prefix frozen: exactly the
/// column-i iteration once the earlier columns sit at their limits.
/// Returns the visited column vectors x^(0..steps).
std::vector<std::vector<double>> run_frozen_prefix_column(
    const EnergyContext& ctx, std::span<const double> x0, double alpha,
    std::int64_t max_steps, double grad_stop_tol = 0.0);

/// Degenerate-gap test used by the refusal paths: any
/// |lambda_i - lambda_{i+1}| < 1e-10 for i = 1..p (1-based).
bool spectrum_degenerate_up_to(const Spectrum& S, int p);

/// Trace enrichment: fills e_obj / e_vec (and tangents / energy /
/// residual_E when enabled) from the oracle.
struct EnricherOptions {
  bool tangents = false;
  bool energy = false;
  bool residual = false;
};
TraceEnricher make_oracle_enricher(const SparseSymMatrix& A, const Spectrum& S,
                                   EnricherOptions opts = {},
                                   const DomainBounds* bounds = nullptr);

/// Stop metric measuring e_vec against the oracle.
StopMetric make_evec_stop_metric(const Spectrum& S);

}  // namespace triofm
