// Core dense/sparse kernels for the eigensolver: CSR symmetric matrix,
// tall column blocks, the factored objective, and a self-contained dense
// symmetric eigendecomposition used as the verification oracle.
#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace triofm {

class DegenerateSpectrumError : public std::runtime_error {
 public:
  explicit DegenerateSpectrumError(const std::string& what)
      : std::runtime_error(what) {}
};

/// Dense column-major matrix. Small sizes only (Gram blocks, oracle input).
struct DenseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // column-major

  DenseMatrix() = default;
  DenseMatrix(int r, int c) : rows(r), cols(c), data(size_t(r) * c, 0.0) {}

  double& at(int r, int c) { return data[size_t(c) * rows + r]; }
  double at(int r, int c) const { return data[size_t(c) * rows + r]; }
  std::span<double> col(int c) { return {data.data() + size_t(c) * rows, size_t(rows)}; }
  std::span<const double> col(int c) const {
    return {data.data() + size_t(c) * rows, size_t(rows)};
  }
};

/// An n-by-p block of iterate columns, column-major, with cached column
/// norms. The cache is maintained by the producers of the block; it must
/// agree with the recomputed norm to within 1e-14*(1+norm).
struct IterateBlock {
  int n = 0;
  int p = 0;
  std::vector<double> data;       // column-major, n*p
  std::vector<double> col_norms;  // p cached Euclidean norms

  IterateBlock() = default;
  IterateBlock(int n_, int p_)
      : n(n_), p(p_), data(size_t(n_) * p_, 0.0), col_norms(p_, 0.0) {
    if (p < 1 || n < p) throw std::invalid_argument("IterateBlock: need n >= p >= 1");
  }

  double& at(int r, int c) { return data[size_t(c) * n + r]; }
  double at(int r, int c) const { return data[size_t(c) * n + r]; }
  std::span<double> col(int c) { return {data.data() + size_t(c) * n, size_t(n)}; }
  std::span<const double> col(int c) const {
    return {data.data() + size_t(c) * n, size_t(n)};
  }

  void refresh_col_norms();
  double recomputed_col_norm(int c) const;
  double fro_norm() const;
};

/// Sparse symmetric matrix in CSR form. Construction validates structural
/// and numerical symmetry (bit-exact value equality between (i,j) and
/// (j,i)), sorted strictly increasing column indices per row, and finite
/// values. Immutable after construction except for the cached spectral
/// norm estimate.
class SparseSymMatrix {
 public:
  struct Entry {
    int row;
    int col;
    double value;
  };

  SparseSymMatrix() = default;  // empty; fill via the named constructors

  /// Build from a full entry list containing both (i,j) and (j,i).
  static SparseSymMatrix from_entries(int n, std::vector<Entry> entries);
  /// Build from lower-triangle entries (row >= col); the strict upper part
  /// is mirrored.
  static SparseSymMatrix from_lower_triangle(int n, const std::vector<Entry>& lower);

  int n() const { return n_; }
  std::int64_t nnz() const { return std::int64_t(values_.size()); }
  std::span<const std::int64_t> row_ptr() const { return row_ptr_; }
  std::span<const int> col_idx() const { return col_idx_; }
  std::span<const double> values() const { return values_; }

  /// Frobenius norm squared (sum of all stored values squared).
  double fro_norm_sq() const;

  /// y = A * x for a single vector.
  void apply(std::span<const double> x, std::span<double> y) const;

  bool has_rho() const { return rho_ >= 0.0; }
  /// Cached spectral norm estimate; call spectral_norm_estimate first.
  double rho() const {
    if (rho_ < 0.0) throw std::logic_error("rho not computed yet");
    return rho_;
  }
  void cache_rho(double value) const { rho_ = value; }

  /// True when every stored entry sits on the diagonal; kernels then use
  /// a dense diagonal array (same arithmetic, no index loads).
  bool is_diagonal() const { return is_diagonal_; }
  std::span<const double> diagonal() const { return diag_; }

 private:
  int n_ = 0;
  std::vector<std::int64_t> row_ptr_;
  std::vector<int> col_idx_;
  std::vector<double> values_;
  bool is_diagonal_ = false;
  std::vector<double> diag_;  // filled only when is_diagonal_
  mutable double rho_ = -1.0;  // < 0 means "not computed"
};

/// Oracle eigendecomposition: eigenvalues ascending, orthonormal columns
/// of U, and q = number of strictly negative eigenvalues. When the input
/// was diagonal, axis_index[i] records which coordinate axis carries
/// eigenvector i (making U a signed permutation and u-dot products O(1)).
struct Spectrum {
  int n = 0;
  std::vector<double> eigenvalues;  // ascending
  DenseMatrix U;                    // n x n, column i = eigenvector i
  int q = 0;
  std::vector<int> axis_index;  // empty unless U is an axis permutation

  std::span<const double> u(int i) const { return U.col(i); }

  /// u_k . x, using the axis shortcut when available.
  double u_dot(int k, std::span<const double> x) const;
};

// -- kernels ----------------------------------------------------------------

/// Product A*X; output column j depends only on input column j.
IterateBlock spmm(const SparseSymMatrix& A, const IterateBlock& X);

/// X^T X, exactly symmetric: the upper half is computed and mirrored.
DenseMatrix gram(const IterateBlock& X);

/// Upper triangular part, diagonal included; entries below it are zeroed.
DenseMatrix triu(const DenseMatrix& M);

/// Power iteration estimate of ||A||_2, inflated by 1.05 so the result is
/// an overestimate for any converged run; the value is cached in A.
/// A zero matrix yields 0. Throws after 1e5 iterations without reaching
/// the relative-change tolerance.
double spectral_norm_estimate(const SparseSymMatrix& A, double rel_tol = 1e-10);

/// Cyclic Jacobi eigendecomposition of a symmetric dense matrix. Sweeps
/// until max |offdiag| <= 1e-12 * ||A||_F. Eigenpairs are sorted ascending
/// and each eigenvector's first nonzero component is made positive.
/// Rejects asymmetric input (beyond 1e-12 relative) and n > size_cap.
Spectrum dense_symmetric_eig(const DenseMatrix& A_dense, int size_cap = 4096);

/// f(X) = ||A + X X^T||_F^2 evaluated through the expansion
///   ||A||_F^2 + 2 sum_i x_i.(A x_i) + ||X^T X||_F^2,
/// which never forms the n-by-n sum.
double objective(const SparseSymMatrix& A, const IterateBlock& X);

/// Gradient of f in the absorbed convention: A X + X (X^T X).
/// The analytic gradient carries an extra factor 4 which is absorbed into
/// the stepsize everywhere in this library; all stepsize values refer to
/// the absorbed form.
IterateBlock ofm_gradient(const SparseSymMatrix& A, const IterateBlock& X);

// -- helpers ----------------------------------------------------------------

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

/// Dense copy of a sparse matrix (tests and small diagnostics only).
DenseMatrix densify(const SparseSymMatrix& A);

}  // namespace triofm
