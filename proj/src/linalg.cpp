#include "triofm/linalg.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>

namespace triofm {

// Four fixed accumulation chains: pipelines the additions without giving
// the compiler license to reassociate, so results stay deterministic.
double dot(std::span<const double> a, std::span<const double> b) {
  const size_t n = a.size();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; k < n; ++k) s += a[k] * b[k];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void IterateBlock::refresh_col_norms() {
  for (int c = 0; c < p; ++c) col_norms[c] = norm2(col(c));
}

double IterateBlock::recomputed_col_norm(int c) const { return norm2(col(c)); }

double IterateBlock::fro_norm() const { return norm2(data); }

static bool bit_equal(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

SparseSymMatrix SparseSymMatrix::from_entries(int n, std::vector<Entry> entries) {
  if (n <= 0) throw std::invalid_argument("matrix dimension must be positive");
  for (const Entry& e : entries) {
    if (e.row < 0 || e.row >= n || e.col < 0 || e.col >= n)
      throw std::invalid_argument("matrix entry index out of range");
    if (!std::isfinite(e.value))
      throw std::invalid_argument("matrix entry value not finite");
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  for (size_t k = 1; k < entries.size(); ++k) {
    if (entries[k].row == entries[k - 1].row && entries[k].col == entries[k - 1].col)
      throw std::invalid_argument("duplicate matrix entry");
  }

  // Symmetry: every (i,j) needs a bit-equal (j,i) partner.
  auto find_value = [&entries](int r, int c, double* out) {
    auto it = std::lower_bound(
        entries.begin(), entries.end(), std::pair<int, int>(r, c),
        [](const Entry& e, const std::pair<int, int>& key) {
          return e.row != key.first ? e.row < key.first : e.col < key.second;
        });
    if (it == entries.end() || it->row != r || it->col != c) return false;
    *out = it->value;
    return true;
  };
  for (const Entry& e : entries) {
    if (e.row == e.col) continue;
    double mirror;
    if (!find_value(e.col, e.row, &mirror) || !bit_equal(mirror, e.value))
      throw std::invalid_argument("matrix not symmetric at ingest");
  }

  SparseSymMatrix A;
  A.n_ = n;
  A.row_ptr_.assign(size_t(n) + 1, 0);
  A.col_idx_.reserve(entries.size());
  A.values_.reserve(entries.size());
  for (const Entry& e : entries) A.row_ptr_[size_t(e.row) + 1]++;
  for (int r = 0; r < n; ++r) A.row_ptr_[size_t(r) + 1] += A.row_ptr_[r];
  A.is_diagonal_ = true;
  for (const Entry& e : entries) {
    A.col_idx_.push_back(e.col);
    A.values_.push_back(e.value);
    A.is_diagonal_ &= (e.row == e.col);
  }
  if (A.is_diagonal_) {
    A.diag_.assign(size_t(n), 0.0);
    for (const Entry& e : entries) A.diag_[e.row] = e.value;
  }
  return A;
}

SparseSymMatrix SparseSymMatrix::from_lower_triangle(int n,
                                                     const std::vector<Entry>& lower) {
  std::vector<Entry> full;
  full.reserve(lower.size() * 2);
  for (const Entry& e : lower) {
    if (e.row < e.col)
      throw std::invalid_argument("entry above the diagonal in lower-triangle input");
    full.push_back(e);
    if (e.row != e.col) full.push_back({e.col, e.row, e.value});
  }
  return from_entries(n, std::move(full));
}

double SparseSymMatrix::fro_norm_sq() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

void SparseSymMatrix::apply(std::span<const double> x, std::span<double> y) const {
  if (is_diagonal_) {
    for (int r = 0; r < n_; ++r) y[r] = diag_[r] * x[r];
    return;
  }
  for (int r = 0; r < n_; ++r) {
    double acc = 0.0;
    for (std::int64_t k = row_ptr_[r]; k < row_ptr_[size_t(r) + 1]; ++k)
      acc += values_[k] * x[col_idx_[k]];
    y[r] = acc;
  }
}

double Spectrum::u_dot(int k, std::span<const double> x) const {
  if (!axis_index.empty()) {
    int axis = axis_index[k];
    double uk = U.at(axis, k);  // +-1
    return uk * x[axis];
  }
  return dot(U.col(k), x);
}

IterateBlock spmm(const SparseSymMatrix& A, const IterateBlock& X) {
  if (A.n() != X.n) throw std::invalid_argument("spmm: dimension mismatch");
  IterateBlock Y(X.n, X.p);
  for (int c = 0; c < X.p; ++c) A.apply(X.col(c), Y.col(c));
  Y.refresh_col_norms();
  return Y;
}

DenseMatrix gram(const IterateBlock& X) {
  DenseMatrix G(X.p, X.p);
  for (int c = 0; c < X.p; ++c)
    for (int r = 0; r <= c; ++r) {
      double g = dot(X.col(r), X.col(c));
      G.at(r, c) = g;
      G.at(c, r) = g;  // bitwise mirror
    }
  return G;
}

DenseMatrix triu(const DenseMatrix& M) {
  if (M.rows != M.cols) throw std::invalid_argument("triu: square input required");
  DenseMatrix T = M;
  for (int c = 0; c < M.cols; ++c)
    for (int r = c + 1; r < M.rows; ++r) T.at(r, c) = 0.0;
  return T;
}

double spectral_norm_estimate(const SparseSymMatrix& A, double rel_tol) {
  const int n = A.n();
  double vmax = 0.0;
  for (double v : A.values()) vmax = std::max(vmax, std::abs(v));
  if (A.nnz() == 0 || vmax == 0.0) {
    A.cache_rho(0.0);
    return 0.0;
  }

  // Fixed-seed start vector keeps the estimate deterministic per matrix.
  std::mt19937_64 gen(0x5eed0f2bULL);
  std::vector<double> v(n), w(n);
  auto randomize = [&] {
    for (double& x : v) x = double(gen() >> 11) * 0x1.0p-52 - 1.0;
    double nv = norm2(v);
    for (double& x : v) x /= nv;
  };
  randomize();

  double prev = std::numeric_limits<double>::infinity();
  const std::int64_t max_iter = 100000;
  for (std::int64_t it = 0; it < max_iter; ++it) {
    A.apply(v, w);
    double est = norm2(w);  // sqrt of the A^2 Rayleigh quotient at unit v
    if (est == 0.0) {       // start vector fell in the kernel; re-draw
      randomize();
      prev = std::numeric_limits<double>::infinity();
      continue;
    }
    for (int i = 0; i < n; ++i) v[i] = w[i] / est;
    if (std::abs(est - prev) <= rel_tol * est) {
      double rho = est * 1.05;
      A.cache_rho(rho);
      return rho;
    }
    prev = est;
  }
  throw std::runtime_error("spectral_norm_estimate: no convergence in 1e5 iterations");
}

// -- dense symmetric eigendecomposition (cyclic Jacobi) ----------------------

Spectrum dense_symmetric_eig(const DenseMatrix& A_dense, int size_cap) {
  const int n = A_dense.rows;
  if (A_dense.cols != n) throw std::invalid_argument("dense eig: square input required");
  if (n > size_cap) throw std::invalid_argument("dense eig: size cap exceeded");

  double amax = 0.0;
  for (double v : A_dense.data) amax = std::max(amax, std::abs(v));
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < c; ++r)
      if (std::abs(A_dense.at(r, c) - A_dense.at(c, r)) > 1e-12 * amax)
        throw std::invalid_argument("dense eig: input not symmetric");

  // Work on the symmetrized copy; accumulate rotations in V.
  DenseMatrix B(n, n), V(n, n);
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r)
      B.at(r, c) = 0.5 * (A_dense.at(r, c) + A_dense.at(c, r));
    V.at(c, c) = 1.0;
  }

  double fro = 0.0;
  for (double v : B.data) fro += v * v;
  fro = std::sqrt(fro);
  const double off_tol = 1e-12 * fro;

  const int max_sweeps = 64;
  bool converged = (fro == 0.0);
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = B.at(p, q);
        if (apq == 0.0) continue;
        double app = B.at(p, p), aqq = B.at(q, q);
        double tau = (aqq - app) / (2.0 * apq);
        double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = t * c;

        for (int k = 0; k < n; ++k) {
          double bkp = B.at(k, p), bkq = B.at(k, q);
          B.at(k, p) = c * bkp - s * bkq;
          B.at(k, q) = s * bkp + c * bkq;
        }
        for (int k = 0; k < n; ++k) {
          double bpk = B.at(p, k), bqk = B.at(q, k);
          B.at(p, k) = c * bpk - s * bqk;
          B.at(q, k) = s * bpk + c * bqk;
        }
        B.at(p, q) = 0.0;
        B.at(q, p) = 0.0;
        for (int k = 0; k < n; ++k) {
          double vkp = V.at(k, p), vkq = V.at(k, q);
          V.at(k, p) = c * vkp - s * vkq;
          V.at(k, q) = s * vkp + c * vkq;
        }
      }
    }
    double off = 0.0;
    for (int c2 = 0; c2 < n; ++c2)
      for (int r = 0; r < c2; ++r) off = std::max(off, std::abs(B.at(r, c2)));
    converged = (off <= off_tol);
  }
  if (!converged) throw std::runtime_error("dense eig: Jacobi sweeps did not converge");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&B](int a, int b) { return B.at(a, a) < B.at(b, b); });

  Spectrum S;
  S.n = n;
  S.eigenvalues.resize(n);
  S.U = DenseMatrix(n, n);
  for (int i = 0; i < n; ++i) {
    int j = order[i];
    S.eigenvalues[i] = B.at(j, j);
    double colmax = 0.0;
    for (int r = 0; r < n; ++r) colmax = std::max(colmax, std::abs(V.at(r, j)));
    double sign = 1.0;
    for (int r = 0; r < n; ++r) {
      if (std::abs(V.at(r, j)) > 1e-12 * colmax) {  // first nonzero component
        sign = V.at(r, j) > 0.0 ? 1.0 : -1.0;
        break;
      }
    }
    for (int r = 0; r < n; ++r) S.U.at(r, i) = sign * V.at(r, j);
  }
  S.q = 0;
  for (double lam : S.eigenvalues)
    if (lam < 0.0) S.q++;
  return S;
}

double objective(const SparseSymMatrix& A, const IterateBlock& X) {
  if (A.n() != X.n) throw std::invalid_argument("objective: dimension mismatch");
  IterateBlock AX = spmm(A, X);
  double cross = 0.0;
  for (int c = 0; c < X.p; ++c) cross += dot(X.col(c), AX.col(c));
  DenseMatrix G = gram(X);
  double gsq = 0.0;
  for (double v : G.data) gsq += v * v;
  double f = A.fro_norm_sq() + 2.0 * cross + gsq;
  return f < 0.0 ? 0.0 : f;  // the value is a squared norm
}

IterateBlock ofm_gradient(const SparseSymMatrix& A, const IterateBlock& X) {
  if (A.n() != X.n) throw std::invalid_argument("ofm_gradient: dimension mismatch");
  IterateBlock Y = spmm(A, X);
  DenseMatrix G = gram(X);
  for (int c = 0; c < X.p; ++c) {
    std::span<double> y = Y.col(c);
    for (int j = 0; j < X.p; ++j) {
      double gjc = G.at(j, c);
      std::span<const double> xj = X.col(j);
      for (int r = 0; r < X.n; ++r) y[r] += xj[r] * gjc;
    }
  }
  Y.refresh_col_norms();
  return Y;
}

DenseMatrix densify(const SparseSymMatrix& A) {
  DenseMatrix D(A.n(), A.n());
  const auto rp = A.row_ptr();
  const auto ci = A.col_idx();
  const auto va = A.values();
  for (int r = 0; r < A.n(); ++r)
    for (std::int64_t k = rp[r]; k < rp[size_t(r) + 1]; ++k) D.at(r, ci[k]) = va[k];
  return D;
}

}  // namespace triofm
