// Matrix ingestion (Matrix Market coordinate real symmetric), synthetic
// generators with controllable spectra, and persistence of configs,
// traces, and reports.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "triofm/engine.hpp"
#include "triofm/linalg.hpp"
#include "triofm/monitors.hpp"
#include "triofm/trace.hpp"

namespace triofm {

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Reads a "%%MatrixMarket matrix coordinate real symmetric" file:
/// lower-triangle entries, 1-based indices, duplicates rejected.
SparseSymMatrix read_matrix_market(const std::string& path);

/// Writes the lower triangle with shortest round-trip decimals, so a
/// write/read cycle is value-exact.
void write_matrix_market(const SparseSymMatrix& A, const std::string& path);

// -- generators ---------------------------------------------------------------

struct GeneratorSpec {
  enum class Kind { Diag, Laplacian2D, RandomSparseShifted };
  Kind kind = Kind::Diag;
  std::vector<double> eigs;  // Diag
  int nx = 0, ny = 0;        // Laplacian2D
  double shift = 0.0;        // Laplacian2D / RandomSparseShifted
  int n = 0;                 // RandomSparseShifted
  double density = 0.0;      // RandomSparseShifted
  std::uint64_t seed = 0;    // RandomSparseShifted
};

SparseSymMatrix generate(const GeneratorSpec& spec);

SparseSymMatrix gen_diag(std::span<const double> eigs);
/// Oracle spectrum of a diagonal matrix: sort plus signed permutation,
/// no iteration needed.
Spectrum diag_spectrum(std::span<const double> eigs);

/// 5-point stencil on an nx-by-ny grid with Dirichlet boundaries, minus
/// shift*I. Closed-form eigenvalues: 4 - 2cos(k pi/(nx+1)) -
/// 2cos(l pi/(ny+1)) - shift.
SparseSymMatrix gen_laplacian2d(int nx, int ny, double shift);
std::vector<double> laplacian2d_eigenvalues(int nx, int ny, double shift);

/// Symmetric Gaussian entries at random off-diagonal positions, minus
/// shift*I on the diagonal. Reproducible from the seed.
SparseSymMatrix gen_random_sparse_shifted(int n, double density, double shift,
                                          std::uint64_t seed);

// -- run archives and trace persistence ----------------------------------------

struct TraceGroups {
  bool col_norms = false;
  bool tangents = false;
  bool energy = false;
  bool residual = false;
};

struct RunArchive {
  SolverConfig config;
  std::string matrix_source;
  std::vector<TraceRecord> trace;
  Outcome outcome = Outcome::MaxIter;
  double wall_time = 0.0;  // seconds
  TraceGroups groups;
};

/// CSV schema: t,e_obj,e_vec,dir_norm followed by the enabled groups
/// col_norm_1..p, tangent_1..p, energy_1..p, residual_E_1..p. Undefined
/// cells are left empty; values use shortest round-trip decimals.
void write_trace_csv(const RunArchive& archive, const std::string& path);

struct TraceCsvContents {
  std::vector<TraceRecord> records;
  int p = 0;
  TraceGroups groups;
};
TraceCsvContents read_trace_csv(const std::string& path);

void write_archive_json(const RunArchive& archive, const std::string& path);

/// Lemma reports serialize as {lemma, iteration, observed, bound, slack}
/// per violation.
std::string report_to_json(const MonitorReport& report);
void write_report_json(const std::vector<MonitorReport>& reports,
                       const std::string& path);

std::string config_to_json(const SolverConfig& cfg);
SolverConfig config_from_json(const std::string& text);

}  // namespace triofm
