#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace triofm {

inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

/// Per-iteration diagnostics. Oracle-dependent fields (e_obj, e_vec,
/// tangents, energy, residual_E) stay NaN / empty unless an oracle
/// enricher fills them.
struct TraceRecord {
  std::int64_t t = 0;
  double e_obj = kUndefined;
  double e_vec = kUndefined;
  double dir_norm = kUndefined;           // ||g(X)||_F
  std::vector<double> col_norms;          // p entries
  std::vector<double> tangents;           // p entries or empty
  std::vector<double> energy;             // p entries or empty
  std::vector<double> residual_E;         // p entries or empty
};

enum class Outcome { Converged, MaxIter, Diverged };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Converged: return "CONVERGED";
    case Outcome::MaxIter: return "MAX_ITER";
    case Outcome::Diverged: return "DIVERGED";
  }
  return "?";
}

}  // namespace triofm
