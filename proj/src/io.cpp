#include "triofm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace triofm {

using nlohmann::json;

// Shortest decimal representation that round-trips exactly.
static std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

static double parse_double(std::string_view s, const std::string& context) {
  double v;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw IoError("bad numeric field '" + std::string(s) + "' in " + context);
  return v;
}

// -- Matrix Market --------------------------------------------------------------

SparseSymMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty file");
  std::istringstream header(line);
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), ::tolower);
    return s;
  };
  if (banner != "%%MatrixMarket" || lower(object) != "matrix")
    throw IoError(path + ": not a MatrixMarket matrix file");
  if (lower(format) != "coordinate")
    throw IoError(path + ": only coordinate format is supported");
  if (lower(field) != "real")
    throw IoError(path + ": only real field is supported (got " + field + ")");
  if (lower(symmetry) != "symmetric")
    throw IoError(path + ": only symmetric matrices are supported (got " +
                  symmetry + ")");

  do {
    if (!std::getline(in, line)) throw IoError(path + ": missing size line");
  } while (!line.empty() && line[0] == '%');

  std::istringstream size_line(line);
  long long rows = -1, cols = -1, nnz = -1;
  size_line >> rows >> cols >> nnz;
  if (rows <= 0 || cols <= 0 || nnz < 0 || rows != cols)
    throw IoError(path + ": bad size line '" + line + "'");

  std::vector<SparseSymMatrix::Entry> entries;
  entries.reserve(size_t(nnz));
  for (long long k = 0; k < nnz; ++k) {
    do {
      if (!std::getline(in, line))
        throw IoError(path + ": fewer entries than declared");
    } while (!line.empty() && line[0] == '%');
    std::istringstream es(line);
    long long i, j;
    std::string value_str;
    if (!(es >> i >> j >> value_str))
      throw IoError(path + ": malformed entry line '" + line + "'");
    if (i < 1 || i > rows || j < 1 || j > cols)
      throw IoError(path + ": index out of range in '" + line + "'");
    if (i < j)
      throw IoError(path + ": entry above the diagonal in symmetric file: '" +
                    line + "'");
    entries.push_back({int(i - 1), int(j - 1), parse_double(value_str, path)});
  }

  try {
    return SparseSymMatrix::from_lower_triangle(int(rows), entries);
  } catch (const std::invalid_argument& e) {
    throw IoError(path + ": " + e.what());
  }
}

void write_matrix_market(const SparseSymMatrix& A, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const auto rp = A.row_ptr();
  const auto ci = A.col_idx();
  const auto va = A.values();
  long long count = 0;
  std::ostringstream body;
  for (int r = 0; r < A.n(); ++r)
    for (std::int64_t k = rp[r]; k < rp[size_t(r) + 1]; ++k) {
      if (ci[k] > r) continue;  // lower triangle only
      body << (r + 1) << ' ' << (ci[k] + 1) << ' ' << format_double(va[k]) << '\n';
      count++;
    }
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  out << A.n() << ' ' << A.n() << ' ' << count << '\n';
  out << body.str();
  if (!out) throw IoError("write failed for " + path);
}

// -- generators -----------------------------------------------------------------

SparseSymMatrix gen_diag(std::span<const double> eigs) {
  if (eigs.empty()) throw std::invalid_argument("gen_diag: empty eigenvalue list");
  std::vector<SparseSymMatrix::Entry> entries;
  for (int i = 0; i < int(eigs.size()); ++i)
    if (eigs[i] != 0.0) entries.push_back({i, i, eigs[i]});
  if (entries.empty()) entries.push_back({0, 0, 0.0});  // keep a valid CSR
  return SparseSymMatrix::from_entries(int(eigs.size()), std::move(entries));
}

Spectrum diag_spectrum(std::span<const double> eigs) {
  const int n = int(eigs.size());
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return eigs[a] < eigs[b]; });
  Spectrum S;
  S.n = n;
  S.eigenvalues.resize(n);
  S.U = DenseMatrix(n, n);
  S.axis_index.resize(n);
  S.q = 0;
  for (int i = 0; i < n; ++i) {
    S.eigenvalues[i] = eigs[order[i]];
    S.U.at(order[i], i) = 1.0;
    S.axis_index[i] = order[i];
    if (S.eigenvalues[i] < 0.0) S.q++;
  }
  return S;
}

SparseSymMatrix gen_laplacian2d(int nx, int ny, double shift) {
  if (nx < 2 || ny < 2) throw std::invalid_argument("gen_laplacian2d: need nx, ny >= 2");
  const int n = nx * ny;
  auto id = [nx](int ix, int iy) { return iy * nx + ix; };
  std::vector<SparseSymMatrix::Entry> entries;
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      int r = id(ix, iy);
      double d = 4.0 - shift;
      if (d != 0.0) entries.push_back({r, r, d});
      if (ix + 1 < nx) {
        entries.push_back({r, id(ix + 1, iy), -1.0});
        entries.push_back({id(ix + 1, iy), r, -1.0});
      }
      if (iy + 1 < ny) {
        entries.push_back({r, id(ix, iy + 1), -1.0});
        entries.push_back({id(ix, iy + 1), r, -1.0});
      }
    }
  return SparseSymMatrix::from_entries(n, std::move(entries));
}

std::vector<double> laplacian2d_eigenvalues(int nx, int ny, double shift) {
  std::vector<double> eigs;
  eigs.reserve(size_t(nx) * ny);
  for (int k = 1; k <= nx; ++k)
    for (int l = 1; l <= ny; ++l)
      eigs.push_back(4.0 - 2.0 * std::cos(k * std::numbers::pi / (nx + 1)) -
                     2.0 * std::cos(l * std::numbers::pi / (ny + 1)) - shift);
  std::sort(eigs.begin(), eigs.end());
  return eigs;
}

SparseSymMatrix gen_random_sparse_shifted(int n, double density, double shift,
                                          std::uint64_t seed) {
  if (n < 1 || density <= 0.0 || density > 1.0)
    throw std::invalid_argument("gen_random_sparse_shifted: bad n or density");
  if (density * n < 2.0)
    throw std::invalid_argument("gen_random_sparse_shifted: need density*n >= 2");
  GaussianRng rng(seed);
  std::vector<SparseSymMatrix::Entry> entries;
  for (int i = 0; i < n; ++i) {
    if (shift != 0.0) entries.push_back({i, i, -shift});
    for (int j = 0; j < i; ++j)
      if (rng.uniform() < density) {
        double v = rng.gaussian();
        entries.push_back({i, j, v});
        entries.push_back({j, i, v});
      }
  }
  if (entries.empty()) entries.push_back({0, 0, 0.0});
  return SparseSymMatrix::from_entries(n, std::move(entries));
}

SparseSymMatrix generate(const GeneratorSpec& spec) {
  switch (spec.kind) {
    case GeneratorSpec::Kind::Diag:
      return gen_diag(spec.eigs);
    case GeneratorSpec::Kind::Laplacian2D:
      return gen_laplacian2d(spec.nx, spec.ny, spec.shift);
    case GeneratorSpec::Kind::RandomSparseShifted:
      return gen_random_sparse_shifted(spec.n, spec.density, spec.shift, spec.seed);
  }
  throw std::invalid_argument("generate: unknown kind");
}

// -- trace CSV --------------------------------------------------------------------

static void append_cell(std::string& line, double v) {
  line.push_back(',');
  if (!std::isnan(v)) line += format_double(v);
}

void write_trace_csv(const RunArchive& archive, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const int p = archive.config.p;

  std::string header = "t,e_obj,e_vec,dir_norm";
  auto group_header = [&](const char* base) {
    for (int i = 1; i <= p; ++i) header += "," + std::string(base) + std::to_string(i);
  };
  if (archive.groups.col_norms) group_header("col_norm_");
  if (archive.groups.tangents) group_header("tangent_");
  if (archive.groups.energy) group_header("energy_");
  if (archive.groups.residual) group_header("residual_E_");
  out << header << '\n';

  for (const TraceRecord& rec : archive.trace) {
    std::string line = std::to_string(rec.t);
    append_cell(line, rec.e_obj);
    append_cell(line, rec.e_vec);
    append_cell(line, rec.dir_norm);
    auto group = [&](const std::vector<double>& vals) {
      for (int i = 0; i < p; ++i)
        append_cell(line, i < int(vals.size()) ? vals[i] : kUndefined);
    };
    if (archive.groups.col_norms) group(rec.col_norms);
    if (archive.groups.tangents) group(rec.tangents);
    if (archive.groups.energy) group(rec.energy);
    if (archive.groups.residual) group(rec.residual_E);
    out << line << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

TraceCsvContents read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty trace file");

  std::vector<std::string> cols;
  {
    std::istringstream hs(line);
    std::string c;
    while (std::getline(hs, c, ',')) cols.push_back(c);
  }
  if (cols.size() < 4 || cols[0] != "t" || cols[1] != "e_obj" || cols[2] != "e_vec" ||
      cols[3] != "dir_norm")
    throw IoError(path + ": unexpected trace header");

  TraceCsvContents out;
  auto count_group = [&cols](const std::string& base) {
    int c = 0;
    for (const std::string& name : cols)
      if (name.rfind(base, 0) == 0) c++;
    return c;
  };
  int n_norm = count_group("col_norm_");
  int n_tan = count_group("tangent_");
  int n_energy = count_group("energy_");
  int n_res = count_group("residual_E_");
  out.p = std::max({n_norm, n_tan, n_energy, n_res});
  out.groups = {n_norm > 0, n_tan > 0, n_energy > 0, n_res > 0};

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    cells.resize(cols.size());  // trailing empties
    TraceRecord rec;
    rec.t = std::stoll(cells[0]);
    auto cellval = [&](size_t idx) {
      return cells[idx].empty() ? kUndefined : parse_double(cells[idx], path);
    };
    rec.e_obj = cellval(1);
    rec.e_vec = cellval(2);
    rec.dir_norm = cellval(3);
    size_t at = 4;
    auto read_group = [&](int count, std::vector<double>& dst) {
      for (int i = 0; i < count; ++i) dst.push_back(cellval(at++));
    };
    read_group(n_norm, rec.col_norms);
    read_group(n_tan, rec.tangents);
    read_group(n_energy, rec.energy);
    read_group(n_res, rec.residual_E);
    out.records.push_back(std::move(rec));
  }
  return out;
}

// -- JSON -------------------------------------------------------------------------

static json violation_to_json(const LemmaViolation& v) {
  return json{{"lemma", v.lemma},
              {"iteration", v.iteration},
              {"observed", v.observed},
              {"bound", v.bound},
              {"slack", v.slack}};
}

std::string report_to_json(const MonitorReport& report) {
  json j;
  j["name"] = report.name;
  j["passed"] = report.passed;
  j["checks"] = report.checks;
  j["violations"] = json::array();
  for (const auto& v : report.violations) j["violations"].push_back(violation_to_json(v));
  j["warnings"] = json::array();
  for (const auto& v : report.warnings) j["warnings"].push_back(violation_to_json(v));
  if (std::isfinite(report.worst_margin)) j["worst_margin"] = report.worst_margin;
  json stats = json::object();
  for (const auto& [k, v] : report.stats) stats[k] = v;
  j["stats"] = stats;
  return j.dump(2);
}

void write_report_json(const std::vector<MonitorReport>& reports,
                       const std::string& path) {
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(json::parse(report_to_json(r)));
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << arr.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path);
}

std::string config_to_json(const SolverConfig& cfg) {
  json j;
  j["p"] = cfg.p;
  if (cfg.alpha)
    j["alpha"] = *cfg.alpha;
  else
    j["alpha"] = nullptr;
  j["max_iter"] = cfg.max_iter;
  j["tol"] = cfg.tol;
  j["seed"] = cfg.seed;
  j["trace_every"] = cfg.trace_every;
  j["monitors"] = cfg.monitors;
  return j.dump(2);
}

SolverConfig config_from_json(const std::string& text) {
  json j = json::parse(text);
  SolverConfig cfg;
  if (j.contains("p")) cfg.p = j["p"].get<int>();
  if (j.contains("alpha") && !j["alpha"].is_null())
    cfg.alpha = j["alpha"].get<double>();
  if (j.contains("max_iter")) cfg.max_iter = j["max_iter"].get<std::int64_t>();
  if (j.contains("tol")) cfg.tol = j["tol"].get<double>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("trace_every")) cfg.trace_every = j["trace_every"].get<std::int64_t>();
  if (j.contains("monitors")) cfg.monitors = j["monitors"].get<std::vector<std::string>>();
  return cfg;
}

void write_archive_json(const RunArchive& archive, const std::string& path) {
  json j;
  j["config"] = json::parse(config_to_json(archive.config));
  j["matrix_source"] = archive.matrix_source;
  j["outcome"] = to_string(archive.outcome);
  j["wall_time"] = archive.wall_time;
  json trace = json::array();
  for (const TraceRecord& rec : archive.trace) {
    json r;
    r["t"] = rec.t;
    if (!std::isnan(rec.e_obj)) r["e_obj"] = rec.e_obj;
    if (!std::isnan(rec.e_vec)) r["e_vec"] = rec.e_vec;
    if (!std::isnan(rec.dir_norm)) r["dir_norm"] = rec.dir_norm;
    r["col_norms"] = rec.col_norms;
    if (!rec.tangents.empty()) {
      json tans = json::array();
      for (double v : rec.tangents)
        tans.push_back(std::isfinite(v) ? json(v) : json(nullptr));
      r["tangents"] = tans;
    }
    if (!rec.energy.empty()) r["energy"] = rec.energy;
    if (!rec.residual_E.empty()) r["residual_E"] = rec.residual_E;
    trace.push_back(std::move(r));
  }
  j["trace"] = std::move(trace);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace triofm
