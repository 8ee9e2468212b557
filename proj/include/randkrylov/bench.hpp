#pragma once

// Sweep harness: runs (method x m) cells on one problem, measures errors
// against a reference and writes CSV rows.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "randkrylov/dense.hpp"
#include "randkrylov/errors.hpp"
#include "randkrylov/fab.hpp"
#include "randkrylov/matfun.hpp"
#include "randkrylov/problems.hpp"
#include "randkrylov/sparse.hpp"

namespace randkrylov {

// exp | sqrt | invsqrt | sign
inline bool is_known_function(const std::string& f) {
  return f == "exp" || f == "sqrt" || f == "invsqrt" || f == "sign";
}

inline MatrixFunction parse_function(const std::string& f) {
  if (f == "exp") return MatrixFunction::exp();
  if (f == "sqrt") return MatrixFunction::sqrt();
  if (f == "invsqrt") return MatrixFunction::inv_sqrt();
  throw Error("unknown function '" + f + "'");
}

struct ReferenceRule {
  enum class Kind { Dense, LongArnoldi };
  Kind kind = Kind::Dense;
  std::size_t M = 0;
  std::size_t window = 10;
  double tol = 1e-12;

  static ReferenceRule parse(const std::string& s) {
    if (s == "dense") return {};
    const std::string prefix = "long_arnoldi:";
    if (s.rfind(prefix, 0) == 0) {
      std::size_t pos = 0;
      unsigned long v = 0;
      try {
        v = std::stoul(s.substr(prefix.size()), &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == 0 || prefix.size() + pos != s.size() || v == 0) throw Error("bad reference rule '" + s + "'");
      ReferenceRule r;
      r.kind = Kind::LongArnoldi;
      r.M = v;
      return r;
    }
    throw Error("bad reference rule '" + s + "'");
  }

  std::string str() const { return kind == Kind::Dense ? "dense" : "long_arnoldi:" + std::to_string(M); }
};

inline constexpr std::size_t dense_reference_limit = 10'000;

// a:b:step, or a single value.
inline std::vector<std::size_t> parse_m_grid(const std::string& s) {
  std::vector<unsigned long> parts;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ':')) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(tok, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != tok.size()) throw Error("bad m grid '" + s + "'");
    parts.push_back(v);
  }
  if (parts.size() == 1) parts = {parts[0], parts[0], 1};
  if (parts.size() != 3 || parts[2] == 0 || parts[0] == 0) throw Error("bad m grid '" + s + "' (want a:b:step)");
  std::vector<std::size_t> grid;
  for (unsigned long m = parts[0]; m <= parts[1]; m += parts[2]) grid.push_back(m);
  return grid;
}

struct BenchConfig {
  ProblemSpec problem;
  std::vector<FabMethod> methods = {FabMethod::ArnoldiFom};
  std::string f = "exp";
  std::vector<std::size_t> m_grid;
  SketchRule sketch_rule;
  std::size_t k = 2;
  double whitening_threshold = 1000.0;
  double lsq_tol = 1e-6;
  std::uint64_t seed = 0;
  bool seed_given = false; // set when a config line fixed the seed
  ReferenceRule reference;
  std::string out;

  void validate() const {
    if (!is_known_function(f)) throw Error("unknown function '" + f + "'");
    for (std::size_t i = 1; i < m_grid.size(); ++i)
      if (m_grid[i] <= m_grid[i - 1]) throw Error("m grid must be increasing");
    if (reference.kind == ReferenceRule::Kind::LongArnoldi) {
      if (!m_grid.empty() && reference.M <= m_grid.back()) throw Error("reference M must exceed the largest m");
      if (reference.window == 0 || reference.window >= reference.M) throw Error("bad reference window");
    }
    if (k == 0) throw Error("k must be positive");
    if (!(lsq_tol > 0)) throw Error("lsq_tol must be positive");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <class T>
T parse_number(const std::string& v, std::size_t line) {
  std::istringstream ss(v);
  T x{};
  if (!(ss >> x)) throw ParseError(line, "bad number '" + v + "'");
  std::string rest;
  if (ss >> rest) throw ParseError(line, "bad number '" + v + "'");
  return x;
}

inline bool parse_bool(const std::string& v, std::size_t line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParseError(line, "bad boolean '" + v + "'");
}

} // namespace detail

inline std::vector<FabMethod> parse_method_list(const std::string& s) {
  std::vector<FabMethod> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(parse_method(detail::trim(tok)));
  if (out.empty()) throw Error("empty method list");
  return out;
}

// Applies one `key = value` setting. Throws ParseError tagged with `line`.
inline void apply_setting(BenchConfig& cfg, const std::string& key, const std::string& v, std::size_t line = 0) {
  using detail::parse_number;
  auto& p = cfg.problem;
  try {
    if (key == "problem") p.name = v;
    else if (key == "mesh") p.mesh = parse_number<std::size_t>(v, line);
    else if (key == "pe") p.pe = parse_number<double>(v, line);
    else if (key == "N") p.N = parse_number<std::size_t>(v, line);
    else if (key == "n") p.n = parse_number<std::size_t>(v, line);
    else if (key == "literal_stencil") p.literal_stencil = detail::parse_bool(v, line);
    else if (key == "uniform_diffusion") p.uniform_diffusion = detail::parse_bool(v, line);
    else if (key == "coeff_file") p.coeff_file = v;
    else if (key == "matrix_file") p.matrix_file = v;
    else if (key == "max_out_degree") p.max_out_degree = parse_number<std::size_t>(v, line);
    else if (key == "min_out_degree") p.min_out_degree = parse_number<std::size_t>(v, line);
    else if (key == "degree_exponent") p.degree_exponent = parse_number<double>(v, line);
    else if (key == "ground_nodes") p.ground_nodes = parse_number<std::size_t>(v, line);
    else if (key == "scale") p.scale = parse_number<double>(v, line);
    else if (key == "b_rule") {
      if (v == "random") p.b_rule = BRule::RandomUnit;
      else if (v == "sin") p.b_rule = BRule::SinPiXSinPiY;
      else throw ParseError(line, "b_rule must be random or sin");
    }
    else if (key == "methods") cfg.methods = parse_method_list(v);
    else if (key == "f") {
      if (!is_known_function(v)) throw ParseError(line, "unknown function '" + v + "'");
      cfg.f = v;
    }
    else if (key == "m_grid") cfg.m_grid = parse_m_grid(v);
    else if (key == "sketch_rule") cfg.sketch_rule = SketchRule::parse(v);
    else if (key == "k") cfg.k = parse_number<std::size_t>(v, line);
    else if (key == "whiten_threshold") cfg.whitening_threshold = parse_number<double>(v, line);
    else if (key == "lsq_tol") cfg.lsq_tol = parse_number<double>(v, line);
    else if (key == "seed") {
      cfg.seed = parse_number<std::uint64_t>(v, line);
      cfg.seed_given = true;
    }
    else if (key == "reference") {
      const auto w = cfg.reference.window;
      cfg.reference = ReferenceRule::parse(v);
      cfg.reference.window = w;
    }
    else if (key == "reference_window") cfg.reference.window = parse_number<std::size_t>(v, line);
    else if (key == "reference_tol") cfg.reference.tol = parse_number<double>(v, line);
    else if (key == "out") cfg.out = v;
    else throw ParseError(line, "unknown key '" + key + "'");
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(line, e.what());
  }
}

// Flat `key = value` lines; '#' starts a comment.
inline BenchConfig parse_config(std::istream& in) {
  BenchConfig cfg;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto h = raw.find('#'); h != std::string::npos) raw.erase(h);
    const auto s = detail::trim(raw);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError(line, "expected 'key = value'");
    const auto key = detail::trim(s.substr(0, eq));
    const auto value = detail::trim(s.substr(eq + 1));
    if (key.empty() || value.empty()) throw ParseError(line, "expected 'key = value'");
    apply_setting(cfg, key, value, line);
  }
  return cfg;
}

inline BenchConfig read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  return parse_config(in);
}

// Driver settings for one (method, m) cell.
inline DriverConfig driver_config(const BenchConfig& cfg, FabMethod method, std::size_t m) {
  DriverConfig d;
  d.method = method;
  d.m = m;
  d.k = cfg.k;
  d.sketch_rule = cfg.sketch_rule;
  d.whitening_threshold = cfg.whitening_threshold;
  d.lsq.tol = cfg.lsq_tol;
  d.seed = cfg.seed;
  return d;
}

// f(A) b through the driver for `method`; sign goes through fab_sign.
inline FabResult evaluate(const SparseMatrix& A, std::span<const double> b, const std::string& f,
                          const DriverConfig& d) {
  if (f == "sign") return fab_sign(A, b, d);
  return run_driver(A, b, parse_function(f), d);
}

inline DenseVector dense_reference(const SparseMatrix& A, std::span<const double> b, const std::string& f) {
  if (A.dim() >= dense_reference_limit)
    throw Error("dense reference needs n < " + std::to_string(dense_reference_limit) + ", got n = " +
                std::to_string(A.dim()));
  const auto D = A.to_dense();
  if (f == "sign") {
    const auto Ab = gemv(D, b);
    return gemv(inv_sqrtm(matmul(D, D)), Ab);
  }
  return gemv(matrix_function(parse_function(f), D), b);
}

// Arnoldi at M and M - window; the two must agree to `tol`.
inline DenseVector long_arnoldi_reference(const SparseMatrix& A, std::span<const double> b, const std::string& f,
                                          const ReferenceRule& rule) {
  const std::size_t M = std::min(rule.M, A.dim());
  if (rule.window >= M) throw Error("reference window must be smaller than M");
  auto run = [&](std::size_t m) { return evaluate(A, b, f, DriverConfig{FabMethod::ArnoldiFom, m}); };
  const auto hi = run(M);
  if (hi.breakdown_at) return hi.approx; // invariant subspace: exact
  const auto lo = run(M - rule.window);
  const double diff = relative_error(lo.approx, hi.approx);
  if (!(diff <= rule.tol))
    throw ReferenceNotConverged("Arnoldi reference at M = " + std::to_string(M) + " changed by " +
                                std::to_string(diff) + " over the last " + std::to_string(rule.window) +
                                " iterations");
  return hi.approx;
}

inline DenseVector compute_reference(const SparseMatrix& A, std::span<const double> b, const std::string& f,
                                     const ReferenceRule& rule) {
  return rule.kind == ReferenceRule::Kind::Dense ? dense_reference(A, b, f) : long_arnoldi_reference(A, b, f, rule);
}

struct RunRecord {
  std::string method;
  std::string problem;
  std::string f;
  std::size_t m = 0;
  double rel_error = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t matvecs = 0;
  std::uint64_t basis_flops = 0;
  std::uint64_t sketch_flops = 0;
  std::size_t lsq_iterations = 0;
  double cond_sketched_basis = std::numeric_limits<double>::quiet_NaN();
  std::optional<std::size_t> whitened_at;
  std::string status = "ok"; // ok | failed(reason)

  bool ok() const { return status == "ok"; }
};

inline const char* csv_header =
    "method,problem,f,m,rel_error,matvecs,basis_flops,sketch_flops,lsq_iterations,cond_sketched_basis,"
    "whitened_at,status";

namespace detail {

inline std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Keeps a free-text reason inside one CSV field.
inline std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  return s;
}

} // namespace detail

inline std::string csv_row(const RunRecord& r) {
  std::ostringstream o;
  o << r.method << ',' << r.problem << ',' << r.f << ',' << r.m << ',' << detail::format_real(r.rel_error) << ','
    << r.matvecs << ',' << r.basis_flops << ',' << r.sketch_flops << ',' << r.lsq_iterations << ','
    << detail::format_real(r.cond_sketched_basis) << ',';
  if (r.whitened_at) o << *r.whitened_at;
  o << ',' << r.status;
  return o.str();
}

inline void emit_csv(const std::vector<RunRecord>& records, std::ostream& out) {
  out << csv_header << '\n';
  for (const auto& r : records) out << csv_row(r) << '\n';
  if (!out) throw IoError("failed writing CSV");
}

inline void emit_csv(const std::vector<RunRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path);
  emit_csv(records, out);
}

// One cell with fresh counters. Library errors become a failed status.
inline RunRecord run_cell(const BenchConfig& cfg, FabMethod method, std::size_t m, const SparseMatrix& A,
                          std::span<const double> b, std::span<const double> reference) {
  RunRecord r;
  r.method = method_name(method);
  r.problem = cfg.problem.name;
  r.f = cfg.f;
  r.m = m;
  try {
    const auto res = evaluate(A, b, cfg.f, driver_config(cfg, method, m));
    r.rel_error = relative_error(res.approx, reference);
    r.matvecs = res.counters.matvecs.value();
    r.basis_flops = res.counters.basis_flops;
    r.sketch_flops = res.counters.sketch_flops;
    if (res.lsq_report) r.lsq_iterations = res.lsq_report->iterations;
    r.cond_sketched_basis = res.cond_sketched_basis;
    r.whitened_at = res.whitened_at;
    if (!std::isfinite(r.rel_error)) r.status = "failed(non-finite result)";
  } catch (const Error& e) {
    r.status = "failed(" + detail::sanitize(e.what()) + ")";
  }
  return r;
}

// Cells in config order (method-major). Rows go to `out` as they finish.
inline std::vector<RunRecord> run_sweep(const BenchConfig& cfg, const SparseMatrix& A, std::span<const double> b,
                                        std::span<const double> reference, std::ostream* out = nullptr) {
  cfg.validate();
  if (out) *out << csv_header << '\n' << std::flush;
  std::vector<RunRecord> records;
  for (auto method : cfg.methods)
    for (auto m : cfg.m_grid) {
      records.push_back(run_cell(cfg, method, m, A, b, reference));
      if (out) *out << csv_row(records.back()) << '\n' << std::flush;
    }
  return records;
}

// Builds the problem and reference, then sweeps; writes cfg.out if set.
inline std::vector<RunRecord> run_sweep(const BenchConfig& cfg) {
  cfg.validate();
  const auto p = build_problem(cfg.problem, cfg.seed);
  std::optional<std::ofstream> file;
  if (!cfg.out.empty()) {
    file.emplace(cfg.out, std::ios::binary);
    if (!*file) throw IoError("cannot open " + cfg.out);
  }
  if (cfg.m_grid.empty() || cfg.methods.empty())
    return run_sweep(cfg, p.A, p.b, {}, file ? &*file : nullptr);
  const auto ref = compute_reference(p.A, p.b, cfg.f, cfg.reference);
  return run_sweep(cfg, p.A, p.b, ref, file ? &*file : nullptr);
}

// First grid index starting a run of `window` consecutive cells whose error
// never decreases. Failed cells count as +inf.
inline std::optional<std::size_t> stagnation_onset(std::span<const double> errors, std::size_t window = 10) {
  if (window < 2 || errors.size() < window) return std::nullopt;
  auto val = [&](std::size_t i) { return std::isfinite(errors[i]) ? errors[i] : std::numeric_limits<double>::infinity(); };
  std::size_t run = 1;
  for (std::size_t i = 1; i < errors.size(); ++i) {
    run = val(i) >= val(i - 1) ? run + 1 : 1;
    if (run >= window) return i + 1 - window;
  }
  return std::nullopt;
}

// Errors of one method in grid order, with failures as +inf.
inline std::vector<double> error_curve(const std::vector<RunRecord>& records, const std::string& method) {
  std::vector<double> out;
  for (const auto& r : records)
    if (r.method == method) out.push_back(r.ok() ? r.rel_error : std::numeric_limits<double>::infinity());
  return out;
}

} // namespace randkrylov
