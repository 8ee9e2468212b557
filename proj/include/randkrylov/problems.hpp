#pragma once

// Test-matrix and starting-vector generators.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "randkrylov/dense.hpp"
#include "randkrylov/errors.hpp"
#include "randkrylov/sketch.hpp"
#include "randkrylov/sparse.hpp"

namespace randkrylov {

struct ConvDiffOptions {
  std::size_t mesh = 100; // interior points per direction
  double pe = 200.0;
  bool uniform_diffusion = false; // D1 = D2 = 1 everywhere
};

// -(D1 u_x)_x - (D2 u_y)_y + Pe (1/2 (v.grad u) + 1/2 div(v u)) on the unit
// square, homogeneous Dirichlet, interior unknowns ordered x fastest.
// D1 = 1000 on [0.25, 0.75]^2 and 1 elsewhere, D2 = D1 / 2, v = (x+y, x-y).
// Diffusion uses coefficients sampled at interface midpoints; the
// convection term uses central differences, which makes it skew-symmetric.
inline SparseMatrix gen_convection_diffusion(const ConvDiffOptions& opt) {
  const std::size_t g = opt.mesh;
  if (g < 3) throw Error("convection-diffusion mesh must be at least 3");
  const double h = 1.0 / static_cast<double>(g + 1);
  auto d1 = [&](double x, double y) {
    if (opt.uniform_diffusion) return 1.0;
    return (x >= 0.25 && x <= 0.75 && y >= 0.25 && y <= 0.75) ? 1000.0 : 1.0;
  };
  auto d2 = [&](double x, double y) { return opt.uniform_diffusion ? 1.0 : 0.5 * d1(x, y); };
  auto v1 = [](double x, double y) { return x + y; };
  auto v2 = [](double x, double y) { return x - y; };
  const double ih2 = 1.0 / (h * h);
  const double c = opt.pe / (4.0 * h);

  std::vector<Triplet> t;
  t.reserve(5 * g * g);
  auto id = [g](std::size_t i, std::size_t j) { return j * g + i; };
  for (std::size_t j = 0; j < g; ++j) {
    for (std::size_t i = 0; i < g; ++i) {
      const double x = static_cast<double>(i + 1) * h;
      const double y = static_cast<double>(j + 1) * h;
      const double de = d1(x + h / 2, y), dw = d1(x - h / 2, y);
      const double dn = d2(x, y + h / 2), ds = d2(x, y - h / 2);
      const std::size_t row = id(i, j);
      t.push_back({row, row, (de + dw + dn + ds) * ih2});
      if (i + 1 < g) t.push_back({row, id(i + 1, j), -de * ih2 + c * (v1(x, y) + v1(x + h, y))});
      if (i > 0) t.push_back({row, id(i - 1, j), -dw * ih2 - c * (v1(x, y) + v1(x - h, y))});
      if (j + 1 < g) t.push_back({row, id(i, j + 1), -dn * ih2 + c * (v2(x, y) + v2(x, y + h))});
      if (j > 0) t.push_back({row, id(i, j - 1), -ds * ih2 - c * (v2(x, y) + v2(x, y - h))});
    }
  }
  return SparseMatrix::from_triplets(g * g, std::move(t));
}

// T (x) I (x) I + I (x) T (x) I + I (x) I (x) T with T = tridiag(-1, 2, -1),
// or tridiag(-1, 2, 1) when `literal_stencil` is set.
inline SparseMatrix gen_laplacian_3d(std::size_t N, bool literal_stencil = false) {
  if (N < 2) throw Error("3D Laplacian needs N >= 2");
  const double up = literal_stencil ? 1.0 : -1.0;
  const std::size_t n = N * N * N;
  std::vector<Triplet> t;
  t.reserve(7 * n);
  const std::size_t stride[3] = {1, N, N * N};
  for (std::size_t k = 0; k < N; ++k)
    for (std::size_t j = 0; j < N; ++j)
      for (std::size_t i = 0; i < N; ++i) {
        const std::size_t row = i + N * j + N * N * k;
        const std::size_t idx[3] = {i, j, k};
        t.push_back({row, row, 6.0});
        for (int d = 0; d < 3; ++d) {
          if (idx[d] > 0) t.push_back({row, row - stride[d], -1.0});
          if (idx[d] + 1 < N) t.push_back({row, row + stride[d], up});
        }
      }
  return SparseMatrix::from_triplets(n, std::move(t));
}

// Diagonal offset (column minus row) to value.
using ToeplitzCoefficients = std::map<long, double>;

inline ToeplitzCoefficients read_toeplitz_coefficients(std::istream& in) {
  ToeplitzCoefficients c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    long off = 0;
    double v = 0.0;
    if (!(ss >> off)) {
      std::string rest;
      if (std::istringstream(line) >> rest) throw ParseError(lineno, "expected 'offset value'");
      continue;
    }
    if (!(ss >> v)) throw ParseError(lineno, "missing value");
    std::string extra;
    if (ss >> extra) throw ParseError(lineno, "trailing text '" + extra + "'");
    c[off] += v;
  }
  return c;
}

inline ToeplitzCoefficients read_toeplitz_coefficients(const std::string& path) {
  if (path.empty()) throw ConfigMissing("Toeplitz generator needs a coefficient file");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_toeplitz_coefficients(in);
}

inline SparseMatrix gen_toeplitz_nonsym(std::size_t n, const ToeplitzCoefficients& coeffs) {
  if (coeffs.empty()) throw ConfigMissing("Toeplitz generator needs at least one coefficient");
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [off, v] : coeffs) {
      const long j = static_cast<long>(i) + off;
      if (j >= 0 && j < static_cast<long>(n) && v != 0.0) t.push_back({i, static_cast<std::size_t>(j), v});
    }
  return SparseMatrix::from_triplets(n, std::move(t));
}

struct DigraphOptions {
  std::size_t n = 1000;
  std::size_t min_out_degree = 1;
  std::size_t max_out_degree = 50;
  double degree_exponent = 3.0; // out-degree = min + (max - min) u^exponent
  std::size_t ground_nodes = 0;  // extra nodes whose rows and columns are dropped
  std::uint64_t seed = 0;
};

// Graph Laplacian of a random unweighted digraph with heterogeneous
// out-degrees and uniformly drawn targets (no self loops). With ground
// nodes the graph has n + ground_nodes vertices and the leading n x n block
// of its Laplacian is returned; edges into the ground still count towards
// the out-degree, which removes the zero eigenvalue.
inline SparseMatrix gen_digraph_laplacian(const DigraphOptions& opt) {
  const std::size_t total = opt.n + opt.ground_nodes;
  if (opt.n < 2 || opt.min_out_degree < 1 || opt.max_out_degree < opt.min_out_degree ||
      opt.max_out_degree >= total)
    throw Error("invalid digraph parameters");
  Rng rng(opt.seed);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < total; ++i) {
    const double u = std::pow(rng.uniform(), opt.degree_exponent);
    const auto deg = opt.min_out_degree +
                     static_cast<std::size_t>(u * static_cast<double>(opt.max_out_degree - opt.min_out_degree + 1));
    std::vector<std::size_t> picked;
    while (picked.size() < std::min(deg, opt.max_out_degree)) {
      const auto j = static_cast<std::size_t>(rng.below(total));
      if (j == i || std::find(picked.begin(), picked.end(), j) != picked.end()) continue;
      picked.push_back(j);
    }
    for (auto j : picked) t.push_back({i, j, 1.0});
  }
  const auto L = graph_laplacian(SparseMatrix::from_triplets(total, std::move(t)));
  if (opt.ground_nodes == 0) return L;
  std::vector<Triplet> kept;
  for (const auto& e : L.triplets())
    if (e.row < opt.n && e.col < opt.n) kept.push_back(e);
  return SparseMatrix::from_triplets(opt.n, std::move(kept));
}

enum class BRule { RandomUnit, SinPiXSinPiY };

inline DenseVector gen_b_random_unit(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  auto b = random_normal_vector(n, rng);
  scale(1.0 / norm2(b), b);
  return b;
}

// sin(pi x) sin(pi y) on the interior points of a g x g mesh, normalized.
inline DenseVector gen_b_sin_product(std::size_t n, std::optional<std::size_t> mesh) {
  if (!mesh || *mesh * *mesh != n)
    throw GeometryMismatch("sin(pi x) sin(pi y) needs a square mesh matching the problem size");
  const std::size_t g = *mesh;
  const double h = 1.0 / static_cast<double>(g + 1);
  DenseVector b(n);
  for (std::size_t j = 0; j < g; ++j)
    for (std::size_t i = 0; i < g; ++i)
      b[j * g + i] = std::sin(std::numbers::pi * static_cast<double>(i + 1) * h) *
                     std::sin(std::numbers::pi * static_cast<double>(j + 1) * h);
  scale(1.0 / norm2(b), b);
  return b;
}

inline DenseVector gen_b(BRule rule, std::size_t n, std::optional<std::size_t> mesh, std::uint64_t seed) {
  return rule == BRule::RandomUnit ? gen_b_random_unit(n, seed) : gen_b_sin_product(n, mesh);
}

// A named problem with all generator parameters; `scale` multiplies the
// generated matrix (e.g. a negative time step for exp).
struct ProblemSpec {
  std::string name = "convdiff"; // convdiff | laplace3d | toeplitz | digraph | mtx
  std::size_t mesh = 100;
  double pe = 200.0;
  std::size_t N = 20;
  std::size_t n = 1000;
  bool literal_stencil = false;
  std::string coeff_file;
  std::string matrix_file;
  std::size_t max_out_degree = 50;
  std::size_t min_out_degree = 1;
  double degree_exponent = 3.0;
  std::size_t ground_nodes = 0;
  bool uniform_diffusion = false;
  double scale = 1.0;
  std::optional<BRule> b_rule; // default: sin product for convdiff, random otherwise
};

struct Problem {
  SparseMatrix A;
  DenseVector b;
  std::optional<std::size_t> mesh;
};

inline BRule default_b_rule(const ProblemSpec& spec) {
  return spec.b_rule.value_or(spec.name == "convdiff" ? BRule::SinPiXSinPiY : BRule::RandomUnit);
}

inline SparseMatrix build_matrix(const ProblemSpec& spec, std::uint64_t seed) {
  SparseMatrix A;
  if (spec.name == "convdiff") {
    A = gen_convection_diffusion({spec.mesh, spec.pe, spec.uniform_diffusion});
  } else if (spec.name == "laplace3d") {
    A = gen_laplacian_3d(spec.N, spec.literal_stencil);
  } else if (spec.name == "toeplitz") {
    A = gen_toeplitz_nonsym(spec.n, read_toeplitz_coefficients(spec.coeff_file));
  } else if (spec.name == "digraph") {
    DigraphOptions o;
    o.n = spec.n;
    o.max_out_degree = spec.max_out_degree;
    o.min_out_degree = spec.min_out_degree;
    o.degree_exponent = spec.degree_exponent;
    o.ground_nodes = spec.ground_nodes;
    o.seed = Rng::derive(seed, 10);
    A = gen_digraph_laplacian(o);
  } else if (spec.name == "mtx") {
    if (spec.matrix_file.empty()) throw ConfigMissing("problem 'mtx' needs matrix_file");
    A = read_matrix_market(spec.matrix_file);
  } else {
    throw Error("unknown problem '" + spec.name + "'");
  }
  return spec.scale == 1.0 ? A : A.scaled(spec.scale);
}

inline Problem build_problem(const ProblemSpec& spec, std::uint64_t seed) {
  Problem p;
  p.A = build_matrix(spec, seed);
  if (spec.name == "convdiff") p.mesh = spec.mesh;
  p.b = gen_b(default_b_rule(spec), p.A.dim(), p.mesh, Rng::derive(seed, 11));
  return p;
}

} // namespace randkrylov
