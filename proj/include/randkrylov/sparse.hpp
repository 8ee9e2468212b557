#pragma once

// Compressed-row sparse matrices, the matrix-free operator concept the
// Krylov builders are written against, and Matrix Market I/O.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "randkrylov/dense.hpp"
#include "randkrylov/errors.hpp"

namespace randkrylov {

// Anything the builders can multiply a vector by. `norm1` is used only to
// scale breakdown tolerances, so an upper bound is acceptable.
template <class Op>
concept LinearOperator = requires(const Op& op, std::span<const double> x, std::span<double> y) {
  { op.dim() } -> std::convertible_to<std::size_t>;
  { op.norm1() } -> std::convertible_to<double>;
  op.apply(x, y);
};

// Number of applications of the underlying matrix per call to `apply`.
template <LinearOperator Op>
constexpr std::uint64_t matvec_cost(const Op& op) {
  if constexpr (requires { op.matvec_cost(); })
    return op.matvec_cost();
  else
    return 1;
}

class MatvecCounter {
public:
  MatvecCounter() = default;
  MatvecCounter(const MatvecCounter& other) : count_{other.value()} {}
  MatvecCounter& operator=(const MatvecCounter& other) {
    count_.store(other.value());
    return *this;
  }

  void add(std::uint64_t n = 1) noexcept { count_.fetch_add(n, std::memory_order_relaxed); }
  std::uint64_t value() const noexcept { return count_.load(std::memory_order_relaxed); }

private:
  std::atomic<std::uint64_t> count_{0};
};

// Per-run cost telemetry. basis_flops counts multiply-adds on length-n
// vectors spent forming the basis: inner products and norms for the
// Gram-Schmidt style builders, the basis combination V r for sketched
// Gram-Schmidt, and the V R^{-1} update at a whitening step.
struct CostCounters {
  MatvecCounter matvecs;
  std::uint64_t basis_flops = 0;
  std::uint64_t sketch_flops = 0;
};

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

class SparseMatrix {
public:
  SparseMatrix() = default;

  SparseMatrix(std::size_t n, std::vector<std::size_t> row_ptr, std::vector<std::size_t> col_idx,
               std::vector<double> values)
      : n_{n}, row_ptr_{std::move(row_ptr)}, col_idx_{std::move(col_idx)}, values_{std::move(values)} {
    validate();
  }

  // Duplicate (row, col) pairs are summed.
  static SparseMatrix from_triplets(std::size_t n, std::vector<Triplet> entries) {
    for (const auto& t : entries)
      if (t.row >= n || t.col >= n) throw DimensionMismatch("triplet index out of range");
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<std::size_t> row_ptr(n + 1, 0);
    std::vector<std::size_t> cols;
    std::vector<double> vals;
    cols.reserve(entries.size());
    vals.reserve(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto& t = entries[k];
      if (k > 0 && entries[k - 1].row == t.row && entries[k - 1].col == t.col) {
        vals.back() += t.value;
        continue;
      }
      cols.push_back(t.col);
      vals.push_back(t.value);
      ++row_ptr[t.row + 1];
    }
    for (std::size_t i = 0; i < n; ++i) row_ptr[i + 1] += row_ptr[i];
    return SparseMatrix(n, std::move(row_ptr), std::move(cols), std::move(vals));
  }

  static SparseMatrix identity(std::size_t n) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    return from_triplets(n, std::move(t));
  }

  static SparseMatrix from_dense(const DenseMatrix& D) {
    if (D.rows() != D.cols()) throw NonSquareError("from_dense: matrix not square");
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < D.rows(); ++i)
      for (std::size_t j = 0; j < D.cols(); ++j)
        if (D(i, j) != 0.0) t.push_back({i, j, D(i, j)});
    return from_triplets(D.rows(), std::move(t));
  }

  std::size_t dim() const noexcept { return n_; }
  std::size_t nnz() const noexcept { return values_.size(); }
  std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const std::size_t> col_idx() const noexcept { return col_idx_; }
  std::span<const double> values() const noexcept { return values_; }

  void apply(std::span<const double> x, std::span<double> y) const {
    if (x.size() != n_ || y.size() != n_) throw DimensionMismatch("matvec: vector length differs from n");
    for (std::size_t i = 0; i < n_; ++i) {
      double s = 0.0;
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * x[col_idx_[k]];
      y[i] = s;
    }
  }

  // Maximum absolute column sum.
  double norm1() const {
    std::vector<double> colsum(n_, 0.0);
    for (std::size_t k = 0; k < values_.size(); ++k) colsum[col_idx_[k]] += std::abs(values_[k]);
    return n_ ? *std::max_element(colsum.begin(), colsum.end()) : 0.0;
  }

  std::vector<Triplet> triplets() const {
    std::vector<Triplet> t;
    t.reserve(nnz());
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) t.push_back({i, col_idx_[k], values_[k]});
    return t;
  }

  SparseMatrix transpose() const {
    auto t = triplets();
    for (auto& e : t) std::swap(e.row, e.col);
    return from_triplets(n_, std::move(t));
  }

  SparseMatrix scaled(double alpha) const {
    SparseMatrix S = *this;
    for (auto& v : S.values_) v *= alpha;
    return S;
  }

  DenseMatrix to_dense() const {
    DenseMatrix D(n_, n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) D(i, col_idx_[k]) += values_[k];
    return D;
  }

  bool operator==(const SparseMatrix&) const = default;

private:
  void validate() const {
    if (row_ptr_.size() != n_ + 1) throw DimensionMismatch("row_ptr must have n+1 entries");
    if (row_ptr_.front() != 0 || row_ptr_.back() != col_idx_.size() || col_idx_.size() != values_.size())
      throw DimensionMismatch("inconsistent CSR array lengths");
    for (std::size_t i = 0; i < n_; ++i)
      if (row_ptr_[i] > row_ptr_[i + 1]) throw DimensionMismatch("row_ptr must be nondecreasing");
    for (std::size_t c : col_idx_)
      if (c >= n_) throw DimensionMismatch("column index out of range");
    if (!all_finite(values_)) throw Error("sparse matrix has non-finite values");
  }

  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

static_assert(LinearOperator<SparseMatrix>);

inline DenseVector matvec(const SparseMatrix& A, std::span<const double> x, MatvecCounter* counter = nullptr) {
  if (x.size() != A.dim()) throw DimensionMismatch("matvec: vector length differs from n");
  DenseVector y(A.dim());
  A.apply(x, y);
  if (counter) counter->add();
  return y;
}

// x -> A (A x), used for the sign function.
template <LinearOperator Op>
class SquaredOperator {
public:
  explicit SquaredOperator(const Op& A) : A_{&A}, work_(A.dim()) {}
  std::size_t dim() const { return A_->dim(); }
  double norm1() const { return A_->norm1() * A_->norm1(); }
  std::uint64_t matvec_cost() const { return 2 * randkrylov::matvec_cost(*A_); }
  void apply(std::span<const double> x, std::span<double> y) const {
    A_->apply(x, work_);
    A_->apply(work_, y);
  }

private:
  const Op* A_;
  mutable DenseVector work_;
};

// x -> alpha * A x
template <LinearOperator Op>
class ScaledOperator {
public:
  ScaledOperator(const Op& A, double alpha) : A_{&A}, alpha_{alpha} {}
  std::size_t dim() const { return A_->dim(); }
  double norm1() const { return std::abs(alpha_) * A_->norm1(); }
  std::uint64_t matvec_cost() const { return randkrylov::matvec_cost(*A_); }
  void apply(std::span<const double> x, std::span<double> y) const {
    A_->apply(x, y);
    scale(alpha_, y);
  }

private:
  const Op* A_;
  double alpha_;
};

// ---------------------------------------------------------------------------
// Matrix Market coordinate format

inline SparseMatrix read_matrix_market(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(1, "empty input");
  ++lineno;
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
  };
  if (tag != "%%MatrixMarket" || lower(object) != "matrix") throw ParseError(lineno, "missing %%MatrixMarket matrix banner");
  if (lower(format) != "coordinate") throw ParseError(lineno, "only coordinate format is supported");
  field = lower(field);
  symmetry = lower(symmetry);
  const bool pattern = field == "pattern";
  if (field != "real" && field != "integer" && !pattern) throw ParseError(lineno, "unsupported field '" + field + "'");
  if (symmetry != "general" && symmetry != "symmetric") throw ParseError(lineno, "unsupported symmetry '" + symmetry + "'");
  const bool symmetric = symmetry == "symmetric";

  std::size_t rows = 0, cols = 0, entries = 0;
  bool have_size = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '%') continue;
    std::istringstream ss(line);
    if (!(ss >> rows >> cols >> entries)) throw ParseError(lineno, "malformed size line");
    have_size = true;
    break;
  }
  if (!have_size) throw ParseError(lineno, "missing size line");
  if (rows != cols) throw NonSquareError("matrix is " + std::to_string(rows) + "x" + std::to_string(cols));

  std::vector<Triplet> t;
  t.reserve(symmetric ? 2 * entries : entries);
  std::size_t seen = 0;
  while (seen < entries && std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '%') continue;
    std::istringstream ss(line);
    std::size_t i = 0, j = 0;
    double v = 1.0;
    if (!(ss >> i >> j)) throw ParseError(lineno, "malformed entry");
    if (!pattern) {
      std::string token;
      if (!(ss >> token)) throw ParseError(lineno, "missing value");
      char* end = nullptr;
      v = std::strtod(token.c_str(), &end);
      if (end == token.c_str() || *end != '\0') throw ParseError(lineno, "bad value '" + token + "'");
    }
    if (i < 1 || j < 1 || i > rows || j > cols) throw ParseError(lineno, "index out of range");
    t.push_back({i - 1, j - 1, v});
    if (symmetric && i != j) t.push_back({j - 1, i - 1, v});
    ++seen;
  }
  if (seen < entries) throw ParseError(lineno, "expected " + std::to_string(entries) + " entries, found " + std::to_string(seen));
  return SparseMatrix::from_triplets(rows, std::move(t));
}

inline SparseMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_matrix_market(in);
}

inline void write_matrix_market(const SparseMatrix& A, std::ostream& out) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << A.dim() << ' ' << A.dim() << ' ' << A.nnz() << '\n';
  char buf[64];
  for (const auto& e : A.triplets()) {
    std::snprintf(buf, sizeof buf, "%.17g", e.value);
    out << e.row + 1 << ' ' << e.col + 1 << ' ' << buf << '\n';
  }
}

inline void write_matrix_market(const SparseMatrix& A, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_matrix_market(A, out);
  if (!out) throw IoError("write failed: " + path);
}

// L = D - Adj with D the out-degree (row-sum) diagonal; the diagonal of the
// input is ignored.
inline SparseMatrix graph_laplacian(const SparseMatrix& adjacency) {
  const std::size_t n = adjacency.dim();
  std::vector<Triplet> t;
  std::vector<double> degree(n, 0.0);
  for (const auto& e : adjacency.triplets()) {
    if (e.row == e.col) continue;
    if (e.value < 0.0) throw Error("graph_laplacian: negative adjacency weight");
    if (e.value == 0.0) continue;
    degree[e.row] += e.value;
    t.push_back({e.row, e.col, -e.value});
  }
  for (std::size_t i = 0; i < n; ++i)
    if (degree[i] != 0.0) t.push_back({i, i, degree[i]});
  return SparseMatrix::from_triplets(n, std::move(t));
}

} // namespace randkrylov
