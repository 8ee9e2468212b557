#pragma once

// Dense kernels for the small (m-scale) matrices that appear in the Krylov
// drivers: Householder QR, triangular and LU solves, and singular values.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "randkrylov/errors.hpp"

namespace randkrylov {

using DenseVector = std::vector<double>;

inline constexpr double unit_roundoff = std::numeric_limits<double>::epsilon() / 2;

// ---------------------------------------------------------------------------
// vector helpers

inline double dot(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

// y <- y + alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(double alpha, std::span<double> x) {
  for (auto& v : x) v *= alpha;
}

inline DenseVector unit_vector(std::size_t n, std::size_t k) {
  DenseVector e(n, 0.0);
  e.at(k) = 1.0;
  return e;
}

inline double distance(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s);
}

inline double relative_error(std::span<const double> approx, std::span<const double> exact) {
  const double ref = norm2(exact);
  const double d = distance(approx, exact);
  return ref > 0.0 ? d / ref : d;
}

inline bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// DenseMatrix: column-major, so basis columns and Hessenberg columns are
// contiguous and appending a column is a resize.

class DenseMatrix {
public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_{rows}, cols_{cols}, data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix I(n, n);
    for (std::size_t i = 0; i < n; ++i) I(i, i) = 1.0;
    return I;
  }

  static DenseMatrix diagonal(std::span<const double> d) {
    DenseMatrix D(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) D(i, i) = d[i];
    return D;
  }

  // Builds from row-major nested initializer data; handy for small literals.
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    DenseMatrix M(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionMismatch("ragged row literal");
      std::size_t j = 0;
      for (double v : row) M(i, j++) = v;
      ++i;
    }
    return M;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) {
    assert(i < rows_ && j < cols_);
    return data_[j * rows_ + i];
  }
  double operator()(std::size_t i, std::size_t j) const {
    assert(i < rows_ && j < cols_);
    return data_[j * rows_ + i];
  }

  std::span<double> col(std::size_t j) { return {data_.data() + j * rows_, rows_}; }
  std::span<const double> col(std::size_t j) const { return {data_.data() + j * rows_, rows_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  void append_col(std::span<const double> c) {
    if (cols_ == 0 && rows_ == 0) rows_ = c.size();
    if (c.size() != rows_) throw DimensionMismatch("append_col: wrong column length");
    data_.insert(data_.end(), c.begin(), c.end());
    ++cols_;
  }

  // Keeps the leading `cols` columns.
  void truncate_cols(std::size_t cols) {
    assert(cols <= cols_);
    cols_ = cols;
    data_.resize(rows_ * cols_);
  }

  DenseMatrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    assert(r0 + nr <= rows_ && c0 + nc <= cols_);
    DenseMatrix B(nr, nc);
    for (std::size_t j = 0; j < nc; ++j)
      for (std::size_t i = 0; i < nr; ++i) B(i, j) = (*this)(r0 + i, c0 + j);
    return B;
  }

  DenseMatrix leading_cols(std::size_t nc) const { return block(0, 0, rows_, nc); }

  DenseMatrix transpose() const {
    DenseMatrix T(cols_, rows_);
    for (std::size_t j = 0; j < cols_; ++j)
      for (std::size_t i = 0; i < rows_; ++i) T(j, i) = (*this)(i, j);
    return T;
  }

  DenseMatrix& operator+=(const DenseMatrix& other) {
    check_same_shape(other);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
    return *this;
  }
  DenseMatrix& operator-=(const DenseMatrix& other) {
    check_same_shape(other);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
    return *this;
  }
  DenseMatrix& operator*=(double alpha) {
    for (auto& v : data_) v *= alpha;
    return *this;
  }

  friend DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
  friend DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
  friend DenseMatrix operator*(double alpha, DenseMatrix a) { return a *= alpha; }

  bool operator==(const DenseMatrix&) const = default;

private:
  void check_same_shape(const DenseMatrix& other) const {
    if (rows_ != other.rows_ || cols_ != other.cols_)
      throw DimensionMismatch("matrix shapes differ");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// products and norms

inline DenseMatrix matmul(const DenseMatrix& A, const DenseMatrix& B) {
  if (A.cols() != B.rows()) throw DimensionMismatch("matmul: inner dimensions differ");
  DenseMatrix C(A.rows(), B.cols());
  for (std::size_t j = 0; j < B.cols(); ++j) {
    auto cj = C.col(j);
    for (std::size_t k = 0; k < A.cols(); ++k) {
      const double bkj = B(k, j);
      if (bkj == 0.0) continue;
      axpy(bkj, A.col(k), cj);
    }
  }
  return C;
}

// A^T B without forming the transpose.
inline DenseMatrix matmul_tn(const DenseMatrix& A, const DenseMatrix& B) {
  if (A.rows() != B.rows()) throw DimensionMismatch("matmul_tn: row counts differ");
  DenseMatrix C(A.cols(), B.cols());
  for (std::size_t j = 0; j < B.cols(); ++j)
    for (std::size_t i = 0; i < A.cols(); ++i) C(i, j) = dot(A.col(i), B.col(j));
  return C;
}

inline DenseVector gemv(const DenseMatrix& A, std::span<const double> x) {
  if (A.cols() != x.size()) throw DimensionMismatch("gemv: dimension mismatch");
  DenseVector y(A.rows(), 0.0);
  for (std::size_t j = 0; j < A.cols(); ++j)
    if (x[j] != 0.0) axpy(x[j], A.col(j), y);
  return y;
}

inline DenseVector gemv_t(const DenseMatrix& A, std::span<const double> x) {
  if (A.rows() != x.size()) throw DimensionMismatch("gemv_t: dimension mismatch");
  DenseVector y(A.cols());
  for (std::size_t j = 0; j < A.cols(); ++j) y[j] = dot(A.col(j), x);
  return y;
}

inline double frobenius_norm(const DenseMatrix& A) { return norm2(A.values()); }

inline double norm1(const DenseMatrix& A) {
  double best = 0.0;
  for (std::size_t j = 0; j < A.cols(); ++j) {
    double s = 0.0;
    for (double v : A.col(j)) s += std::abs(v);
    best = std::max(best, s);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Householder QR

struct QrFactors {
  DenseMatrix Q; // rows x cols, orthonormal columns
  DenseMatrix R; // cols x cols, upper triangular, nonnegative diagonal
};

inline QrFactors householder_qr(const DenseMatrix& M) {
  const std::size_t m = M.rows();
  const std::size_t n = M.cols();
  if (m < n) throw DimensionMismatch("householder_qr: needs rows >= cols");

  DenseMatrix W = M;
  std::vector<DenseVector> reflectors(n);
  DenseVector beta(n, 0.0);

  for (std::size_t k = 0; k < n; ++k) {
    auto ck = W.col(k);
    double sigma = 0.0;
    for (std::size_t i = k; i < m; ++i) sigma += ck[i] * ck[i];
    double alpha = std::sqrt(sigma);
    DenseVector v(m - k, 0.0);
    if (alpha == 0.0) {
      reflectors[k] = std::move(v);
      continue;
    }
    // reflect onto -sign(x0) * alpha e1 for stability; sign fixed afterwards
    if (ck[k] > 0) alpha = -alpha;
    for (std::size_t i = k; i < m; ++i) v[i - k] = ck[i];
    v[0] -= alpha;
    const double vnorm2 = dot(v, v);
    beta[k] = vnorm2 > 0.0 ? 2.0 / vnorm2 : 0.0;
    for (std::size_t j = k; j < n; ++j) {
      auto cj = W.col(j);
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += v[i - k] * cj[i];
      s *= beta[k];
      for (std::size_t i = k; i < m; ++i) cj[i] -= s * v[i - k];
    }
    reflectors[k] = std::move(v);
  }

  QrFactors f{DenseMatrix(m, n), DenseMatrix(n, n)};
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i <= j; ++i) f.R(i, j) = W(i, j);

  // Q = H_0 H_1 ... H_{n-1} [I; 0], applied in reverse
  for (std::size_t j = 0; j < n; ++j) f.Q(j, j) = 1.0;
  for (std::size_t kk = n; kk-- > 0;) {
    const auto& v = reflectors[kk];
    if (beta[kk] == 0.0) continue;
    for (std::size_t j = kk; j < n; ++j) {
      auto qj = f.Q.col(j);
      double s = 0.0;
      for (std::size_t i = kk; i < m; ++i) s += v[i - kk] * qj[i];
      s *= beta[kk];
      for (std::size_t i = kk; i < m; ++i) qj[i] -= s * v[i - kk];
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (f.R(i, i) < 0.0) {
      for (std::size_t j = i; j < n; ++j) f.R(i, j) = -f.R(i, j);
      scale(-1.0, f.Q.col(i));
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// triangular solves

namespace detail {

inline void check_triangular_diagonal(const DenseMatrix& R) {
  double dmax = 0.0;
  for (std::size_t j = 0; j < R.cols(); ++j) dmax = std::max(dmax, std::abs(R(j, j)));
  const double floor = 1e-14 * dmax;
  for (std::size_t j = 0; j < R.cols(); ++j) {
    if (dmax == 0.0 || std::abs(R(j, j)) < floor) throw SingularTriangular(j, R(j, j));
  }
}

} // namespace detail

// Solves R X = B by back substitution.
inline DenseMatrix solve_upper_triangular(const DenseMatrix& R, const DenseMatrix& B) {
  if (R.rows() != R.cols()) throw DimensionMismatch("triangular factor must be square");
  if (B.rows() != R.rows()) throw DimensionMismatch("right-hand side rows differ");
  detail::check_triangular_diagonal(R);
  const std::size_t n = R.rows();
  DenseMatrix X = B;
  for (std::size_t c = 0; c < X.cols(); ++c) {
    auto x = X.col(c);
    for (std::size_t i = n; i-- > 0;) {
      double s = x[i];
      for (std::size_t j = i + 1; j < n; ++j) s -= R(i, j) * x[j];
      x[i] = s / R(i, i);
    }
  }
  return X;
}

inline DenseVector solve_upper_triangular(const DenseMatrix& R, std::span<const double> b) {
  DenseMatrix B(b.size(), 1);
  std::copy(b.begin(), b.end(), B.col(0).begin());
  auto X = solve_upper_triangular(R, B);
  return {X.col(0).begin(), X.col(0).end()};
}

// Returns B R^{-1} (right division), column by column.
inline DenseMatrix solve_upper_triangular_right(const DenseMatrix& B, const DenseMatrix& R) {
  if (R.rows() != R.cols()) throw DimensionMismatch("triangular factor must be square");
  if (B.cols() != R.rows()) throw DimensionMismatch("right division: column counts differ");
  detail::check_triangular_diagonal(R);
  DenseMatrix X = B;
  for (std::size_t j = 0; j < R.cols(); ++j) {
    auto xj = X.col(j);
    for (std::size_t k = 0; k < j; ++k)
      if (R(k, j) != 0.0) axpy(-R(k, j), X.col(k), xj);
    scale(1.0 / R(j, j), xj);
  }
  return X;
}

// ---------------------------------------------------------------------------
// LU with partial pivoting

class LuFactors {
public:
  explicit LuFactors(DenseMatrix A) : lu_{std::move(A)}, perm_(lu_.rows()) {
    if (lu_.rows() != lu_.cols()) throw NonSquareError("LU: matrix not square");
    const std::size_t n = lu_.rows();
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    const double scale_ref = std::max(norm1(lu_), std::numeric_limits<double>::min());
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t p = k;
      double best = std::abs(lu_(k, k));
      for (std::size_t i = k + 1; i < n; ++i) {
        if (std::abs(lu_(i, k)) > best) {
          best = std::abs(lu_(i, k));
          p = i;
        }
      }
      if (!(best > unit_roundoff * scale_ref))
        throw SingularMatrix("LU: zero pivot in column " + std::to_string(k));
      if (p != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(p, j));
        std::swap(perm_[k], perm_[p]);
      }
      const double pivot = lu_(k, k);
      for (std::size_t i = k + 1; i < n; ++i) lu_(i, k) /= pivot;
      for (std::size_t j = k + 1; j < n; ++j) {
        const double ukj = lu_(k, j);
        if (ukj == 0.0) continue;
        auto cj = lu_.col(j);
        auto ck = lu_.col(k);
        for (std::size_t i = k + 1; i < n; ++i) cj[i] -= ck[i] * ukj;
      }
    }
  }

  DenseMatrix solve(const DenseMatrix& B) const {
    const std::size_t n = lu_.rows();
    if (B.rows() != n) throw DimensionMismatch("LU solve: right-hand side rows differ");
    DenseMatrix X(n, B.cols());
    for (std::size_t c = 0; c < B.cols(); ++c) {
      auto x = X.col(c);
      for (std::size_t i = 0; i < n; ++i) x[i] = B(perm_[i], c);
      for (std::size_t j = 0; j < n; ++j) {
        const double xj = x[j];
        if (xj == 0.0) continue;
        auto lj = lu_.col(j);
        for (std::size_t i = j + 1; i < n; ++i) x[i] -= lj[i] * xj;
      }
      for (std::size_t j = n; j-- > 0;) {
        x[j] /= lu_(j, j);
        const double xj = x[j];
        if (xj == 0.0) continue;
        auto uj = lu_.col(j);
        for (std::size_t i = 0; i < j; ++i) x[i] -= uj[i] * xj;
      }
    }
    return X;
  }

private:
  DenseMatrix lu_;
  std::vector<std::size_t> perm_;
};

inline DenseMatrix lu_solve(const DenseMatrix& A, const DenseMatrix& B) {
  return LuFactors(A).solve(B);
}

// ---------------------------------------------------------------------------
// singular values and conditioning

// One-sided Jacobi on the R factor of M. Returns singular values in
// decreasing order.
inline DenseVector singular_values(const DenseMatrix& M) {
  DenseMatrix W = M.rows() >= M.cols() ? householder_qr(M).R : householder_qr(M.transpose()).R;
  const std::size_t n = W.cols();
  const double tol = n * unit_roundoff;
  for (int sweep = 0; sweep < 80; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto a = W.col(p);
        auto b = W.col(q);
        const double alpha = dot(a, a);
        const double beta = dot(b, b);
        const double gamma = dot(a, b);
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < W.rows(); ++i) {
          const double ai = a[i];
          const double bi = b[i];
          a[i] = c * ai - s * bi;
          b[i] = s * ai + c * bi;
        }
      }
    }
    if (!rotated) break;
  }
  DenseVector sv(n);
  for (std::size_t j = 0; j < n; ++j) sv[j] = norm2(W.col(j));
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

// sigma_max / sigma_min. A smallest singular value at rounding level
// relative to the largest counts as zero and yields +infinity.
inline double condition_2norm(const DenseMatrix& M) {
  if (M.empty()) return 1.0;
  const auto sv = singular_values(M);
  const double smax = sv.front();
  const double smin = sv.back();
  if (smax == 0.0) return std::numeric_limits<double>::infinity();
  if (smin <= smax * unit_roundoff * static_cast<double>(std::max(M.rows(), M.cols())))
    return std::numeric_limits<double>::infinity();
  return smax / smin;
}

} // namespace randkrylov
