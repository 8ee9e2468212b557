#pragma once

// Dense matrix functions on small matrices: exp by scaling and squaring with
// the [13/13] Pade approximant, and the principal square root through the
// real Schur form.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "randkrylov/dense.hpp"
#include "randkrylov/errors.hpp"

namespace randkrylov {

enum class MatrixFunctionKind { Exp, Sqrt, InvSqrt, Poly };

// A function applied to small dense matrices. Poly (coefficients in
// increasing degree) exists so polynomial exactness can be asserted.
struct MatrixFunction {
  MatrixFunctionKind kind = MatrixFunctionKind::Exp;
  std::vector<double> coeffs;

  static MatrixFunction exp() { return {MatrixFunctionKind::Exp, {}}; }
  static MatrixFunction sqrt() { return {MatrixFunctionKind::Sqrt, {}}; }
  static MatrixFunction inv_sqrt() { return {MatrixFunctionKind::InvSqrt, {}}; }
  static MatrixFunction polynomial(std::vector<double> c) { return {MatrixFunctionKind::Poly, std::move(c)}; }
  static MatrixFunction monomial(std::size_t degree) {
    std::vector<double> c(degree + 1, 0.0);
    c.back() = 1.0;
    return polynomial(std::move(c));
  }

  double operator()(double x) const {
    switch (kind) {
    case MatrixFunctionKind::Exp: return std::exp(x);
    case MatrixFunctionKind::Sqrt: return std::sqrt(x);
    case MatrixFunctionKind::InvSqrt: return 1.0 / std::sqrt(x);
    case MatrixFunctionKind::Poly: {
      double acc = 0.0;
      for (std::size_t k = coeffs.size(); k-- > 0;) acc = acc * x + coeffs[k];
      return acc;
    }
    }
    return 0.0;
  }

  std::string name() const {
    switch (kind) {
    case MatrixFunctionKind::Exp: return "exp";
    case MatrixFunctionKind::Sqrt: return "sqrt";
    case MatrixFunctionKind::InvSqrt: return "invsqrt";
    case MatrixFunctionKind::Poly: return "poly";
    }
    return "?";
  }
};

// ---------------------------------------------------------------------------
// Hessenberg reduction and real Schur form

struct RealSchur {
  DenseMatrix Q; // orthogonal
  DenseMatrix T; // quasi upper triangular, 2x2 blocks hold complex pairs
};

namespace detail {

// H <- P^T H P with Householder P, accumulating Z <- Z P.
inline void reduce_to_hessenberg(DenseMatrix& H, DenseMatrix& Z) {
  const std::size_t n = H.rows();
  DenseVector v(n);
  for (std::size_t k = 0; k + 2 < n; ++k) {
    double alpha = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) alpha += H(i, k) * H(i, k);
    alpha = std::sqrt(alpha);
    if (alpha == 0.0) continue;
    if (H(k + 1, k) > 0) alpha = -alpha;
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t i = k + 1; i < n; ++i) v[i] = H(i, k);
    v[k + 1] -= alpha;
    double vv = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) vv += v[i] * v[i];
    if (vv == 0.0) continue;
    const double beta = 2.0 / vv;
    // left: rows k+1..n-1
    for (std::size_t j = k; j < n; ++j) {
      auto c = H.col(j);
      double s = 0.0;
      for (std::size_t i = k + 1; i < n; ++i) s += v[i] * c[i];
      s *= beta;
      for (std::size_t i = k + 1; i < n; ++i) c[i] -= s * v[i];
    }
    // right: columns k+1..n-1
    for (auto* M : {&H, &Z}) {
      DenseVector s(n, 0.0);
      for (std::size_t j = k + 1; j < n; ++j) axpy(v[j], M->col(j), s);
      for (std::size_t j = k + 1; j < n; ++j) axpy(-beta * v[j], s, M->col(j));
    }
    H(k + 1, k) = alpha;
    for (std::size_t i = k + 2; i < n; ++i) H(i, k) = 0.0;
  }
}

} // namespace detail

// Francis double-shift QR on the Hessenberg form. Deflation when
// |h(l,l-1)| < u (|h(l-1,l-1)| + |h(l,l)|); gives up after 30 n^2 sweeps.
inline RealSchur real_schur(const DenseMatrix& A) {
  if (A.rows() != A.cols()) throw NonSquareError("real_schur: matrix not square");
  const int nn = static_cast<int>(A.rows());
  RealSchur out{DenseMatrix::identity(A.rows()), A};
  if (nn == 0) return out;
  DenseMatrix& H = out.T;
  DenseMatrix& V = out.Q;
  detail::reduce_to_hessenberg(H, V);

  const double eps = unit_roundoff;
  const long max_iter = 30L * nn * nn;
  long total_iter = 0;
  int n = nn - 1;
  const int low = 0;
  double exshift = 0.0;
  double p = 0, q = 0, r = 0, s = 0, z = 0, w, x, y;

  double norm = 0.0;
  for (int i = 0; i < nn; ++i)
    for (int j = std::max(i - 1, 0); j < nn; ++j) norm += std::abs(H(i, j));

  int iter = 0;
  while (n >= low) {
    int l = n;
    while (l > low) {
      s = std::abs(H(l - 1, l - 1)) + std::abs(H(l, l));
      if (s == 0.0) s = norm;
      if (std::abs(H(l, l - 1)) < eps * s) break;
      --l;
    }
    if (l > low) H(l, l - 1) = 0.0;

    if (l == n) {
      H(n, n) += exshift;
      --n;
      iter = 0;
    } else if (l == n - 1) {
      w = H(n, n - 1) * H(n - 1, n);
      p = (H(n - 1, n - 1) - H(n, n)) / 2.0;
      q = p * p + w;
      z = std::sqrt(std::abs(q));
      H(n, n) += exshift;
      H(n - 1, n - 1) += exshift;
      x = H(n, n);
      if (q >= 0) {
        // real pair: rotate the block to upper triangular
        z = p >= 0 ? p + z : p - z;
        x = H(n, n - 1);
        s = std::abs(x) + std::abs(z);
        p = x / s;
        q = z / s;
        r = std::sqrt(p * p + q * q);
        p /= r;
        q /= r;
        for (int j = n - 1; j < nn; ++j) {
          z = H(n - 1, j);
          H(n - 1, j) = q * z + p * H(n, j);
          H(n, j) = q * H(n, j) - p * z;
        }
        for (int i = 0; i <= n; ++i) {
          z = H(i, n - 1);
          H(i, n - 1) = q * z + p * H(i, n);
          H(i, n) = q * H(i, n) - p * z;
        }
        for (int i = 0; i < nn; ++i) {
          z = V(i, n - 1);
          V(i, n - 1) = q * z + p * V(i, n);
          V(i, n) = q * V(i, n) - p * z;
        }
        H(n, n - 1) = 0.0;
      }
      n -= 2;
      iter = 0;
    } else {
      if (++total_iter > max_iter) throw SchurNoConvergence("real Schur QR iteration did not converge");
      x = H(n, n);
      y = 0.0;
      w = 0.0;
      if (l < n) {
        y = H(n - 1, n - 1);
        w = H(n, n - 1) * H(n - 1, n);
      }
      // exceptional shifts
      if (iter == 10) {
        exshift += x;
        for (int i = low; i <= n; ++i) H(i, i) -= x;
        s = std::abs(H(n, n - 1)) + std::abs(H(n - 1, n - 2));
        x = y = 0.75 * s;
        w = -0.4375 * s * s;
      }
      if (iter == 30) {
        s = (y - x) / 2.0;
        s = s * s + w;
        if (s > 0) {
          s = std::sqrt(s);
          if (y < x) s = -s;
          s = x - w / ((y - x) / 2.0 + s);
          for (int i = low; i <= n; ++i) H(i, i) -= s;
          exshift += s;
          x = y = w = 0.964;
        }
      }
      ++iter;

      // look for two consecutive small subdiagonal elements
      int m = n - 2;
      while (m >= l) {
        z = H(m, m);
        r = x - z;
        s = y - z;
        p = (r * s - w) / H(m + 1, m) + H(m, m + 1);
        q = H(m + 1, m + 1) - z - r - s;
        r = H(m + 2, m + 1);
        s = std::abs(p) + std::abs(q) + std::abs(r);
        p /= s;
        q /= s;
        r /= s;
        if (m == l) break;
        if (std::abs(H(m, m - 1)) * (std::abs(q) + std::abs(r)) <
            eps * (std::abs(p) * (std::abs(H(m - 1, m - 1)) + std::abs(z) + std::abs(H(m + 1, m + 1)))))
          break;
        --m;
      }
      for (int i = m + 2; i <= n; ++i) {
        H(i, i - 2) = 0.0;
        if (i > m + 2) H(i, i - 3) = 0.0;
      }

      // double QR step on rows l..n, columns m..n
      for (int k = m; k <= n - 1; ++k) {
        const bool notlast = k != n - 1;
        if (k != m) {
          p = H(k, k - 1);
          q = H(k + 1, k - 1);
          r = notlast ? H(k + 2, k - 1) : 0.0;
          x = std::abs(p) + std::abs(q) + std::abs(r);
          if (x == 0.0) continue;
          p /= x;
          q /= x;
          r /= x;
        }
        s = std::sqrt(p * p + q * q + r * r);
        if (p < 0) s = -s;
        if (s == 0.0) continue;
        if (k != m)
          H(k, k - 1) = -s * x;
        else if (l != m)
          H(k, k - 1) = -H(k, k - 1);
        p += s;
        x = p / s;
        y = q / s;
        z = r / s;
        q /= p;
        r /= p;
        for (int j = k; j < nn; ++j) {
          p = H(k, j) + q * H(k + 1, j);
          if (notlast) {
            p += r * H(k + 2, j);
            H(k + 2, j) -= p * z;
          }
          H(k, j) -= p * x;
          H(k + 1, j) -= p * y;
        }
        const int imax = std::min(n, k + 3);
        for (int i = 0; i <= imax; ++i) {
          p = x * H(i, k) + y * H(i, k + 1);
          if (notlast) {
            p += z * H(i, k + 2);
            H(i, k + 2) -= p * r;
          }
          H(i, k) -= p;
          H(i, k + 1) -= p * q;
        }
        for (int i = 0; i < nn; ++i) {
          p = x * V(i, k) + y * V(i, k + 1);
          if (notlast) {
            p += z * V(i, k + 2);
            V(i, k + 2) -= p * r;
          }
          V(i, k) -= p;
          V(i, k + 1) -= p * q;
        }
      }
    }
  }

  // clean everything below the block diagonal
  for (int j = 0; j < nn; ++j)
    for (int i = j + 2; i < nn; ++i) H(i, j) = 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// square root of a quasi-triangular matrix

namespace detail {

struct BlockRange {
  std::size_t start;
  std::size_t size;
};

inline std::vector<BlockRange> schur_blocks(const DenseMatrix& T) {
  std::vector<BlockRange> blocks;
  const std::size_t n = T.rows();
  for (std::size_t i = 0; i < n;) {
    if (i + 1 < n && T(i + 1, i) != 0.0) {
      blocks.push_back({i, 2});
      i += 2;
    } else {
      blocks.push_back({i, 1});
      i += 1;
    }
  }
  return blocks;
}

// Solves the (at most 4x4) system in place by Gaussian elimination with
// partial pivoting.
template <std::size_t N>
bool small_solve(std::array<std::array<double, N>, N>& M, std::array<double, N>& rhs, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(M[i][k]) > std::abs(M[piv][k])) piv = i;
    if (M[piv][k] == 0.0) return false;
    std::swap(M[k], M[piv]);
    std::swap(rhs[k], rhs[piv]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = M[i][k] / M[k][k];
      for (std::size_t j = k; j < n; ++j) M[i][j] -= f * M[k][j];
      rhs[i] -= f * rhs[k];
    }
  }
  for (std::size_t k = n; k-- > 0;) {
    double s = rhs[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= M[k][j] * rhs[j];
    rhs[k] = s / M[k][k];
  }
  return true;
}

} // namespace detail

// Principal square root of a real quasi-upper-triangular T. 1x1 blocks that
// are negative beyond rounding level relative to ||T||_F are rejected.
inline DenseMatrix sqrtm_quasi_triangular(const DenseMatrix& T) {
  const std::size_t n = T.rows();
  DenseMatrix U(n, n);
  const auto blocks = detail::schur_blocks(T);
  const double zero_tol = static_cast<double>(std::max<std::size_t>(n, 1)) * 4.0 * unit_roundoff * frobenius_norm(T);

  for (const auto& b : blocks) {
    const std::size_t i = b.start;
    if (b.size == 1) {
      double t = T(i, i);
      if (t < 0.0) {
        if (-t > zero_tol)
          throw NegativeRealEigenvalue("sqrtm: eigenvalue " + std::to_string(t) + " on the negative real axis");
        t = 0.0;
      }
      U(i, i) = std::sqrt(t);
    } else {
      const double a = T(i, i), bb = T(i, i + 1), c = T(i + 1, i), d = T(i + 1, i + 1);
      const double theta = 0.5 * (a + d);
      const double disc = 0.25 * (a - d) * (a - d) + bb * c; // negative for a complex pair
      const double mu = std::sqrt(std::max(-disc, 0.0));
      const double alpha = std::real(std::sqrt(std::complex<double>(theta, mu)));
      if (!(alpha > 0.0)) throw NegativeRealEigenvalue("sqrtm: 2x2 block has no principal square root");
      const double inv2a = 0.5 / alpha;
      U(i, i) = alpha + (a - theta) * inv2a;
      U(i, i + 1) = bb * inv2a;
      U(i + 1, i) = c * inv2a;
      U(i + 1, i + 1) = alpha + (d - theta) * inv2a;
    }
  }

  // off-diagonal blocks, one block column at a time, bottom to top
  for (std::size_t jb = 0; jb < blocks.size(); ++jb) {
    const auto& bj = blocks[jb];
    for (std::size_t ib = jb; ib-- > 0;) {
      const auto& bi = blocks[ib];
      const std::size_t p = bi.size, q = bj.size;
      // C = T_ij - sum_k U_ik U_kj over blocks strictly between
      double C[2][2] = {{0, 0}, {0, 0}};
      for (std::size_t r = 0; r < p; ++r)
        for (std::size_t c = 0; c < q; ++c) {
          double s = T(bi.start + r, bj.start + c);
          for (std::size_t k = bi.start + bi.size; k < bj.start; ++k)
            s -= U(bi.start + r, k) * U(k, bj.start + c);
          C[r][c] = s;
        }
      // U_ii X + X U_jj = C, unknowns vec(X) column-major
      std::array<std::array<double, 4>, 4> M{};
      std::array<double, 4> rhs{};
      const std::size_t dim = p * q;
      for (std::size_t c = 0; c < q; ++c)
        for (std::size_t r = 0; r < p; ++r) {
          const std::size_t row = c * p + r;
          rhs[row] = C[r][c];
          for (std::size_t k = 0; k < p; ++k) M[row][c * p + k] += U(bi.start + r, bi.start + k);
          for (std::size_t k = 0; k < q; ++k) M[row][k * p + r] += U(bj.start + k, bj.start + c);
        }
      if (!detail::small_solve<4>(M, rhs, dim))
        throw SingularMatrix("sqrtm: singular Sylvester block (repeated zero eigenvalue)");
      for (std::size_t c = 0; c < q; ++c)
        for (std::size_t r = 0; r < p; ++r) U(bi.start + r, bj.start + c) = rhs[c * p + r];
    }
  }
  return U;
}

inline DenseMatrix sqrtm(const DenseMatrix& H) {
  if (H.rows() != H.cols()) throw NonSquareError("sqrtm: matrix not square");
  if (H.rows() == 0) return H;
  const auto schur = real_schur(H);
  const auto U = sqrtm_quasi_triangular(schur.T);
  return matmul(matmul(schur.Q, U), schur.Q.transpose());
}

inline DenseMatrix inv_sqrtm(const DenseMatrix& H) {
  const auto X = sqrtm(H);
  return lu_solve(X, DenseMatrix::identity(X.rows()));
}

// ---------------------------------------------------------------------------
// exponential

inline DenseMatrix expm(const DenseMatrix& H) {
  if (H.rows() != H.cols()) throw NonSquareError("expm: matrix not square");
  const std::size_t n = H.rows();
  if (n == 0) return H;
  static constexpr double b[14] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                   1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                   670442572800.0,      33522128640.0,       1323241920.0,
                                   40840800.0,          960960.0,            16380.0,
                                   182.0,               1.0};
  constexpr double theta13 = 5.371920351148152;

  const double nrm = norm1(H);
  if (!std::isfinite(nrm)) throw SingularPadeDenominator("expm: non-finite input");
  int squarings = 0;
  if (nrm > theta13) squarings = static_cast<int>(std::ceil(std::log2(nrm / theta13)));
  DenseMatrix A = H;
  if (squarings > 0) A *= std::ldexp(1.0, -squarings);

  const auto I = DenseMatrix::identity(n);
  const auto A2 = matmul(A, A);
  const auto A4 = matmul(A2, A2);
  const auto A6 = matmul(A2, A4);

  DenseMatrix inner_u = b[13] * A6 + b[11] * A4 + b[9] * A2;
  DenseMatrix U = matmul(A6, inner_u) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I;
  U = matmul(A, U);
  DenseMatrix inner_v = b[12] * A6 + b[10] * A4 + b[8] * A2;
  DenseMatrix V = matmul(A6, inner_v) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;

  DenseMatrix X;
  try {
    X = lu_solve(V - U, V + U);
  } catch (const SingularMatrix&) {
    throw SingularPadeDenominator("expm: singular Pade denominator; rescale the problem");
  }
  for (int k = 0; k < squarings; ++k) X = matmul(X, X);
  if (!all_finite(X.values())) throw SingularPadeDenominator("expm: overflow during squaring");
  return X;
}

inline DenseMatrix polynomial_matrix(std::span<const double> coeffs, const DenseMatrix& H) {
  const std::size_t n = H.rows();
  if (coeffs.empty()) return DenseMatrix(n, n);
  DenseMatrix P = coeffs.back() * DenseMatrix::identity(n);
  for (std::size_t k = coeffs.size() - 1; k-- > 0;) {
    P = matmul(P, H);
    for (std::size_t i = 0; i < n; ++i) P(i, i) += coeffs[k];
  }
  return P;
}

inline DenseMatrix matrix_function(const MatrixFunction& f, const DenseMatrix& H) {
  switch (f.kind) {
  case MatrixFunctionKind::Exp: return expm(H);
  case MatrixFunctionKind::Sqrt: return sqrtm(H);
  case MatrixFunctionKind::InvSqrt: return inv_sqrtm(H);
  case MatrixFunctionKind::Poly: return polynomial_matrix(f.coeffs, H);
  }
  throw Error("unknown matrix function");
}

// f(H) w, forming f(H) densely.
inline DenseVector eval_matfun(const MatrixFunction& f, const DenseMatrix& H, std::span<const double> w) {
  if (H.rows() != H.cols()) throw NonSquareError("eval_matfun: matrix not square");
  if (w.size() != H.rows()) throw DimensionMismatch("eval_matfun: vector length differs");
  return gemv(matrix_function(f, H), w);
}

} // namespace randkrylov
