#pragma once

// Krylov basis builders producing an Arnoldi-like decomposition
//   A V_m = V_{m+1} H_m(underlined)
// with a possibly non-orthonormal basis: full Arnoldi, sketched
// Gram-Schmidt, truncated orthogonalization, and truncated orthogonalization
// with a one-shot whitening step.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "randkrylov/dense.hpp"
#include "randkrylov/errors.hpp"
#include "randkrylov/sketch.hpp"
#include "randkrylov/sparse.hpp"

namespace randkrylov {

enum class BasisMethod { Arnoldi, SketchedGS, Truncated };

struct BasisBuildConfig {
  std::size_t m = 10;
  BasisMethod method = BasisMethod::Arnoldi;
  std::size_t k = 2;
  double whitening_threshold = 1000.0;
  bool whiten = false;
  const SketchOperator* sketch = nullptr;
  double breakdown_tol = 1e-14;
  // Test hook: whiten when the basis reaches this many columns, regardless
  // of the condition number.
  std::optional<std::size_t> force_whiten_at;
};

struct ArnoldiLikeDecomposition {
  DenseMatrix V;       // n x (m+1)
  DenseMatrix H_under; // (m+1) x m
  double gamma_b = 0.0;
  std::optional<DenseMatrix> sketched_basis; // s x (m+1)
  std::optional<std::size_t> whitened_at;    // number of basis vectors when whitened
  std::optional<std::size_t> breakdown_at;   // index i of the vector that vanished
  std::vector<double> sketched_condition;    // cond(Theta V_i) after each step

  std::size_t m() const noexcept { return H_under.cols(); }
  DenseMatrix basis() const { return V.leading_cols(m()); }
  DenseMatrix square_h() const { return H_under.block(0, 0, m(), m()); }
  double subdiagonal() const { return m() ? H_under(m(), m() - 1) : 0.0; }
  std::span<const double> next_vector() const { return V.col(m()); }
};

namespace detail {

inline void check_start(std::size_t n, std::span<const double> b, std::size_t m) {
  if (b.size() != n) throw DimensionMismatch("starting vector length differs from operator dimension");
  if (m == 0) throw Error("Krylov dimension must be positive");
  if (m > n) throw DimensionMismatch("Krylov dimension exceeds operator dimension");
  if (norm2(b) == 0.0) throw Error("starting vector is zero");
}

template <LinearOperator Op>
DenseVector apply_op(const Op& A, std::span<const double> x, CostCounters* counters) {
  DenseVector y(A.dim());
  A.apply(x, y);
  if (counters) counters->matvecs.add(matvec_cost(A));
  return y;
}

// Cuts the decomposition to `m` columns after the (m+1)-th vector vanished:
// the last basis column and the last row of H become zero.
inline void close_at_breakdown(ArnoldiLikeDecomposition& d, std::size_t m) {
  const std::size_t n = d.V.rows();
  d.V.truncate_cols(m);
  d.V.append_col(DenseVector(n, 0.0));
  DenseMatrix H(m + 1, m);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i <= std::min(j + 1, m - 1); ++i) H(i, j) = d.H_under(i, j);
  d.H_under = std::move(H);
  d.breakdown_at = m + 1;
  if (d.sketched_basis) {
    auto& S = *d.sketched_basis;
    S.truncate_cols(m);
    S.append_col(DenseVector(S.rows(), 0.0));
  }
}

// Modified Gram-Schmidt of w against columns [first, last) of V, adding the
// coefficients into column `col` of H.
inline void mgs_pass(const DenseMatrix& V, std::size_t first, std::size_t last, DenseVector& w, DenseMatrix& H,
                     std::size_t col, CostCounters* counters) {
  for (std::size_t j = first; j < last; ++j) {
    const double h = dot(V.col(j), w);
    axpy(-h, V.col(j), w);
    H(j, col) += h;
  }
  if (counters) counters->basis_flops += (last - first) * w.size();
}

// One sketched Gram-Schmidt step: returns false on breakdown. On success
// appends v and s to V and S and fills column `col` of H.
inline bool sketched_gs_step(const SketchOperator& theta, DenseMatrix& V, DenseMatrix& S, DenseVector w,
                             DenseMatrix& H, std::size_t col, double tol, CostCounters* counters) {
  const auto p = theta.apply(w, counters);
  const std::size_t i = V.cols();
  const auto r = gemv_t(S, p);
  DenseVector s = p;
  for (std::size_t j = 0; j < i; ++j) axpy(-r[j], S.col(j), s);
  const double rii = norm2(s);
  if (rii <= tol) return false;
  scale(1.0 / rii, s);
  for (std::size_t j = 0; j < i; ++j) {
    axpy(-r[j], V.col(j), w);
    H(j, col) = r[j];
  }
  scale(1.0 / rii, w);
  H(i, col) = rii;
  if (counters) counters->basis_flops += i * w.size();
  V.append_col(w);
  S.append_col(s);
  return true;
}

} // namespace detail

// Full Arnoldi: modified Gram-Schmidt plus one reorthogonalization pass.
template <LinearOperator Op>
ArnoldiLikeDecomposition arnoldi(const Op& A, std::span<const double> b, std::size_t m,
                                 CostCounters* counters = nullptr, double breakdown_tol = 1e-14) {
  const std::size_t n = A.dim();
  detail::check_start(n, b, m);
  const double tol = breakdown_tol * A.norm1();
  ArnoldiLikeDecomposition d;
  d.gamma_b = norm2(b);
  if (counters) counters->basis_flops += n;
  d.V = DenseMatrix(n, 0);
  DenseVector v(b.begin(), b.end());
  scale(1.0 / d.gamma_b, v);
  d.V.append_col(v);
  d.H_under = DenseMatrix(m + 1, m);
  for (std::size_t t = 1; t <= m; ++t) {
    auto w = detail::apply_op(A, d.V.col(t - 1), counters);
    detail::mgs_pass(d.V, 0, t, w, d.H_under, t - 1, counters);
    detail::mgs_pass(d.V, 0, t, w, d.H_under, t - 1, counters);
    const double h = norm2(w);
    if (counters) counters->basis_flops += n;
    if (h <= tol) {
      detail::close_at_breakdown(d, t);
      return d;
    }
    d.H_under(t, t - 1) = h;
    scale(1.0 / h, w);
    d.V.append_col(w);
  }
  return d;
}

template <LinearOperator Op>
ArnoldiLikeDecomposition sketched_gs_basis(const Op& A, std::span<const double> b, std::size_t m,
                                           const SketchOperator& theta, CostCounters* counters = nullptr,
                                           double breakdown_tol = 1e-14) {
  const std::size_t n = A.dim();
  detail::check_start(n, b, m);
  if (theta.n_input() != n) throw DimensionMismatch("sketch input dimension differs from operator dimension");
  if (theta.rows() < m + 1) throw InvalidSketchSize("sketched Gram-Schmidt needs at least m+1 sketch rows");
  const double tol = breakdown_tol * A.norm1();
  ArnoldiLikeDecomposition d;
  auto p = theta.apply(b, counters);
  const double r11 = norm2(p);
  if (r11 == 0.0) throw Error("sketch annihilates the starting vector");
  d.gamma_b = r11;
  scale(1.0 / r11, p);
  DenseVector v(b.begin(), b.end());
  scale(1.0 / r11, v);
  d.V = DenseMatrix(n, 0);
  d.V.append_col(v);
  DenseMatrix S(theta.rows(), 0);
  S.append_col(p);
  d.H_under = DenseMatrix(m + 1, m);
  d.sketched_basis = std::move(S);
  for (std::size_t t = 1; t <= m; ++t) {
    auto w = detail::apply_op(A, d.V.col(t - 1), counters);
    if (!detail::sketched_gs_step(theta, d.V, *d.sketched_basis, std::move(w), d.H_under, t - 1, tol, counters)) {
      detail::close_at_breakdown(d, t);
      return d;
    }
  }
  return d;
}

namespace detail {

// Shared by the plain and whitened truncated builders so that an inactive
// whitening branch reproduces the plain builder bit for bit.
template <LinearOperator Op>
ArnoldiLikeDecomposition truncated_impl(const Op& A, std::span<const double> b, std::size_t m, std::size_t k,
                                        const SketchOperator* theta, bool whiten, double threshold,
                                        std::optional<std::size_t> force_at, CostCounters* counters,
                                        double breakdown_tol) {
  const std::size_t n = A.dim();
  check_start(n, b, m);
  if (k < 1) throw Error("truncation depth k must be at least 1");
  if (theta) {
    if (theta->n_input() != n) throw DimensionMismatch("sketch input dimension differs from operator dimension");
    if (theta->rows() < m + 1) throw InvalidSketchSize("whitening needs at least m+1 sketch rows");
  }
  if (whiten && !(threshold > 1.0)) throw Error("whitening threshold must exceed 1");
  const double tol = breakdown_tol * A.norm1();
  ArnoldiLikeDecomposition d;
  d.gamma_b = norm2(b);
  if (counters) counters->basis_flops += n;
  DenseVector v(b.begin(), b.end());
  scale(1.0 / d.gamma_b, v);
  d.V = DenseMatrix(n, 0);
  d.V.append_col(v);
  d.H_under = DenseMatrix(m + 1, m);
  if (theta) {
    d.sketched_basis = DenseMatrix(theta->rows(), 0);
    d.sketched_basis->append_col(theta->apply(v, counters));
  }
  bool sketched_mode = false;
  for (std::size_t t = 1; t <= m; ++t) {
    auto w = apply_op(A, d.V.col(t - 1), counters);
    if (sketched_mode) {
      if (!sketched_gs_step(*theta, d.V, *d.sketched_basis, std::move(w), d.H_under, t - 1, tol, counters)) {
        close_at_breakdown(d, t);
        return d;
      }
      continue;
    }
    mgs_pass(d.V, t > k ? t - k : 0, t, w, d.H_under, t - 1, counters);
    const double h = norm2(w);
    if (counters) counters->basis_flops += n;
    if (h <= tol) {
      close_at_breakdown(d, t);
      return d;
    }
    d.H_under(t, t - 1) = h;
    scale(1.0 / h, w);
    d.V.append_col(w);
    if (!theta) continue;
    d.sketched_basis->append_col(theta->apply(w, counters));
    if (!whiten) continue;

    const std::size_t cols = t + 1;
    const double cond = condition_2norm(*d.sketched_basis);
    d.sketched_condition.push_back(cond);
    if (!(cond > threshold) && force_at != cols) continue;

    // Whitening: V <- V R^{-1}, H <- R H R_{t}^{-1}, continue as sketched GS.
    auto qr = householder_qr(*d.sketched_basis);
    check_triangular_diagonal(qr.R);
    d.V = solve_upper_triangular_right(d.V, qr.R);
    if (counters) counters->basis_flops += n * cols * (cols + 1) / 2;
    DenseMatrix Ht = d.H_under.block(0, 0, cols, t);
    Ht = solve_upper_triangular_right(matmul(qr.R, Ht), qr.R.block(0, 0, t, t));
    for (std::size_t j = 0; j < t; ++j)
      for (std::size_t i = 0; i < cols; ++i) d.H_under(i, j) = Ht(i, j);
    // R is upper triangular, so H stays Hessenberg in exact arithmetic
    for (std::size_t j = 0; j < t; ++j)
      for (std::size_t i = j + 2; i < cols; ++i) d.H_under(i, j) = 0.0;
    d.gamma_b *= qr.R(0, 0);
    d.sketched_basis = std::move(qr.Q);
    d.whitened_at = cols;
    sketched_mode = true;
  }
  return d;
}

} // namespace detail

// Each new vector is orthogonalized against the previous k basis vectors only.
template <LinearOperator Op>
ArnoldiLikeDecomposition truncated_basis(const Op& A, std::span<const double> b, std::size_t m, std::size_t k,
                                         CostCounters* counters = nullptr, double breakdown_tol = 1e-14) {
  return detail::truncated_impl(A, b, m, k, nullptr, false, 2.0, std::nullopt, counters, breakdown_tol);
}

// Truncated basis that also tracks Theta V. When Theta V_i first exceeds the
// threshold in condition number the basis is whitened once and the rest of
// the basis is built by sketched Gram-Schmidt with the same Theta.
template <LinearOperator Op>
ArnoldiLikeDecomposition truncated_basis_with_whitening(const Op& A, std::span<const double> b, std::size_t m,
                                                        std::size_t k, const SketchOperator& theta,
                                                        double threshold = 1000.0, CostCounters* counters = nullptr,
                                                        double breakdown_tol = 1e-14,
                                                        std::optional<std::size_t> force_whiten_at = std::nullopt) {
  return detail::truncated_impl(A, b, m, k, &theta, true, threshold, force_whiten_at, counters, breakdown_tol);
}

// Truncated basis that accumulates Theta V but never whitens (for sFOM).
template <LinearOperator Op>
ArnoldiLikeDecomposition truncated_basis_sketched(const Op& A, std::span<const double> b, std::size_t m,
                                                  std::size_t k, const SketchOperator& theta,
                                                  CostCounters* counters = nullptr, double breakdown_tol = 1e-14) {
  return detail::truncated_impl(A, b, m, k, &theta, false, 2.0, std::nullopt, counters, breakdown_tol);
}

template <LinearOperator Op>
ArnoldiLikeDecomposition build_basis(const Op& A, std::span<const double> b, const BasisBuildConfig& cfg,
                                     CostCounters* counters = nullptr) {
  switch (cfg.method) {
  case BasisMethod::Arnoldi:
    return arnoldi(A, b, cfg.m, counters, cfg.breakdown_tol);
  case BasisMethod::SketchedGS:
    if (!cfg.sketch) throw Error("sketched Gram-Schmidt needs a sketch");
    return sketched_gs_basis(A, b, cfg.m, *cfg.sketch, counters, cfg.breakdown_tol);
  case BasisMethod::Truncated:
    if (cfg.whiten) {
      if (!cfg.sketch) throw Error("whitening needs a sketch");
      return truncated_basis_with_whitening(A, b, cfg.m, cfg.k, *cfg.sketch, cfg.whitening_threshold, counters,
                                            cfg.breakdown_tol, cfg.force_whiten_at);
    }
    if (cfg.sketch) return truncated_basis_sketched(A, b, cfg.m, cfg.k, *cfg.sketch, counters, cfg.breakdown_tol);
    return truncated_basis(A, b, cfg.m, cfg.k, counters, cfg.breakdown_tol);
  }
  throw Error("unknown basis method");
}

// ||A V_m - V_{m+1} H||_F, the Arnoldi-like relation residual.
template <LinearOperator Op>
double decomposition_residual(const Op& A, const ArnoldiLikeDecomposition& d) {
  const std::size_t m = d.m();
  DenseMatrix R(d.V.rows(), m);
  for (std::size_t j = 0; j < m; ++j) A.apply(d.V.col(j), R.col(j));
  R -= matmul(d.V, d.H_under);
  return frobenius_norm(R);
}

} // namespace randkrylov
