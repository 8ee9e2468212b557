#pragma once

// Solvers for the overdetermined problem min_z ||V z - c||_2 that yields the
// last column of the projected matrix: LSQR, LSQR right-preconditioned by
// the R factor of a sketch of V, and sketch-and-solve.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "randkrylov/dense.hpp"
#include "randkrylov/errors.hpp"
#include "randkrylov/sketch.hpp"

namespace randkrylov {

enum class LsqMode { Plain, SketchPrecond, SketchSolve };

struct LsqConfig {
  double tol = 1e-6;
  std::size_t max_iter = 0;            // 0 means 4 * cols
  LsqMode mode = LsqMode::Plain;
  std::size_t precond_sketch_rows = 0; // 0 means 2 * cols
};

struct LsqReport {
  DenseVector y;
  std::size_t iterations = 0;
  double relative_residual_reduction = 1.0; // ||V y - c|| / ||c||, as estimated by the solver
  std::optional<double> preconditioner_condition;
  bool converged = false;
};

namespace detail {

struct LsqrProblem {
  std::size_t rows;
  std::size_t cols;
  std::function<DenseVector(std::span<const double>)> apply;           // x -> M x
  std::function<DenseVector(std::span<const double>)> apply_transpose; // u -> M^T u
};

// Paige-Saunders LSQR from x0 = 0. Stops when the normal-equations residual
// estimate ||M^T r|| / (||M||_F ||r||) drops to tol, or when the residual
// itself is at tol relative to ||c|| + ||M|| ||x|| (consistent systems).
inline LsqReport lsqr_core(const LsqrProblem& P, std::span<const double> c, double tol, std::size_t max_iter) {
  LsqReport rep;
  rep.y.assign(P.cols, 0.0);
  const double bnorm = norm2(c);
  if (bnorm == 0.0) {
    rep.converged = true;
    rep.relative_residual_reduction = 0.0;
    return rep;
  }
  DenseVector u(c.begin(), c.end());
  double beta = bnorm;
  scale(1.0 / beta, u);
  DenseVector v = P.apply_transpose(u);
  double alpha = norm2(v);
  if (alpha == 0.0) {
    // c is orthogonal to range(M): y = 0 is the solution
    rep.converged = true;
    return rep;
  }
  scale(1.0 / alpha, v);
  DenseVector w = v;
  DenseVector& x = rep.y;

  double phibar = beta;
  double rhobar = alpha;
  double anorm = 0.0;
  double rnorm = beta;

  for (std::size_t itn = 1; itn <= max_iter; ++itn) {
    DenseVector Av = P.apply(v);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = Av[i] - alpha * u[i];
    beta = norm2(u);
    if (beta > 0.0) scale(1.0 / beta, u);
    anorm = std::sqrt(anorm * anorm + alpha * alpha + beta * beta);

    DenseVector Atu = P.apply_transpose(u);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = Atu[i] - beta * v[i];
    alpha = norm2(v);
    if (alpha > 0.0) scale(1.0 / alpha, v);

    const double rho = std::hypot(rhobar, beta);
    const double cs = rhobar / rho;
    const double sn = beta / rho;
    const double theta = sn * alpha;
    rhobar = -cs * alpha;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    axpy(phi / rho, w, x);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = v[i] - (theta / rho) * w[i];

    rnorm = phibar;
    const double arnorm = phibar * alpha * std::abs(cs);
    rep.iterations = itn;
    const double xnorm = norm2(x);
    const bool consistent = rnorm <= tol * bnorm + tol * anorm * xnorm;
    const bool normal_eq = rnorm > 0.0 && arnorm <= tol * anorm * rnorm;
    if (consistent || normal_eq || alpha == 0.0) {
      rep.converged = true;
      break;
    }
  }
  rep.relative_residual_reduction = rnorm / bnorm;
  return rep;
}

// Solves R^T x = b (R upper triangular).
inline DenseVector solve_upper_transpose(const DenseMatrix& R, std::span<const double> b) {
  const std::size_t n = R.rows();
  DenseVector x(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t j = 0; j < i; ++j) s -= R(j, i) * x[j];
    x[i] = s / R(i, i);
  }
  return x;
}

inline std::size_t default_max_iter(const LsqConfig& cfg, std::size_t cols) {
  return cfg.max_iter ? cfg.max_iter : std::max<std::size_t>(4 * cols, 1);
}

} // namespace detail

inline LsqReport lsqr(const DenseMatrix& V, std::span<const double> c, const LsqConfig& cfg = {}) {
  if (V.rows() < V.cols()) throw DimensionMismatch("lsqr: needs rows >= cols");
  if (c.size() != V.rows()) throw DimensionMismatch("lsqr: right-hand side length differs");
  detail::LsqrProblem P{V.rows(), V.cols(), [&](std::span<const double> x) { return gemv(V, x); },
                        [&](std::span<const double> u) { return gemv_t(V, u); }};
  return detail::lsqr_core(P, c, cfg.tol, detail::default_max_iter(cfg, V.cols()));
}

// LSQR on V R^{-1} where Phi V = Q R for a fresh SRHT Phi, then y = R^{-1} z.
inline LsqReport sketch_precond_lsqr(const DenseMatrix& V, std::span<const double> c, const LsqConfig& cfg,
                                     std::uint64_t seed, CostCounters* counters = nullptr) {
  if (V.rows() < V.cols()) throw DimensionMismatch("sketch_precond_lsqr: needs rows >= cols");
  if (c.size() != V.rows()) throw DimensionMismatch("sketch_precond_lsqr: right-hand side length differs");
  const std::size_t cols = V.cols();
  std::size_t s = cfg.precond_sketch_rows ? cfg.precond_sketch_rows : 2 * cols;
  s = std::clamp(s, cols, next_pow2(V.rows()));
  const auto phi = build_srht(V.rows(), s, seed);
  const auto R = householder_qr(phi.apply(V, counters)).R;
  detail::check_triangular_diagonal(R);

  detail::LsqrProblem P{
      V.rows(), cols,
      [&](std::span<const double> z) { return gemv(V, solve_upper_triangular(R, z)); },
      [&](std::span<const double> u) { return detail::solve_upper_transpose(R, gemv_t(V, u)); }};
  auto rep = detail::lsqr_core(P, c, cfg.tol, detail::default_max_iter(cfg, cols));
  rep.y = solve_upper_triangular(R, rep.y);
  rep.preconditioner_condition = condition_2norm(R);
  return rep;
}

// argmin_z ||Theta (V z - c)||_2 through a dense QR of Theta V.
inline DenseVector sketch_and_solve(const DenseMatrix& V, std::span<const double> c, const SketchOperator& theta,
                                    CostCounters* counters = nullptr) {
  if (theta.rows() < V.cols() + 1) throw InvalidSketchSize("sketch_and_solve: sketch needs at least cols+1 rows");
  if (c.size() != V.rows()) throw DimensionMismatch("sketch_and_solve: right-hand side length differs");
  const auto qr = householder_qr(theta.apply(V, counters));
  const auto tc = theta.apply(c, counters);
  return solve_upper_triangular(qr.R, gemv_t(qr.Q, tc));
}

} // namespace randkrylov
