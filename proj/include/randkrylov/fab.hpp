#pragma once

// Drivers approximating f(A) b from a Krylov decomposition.

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "randkrylov/dense.hpp"
#include "randkrylov/errors.hpp"
#include "randkrylov/krylov.hpp"
#include "randkrylov/lsq.hpp"
#include "randkrylov/matfun.hpp"
#include "randkrylov/sketch.hpp"
#include "randkrylov/sparse.hpp"

namespace randkrylov {

enum class FabMethod { ArnoldiFom, Alg3, Alg4, Alg5, Alg5Whitened, Sfom };

inline std::string method_name(FabMethod m) {
  switch (m) {
  case FabMethod::ArnoldiFom: return "arnoldi";
  case FabMethod::Alg3: return "alg3";
  case FabMethod::Alg4: return "alg4";
  case FabMethod::Alg5: return "alg5";
  case FabMethod::Alg5Whitened: return "alg5w";
  case FabMethod::Sfom: return "sfom";
  }
  return "unknown";
}

inline FabMethod parse_method(const std::string& s) {
  for (auto m : {FabMethod::ArnoldiFom, FabMethod::Alg3, FabMethod::Alg4, FabMethod::Alg5, FabMethod::Alg5Whitened,
                 FabMethod::Sfom})
    if (method_name(m) == s) return m;
  throw Error("unknown method '" + s + "'");
}

inline bool method_uses_sketch(FabMethod m) {
  return m == FabMethod::Alg3 || m == FabMethod::Alg4 || m == FabMethod::Alg5Whitened || m == FabMethod::Sfom;
}

// Number of sketch rows as a function of the Krylov dimension.
struct SketchRule {
  enum class Kind { TwoM, OnePointZeroFiveM, Fixed };
  Kind kind = Kind::TwoM;
  std::size_t fixed = 0;

  std::size_t rows(std::size_t m) const {
    switch (kind) {
    case Kind::TwoM: return 2 * m;
    case Kind::OnePointZeroFiveM: return std::max<std::size_t>(m + 1, (105 * m) / 100);
    case Kind::Fixed: return fixed;
    }
    return 2 * m;
  }

  static SketchRule parse(const std::string& s) {
    if (s == "2m") return {};
    if (s == "1.05m") return {Kind::OnePointZeroFiveM, 0};
    if (s.rfind("fixed:", 0) == 0) {
      std::size_t pos = 0;
      const std::string num = s.substr(6);
      unsigned long long v = 0;
      try {
        v = std::stoull(num, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == 0 || pos != num.size() || v == 0) throw Error("bad sketch rule '" + s + "'");
      return {Kind::Fixed, static_cast<std::size_t>(v)};
    }
    throw Error("bad sketch rule '" + s + "'");
  }

  std::string str() const {
    switch (kind) {
    case Kind::TwoM: return "2m";
    case Kind::OnePointZeroFiveM: return "1.05m";
    case Kind::Fixed: return "fixed:" + std::to_string(fixed);
    }
    return "2m";
  }
};

struct FabResult {
  DenseVector approx;
  std::size_t m = 0; // dimension actually used (smaller after a breakdown)
  std::optional<std::size_t> whitened_at;
  std::optional<std::size_t> breakdown_at;
  std::vector<double> sketched_condition;
  double cond_sketched_basis = std::numeric_limits<double>::quiet_NaN(); // cond(Theta V_m)
  std::optional<LsqReport> lsq_report;
  CostCounters counters;
};

namespace detail {

inline void copy_meta(const ArnoldiLikeDecomposition& d, FabResult& r) {
  r.m = d.m();
  r.whitened_at = d.whitened_at;
  r.breakdown_at = d.breakdown_at;
  r.sketched_condition = d.sketched_condition;
  if (d.sketched_basis) r.cond_sketched_basis = condition_2norm(d.sketched_basis->leading_cols(d.m()));
}

// gamma V_m f(H_m + h y e_m^T) e_1; y may be empty.
inline DenseVector project_back(const ArnoldiLikeDecomposition& d, const MatrixFunction& f,
                                std::span<const double> y) {
  const std::size_t m = d.m();
  DenseMatrix H = d.square_h();
  if (!y.empty()) {
    const double h = d.subdiagonal();
    for (std::size_t i = 0; i < m; ++i) H(i, m - 1) += h * y[i];
  }
  auto g = eval_matfun(f, H, unit_vector(m, 0));
  scale(d.gamma_b, g);
  DenseVector out(d.V.rows(), 0.0);
  for (std::size_t j = 0; j < m; ++j) axpy(g[j], d.V.col(j), out);
  return out;
}

} // namespace detail

// ||b|| U_m f(K_m) e_1 with an orthonormal Arnoldi basis.
template <LinearOperator Op>
FabResult fom_arnoldi(const Op& A, std::span<const double> b, std::size_t m, const MatrixFunction& f,
                      double breakdown_tol = 1e-14) {
  FabResult r;
  const auto d = arnoldi(A, b, m, &r.counters, breakdown_tol);
  detail::copy_meta(d, r);
  r.approx = detail::project_back(d, f, {});
  return r;
}

// Sketched Gram-Schmidt basis, y = V_m^+ v_{m+1} by LSQR, then
// r_11 V_m f(H_m + h y e_m^T) e_1.
template <LinearOperator Op>
FabResult fab_alg3(const Op& A, std::span<const double> b, std::size_t m, const MatrixFunction& f,
                   const SketchOperator& theta, const LsqConfig& lsq = {}, std::uint64_t lsq_seed = 0,
                   double breakdown_tol = 1e-14) {
  FabResult r;
  const auto d = sketched_gs_basis(A, b, m, theta, &r.counters, breakdown_tol);
  detail::copy_meta(d, r);
  DenseVector y;
  if (d.subdiagonal() != 0.0) {
    const auto V = d.basis();
    const auto c = d.next_vector();
    switch (lsq.mode) {
    case LsqMode::Plain: r.lsq_report = lsqr(V, c, lsq); break;
    case LsqMode::SketchPrecond: r.lsq_report = sketch_precond_lsqr(V, c, lsq, lsq_seed, &r.counters); break;
    case LsqMode::SketchSolve: r.lsq_report = LsqReport{sketch_and_solve(V, c, theta, &r.counters)}; break;
    }
    y = r.lsq_report->y;
  }
  r.approx = detail::project_back(d, f, y);
  return r;
}

// Truncated basis with whitening, y by sketch-preconditioned LSQR with an
// independent sketch, then gamma_b V_m f(H_m + h y e_m^T) e_1.
template <LinearOperator Op>
FabResult fab_alg4(const Op& A, std::span<const double> b, std::size_t m, const MatrixFunction& f, std::size_t k,
                   const SketchOperator& theta, const LsqConfig& lsq = {}, std::uint64_t precond_seed = 0,
                   double whitening_threshold = 1000.0, double breakdown_tol = 1e-14,
                   std::optional<std::size_t> force_whiten_at = std::nullopt) {
  FabResult r;
  const auto d = truncated_basis_with_whitening(A, b, m, k, theta, whitening_threshold, &r.counters, breakdown_tol,
                                                force_whiten_at);
  detail::copy_meta(d, r);
  DenseVector y;
  if (d.subdiagonal() != 0.0) {
    const auto V = d.basis();
    const auto c = d.next_vector();
    if (lsq.mode == LsqMode::SketchSolve)
      r.lsq_report = LsqReport{sketch_and_solve(V, c, theta, &r.counters)};
    else
      r.lsq_report = sketch_precond_lsqr(V, c, lsq, precond_seed, &r.counters);
    y = r.lsq_report->y;
  }
  r.approx = detail::project_back(d, f, y);
  return r;
}

// gamma_b V_m f(H_m) e_1 with no least-squares correction. `theta` enables
// the whitened variant.
template <LinearOperator Op>
FabResult fab_alg5(const Op& A, std::span<const double> b, std::size_t m, const MatrixFunction& f, std::size_t k,
                   const SketchOperator* theta = nullptr, double whitening_threshold = 1000.0,
                   double breakdown_tol = 1e-14, std::optional<std::size_t> force_whiten_at = std::nullopt) {
  FabResult r;
  const auto d = theta ? truncated_basis_with_whitening(A, b, m, k, *theta, whitening_threshold, &r.counters,
                                                        breakdown_tol, force_whiten_at)
                       : truncated_basis(A, b, m, k, &r.counters, breakdown_tol);
  detail::copy_meta(d, r);
  r.approx = detail::project_back(d, f, {});
  return r;
}

// Sketched FOM: V_m R^{-1} f(S^T Theta A V_m R^{-1}) S^T Theta b with
// Theta V_m = S R, and Theta A V_m taken from (Theta V_{m+1}) H.
template <LinearOperator Op>
FabResult fab_sfom(const Op& A, std::span<const double> b, std::size_t m, const MatrixFunction& f, std::size_t k,
                   const SketchOperator& theta, double breakdown_tol = 1e-14) {
  FabResult r;
  const auto d = truncated_basis_sketched(A, b, m, k, theta, &r.counters, breakdown_tol);
  detail::copy_meta(d, r);
  const std::size_t mm = d.m();
  const DenseMatrix& SV = *d.sketched_basis;
  const auto theta_av = matmul(SV, d.H_under);
  const auto qr = householder_qr(SV.leading_cols(mm));
  const auto M = solve_upper_triangular_right(matmul_tn(qr.Q, theta_av), qr.R);
  DenseVector theta_b(SV.col(0).begin(), SV.col(0).end());
  scale(d.gamma_b, theta_b);
  const auto g = eval_matfun(f, M, gemv_t(qr.Q, theta_b));
  const auto z = solve_upper_triangular(qr.R, g);
  r.approx.assign(d.V.rows(), 0.0);
  for (std::size_t j = 0; j < mm; ++j) axpy(z[j], d.V.col(j), r.approx);
  return r;
}

// Everything a driver needs besides the operator, vector and function.
struct DriverConfig {
  FabMethod method = FabMethod::ArnoldiFom;
  std::size_t m = 10;
  std::size_t k = 2;
  SketchRule sketch_rule;
  double whitening_threshold = 1000.0;
  LsqConfig lsq;
  std::uint64_t seed = 0;
  double breakdown_tol = 1e-14;
  std::optional<std::size_t> force_whiten_at;
};

// Sub-stream ids for the seeds derived from DriverConfig::seed.
inline constexpr std::uint64_t basis_sketch_stream = 1;
inline constexpr std::uint64_t precond_sketch_stream = 2;

template <LinearOperator Op>
FabResult run_driver(const Op& A, std::span<const double> b, const MatrixFunction& f, const DriverConfig& cfg) {
  std::optional<SketchOperator> theta;
  if (method_uses_sketch(cfg.method)) {
    const std::size_t s = std::min(cfg.sketch_rule.rows(cfg.m), next_pow2(A.dim()));
    theta.emplace(build_srht(A.dim(), s, Rng::derive(cfg.seed, basis_sketch_stream)));
  }
  const std::uint64_t pseed = Rng::derive(cfg.seed, precond_sketch_stream);
  switch (cfg.method) {
  case FabMethod::ArnoldiFom: return fom_arnoldi(A, b, cfg.m, f, cfg.breakdown_tol);
  case FabMethod::Alg3: return fab_alg3(A, b, cfg.m, f, *theta, cfg.lsq, pseed, cfg.breakdown_tol);
  case FabMethod::Alg4:
    return fab_alg4(A, b, cfg.m, f, cfg.k, *theta, cfg.lsq, pseed, cfg.whitening_threshold, cfg.breakdown_tol,
                    cfg.force_whiten_at);
  case FabMethod::Alg5: return fab_alg5(A, b, cfg.m, f, cfg.k, nullptr, cfg.whitening_threshold, cfg.breakdown_tol);
  case FabMethod::Alg5Whitened:
    return fab_alg5(A, b, cfg.m, f, cfg.k, &*theta, cfg.whitening_threshold, cfg.breakdown_tol,
                    cfg.force_whiten_at);
  case FabMethod::Sfom: return fab_sfom(A, b, cfg.m, f, cfg.k, *theta, cfg.breakdown_tol);
  }
  throw Error("unknown method");
}

// sign(A) b = (A^2)^{-1/2} (A b): the driver runs on x -> A(Ax) with
// starting vector Ab.
template <LinearOperator Op>
FabResult fab_sign(const Op& A, std::span<const double> b, const DriverConfig& cfg) {
  DenseVector c(A.dim());
  A.apply(b, c);
  SquaredOperator<Op> A2(A);
  auto r = run_driver(A2, c, MatrixFunction::inv_sqrt(), cfg);
  r.counters.matvecs.add(matvec_cost(A));
  return r;
}

} // namespace randkrylov
