#include <gtest/gtest.h>

#include "randkrylov/lsq.hpp"
#include "test_support.hpp"

using namespace randkrylov;
using rk_test::matrix_with_condition;
using rk_test::random_orthonormal;
using rk_test::random_vector;

namespace {

DenseVector qr_oracle(const DenseMatrix& V, const DenseVector& c) {
  const Eigen::VectorXd y = rk_test::to_eigen(V).colPivHouseholderQr().solve(rk_test::to_eigen(c));
  return rk_test::from_eigen_vec(y);
}

// c = V z* plus a component orthogonal to range(V) of relative size `noise`.
DenseVector rhs_near_range(const DenseMatrix& V, const DenseVector& zstar, double noise, std::uint64_t seed) {
  auto c = gemv(V, zstar);
  auto r = random_vector(V.rows(), seed);
  const auto Q = householder_qr(V).Q;
  const auto proj = gemv(Q, gemv_t(Q, r));
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= proj[i];
  axpy(noise * norm2(c) / norm2(r), r, c);
  return c;
}

double normal_eq_residual(const DenseMatrix& V, std::span<const double> y, std::span<const double> c) {
  auto r = gemv(V, y);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= c[i];
  return norm2(gemv_t(V, r));
}

} // namespace

TEST(Lsqr, IdentityInTwoIterations) {
  const auto c = random_vector(8, 1);
  const auto rep = lsqr(DenseMatrix::identity(8), c);
  EXPECT_LE(rep.iterations, 2u);
  EXPECT_LE(relative_error(rep.y, c), 1e-14);
  EXPECT_TRUE(rep.converged);
}

TEST(Lsqr, OrthonormalGivesProjection) {
  const auto Q = random_orthonormal(100, 10, 2);
  const auto c = random_vector(100, 3);
  const auto rep = lsqr(Q, c);
  EXPECT_LE(relative_error(rep.y, gemv_t(Q, c)), 1e-6);
}

TEST(Lsqr, ModeratelyConditionedMatchesQr) {
  const auto V = matrix_with_condition(500, 20, 5.0, 4);
  const auto c = random_vector(500, 5);
  const auto oracle = qr_oracle(V, c);
  // the stopping rule bounds the normal-equations residual, not the forward
  // error, which for a random c is about 30x the tolerance
  const auto rep = lsqr(V, c);
  EXPECT_LE(relative_error(rep.y, oracle), 1e-4);
  EXPECT_LE(rep.iterations, 25u);
  LsqConfig tight;
  tight.tol = 1e-7;
  const auto rep2 = lsqr(V, c, tight);
  EXPECT_LE(relative_error(rep2.y, oracle), 1e-5);
  EXPECT_LE(rep2.iterations, 25u);
}

TEST(Lsqr, ResidualNonincreasing) {
  const auto V = matrix_with_condition(300, 15, 1e3, 6);
  const auto c = random_vector(300, 7);
  double prev = norm2(c);
  for (std::size_t k = 1; k <= 30; ++k) {
    LsqConfig cfg;
    cfg.tol = 1e-300;
    cfg.max_iter = k;
    const auto y = lsqr(V, c, cfg).y;
    auto r = gemv(V, y);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= c[i];
    const double rn = norm2(r);
    EXPECT_LE(rn, prev * (1 + 1e-12)) << "iteration " << k;
    prev = rn;
  }
}

TEST(Lsqr, ZeroRhsGivesZero) {
  const auto rep = lsqr(random_orthonormal(10, 3, 8), DenseVector(10, 0.0));
  EXPECT_EQ(rep.y, DenseVector(3, 0.0));
}

TEST(Lsqr, RejectsWideMatrix) { EXPECT_THROW(lsqr(DenseMatrix(2, 3), DenseVector(2)), DimensionMismatch); }

TEST(SketchPrecond, OrthonormalMatchesPlain) {
  const auto Q = random_orthonormal(400, 12, 9);
  const auto c = random_vector(400, 10);
  LsqConfig cfg;
  cfg.tol = 1e-12;
  const auto a = lsqr(Q, c, cfg);
  const auto b = sketch_precond_lsqr(Q, c, cfg, 11);
  EXPECT_LE(relative_error(b.y, a.y), 1e-8);
  ASSERT_TRUE(b.preconditioner_condition.has_value());
  EXPECT_LE(*b.preconditioner_condition, 10.0);
}

TEST(SketchPrecond, TwoScaleColumnsConverge) {
  // V = Q diag(1, 1e-6)
  auto V = random_orthonormal(500, 2, 12);
  scale(1e-6, V.col(1));
  const DenseVector zstar = {0.7, -1.3};
  const auto c = rhs_near_range(V, zstar, 1e-3, 13);
  LsqConfig cfg;
  cfg.tol = 1e-14;
  cfg.max_iter = 60;
  const auto oracle = qr_oracle(V, c);
  const auto pre = sketch_precond_lsqr(V, c, cfg, 14);
  EXPECT_LE(relative_error(pre.y, oracle), 1e-6);
  EXPECT_LE(pre.iterations, 60u);
}

TEST(SketchPrecond, IllConditionedBeatsPlain) {
  const auto V = matrix_with_condition(500, 20, 1e6, 15);
  const auto zstar = random_vector(20, 16);
  const auto c = rhs_near_range(V, zstar, 1e-3, 17);
  const auto oracle = qr_oracle(V, c);
  LsqConfig cfg;
  cfg.tol = 1e-14;
  cfg.max_iter = 60;
  const auto pre = sketch_precond_lsqr(V, c, cfg, 18);
  const auto plain = lsqr(V, c, cfg);
  const double e_pre = relative_error(pre.y, oracle);
  const double e_plain = relative_error(plain.y, oracle);
  EXPECT_LE(e_pre, 1e-6);
  EXPECT_GE(e_plain, 10.0 * e_pre);
}

TEST(SketchPrecond, ConsistentSystemRecoversCoefficients) {
  const auto V = matrix_with_condition(300, 10, 1e4, 19);
  const auto zstar = random_vector(10, 20);
  const auto c = gemv(V, zstar);
  LsqConfig cfg;
  cfg.tol = 1e-14;
  const auto rep = sketch_precond_lsqr(V, c, cfg, 21);
  EXPECT_LE(relative_error(rep.y, zstar), 1e-8);
  EXPECT_LE(rep.relative_residual_reduction, 1e-10);
}

TEST(SketchPrecond, SatisfiesPlainNormalEquations) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto V = matrix_with_condition(200, 8, 1e3, 100 + seed);
    const auto c = random_vector(200, 200 + seed);
    LsqConfig cfg;
    cfg.tol = 1e-12;
    const auto rep = sketch_precond_lsqr(V, c, cfg, 300 + seed);
    EXPECT_LE(normal_eq_residual(V, rep.y, c), 1e-8 * frobenius_norm(V) * norm2(c));
  }
}

TEST(SketchPrecond, RankDeficientThrows) {
  auto V = random_orthonormal(100, 4, 22);
  std::copy(V.col(0).begin(), V.col(0).end(), V.col(3).begin());
  EXPECT_THROW(sketch_precond_lsqr(V, random_vector(100, 23), {}, 24), SingularTriangular);
}

TEST(SketchAndSolve, OrthogonalSketchIsExact) {
  const auto V = matrix_with_condition(512, 10, 10.0, 25);
  const auto c = random_vector(512, 26);
  const auto theta = build_srht(512, 512, 27);
  EXPECT_LE(relative_error(sketch_and_solve(V, c, theta), qr_oracle(V, c)), 1e-12);
}

TEST(SketchAndSolve, OrthogonalComplementGivesZero) {
  const auto V = random_orthonormal(256, 5, 28);
  auto r = random_vector(256, 30);
  const auto proj = gemv(V, gemv_t(V, r));
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= proj[i];
  const auto theta = build_srht(256, 256, 31);
  EXPECT_LE(norm2(sketch_and_solve(V, r, theta)), 1e-12 * norm2(r));
}

TEST(SketchAndSolve, CoarseButBounded) {
  const auto V = rk_test::random_matrix(2048, 20, 32);
  const auto c = rhs_near_range(V, random_vector(20, 33), 0.1, 36);
  const auto theta = build_srht(2048, 80, 34);
  EXPECT_LE(relative_error(sketch_and_solve(V, c, theta), qr_oracle(V, c)), 0.5);
  EXPECT_THROW(sketch_and_solve(V, c, build_srht(2048, 20, 35)), InvalidSketchSize);
}
