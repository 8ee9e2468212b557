#pragma once

// Shared generators and independent oracles for the test suites. Eigen is
// used here only as a reference implementation to check against.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

#include "randkrylov/dense.hpp"
#include "randkrylov/sketch.hpp"
#include "randkrylov/sparse.hpp"

namespace rk_test {

using randkrylov::DenseMatrix;
using randkrylov::DenseVector;
using randkrylov::Rng;
using randkrylov::SparseMatrix;

inline Eigen::MatrixXd to_eigen(const DenseMatrix& M) {
  Eigen::MatrixXd E(M.rows(), M.cols());
  for (std::size_t j = 0; j < M.cols(); ++j)
    for (std::size_t i = 0; i < M.rows(); ++i) E(i, j) = M(i, j);
  return E;
}

inline DenseMatrix from_eigen(const Eigen::MatrixXd& E) {
  DenseMatrix M(E.rows(), E.cols());
  for (Eigen::Index j = 0; j < E.cols(); ++j)
    for (Eigen::Index i = 0; i < E.rows(); ++i) M(i, j) = E(i, j);
  return M;
}

inline Eigen::VectorXd to_eigen(const DenseVector& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline DenseVector from_eigen_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  return randkrylov::random_normal_matrix(rows, cols, rng);
}

inline DenseVector random_vector(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return randkrylov::random_normal_vector(n, rng);
}

inline DenseMatrix random_orthonormal(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  return randkrylov::householder_qr(random_matrix(rows, cols, seed)).Q;
}

// U diag(sigma) W^T with log-spaced singular values from 1 down to 1/cond.
inline DenseMatrix matrix_with_condition(std::size_t rows, std::size_t cols, double cond, std::uint64_t seed) {
  const auto U = random_orthonormal(rows, cols, seed);
  const auto W = random_orthonormal(cols, cols, seed + 7777);
  DenseMatrix S(cols, cols);
  for (std::size_t k = 0; k < cols; ++k) {
    const double t = cols > 1 ? static_cast<double>(k) / static_cast<double>(cols - 1) : 0.0;
    S(k, k) = std::pow(cond, -t);
  }
  return randkrylov::matmul(randkrylov::matmul(U, S), W.transpose());
}

inline double orthogonality_error(const DenseMatrix& Q) {
  auto G = randkrylov::matmul_tn(Q, Q);
  G -= DenseMatrix::identity(Q.cols());
  return randkrylov::frobenius_norm(G);
}

// Random sparse matrix with roughly density*n*n normal entries plus a
// unit diagonal shift so it is not trivially singular.
inline SparseMatrix random_sparse(std::size_t n, double density, std::uint64_t seed, double diag_shift = 0.0) {
  Rng rng(seed);
  std::vector<randkrylov::Triplet> t;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      if (rng.uniform() < density) t.push_back({i, j, rng.normal()});
    if (diag_shift != 0.0) t.push_back({i, i, diag_shift});
  }
  return SparseMatrix::from_triplets(n, std::move(t));
}

// Symmetric positive definite sparse matrix: B + B^T plus a diagonal shift.
inline SparseMatrix random_spd_sparse(std::size_t n, double density, std::uint64_t seed) {
  const auto B = random_sparse(n, density / 2, seed);
  auto t = B.triplets();
  for (const auto& e : B.triplets()) t.push_back({e.col, e.row, e.value});
  const auto S = SparseMatrix::from_triplets(n, t);
  // Gershgorin shift
  double shift = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = S.row_ptr()[i]; k < S.row_ptr()[i + 1]; ++k) s += std::abs(S.values()[k]);
    shift = std::max(shift, s);
  }
  for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, shift + 1.0});
  return SparseMatrix::from_triplets(n, std::move(t));
}

// A^d b by repeated sparse products, the direct oracle for polynomial
// exactness.
inline DenseVector sparse_power_times(const SparseMatrix& A, std::size_t degree, DenseVector b) {
  for (std::size_t k = 0; k < degree; ++k) b = randkrylov::matvec(A, b);
  return b;
}

// exp(H) via a scaled Taylor series with a fixed 200-term budget.
inline DenseMatrix taylor_expm(const DenseMatrix& H) {
  const double nrm = randkrylov::norm1(H);
  int s = 0;
  while (std::ldexp(nrm, -s) > 0.5) ++s;
  DenseMatrix A = std::ldexp(1.0, -s) * H;
  const std::size_t n = H.rows();
  DenseMatrix term = DenseMatrix::identity(n);
  DenseMatrix sum = term;
  for (int k = 1; k <= 200; ++k) {
    term = (1.0 / k) * randkrylov::matmul(term, A);
    sum += term;
  }
  for (int k = 0; k < s; ++k) sum = randkrylov::matmul(sum, sum);
  return sum;
}

inline double rel_fro(const DenseMatrix& A, const DenseMatrix& B) {
  return randkrylov::frobenius_norm(A - B) / std::max(randkrylov::frobenius_norm(B), 1e-300);
}

} // namespace rk_test
