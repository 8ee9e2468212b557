#pragma once

// Subsampled randomized Hadamard transform (SRHT) and the seeded RNG that
// drives every random choice in the library.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "randkrylov/dense.hpp"
#include "randkrylov/errors.hpp"
#include "randkrylov/sparse.hpp"

namespace randkrylov {

// xoshiro256** seeded through splitmix64. Fixed algorithm, so seeded runs are
// reproducible across platforms and standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Derives an independent seed for a named sub-stream.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed ^ (0xd1b54a32d192ed03ULL * (stream + 1));
    return splitmix64(x);
  }

  std::uint64_t next() {
    const std::uint64_t result = std::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = std::rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, bound) without modulo bias.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = bound ? (~std::uint64_t{0} - bound + 1) % bound : 0;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= limit) return r % bound;
    }
  }

  // Box-Muller; the spare value is discarded to keep the stream simple.
  double normal() {
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool coin() { return (next() >> 63) != 0; }

private:
  std::uint64_t state_[4]{};
};

inline DenseVector random_normal_vector(std::size_t n, Rng& rng) {
  DenseVector v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

inline DenseMatrix random_normal_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  DenseMatrix M(rows, cols);
  for (auto& x : M.values()) x = rng.normal();
  return M;
}

inline std::size_t next_pow2(std::size_t n) { return n <= 1 ? 1 : std::bit_ceil(n); }

// In-place unnormalized fast Walsh-Hadamard transform; x.size() is a power of two.
inline void fwht(std::span<double> x) {
  const std::size_t n = x.size();
  for (std::size_t h = 1; h < n; h <<= 1) {
    for (std::size_t i = 0; i < n; i += 2 * h) {
      for (std::size_t j = i; j < i + h; ++j) {
        const double a = x[j];
        const double b = x[j + h];
        x[j] = a + b;
        x[j + h] = a - b;
      }
    }
  }
}

// Theta = sqrt(n_padded / s) * P * (H / sqrt(n_padded)) * D on zero-padded
// input, with H the +-1 Walsh-Hadamard matrix, D the random sign diagonal
// and P the row selector. Immutable once built.
class SketchOperator {
public:
  SketchOperator(std::size_t n_input, std::vector<std::size_t> selected_rows, std::vector<double> signs,
                 std::uint64_t seed = 0)
      : n_input_{n_input},
        n_padded_{next_pow2(n_input)},
        selected_rows_{std::move(selected_rows)},
        signs_{std::move(signs)},
        seed_{seed} {
    if (n_input_ == 0) throw InvalidSketchSize("sketch input dimension must be positive");
    if (selected_rows_.empty() || selected_rows_.size() > n_padded_)
      throw InvalidSketchSize("sketch rows must lie in [1, " + std::to_string(n_padded_) + "]");
    if (signs_.size() != n_padded_) throw InvalidSketchSize("sign diagonal must have n_padded entries");
    for (double s : signs_)
      if (s != 1.0 && s != -1.0) throw InvalidSketchSize("sign entries must be +-1");
    auto sorted = selected_rows_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() || sorted.back() >= n_padded_)
      throw InvalidSketchSize("selected rows must be distinct indices below n_padded");
    scale_ = 1.0 / std::sqrt(static_cast<double>(selected_rows_.size()));
    log2_padded_ = static_cast<std::uint64_t>(std::countr_zero(n_padded_));
  }

  std::size_t n_input() const noexcept { return n_input_; }
  std::size_t n_padded() const noexcept { return n_padded_; }
  std::size_t rows() const noexcept { return selected_rows_.size(); }
  std::uint64_t seed() const noexcept { return seed_; }
  double scale() const noexcept { return scale_; }
  std::span<const std::size_t> selected_rows() const noexcept { return selected_rows_; }
  std::span<const double> signs() const noexcept { return signs_; }

  // Flops charged to the sketch counter for one application.
  std::uint64_t apply_cost() const noexcept { return n_padded_ * std::max<std::uint64_t>(log2_padded_, 1); }

  DenseVector apply(std::span<const double> x, CostCounters* counters = nullptr) const {
    if (x.size() != n_input_) throw DimensionMismatch("apply_sketch: vector length differs from n");
    DenseVector work(n_padded_, 0.0);
    for (std::size_t i = 0; i < n_input_; ++i) work[i] = signs_[i] * x[i];
    fwht(work);
    DenseVector out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = scale_ * work[selected_rows_[r]];
    if (counters) counters->sketch_flops += apply_cost();
    return out;
  }

  DenseMatrix apply(const DenseMatrix& X, CostCounters* counters = nullptr) const {
    DenseMatrix out(rows(), X.cols());
    for (std::size_t j = 0; j < X.cols(); ++j) {
      const auto c = apply(X.col(j), counters);
      std::copy(c.begin(), c.end(), out.col(j).begin());
    }
    return out;
  }

private:
  std::size_t n_input_;
  std::size_t n_padded_;
  std::vector<std::size_t> selected_rows_;
  std::vector<double> signs_;
  std::uint64_t seed_;
  double scale_ = 1.0;
  std::uint64_t log2_padded_ = 0;
};

// Rows are drawn uniformly without replacement (partial Fisher-Yates).
inline SketchOperator build_srht(std::size_t n, std::size_t s, std::uint64_t seed) {
  const std::size_t np = next_pow2(n);
  if (n == 0 || s < 1 || s > np)
    throw InvalidSketchSize("sketch size " + std::to_string(s) + " outside [1, " + std::to_string(np) + "]");
  Rng rng(seed);
  std::vector<double> signs(np);
  for (auto& v : signs) v = rng.coin() ? 1.0 : -1.0;
  std::vector<std::size_t> idx(np);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t k = 0; k < s; ++k) {
    const std::size_t pick = k + static_cast<std::size_t>(rng.below(np - k));
    std::swap(idx[k], idx[pick]);
  }
  idx.resize(s);
  std::sort(idx.begin(), idx.end());
  return SketchOperator(n, std::move(idx), std::move(signs), seed);
}

inline DenseVector apply_sketch(const SketchOperator& theta, std::span<const double> x,
                                CostCounters* counters = nullptr) {
  return theta.apply(x, counters);
}

} // namespace randkrylov
