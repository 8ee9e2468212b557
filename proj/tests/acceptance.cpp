// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero
// when a criterion fails that is not in the known-unattainable set, or when
// a criterion throws.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "randkrylov/randkrylov.hpp"
#include "test_support.hpp"

using namespace randkrylov;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// exp(A) b by a scaled Taylor series on sparse matvecs: s steps of
// exp(A/s) with ||A/s||_1 <= 1/4, each series run to rounding level.
DenseVector taylor_expmv(const SparseMatrix& A, DenseVector v) {
  const auto s = static_cast<std::size_t>(std::ceil(4.0 * A.norm1()));
  const double inv_s = 1.0 / static_cast<double>(std::max<std::size_t>(s, 1));
  for (std::size_t step = 0; step < std::max<std::size_t>(s, 1); ++step) {
    DenseVector sum = v, term = v;
    for (int k = 1; k < 60; ++k) {
      term = matvec(A, term);
      scale(inv_s / k, term);
      axpy(1.0, term, sum);
      if (norm2(term) <= 1e-18 * norm2(sum)) break;
    }
    v = std::move(sum);
  }
  return v;
}

// ------------------------------------------------------------------------

Outcome polynomial_exactness() {
  const auto t0 = std::chrono::steady_clock::now();
  const FabMethod drivers[] = {FabMethod::ArnoldiFom, FabMethod::Alg3, FabMethod::Alg4, FabMethod::Alg5,
                               FabMethod::Sfom};
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto A = rk_test::random_sparse(300, 0.02, 1000 + seed, 1.0);
    const auto b = rk_test::random_vector(300, 2000 + seed);
    for (std::size_t d : {1u, 2u, 3u, 5u}) {
      const auto oracle = rk_test::sparse_power_times(A, d, b);
      for (auto meth : drivers) {
        DriverConfig c;
        c.method = meth;
        c.m = d + 1;
        c.seed = seed;
        worst = std::max(worst, relative_error(run_driver(A, b, MatrixFunction::monomial(d), c).approx, oracle));
      }
    }
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-9 && t < 10.0, "max rel error " + fmt("%.2e", worst) + " over 400 runs, " + fmt("%.2f", t) + " s"};
}

Outcome basis_independence() {
  const auto S = rk_test::random_spd_sparse(300, 0.03, 3000);
  const auto A = S.scaled(-4.0 / S.norm1());
  const auto b = rk_test::random_vector(300, 3001);
  const auto ref = fom_arnoldi(A, b, 15, MatrixFunction::exp());
  DriverConfig c;
  c.method = FabMethod::Alg3;
  c.m = 15;
  c.seed = 3002;
  c.lsq.tol = 1e-14;
  const double e = relative_error(run_driver(A, b, MatrixFunction::exp(), c).approx, ref.approx);
  return {e <= 1e-8, "alg3 vs arnoldi " + fmt("%.2e", e)};
}

Outcome comparable_accuracy() {
  const auto t0 = std::chrono::steady_clock::now();
  BenchConfig cfg;
  cfg.problem.name = "convdiff";
  cfg.problem.mesh = 100;
  cfg.problem.pe = 200;
  cfg.problem.scale = -1e-5;
  cfg.problem.b_rule = BRule::SinPiXSinPiY;
  cfg.f = "exp";
  cfg.methods = {FabMethod::ArnoldiFom, FabMethod::Alg3, FabMethod::Alg4};
  cfg.m_grid = parse_m_grid("10:120:10");
  cfg.seed = 2024;
  const auto p = build_problem(cfg.problem, cfg.seed);
  // n = 10^4 is at the dense guard; an independent Taylor oracle is used
  const auto ref = taylor_expmv(p.A, p.b);
  const auto arn_ref = long_arnoldi_reference(p.A, p.b, "exp", ReferenceRule::parse("long_arnoldi:200"));
  const double ref_gap = relative_error(arn_ref, ref);
  const auto recs = run_sweep(cfg, p.A, p.b, ref);
  const auto arn = error_curve(recs, "arnoldi");
  const auto a3 = error_curve(recs, "alg3");
  const auto a4 = error_curve(recs, "alg4");
  bool within = true;
  double worst_ratio = 0.0;
  for (std::size_t i = 0; i < arn.size(); ++i) {
    if (!std::isfinite(arn[i]) || !std::isfinite(a3[i]) || !std::isfinite(a4[i])) continue;
    for (double e : {a3[i], a4[i]}) {
      const double ratio = std::max(e / arn[i], arn[i] / e);
      worst_ratio = std::max(worst_ratio, ratio);
      if (ratio > 10.0) within = false;
    }
  }
  const bool reached = arn.back() <= 1e-8 && a3.back() <= 1e-8 && a4.back() <= 1e-8;
  const double t = seconds_since(t0);
  return {within && reached && t < 180.0,
          "worst error ratio " + fmt("%.2f", worst_ratio) + ", final errors arnoldi " + fmt("%.1e", arn.back()) +
              " alg3 " + fmt("%.1e", a3.back()) + " alg4 " + fmt("%.1e", a4.back()) + ", Taylor vs Arnoldi(200) " +
              fmt("%.1e", ref_gap) + ", " + fmt("%.0f", t) + " s"};
}

Outcome whitening_rescue() {
  BenchConfig cfg;
  cfg.problem.name = "digraph";
  cfg.problem.n = 1000;
  cfg.problem.max_out_degree = 10;
  cfg.problem.degree_exponent = 4.0;
  cfg.problem.ground_nodes = 20;
  cfg.f = "sqrt";
  cfg.methods = {FabMethod::Alg5, FabMethod::Alg5Whitened, FabMethod::Alg4};
  cfg.m_grid = parse_m_grid("10:80:1");
  cfg.seed = 3;
  DigraphOptions o;
  o.n = 1000;
  o.max_out_degree = 10;
  o.degree_exponent = 4.0;
  o.ground_nodes = 20;
  o.seed = 1;
  const auto A = gen_digraph_laplacian(o);
  const auto b = gen_b_random_unit(1000, 7);
  const auto ref = compute_reference(A, b, "sqrt", {});
  // independent dense check of the reference
  const Eigen::MatrixXd Ad = rk_test::to_eigen(A.to_dense());
  const Eigen::VectorXd eig_ref = Ad.sqrt() * rk_test::to_eigen(b);
  const double ref_gap = relative_error(ref, rk_test::from_eigen_vec(eig_ref));
  const auto recs = run_sweep(cfg, A, b, ref);
  const auto a5 = error_curve(recs, "alg5");
  const auto a5w = error_curve(recs, "alg5w");
  const auto a4 = error_curve(recs, "alg4");
  const auto onset = stagnation_onset(a5);
  std::size_t failed = 0;
  for (const auto& r : recs)
    if (r.method == "alg5" && !r.ok()) ++failed;
  const double best5w = *std::min_element(a5w.begin(), a5w.end());
  const double best4 = *std::min_element(a4.begin(), a4.end());
  const double best5 = *std::min_element(a5.begin(), a5.end());
  const bool pass = onset.has_value() && best5w < 1e-6 && best4 < 1e-6 && ref_gap < 1e-10;
  return {pass, std::string("alg5 ") + (onset ? "stagnates from m = " + std::to_string(cfg.m_grid[*onset]) : "does not stagnate") +
                    " (best " + fmt("%.1e", best5) + ", " + std::to_string(failed) + "/" + std::to_string(a5.size()) +
                    " cells failed), best alg5w " + fmt("%.1e", best5w) + ", best alg4 " + fmt("%.1e", best4) +
                    ", reference vs Eigen " + fmt("%.1e", ref_gap)};
}

Outcome cost_asymptotics() {
  const std::size_t n = 4096, k = 2;
  const auto A = rk_test::random_sparse(n, 0.002, 5000, 1.0);
  const auto b = rk_test::random_vector(n, 5001);
  CostCounters a50, a100, t50, t100;
  arnoldi(A, b, 50, &a50);
  arnoldi(A, b, 100, &a100);
  truncated_basis(A, b, 50, k, &t50);
  truncated_basis(A, b, 100, k, &t100);
  const double ra = double(a100.basis_flops) / double(a50.basis_flops);
  const double rt = double(t100.basis_flops) / double(t50.basis_flops);
  const bool bound = t50.basis_flops <= (k + 2) * n * 50 && t100.basis_flops <= (k + 2) * n * 100;
  return {ra >= 3.5 && ra <= 4.5 && rt >= 1.8 && rt <= 2.2 && bound,
          "arnoldi ratio " + fmt("%.3f", ra) + ", truncated ratio " + fmt("%.3f", rt) + ", truncated flops/(4nm) " +
              fmt("%.3f", double(t100.basis_flops) / double((k + 2) * n * 100))};
}

Outcome sketch_embedding() {
  const std::size_t n = 4096, m = 50;
  int srht_good = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto Q = rk_test::random_orthonormal(n, m, 6000 + seed);
    if (condition_2norm(build_srht(n, 2 * m, 7000 + seed).apply(Q)) <= 3.0) ++srht_good;
  }
  const std::size_t n2 = 2048, m2 = 40;
  const auto A = rk_test::random_sparse(n2, 0.003, 8000, 0.0);
  int gs_good = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto theta = build_srht(n2, 2 * m2, 9000 + seed);
    const auto d = sketched_gs_basis(A, rk_test::random_vector(n2, 10'000 + seed), m2, theta);
    if (condition_2norm(d.basis()) <= 10.0) ++gs_good;
  }
  return {srht_good >= 95 && gs_good >= 95, "cond(Theta Q) <= 3 in " + std::to_string(srht_good) +
                                                "/100 seeds, sketched-GS cond(V_m) <= 10 in " +
                                                std::to_string(gs_good) + "/100 seeds"};
}

Outcome preconditioned_lsq() {
  const auto V = rk_test::matrix_with_condition(500, 20, 1e6, 11'000);
  const auto zstar = rk_test::random_vector(20, 11'001);
  // c = V z* plus a residual orthogonal to range(V) of relative size 1e-3
  auto c = gemv(V, zstar);
  auto r = rk_test::random_vector(500, 11'002);
  const auto Q = householder_qr(V).Q;
  const auto proj = gemv(Q, gemv_t(Q, r));
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= proj[i];
  axpy(1e-3 * norm2(c) / norm2(r), r, c);
  const Eigen::VectorXd y = rk_test::to_eigen(V).colPivHouseholderQr().solve(rk_test::to_eigen(c));
  const auto oracle = rk_test::from_eigen_vec(y);
  LsqConfig cfg;
  cfg.tol = 1e-14;
  cfg.max_iter = 60;
  const auto pre = sketch_precond_lsqr(V, c, cfg, 11'003);
  const auto plain = lsqr(V, c, cfg);
  const double ep = relative_error(pre.y, oracle), eq = relative_error(plain.y, oracle);
  return {ep <= 1e-6 && pre.iterations <= 60 && eq >= 10 * ep,
          "precond error " + fmt("%.1e", ep) + " in " + std::to_string(pre.iterations) + " its, plain error " +
              fmt("%.1e", eq) + " in " + std::to_string(plain.iterations) + " its"};
}

Outcome dense_kernels() {
  double worst_exp_pair = 0, worst_sqrt_res = 0, worst_comm = 0, worst_schur = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t n = 2 + seed % 30;
    auto H = rk_test::random_matrix(n, n, 12'000 + seed);
    H *= 3.0 / frobenius_norm(H);
    const auto E = expm(H);
    worst_exp_pair = std::max(worst_exp_pair, frobenius_norm(matmul(E, expm(-1.0 * H)) - DenseMatrix::identity(n)));
    worst_comm = std::max(worst_comm, frobenius_norm(matmul(E, H) - matmul(H, E)) /
                                          (frobenius_norm(E) * frobenius_norm(H)));
    auto P = rk_test::random_matrix(n, n, 13'000 + seed);
    P *= 1.0 / std::sqrt(double(n));
    for (std::size_t i = 0; i < n; ++i) P(i, i) += 3.0;
    const auto X = sqrtm(P);
    worst_sqrt_res = std::max(worst_sqrt_res, rk_test::rel_fro(matmul(X, X), P));
    worst_comm = std::max(worst_comm, frobenius_norm(matmul(X, P) - matmul(P, X)) /
                                          (frobenius_norm(X) * frobenius_norm(P)));
    const auto G = rk_test::random_matrix(n, n, 14'000 + seed);
    const auto s = real_schur(G);
    worst_schur = std::max(worst_schur, rk_test::rel_fro(matmul(matmul(s.Q, s.T), s.Q.transpose()), G));
  }
  const bool pass = worst_exp_pair <= 1e-10 && worst_sqrt_res <= 1e-9 && worst_comm <= 1e-12 && worst_schur <= 1e-12;
  return {pass, "expm pair " + fmt("%.1e", worst_exp_pair) + ", sqrtm residual " + fmt("%.1e", worst_sqrt_res) +
                    ", commutation " + fmt("%.1e", worst_comm) + ", Schur " + fmt("%.1e", worst_schur)};
}

Outcome sign_function() {
  const std::size_t n = 500;
  Rng rng(15'000);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Identity(n, n) +
                            0.3 / std::sqrt(double(n)) * rk_test::to_eigen(rk_test::random_matrix(n, n, 15'001));
  Eigen::VectorXd lam(n), sgn(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double mag = 1.0 + 3.0 * rng.uniform();
    lam[i] = i % 2 ? -mag : mag;
    sgn[i] = i % 2 ? -1.0 : 1.0;
  }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(X);
  const auto A = SparseMatrix::from_dense(rk_test::from_eigen(X * lam.asDiagonal() * lu.inverse()));
  const auto b = rk_test::random_vector(n, 15'002);
  const auto oracle = rk_test::from_eigen_vec(X * sgn.asDiagonal() * lu.solve(rk_test::to_eigen(b)));
  std::optional<std::size_t> hit;
  bool counts_ok = true;
  double best = 1.0;
  for (std::size_t m = 10; m <= 150 && !hit; m += 10) {
    DriverConfig c;
    c.method = FabMethod::Alg4;
    c.m = m;
    c.seed = 15'003;
    const auto r = fab_sign(A, b, c);
    counts_ok = counts_ok && r.counters.matvecs.value() == 2 * m + 1;
    const double e = relative_error(r.approx, oracle);
    best = std::min(best, e);
    if (e <= 1e-6) hit = m;
  }
  return {hit.has_value() && counts_ok, (hit ? "error <= 1e-6 at m = " + std::to_string(*hit)
                                             : "best error " + fmt("%.1e", best)) +
                                            (counts_ok ? ", matvecs = 2m+1" : ", matvec count mismatch")};
}

Outcome determinism() {
  BenchConfig cfg;
  cfg.problem.name = "convdiff";
  cfg.problem.mesh = 32;
  cfg.problem.scale = -1e-5;
  cfg.f = "exp";
  cfg.methods = {FabMethod::ArnoldiFom, FabMethod::Alg3, FabMethod::Alg4, FabMethod::Alg5,
                 FabMethod::Alg5Whitened, FabMethod::Sfom};
  cfg.m_grid = parse_m_grid("5:40:5");
  cfg.seed = 16'000;
  const auto dir = std::filesystem::temp_directory_path();
  auto run = [&](const std::string& name) {
    cfg.out = (dir / name).string();
    run_sweep(cfg);
    std::ifstream in(cfg.out, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const auto a = run("randkrylov_accept_a.csv");
  const auto b = run("randkrylov_accept_b.csv");
  const std::size_t rows = static_cast<std::size_t>(std::count(a.begin(), a.end(), '\n'));
  return {a == b && rows == 1 + cfg.methods.size() * cfg.m_grid.size(),
          std::to_string(rows - 1) + " rows, " + (a == b ? "byte-identical" : "files differ")};
}

} // namespace

int main() {
  // Criterion 6 asks for cond <= 3 at s = 2m, which no subspace embedding of
  // that size attains (cond concentrates near 5.8). Reported, not hidden.
  const std::set<int> known_unattainable = {6};
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"polynomial exactness", polynomial_exactness},
      {"basis independence", basis_independence},
      {"comparable accuracy on convection-diffusion", comparable_accuracy},
      {"whitening rescue on digraph Laplacian", whitening_rescue},
      {"cost asymptotics", cost_asymptotics},
      {"sketch embedding", sketch_embedding},
      {"preconditioned least squares", preconditioned_lsq},
      {"dense kernels", dense_kernels},
      {"sign function", sign_function},
      {"determinism", determinism},
  };
  int unexpected = 0;
  int id = 0;
  for (const auto& [name, fn] : criteria) {
    ++id;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const bool known = known_unattainable.count(id) > 0;
    std::printf("criterion %2d %s: %s (%s)%s\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str(),
                !o.pass && known ? " [known unattainable]" : "");
    std::fflush(stdout);
    if (!o.pass && !known) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
