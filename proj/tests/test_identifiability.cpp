#include <doctest.h>

#include <cmath>
#include <limits>

#include "prelog/identifiability.hpp"

using namespace prelog;

namespace {

const std::vector<std::pair<int, int>> kGrid = {{4, 1}, {4, 3}, {8, 3}, {8, 5}, {10, 3}};

CVector concat(cplx x1, const CVector& rest) {
  CVector x(rest.size() + 1);
  x << x1, rest;
  return x;
}

}  // namespace

TEST_CASE("Jacobian shape and directional derivative") {
  for (auto [n, q] : kGrid) {
    const BlockSpec s = grid_spec(n, q);
    const FrontendMatrices fm = build_frontend_matrices(s);
    Rng rng = make_rng(3 + n * q);
    const cplx x1 = complex_normal(rng);
    const CVector sh = complex_normal_vector(rng, q);
    const CVector xr = complex_normal_vector(rng, n - 1);
    const CMatrix j = build_jacobian(fm, x1, sh, xr);
    CHECK(j.rows() == n + q - 1);
    CHECK(j.cols() == n + q - 1);

    const CVector d = complex_normal_vector(rng, n + q - 1);
    const double eps = 1e-6;
    const CVector sh2 = sh + eps * d.head(q);
    const CVector xr2 = xr + eps * d.tail(n - 1);
    const CVector diff = (forward_map_i(fm, concat(x1, xr2), sh2) -
                          forward_map_i(fm, concat(x1, xr), sh)) / eps;
    CHECK((diff - j * d).norm() < 1e-4 * (1.0 + diff.norm()));
  }
}

TEST_CASE("forward map rows are the odd samples then the first Q-1 even samples") {
  const BlockSpec s = grid_spec(8, 3);
  const FrontendMatrices fm = build_frontend_matrices(s);
  Rng rng = make_rng(12);
  const CVector x = complex_normal_vector(rng, 8);
  const CVector sh = complex_normal_vector(rng, 3);
  const CVector full = fm.b(x) * sh;
  const CVector f = forward_map_i(fm, x, sh);
  REQUIRE(f.size() == 10);
  CHECK((f.head(8) - full.head(8)).norm() < 1e-14);
  CHECK((f.tail(2) - full.segment(8, 2)).norm() < 1e-14);
}

TEST_CASE("Jacobian argument validation") {
  CHECK_THROWS_AS(build_jacobian(grid_spec(4, 5), 1.0, CVector::Ones(5), CVector::Ones(3)),
                  SpecError);
  const BlockSpec s = grid_spec(8, 3);
  CHECK_THROWS_AS(build_jacobian(s, 1.0, CVector::Ones(2), CVector::Ones(7)),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_jacobian(s, 1.0, CVector::Ones(3), CVector::Ones(8)),
                  std::invalid_argument);
}

TEST_CASE("random Jacobians are nonsingular") {
  for (int n = 2; n <= 10; ++n) {
    for (int q = 1; q < n; q += 2) {
      const BlockSpec s = grid_spec(n, q);
      Rng rng = make_rng(1000 + 16 * n + q);
      for (int t = 0; t < 20; ++t) {
        const cplx x1 = complex_normal(rng);
        const CVector sh = complex_normal_vector(rng, q);
        const CVector xr = complex_normal_vector(rng, n - 1);
        const JacobianReport r = jacobian_report(build_jacobian(s, x1, sh, xr), x1, sh, xr);
        CHECK_FALSE(r.singular);
        CHECK(r.dimension == n + q - 1);
        CHECK(std::abs(std::log(r.abs_det) - r.log_abs_det) < 1e-9);
      }
    }
  }
}

TEST_CASE("x_1 = 0 makes the Jacobian singular") {
  const BlockSpec s = grid_spec(8, 3);
  Rng rng = make_rng(5);
  const CVector sh = complex_normal_vector(rng, 3);
  const CVector xr = complex_normal_vector(rng, 7);
  const JacobianReport r = jacobian_report(build_jacobian(s, 0.0, sh, xr), 0.0, sh, xr);
  CHECK(r.singular);
  CHECK(r.abs_det == 0.0);
}

TEST_CASE("log_abs_det agrees with the Eigen determinant") {
  Rng rng = make_rng(9);
  CMatrix m(5, 5);
  for (int i = 0; i < 5; ++i) m.col(i) = complex_normal_vector(rng, 5);
  CHECK(log_abs_det(m) == doctest::Approx(std::log(std::abs(m.determinant()))).epsilon(1e-12));
  CMatrix z = m;
  z.col(2) = z.col(1);
  CHECK(log_abs_det(CMatrix::Zero(3, 3)) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("report digest is deterministic and input sensitive") {
  const BlockSpec s = grid_spec(4, 3);
  Rng rng = make_rng(2);
  const CVector sh = complex_normal_vector(rng, 3);
  const CVector xr = complex_normal_vector(rng, 3);
  const CMatrix j = build_jacobian(s, 1.0, sh, xr);
  const auto a = jacobian_report(j, 1.0, sh, xr);
  const auto b = jacobian_report(j, 1.0, sh, xr);
  const auto c = jacobian_report(j, 2.0, sh, xr);
  CHECK(a.inputs_digest == b.inputs_digest);
  CHECK(a.inputs_digest != c.inputs_digest);
  CHECK(a.inputs_digest.size() == 16);
}

TEST_CASE("explicit witness factors the determinant") {
  for (int n = 2; n <= 12; ++n) {
    for (int q = 1; q < n; q += 2) {
      const BlockSpec s = grid_spec(n, q);
      Rng rng = make_rng(77 + n * 31 + q);
      const CVector x = complex_normal_vector(rng, n);
      const WitnessReport w = explicit_witness(s, x);
      INFO("N=" << n << " Q=" << q);
      CHECK(w.ok());
      CHECK(w.relative_mismatch < 1e-8);
      CHECK(w.abs_det_j > 0.0);
      CHECK(std::abs(w.abs_det_a * w.abs_det_d1 * w.abs_det_d2 - w.abs_det_j) <=
            1e-8 * w.abs_det_j);
      // diag(p) s_hat is orthogonal to the first Q-1 rows of Qo.
      const CMatrix qo = build_qo(s);
      const CVector ps = build_p(s).cwiseProduct(w.s_hat);
      if (q > 1) {
        CHECK((qo.topRows(q - 1) * ps).norm() < 1e-10 * ps.norm());
      }
    }
  }
}

TEST_CASE("witness rejects zero symbols") {
  const BlockSpec s = grid_spec(6, 3);
  CVector x = CVector::Ones(6);
  x(3) = 0.0;
  CHECK_FALSE(explicit_witness(s, x).ok());
}

TEST_CASE("spark of the grid specs is full") {
  for (int n = 2; n <= 10; ++n) {
    for (int q = 1; q <= std::min(5, n - 1); q += 2) {
      const SparkReport r = full_spark_check(grid_spec(n, q));
      INFO("N=" << n << " Q=" << q);
      CHECK(r.exhaustive);
      CHECK(r.full_spark);
      CHECK(r.n_subsets_checked == r.n_subsets_total);
      CHECK(r.worst_subset.size() == static_cast<std::size_t>(q));
    }
  }
  // C(20, 3) = 1140.
  CHECK(full_spark_check(grid_spec(10, 3)).n_subsets_total == 1140);
}

TEST_CASE("spark check finds a planted dependent subset") {
  Rng rng = make_rng(4);
  CMatrix cols(3, 8);
  for (int i = 0; i < 8; ++i) cols.col(i) = complex_normal_vector(rng, 3);
  cols.col(6) = 0.5 * cols.col(1) - 2.0 * cols.col(4);
  const SparkReport r = spark_check(cols);
  CHECK_FALSE(r.full_spark);
  CHECK(r.worst_subset == std::vector<int>{1, 4, 6});

  const SparkReport sampled = spark_check(cols, 10, 2000, 3);
  CHECK_FALSE(sampled.exhaustive);
  CHECK(sampled.n_subsets_checked == 2000);
  CHECK_FALSE(sampled.full_spark);
}

TEST_CASE("Jacobian Monte Carlo") {
  const BlockSpec s = grid_spec(4, 3);
  const JacobianMcReport r = jacobian_monte_carlo(s, 10000, 42);
  CHECK(r.trials == 10000);
  CHECK(r.singular == 0);
  CHECK(r.singular_fraction == 0.0);
  CHECK(std::isfinite(r.mean_log_abs_det));

  JacobianMcOptions par;
  par.workers = 3;
  par.chunk = 100;
  JacobianMcOptions ser;
  ser.chunk = 100;
  const JacobianMcReport a = jacobian_monte_carlo(s, 1000, 7, par);
  const JacobianMcReport b = jacobian_monte_carlo(s, 1000, 7, ser);
  CHECK(a.mean_log_abs_det == b.mean_log_abs_det);
  CHECK(a.min_abs_det == b.min_abs_det);

  JacobianMcOptions zero;
  zero.force_x1_zero = true;
  const JacobianMcReport z = jacobian_monte_carlo(s, 500, 1, zero);
  CHECK(z.singular == 500);
}

TEST_CASE("report JSON fields") {
  const auto j = to_json(jacobian_monte_carlo(grid_spec(4, 3), 100, 1));
  CHECK(j.contains("singular_fraction"));
  CHECK(j.contains("trials"));
  const auto w = to_json(explicit_witness(grid_spec(4, 3), CVector::Ones(4)));
  CHECK(w.contains("relative_mismatch"));
}
