#include <doctest.h>

#include <cmath>
#include <vector>

#include "prelog/discretization.hpp"

using namespace prelog;

namespace {

const std::vector<std::pair<int, int>> kGrid = {{4, 1}, {4, 3}, {8, 3}, {8, 5}, {10, 3}};

}  // namespace

TEST_CASE("build_p values") {
  const BlockSpec s = make_block_spec(1e-3, 10, 120);
  const CVector p = build_p(s);
  REQUIRE(p.size() == 3);
  CHECK(std::abs(p(1) - std::sqrt(s.coefficient_variance(0) / 2.0)) < 1e-15);
  CHECK(std::abs(p(2)) / std::abs(p(1)) == doctest::Approx(0.9958927352435614).epsilon(1e-12));
  CHECK(std::abs(p(0)) == doctest::Approx(std::abs(p(2))));
  // Phase e^{-j pi m / (2N)}.
  CHECK(std::arg(p(2)) == doctest::Approx(-kPi / 20.0));
  CHECK(std::arg(p(0)) == doctest::Approx(kPi / 20.0));
  // Series cross-check of sinc(1/20): 1 - x^2/6 + x^4/120 with x = pi/20.
  const double x = kPi / 20.0;
  CHECK(sinc(0.05) == doctest::Approx(1.0 - x * x / 6.0 + std::pow(x, 4) / 120.0 -
                                      std::pow(x, 6) / 5040.0).epsilon(1e-12));
}

TEST_CASE("|p_m| is positive for every grid spec") {
  for (auto [n, q] : kGrid) {
    const BlockSpec s = grid_spec(n, q);
    const CVector p = build_p(s);
    for (int m = -s.m_max(); m <= s.m_max(); ++m) {
      const double expect = sinc(m / (2.0 * n)) * std::sqrt(s.coefficient_variance(m) / 2.0);
      CHECK(std::abs(p(m + s.m_max())) == doctest::Approx(expect).epsilon(1e-14));
      CHECK(std::abs(p(m + s.m_max())) > 0.0);
    }
  }
}

TEST_CASE("Qo and Qe entries") {
  const BlockSpec s = make_block_spec(1e-3, 10, 120);
  const CMatrix qo = build_qo(s);
  const CMatrix qe = build_qe(s);
  REQUIRE(qo.rows() == 10);
  REQUIRE(qo.cols() == 3);
  for (int k = 1; k <= 10; ++k) {
    CHECK(qo(k - 1, 1) == cplx(1.0));
    CHECK(qe(k - 1, 1) == cplx(1.0));
    CHECK(std::abs(qe(k - 1, 0) - std::exp(cplx(0, -2.0 * kPi * k / 10))) < 1e-14);
    CHECK(std::abs(qe(k - 1, 2) - std::exp(cplx(0, 2.0 * kPi * k / 10))) < 1e-14);
    const cplx ratio = std::exp(cplx(0, kPi * (2 * k - 1) / 10.0));
    CHECK(std::abs(qo(k - 1, 1) / qo(k - 1, 0) - ratio) < 1e-14);
    CHECK(std::abs(qo(k - 1, 2) / qo(k - 1, 1) - ratio) < 1e-14);
    for (int c = 0; c < 3; ++c) {
      CHECK(std::abs(qo(k - 1, c)) == doctest::Approx(1.0));
      CHECK(std::abs(qe(k - 1, c)) == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("build_b shapes, linearity and the Q = 1 case") {
  const BlockSpec s1 = make_block_spec(1e-3, 4, 100);
  REQUIRE(s1.q() == 1);
  const FrontendMatrices f1 = build_frontend_matrices(s1);
  const CMatrix b1 = f1.b(CVector::Ones(4));
  CHECK((b1 - f1.p(0) * CMatrix::Ones(8, 1)).norm() < 1e-15);

  const BlockSpec s = grid_spec(8, 3);
  const FrontendMatrices f = build_frontend_matrices(s);
  Rng rng = make_rng(2);
  const CVector x = complex_normal_vector(rng, 8);
  const cplx c(1.5, -0.25);
  CHECK((f.b(c * x) - c * f.b(x)).norm() < 1e-13);
  CHECK_THROWS_AS(f.b(CVector::Ones(7)), std::invalid_argument);
}

TEST_CASE("stacked [Qo; Qe] has full column rank") {
  for (int n = 3; n <= 16; ++n) {
    for (int q = 1; q < n; q += 2) {
      const BlockSpec s = grid_spec(n, q);
      CMatrix stacked(2 * n, q);
      stacked << build_qo(s), build_qe(s);
      Eigen::JacobiSVD<CMatrix> svd(stacked);
      CHECK(svd.singularValues()(q - 1) > 1e-8 * svd.singularValues()(0));
    }
  }
}

TEST_CASE("oversampled rows of B times s_hat equal the simulated samples") {
  for (auto [n, q] : kGrid) {
    const BlockSpec s = grid_spec(n, q);
    const FrontendMatrices f = build_frontend_matrices(s);
    Rng rng = make_rng(100 + n + q);
    for (int trial = 0; trial < 20; ++trial) {
      const FadingCoeffs c = sample_fading(s, rng);
      const CVector x = complex_normal_vector(rng, n);
      const double rho = 7.0;
      const BlockObservation obs = simulate_oversampled(s, c, x, rho);
      CHECK((obs.y - std::sqrt(rho) * f.b(x) * c.s_hat).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(obs.y_odd().size() == n);
      CHECK(obs.interleaved()(0) == obs.y(0));
      CHECK(obs.interleaved()(1) == obs.y(n));
    }
  }
}

TEST_CASE("Q = 1 oversampled: odd and even samples of a symbol coincide") {
  const BlockSpec s = grid_spec(4, 1);
  Rng rng = make_rng(4);
  const FadingCoeffs c = sample_fading(s, rng);
  const CVector x = complex_normal_vector(rng, 4);
  const BlockObservation obs = simulate_oversampled(s, c, x, 3.0);
  CHECK((obs.y_odd() - obs.y_even()).norm() < 1e-14);
  const BlockObservation sym = simulate_symbol_rate(s, c, x, 3.0);
  CHECK((sym.y - std::sqrt(3.0) * c.s(0) * x).norm() < 1e-14);
}

TEST_CASE("simulated noise has unit variance per sample") {
  const BlockSpec s = grid_spec(8, 3);
  Rng rng = make_rng(11);
  double acc_os = 0.0;
  double acc_sym = 0.0;
  const int blocks = 20000;
  for (int i = 0; i < blocks; ++i) {
    const FadingCoeffs c = sample_fading(s, rng);
    const CVector x = complex_normal_vector(rng, 8);
    acc_os += simulate_oversampled(s, c, x, 1.0, &rng).noise.squaredNorm();
    acc_sym += simulate_symbol_rate(s, c, x, 1.0, &rng).noise.squaredNorm();
  }
  CHECK(acc_os / (blocks * 16.0) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(acc_sym / (blocks * 8.0) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("oracle_integrate of a constant integrand") {
  const BlockSpec s = grid_spec(8, 3);
  FadingCoeffs c{CVector::Zero(3), CVector::Zero(3)};
  c.s(1) = 1.0;  // h == 1
  const cplx xc(0.6, -0.8);
  const CVector x = CVector::Constant(8, xc);
  const double rho = 4.0;
  const double a = 0.0013;
  const double b = 0.0061;
  const auto r = oracle_integrate(s, c, x, rho, a, b, 2.5);
  const cplx expect = 2.5 * std::sqrt(rho) * xc / std::sqrt(s.symbol_period()) * (b - a);
  CHECK(std::abs(r.value - expect) < 1e-12);
}

TEST_CASE("closed forms match the continuous-time oracle on the grid") {
  for (auto [n, q] : kGrid) {
    const BlockSpec s = grid_spec(n, q);
    Rng rng = make_rng(500 + 10 * n + q);
    double worst = 0.0;
    for (int draw = 0; draw < 100; ++draw) {
      const FadingCoeffs c = sample_fading(s, rng);
      const CVector x = complex_normal_vector(rng, n);
      const double rho = 10.0;
      const BlockObservation sym = simulate_symbol_rate(s, c, x, rho);
      const CVector os = simulate_oversampled(s, c, x, rho).interleaved();
      for (int k = 1; k <= n; ++k) {
        worst = std::max(worst, std::abs(sym.y(k - 1) - oracle_symbol_rate_sample(s, c, x, rho, k)));
      }
      for (int m = 1; m <= 2 * n; ++m) {
        worst = std::max(worst, std::abs(os(m - 1) - oracle_oversampled_sample(s, c, x, rho, m)));
      }
    }
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("matched-filter fading equals the window average of h") {
  const BlockSpec s = grid_spec(10, 3);
  Rng rng = make_rng(8);
  const FadingCoeffs c = sample_fading(s, rng);
  const CVector h = symbol_rate_fading(s, c);
  const double ts = s.symbol_period();
  for (int k = 1; k <= 10; ++k) {
    const auto avg = integrate([&](double t) { return eval_h(s, c, t); }, (k - 1) * ts, k * ts);
    CHECK(std::abs(avg.value / ts - h(k - 1)) < 1e-8);
  }
}

TEST_CASE("symbol-rate fading power matches the analytic sum") {
  const BlockSpec s = grid_spec(8, 5);
  double expect = 0.0;
  for (int m = -s.m_max(); m <= s.m_max(); ++m) {
    expect += s.coefficient_variance(m) * std::pow(sinc(static_cast<double>(m) / 8), 2);
  }
  Rng rng = make_rng(21);
  const int draws = 100000;
  RVector power = RVector::Zero(8);
  for (int i = 0; i < draws; ++i) {
    power += symbol_rate_fading(s, sample_fading(s, rng)).cwiseAbs2();
  }
  power /= draws;
  for (int k = 0; k < 8; ++k) {
    CHECK(power(k) == doctest::Approx(expect).epsilon(0.02));
  }
}

TEST_CASE("oversampled noiseless energy matches rho ||[Qo; Qe] diag(p)||_F^2") {
  const BlockSpec s = grid_spec(8, 3);
  const double rho = 5.0;
  const double expect = rho * build_frontend_matrices(s).stacked_gain().squaredNorm();
  Rng rng = make_rng(31);
  const int draws = 100000;
  double acc = 0.0;
  for (int i = 0; i < draws; ++i) {
    const FadingCoeffs c = sample_fading(s, rng);
    const CVector x = complex_normal_vector(rng, 8);
    acc += simulate_oversampled(s, c, x, rho).y.squaredNorm();
  }
  CHECK(acc / draws == doctest::Approx(expect).epsilon(0.02));
}

TEST_CASE("symbol-rate covariance has rank exactly Q") {
  for (auto [n, q] : kGrid) {
    const RankReport r = symbol_rate_covariance_rank(grid_spec(n, q));
    CHECK(r.numerical_rank == q);
    CHECK(r.ratio_q > 1e-6);
    CHECK(r.ratio_q_plus_1 < 1e-9);
  }
  // Analytic covariance agrees with the sample covariance.
  const BlockSpec s = grid_spec(8, 3);
  const CMatrix c = symbol_rate_fading_covariance(s);
  Rng rng = make_rng(77);
  CMatrix emp = CMatrix::Zero(8, 8);
  const int draws = 50000;
  for (int i = 0; i < draws; ++i) {
    const CVector h = symbol_rate_fading(s, sample_fading(s, rng));
    emp += h * h.adjoint();
  }
  emp /= draws;
  CHECK((emp - c).cwiseAbs().maxCoeff() < 0.03);
}

TEST_CASE("symbol-rate linear front-end reproduces the simulation") {
  const BlockSpec s = grid_spec(8, 5);
  const LinearFrontend fe = make_linear_frontend(s, Frontend::SymbolRate);
  Rng rng = make_rng(6);
  const FadingCoeffs c = sample_fading(s, rng);
  const CVector x = complex_normal_vector(rng, 8);
  const BlockObservation obs = simulate_symbol_rate(s, c, x, 2.0);
  CHECK((obs.y - std::sqrt(2.0) * fe.b(x) * c.s_hat).norm() < 1e-13);
  CHECK(fe.rows_of_symbol(3) == std::vector<int>{3});
  const LinearFrontend os = make_linear_frontend(s, Frontend::Oversampled);
  CHECK(os.rows_of_symbol(3) == std::vector<int>{3, 11});
}

TEST_CASE("BlockObservation JSON holds [re, im] pairs") {
  const BlockSpec s = grid_spec(4, 3);
  Rng rng = make_rng(1);
  const FadingCoeffs c = sample_fading(s, rng);
  const CVector x = complex_normal_vector(rng, 4);
  const auto j = to_json(simulate_oversampled(s, c, x, 1.0, &rng));
  CHECK(j.at("y_odd").size() == 4);
  CHECK(j.at("y_even").size() == 4);
  CHECK(j.at("y_odd")[0].size() == 2);
  const auto js = to_json(simulate_symbol_rate(s, c, x, 1.0, &rng));
  CHECK(js.at("y_sym").size() == 4);
}
