#include <doctest.h>

#include <cmath>
#include <string>

#include "prelog/fading_model.hpp"
#include "prelog/quadrature.hpp"

using namespace prelog;

namespace {

// Spec whose block spans L coherence times (L = 2 nu_max T).
BlockSpec spec_with_ratio(int n, double ratio) {
  const double t_s = 1e-3;
  return make_block_spec(t_s, n, ratio / (2.0 * n * t_s));
}

}  // namespace

TEST_CASE("make_block_spec derives T, M and Q") {
  const BlockSpec s = make_block_spec(1e-3, 10, 120);
  CHECK(s.block_length() == 10 * 1e-3);
  CHECK(s.m_max() == 1);
  CHECK(s.q() == 3);
  CHECK(s.coherence_time() == doctest::Approx(1.0 / 240.0));

  const BlockSpec s0 = make_block_spec(1e-3, 10, 50);
  CHECK(s0.m_max() == 0);
  CHECK(s0.q() == 1);
}

TEST_CASE("make_block_spec rejects structural violations by name") {
  auto condition_of = [](auto&& fn) {
    try {
      fn();
    } catch (const SpecError& e) {
      return e.condition();
    }
    return std::string("none");
  };
  CHECK(condition_of([] { make_block_spec(1e-3, 3, 400); }) == "Q < N");
  CHECK(condition_of([] { make_block_spec(1e-3, 10, 500); }) == "nu_max < 1/(2 T_S)");
  CHECK(condition_of([] { make_block_spec(0.0, 10, 100); }) == "T_S > 0");
  CHECK(condition_of([] { make_block_spec(1e-3, 1, 100); }) == "N >= 2");
  CHECK(condition_of([] { make_block_spec(1e-3, 10, -1.0); }) == "nu_max > 0");
  CHECK(condition_of([] { make_block_spec(1e-3, 10, 120, PsdSpec::periodic({1.0, 1.0})); }) ==
        "psd.coeffs has odd length");
  CHECK(condition_of([] {
          make_block_spec(1e-3, 10, 120, PsdSpec::periodic({0.1, 0.2, 0.4, 0.2, 0.1}));
        }) == "K <= M");
}

TEST_CASE("block invariants hold over a range of specs") {
  for (int n = 2; n <= 30; ++n) {
    for (double nu : {10.0, 60.0, 130.0, 240.0, 499.0}) {
      try {
        const BlockSpec s = make_block_spec(1e-3, n, nu);
        CHECK(s.block_length() == n * 1e-3);
        CHECK(s.q() == 2 * s.m_max() + 1);
        CHECK(s.q() % 2 == 1);
        CHECK(s.q() < s.symbols());
      } catch (const SpecError& e) {
        CHECK(e.condition() == "Q < N");
      }
    }
  }
}

TEST_CASE("flat PSD is nonnegative, band-limited and integrates to total power") {
  const BlockSpec s = make_block_spec(1e-3, 10, 120, PsdSpec::flat(2.5));
  CHECK(s.psd_density(0.0) == doctest::Approx(2.5 / 240.0));
  CHECK(s.psd_density(121.0) == 0.0);
  CHECK(s.psd_density(-121.0) == 0.0);
  const auto area = integrate([&](double nu) { return s.psd_density(nu); }, -120.0, 120.0);
  CHECK(area.value == doctest::Approx(2.5).epsilon(1e-10));
  for (int m = -s.m_max(); m <= s.m_max(); ++m) {
    CHECK(s.coefficient_variance(m) > 0.0);
  }
}

TEST_CASE("table PSD is rescaled to total power") {
  const BlockSpec s =
      make_block_spec(1e-3, 10, 120, PsdSpec::user_table({{{0.0, 2.0}, {60.0, 1.0}, {120.0, 0.0}}}, 1.0));
  QuadratureOptions o;
  o.initial_panels = 4;
  const auto area = integrate([&](double nu) { return s.psd_density(nu); }, -120.0, 120.0, o);
  CHECK(area.value == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(s.correlation(0.0).real() == doctest::Approx(1.0).epsilon(1e-12));
  // Correlation equals the inverse transform of the density.
  const double tau = 0.0031;
  const auto direct = integrate(
      [&](double nu) { return s.psd_density(nu) * std::cos(2.0 * kPi * nu * tau); }, -120.0, 120.0, o);
  CHECK(s.correlation(tau).real() == doctest::Approx(direct.value).epsilon(1e-10));
}

TEST_CASE("sample_fading draws unit-variance normalized coefficients") {
  const BlockSpec s = make_block_spec(1e-3, 10, 120);
  Rng rng = make_rng(42);
  const int draws = 100000;
  CMatrix cov = CMatrix::Zero(s.q(), s.q());
  RVector power = RVector::Zero(s.q());
  for (int i = 0; i < draws; ++i) {
    const FadingCoeffs c = sample_fading(s, rng);
    cov += c.s_hat * c.s_hat.adjoint();
    power += c.s.cwiseAbs2();
  }
  cov /= draws;
  power /= draws;
  CHECK((cov - CMatrix::Identity(s.q(), s.q())).cwiseAbs().maxCoeff() < 0.02);
  for (int m = -1; m <= 1; ++m) {
    CHECK(power(m + 1) == doctest::Approx(s.coefficient_variance(m)).epsilon(0.02));
  }

  Rng a = make_rng(7);
  Rng b = make_rng(7);
  CHECK(sample_fading(s, a).s_hat == sample_fading(s, b).s_hat);
}

TEST_CASE("covariance_approx follows the diagonal formula") {
  const BlockSpec s = make_block_spec(1e-3, 10, 120);
  CHECK(covariance_approx(s, 1, 1).real() == doctest::Approx(1.0 / 240.0 / 0.01));
  CHECK(covariance_approx(s, 1, 1).real() == doctest::Approx(0.4166666667));
  CHECK(covariance_approx(s, 0, 1) == cplx(0.0));
  CHECK(covariance_approx(s, -1, 1) == cplx(0.0));
}

TEST_CASE("eval_h matches a reverse-order summation and is periodic") {
  const BlockSpec s = make_block_spec(1e-3, 20, 240);
  Rng rng = make_rng(3);
  const FadingCoeffs c = sample_fading(s, rng);
  const double t = s.block_length();
  for (int i = 0; i < 1000; ++i) {
    const double tau = t * uniform01(rng);
    cplx ref = 0.0;
    for (int m = s.m_max(); m >= -s.m_max(); --m) {
      ref += c.s(m + s.m_max()) * std::exp(cplx(0.0, 2.0 * kPi * m * tau / t));
    }
    CHECK(std::abs(eval_h(s, c, tau) - ref) < 1e-12);
  }
  CHECK(std::abs(eval_h(s, c, 0.0) - eval_h(s, c, t)) < 1e-12);
  CHECK_THROWS_AS(eval_h(s, c, -1e-6), std::out_of_range);
  CHECK_THROWS_AS(eval_h(s, c, t * 1.001), std::out_of_range);
}

TEST_CASE("eval_h with Q = 1 is the constant s_0") {
  const BlockSpec s = make_block_spec(1e-3, 10, 50);
  Rng rng = make_rng(5);
  const FadingCoeffs c = sample_fading(s, rng);
  for (double tau : {0.0, 0.001, 0.0047, 0.01}) {
    CHECK(std::abs(eval_h(s, c, tau) - c.s(0)) < 1e-15);
  }
}

TEST_CASE("eval_h is linear in the coefficients") {
  const BlockSpec s = make_block_spec(1e-3, 12, 300);
  Rng rng = make_rng(9);
  const FadingCoeffs c1 = sample_fading(s, rng);
  const FadingCoeffs c2 = sample_fading(s, rng);
  const cplx a(0.3, -1.2);
  const cplx b(-2.0, 0.5);
  const FadingCoeffs mix = coeffs_from_normalized(s, a * c1.s_hat + b * c2.s_hat);
  for (int i = 0; i <= 50; ++i) {
    const double tau = s.block_length() * i / 50.0;
    CHECK(std::abs(eval_h(s, mix, tau) - (a * eval_h(s, c1, tau) + b * eval_h(s, c2, tau))) <
          1e-12);
  }
}

TEST_CASE("covariance_exact is exact for a block-periodic correlation") {
  const std::vector<double> c{0.15, 0.5, 0.35};
  const BlockSpec s = make_block_spec(1e-3, 10, 120, PsdSpec::periodic(c));
  for (int m = -1; m <= 1; ++m) {
    for (int n = -1; n <= 1; ++n) {
      const auto r = covariance_exact(s, m, n);
      CHECK(r.converged);
      CHECK(std::abs(r.value - covariance_approx(s, m, n)) < 1e-9);
    }
  }
}

TEST_CASE("covariance_exact of a constant correlation") {
  const BlockSpec s = make_block_spec(1e-3, 10, 120);
  const auto r = covariance_exact(s, 0, 0, [](double) { return cplx(0.7); });
  CHECK(std::abs(r.value - 0.7) < 1e-9);
}

TEST_CASE("covariance_exact matches frozen reference values for the flat PSD") {
  // Reference values from an independent adaptive double integral.
  struct Ref {
    double ratio;
    int m;
    int n;
    double value;
  };
  const Ref refs[] = {{10, 0, 0, 0.09797763423077573},   {10, 1, 1, 0.0978942576726421},
                      {10, 0, 1, -0.002049713585869377}, {10, 1, 2, -0.002231328617483777},
                      {50, 0, 0, 0.019918949620123277},  {50, 1, 1, 0.019918819784420044},
                      {50, 0, 1, -8.109363074738202e-05}, {50, 1, 2, -8.135413649929804e-05}};
  const BlockSpec s10 = spec_with_ratio(12, 10.0);
  const BlockSpec s50 = spec_with_ratio(52, 50.0);
  for (const Ref& r : refs) {
    const BlockSpec& s = r.ratio == 10 ? s10 : s50;
    const cplx v = covariance_exact(s, r.m, r.n).value;
    CHECK(std::abs(v.real() - r.value) < 1e-8);
    CHECK(std::abs(v.imag()) < 1e-8);
  }
  // Off-diagonal bound at 50 coherence times.
  CHECK(std::abs(covariance_exact(s50, 0, 1).value) < 0.05 * s50.coefficient_variance(0));
}

TEST_CASE("covariance_exact is conjugate symmetric") {
  const BlockSpec s = spec_with_ratio(12, 10.0);
  for (auto [m, n] : {std::pair{0, 1}, std::pair{-2, 3}, std::pair{1, -1}}) {
    const cplx a = covariance_exact(s, m, n).value;
    const cplx b = covariance_exact(s, n, m).value;
    CHECK(std::abs(a - std::conj(b)) < 2e-9);
  }
}

TEST_CASE("diagonal approximation improves with block length") {
  double prev_off = 1e300;
  double prev_diag = 1e300;
  for (auto [n, ratio] : {std::pair{12, 10.0}, std::pair{52, 50.0}, std::pair{260, 250.0}}) {
    const BlockSpec s = spec_with_ratio(n, ratio);
    const double scale = s.coefficient_variance(0);
    const double off = std::abs(covariance_exact(s, 0, 1).value) / scale;
    const double diag = std::abs(covariance_exact(s, 0, 0).value - covariance_approx(s, 0, 0)) / scale;
    CHECK(off < prev_off);
    CHECK(diag < prev_diag);
    prev_off = off;
    prev_diag = diag;
  }
}

TEST_CASE("BlockSpec JSON uses the documented field names") {
  const BlockSpec s = make_block_spec(1e-3, 10, 120, PsdSpec::periodic({0.2, 0.6, 0.2}));
  const auto j = to_json(s);
  CHECK(j.at("t_s").get<double>() == 1e-3);
  CHECK(j.at("n").get<int>() == 10);
  CHECK(j.at("nu_max").get<double>() == 120.0);
  CHECK(j.at("psd").at("kind").get<std::string>() == "periodic");
  CHECK(j.at("psd").at("total_power").get<double>() == doctest::Approx(1.0));
  CHECK(j.at("psd").at("coeffs").size() == 3);
}
