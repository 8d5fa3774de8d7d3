#include <doctest.h>

#include <cmath>

#include "prelog/estimator.hpp"

using namespace prelog;

namespace {

struct Truth {
  FadingCoeffs c;
  CVector x;
};

Truth draw_truth(const BlockSpec& s, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Truth t{sample_fading(s, rng), complex_normal_vector(rng, s.symbols())};
  return t;
}

}  // namespace

TEST_CASE("pilot set helpers") {
  const CVector x = CVector::LinSpaced(5, 1.0, 5.0);
  const PilotSet p = PilotSet::from_positions({1, 4}, x);
  CHECK(p.size() == 2);
  CHECK(p.contains(4));
  CHECK_FALSE(p.contains(2));
  CHECK(p.values.at(4) == cplx(4.0));
  CHECK(PilotSet::first(2.0).values.at(1) == cplx(2.0));
}

TEST_CASE("noiseless joint recovery from a start near the truth") {
  const BlockSpec s = grid_spec(8, 3);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Truth t = draw_truth(s, seed);
    const CVector y = simulate_oversampled(s, t.c, t.x, 1.0).y;
    RecoveryOptions opts;
    opts.n_starts = 0;
    Rng rng = make_rng(seed, 99);
    opts.extra_starts.push_back({t.c.s_hat + 0.05 * complex_normal_vector(rng, 3),
                                 t.x + 0.05 * complex_normal_vector(rng, 8)});
    const RecoveryResult r = recover_joint_oversampled(s, y, PilotSet::first(t.x(0)), 1.0, opts);
    CHECK(r.converged);
    CHECK(r.residual < 1e-10);
    CHECK((r.s_hat_est - t.c.s_hat).norm() / t.c.s_hat.norm() < 1e-6);
    CHECK((r.x_est - t.x).norm() / t.x.norm() < 1e-6);
  }
}

TEST_CASE("noiseless multistart recovery reaches zero residual") {
  const BlockSpec s = grid_spec(8, 3);
  int solved = 0;
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    const Truth t = draw_truth(s, seed);
    const CVector y = simulate_oversampled(s, t.c, t.x, 100.0).y;
    RecoveryOptions opts;
    opts.seed = seed;
    const RecoveryResult r = recover_joint_oversampled(s, y, PilotSet::first(t.x(0)), 100.0, opts);
    CHECK(r.n_starts_used == 20);
    CHECK(r.starts.size() == 20);
    if (r.converged && (r.x_est - t.x).norm() < 1e-6 * t.x.norm()) {
      ++solved;
    }
  }
  CHECK(solved >= 9);
}

TEST_CASE("joint recovery is deterministic per seed") {
  const BlockSpec s = grid_spec(6, 3);
  const Truth t = draw_truth(s, 3);
  Rng noise = make_rng(4);
  const CVector y = simulate_oversampled(s, t.c, t.x, 1000.0, &noise).y;
  RecoveryOptions opts;
  opts.seed = 8;
  opts.noisy = true;
  opts.n_starts = 6;
  const auto a = recover_joint_oversampled(s, y, PilotSet::first(t.x(0)), 1000.0, opts);
  const auto b = recover_joint_oversampled(s, y, PilotSet::first(t.x(0)), 1000.0, opts);
  CHECK(a.residual == b.residual);
  CHECK(a.solution_digest == b.solution_digest);
  CHECK(a.converged);
}

TEST_CASE("objective trace is non-increasing") {
  const BlockSpec s = grid_spec(8, 3);
  const Truth t = draw_truth(s, 31);
  const CVector y = simulate_oversampled(s, t.c, t.x, 10.0).y;
  RecoveryOptions opts;
  opts.n_starts = 3;
  opts.keep_traces = true;
  const auto r = recover_joint_oversampled(s, y, PilotSet::first(t.x(0)), 10.0, opts);
  for (const auto& st : r.starts) {
    REQUIRE_FALSE(st.objective_trace.empty());
    for (std::size_t i = 1; i < st.objective_trace.size(); ++i) {
      CHECK(st.objective_trace[i] <= st.objective_trace[i - 1]);
    }
  }
}

TEST_CASE("joint recovery needs a nonzero pilot at position 1") {
  const BlockSpec s = grid_spec(8, 3);
  const CVector y = CVector::Ones(16);
  CHECK_THROWS_AS(recover_joint_oversampled(s, y, PilotSet{{{2, 1.0}}}, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(recover_joint_oversampled(s, y, PilotSet::first(0.0), 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(recover_joint_oversampled(s, CVector::Ones(8), PilotSet::first(1.0), 1.0),
                  std::invalid_argument);
}

TEST_CASE("noisy residual bound") {
  CHECK(noisy_residual_bound(8) == doctest::Approx(std::sqrt(16.0 + 3.0 * std::sqrt(32.0))));
}

TEST_CASE("symbol-rate pilots below Q leave a null space") {
  const BlockSpec s = grid_spec(8, 3);
  const Truth t = draw_truth(s, 41);
  const double rho = 1.0;
  const CVector y = simulate_symbol_rate(s, t.c, t.x, rho).y;
  const PilotSet pilots = PilotSet::from_positions({1, 2}, t.x);
  const LinearRecovery r = recover_linear_symbol_rate(s, y, pilots, rho);
  CHECK(r.rank == 2);
  CHECK(r.unknowns == 3);
  CHECK_FALSE(r.determined);
  REQUIRE(r.null_space.cols() == 1);
  CHECK(r.residual < 1e-10);

  // Any point on the affine solution set reproduces the pilot observations.
  const CMatrix v = symbol_rate_basis(s);
  const CVector other = r.s_est + 0.7 * r.null_space.col(0);
  CHECK((other - r.s_est).norm() > 0.5);
  for (int k : {1, 2}) {
    const cplx pred = std::sqrt(rho) * t.x(k - 1) * (v.row(k - 1) * other)(0);
    CHECK(std::abs(pred - y(k - 1)) < 1e-10);
  }
  CHECK_FALSE(r.diagnosis.empty());
}

TEST_CASE("symbol-rate pilots at Q positions determine s") {
  const BlockSpec s = grid_spec(8, 3);
  const Truth t = draw_truth(s, 42);
  const CVector y = simulate_symbol_rate(s, t.c, t.x, 4.0).y;
  const LinearRecovery r =
      recover_linear_symbol_rate(s, y, PilotSet::from_positions({1, 4, 7}, t.x), 4.0);
  CHECK(r.determined);
  CHECK(r.rank == 3);
  CHECK((r.s_est - t.c.s).norm() < 1e-9 * t.c.s.norm());
}

TEST_CASE("multiplicity probe finds the truth") {
  const BlockSpec s = grid_spec(6, 3);
  const Truth t = draw_truth(s, 55);
  const auto m = multiplicity_probe(s, t.c, t.x, PilotSet::first(t.x(0)), 8, 2);
  CHECK(m.truth_found);
  CHECK(m.n_starts == 9);
  CHECK(m.distinct_solution_classes >= 1);
  CHECK(m.converged_starts >= 1);
  CHECK(to_json(m).contains("distinct_solution_classes"));
}
