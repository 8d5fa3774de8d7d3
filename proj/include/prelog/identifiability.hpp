#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "prelog/discretization.hpp"
#include "prelog/fading_model.hpp"
#include "prelog/random.hpp"
#include "prelog/types.hpp"

namespace prelog {

inline constexpr double kSingularThreshold = 1e-12;

// Jacobian of (s_hat, x_2..x_N) -> noiseless outputs on the index set
// I = [all N odd samples, first Q-1 even samples], columns ordered
// (s_hat_{-M..M}, x_2, ..., x_N). Throws SpecError if Q >= N and
// std::invalid_argument on size mismatch.
CMatrix build_jacobian(const BlockSpec& spec, cplx x1, const CVector& s_hat, const CVector& x_rest);
CMatrix build_jacobian(const FrontendMatrices& fm, cplx x1, const CVector& s_hat,
                       const CVector& x_rest);

// Forward map restricted to I: [B(x) s_hat] on rows I.
CVector forward_map_i(const FrontendMatrices& fm, const CVector& x, const CVector& s_hat);

struct JacobianReport {
  int dimension = 0;
  double abs_det = 0.0;
  double log_abs_det = 0.0;  // -inf when abs_det == 0
  // Hadamard scale: log of prod_i ||row_i||. singular iff
  // log_abs_det <= log(1e-12) + log_row_scale.
  double log_row_scale = 0.0;
  bool singular = true;
  std::string inputs_digest;
};

JacobianReport jacobian_report(const CMatrix& jac, cplx x1, const CVector& s_hat,
                               const CVector& x_rest);
// |det| and log|det| via partial-pivot LU.
double log_abs_det(const CMatrix& m);

struct WitnessReport {
  CVector s_hat;
  double abs_det_a = 0.0;
  double abs_det_d1 = 1.0;  // empty product when Q < 3
  double abs_det_d2 = 0.0;
  double abs_det_j = 0.0;   // from build_jacobian
  double relative_mismatch = 0.0;
  double null_ratio = 0.0;  // sigma_min / sigma_max of the null-space system
  double min_d_entry = 0.0; // smallest |diag| of D1, D2 relative to ||p||
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

// Explicit nonsingular point: s_hat with diag(p) s_hat orthogonal to the
// first Q-1 rows of Qo, so J factors into A, D1 and D2 blocks. Requires all
// x_k != 0. Q = 1 is handled with D1 empty and s_hat_0 = 1.
WitnessReport explicit_witness(const BlockSpec& spec, const CVector& x);

struct SparkReport {
  std::uint64_t n_subsets_checked = 0;
  std::uint64_t n_subsets_total = 0;
  bool exhaustive = true;
  double min_abs_det = 0.0;  // column-norm scaled
  std::vector<int> worst_subset;
  bool full_spark = false;
};

// Every Q-column subset of the Q x K matrix `columns` nonsingular? Exhaustive
// when C(K, Q) <= max_exhaustive, otherwise `samples` random subsets drawn
// with make_rng(seed). Determinants are divided by the product of the chosen
// column norms before comparing with 1e-12.
SparkReport spark_check(const CMatrix& columns, std::uint64_t max_exhaustive = 10'000'000,
                        std::uint64_t samples = 1'000'000, std::uint64_t seed = 0);
// [Qo^T Qe^T] of the spec.
SparkReport full_spark_check(const BlockSpec& spec, std::uint64_t max_exhaustive = 10'000'000,
                             std::uint64_t samples = 1'000'000, std::uint64_t seed = 0);

struct JacobianMcOptions {
  bool force_x1_zero = false;
  int workers = 1;
  std::uint64_t chunk = 256;
};

struct JacobianMcReport {
  std::uint64_t trials = 0;
  std::uint64_t singular = 0;
  double singular_fraction = 0.0;
  double min_abs_det = 0.0;         // unscaled
  double min_scaled_log_det = 0.0;  // min of log|det| - log_row_scale
  double mean_log_abs_det = 0.0;
};

// (x_1, s_hat, x_2..x_N) i.i.d. CN(0,1) per trial. Trial t uses stream
// t / chunk of make_rng(seed, .), so the report does not depend on workers.
JacobianMcReport jacobian_monte_carlo(const BlockSpec& spec, std::uint64_t trials,
                                      std::uint64_t seed, const JacobianMcOptions& opts = {});

nlohmann::json to_json(const JacobianReport& r);
nlohmann::json to_json(const WitnessReport& r);
nlohmann::json to_json(const SparkReport& r);
nlohmann::json to_json(const JacobianMcReport& r);

}  // namespace prelog
