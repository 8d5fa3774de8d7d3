#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "prelog/discretization.hpp"
#include "prelog/fading_model.hpp"
#include "prelog/types.hpp"

namespace prelog {

// Known symbols, keyed by 1-based position.
struct PilotSet {
  std::map<int, cplx> values;

  static PilotSet first(cplx x1) { return PilotSet{{{1, x1}}}; }
  // Pilots at the given 1-based positions, values taken from x.
  static PilotSet from_positions(const std::vector<int>& positions, const CVector& x);
  bool contains(int position) const { return values.count(position) != 0; }
  int size() const { return static_cast<int>(values.size()); }
};

// Initial point for one start. x has length N; entries at pilot positions
// are ignored.
struct RecoveryStart {
  CVector s_hat;
  CVector x;
};

struct RecoveryOptions {
  int n_starts = 20;
  std::vector<RecoveryStart> extra_starts;  // run before the random ones
  std::uint64_t seed = 0;
  int max_iterations = 200;
  double grad_tol = 1e-12;
  double initial_damping = 1e-3;
  double tol_abs = 1e-10;
  // Noisy mode: converged iff residual^2 <= 2N + 3 sqrt(4N).
  bool noisy = false;
  double cluster_tol = 1e-6;
  bool keep_traces = false;
};

struct StartOutcome {
  CVector s_hat;
  CVector x;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  int solution_class = -1;
  std::vector<double> objective_trace;  // accepted iterates, if kept
};

struct RecoveryResult {
  CVector s_hat_est;
  CVector x_est;
  // ||y - sqrt(rho) B(x) s_hat|| (Euclidean norm over all 2N samples).
  double residual = 0.0;
  int n_starts_used = 0;
  bool converged = false;
  int solution_class = -1;     // index into class_representatives
  std::string solution_digest; // digest of the best solution rounded to 1e-6
  std::vector<CVector> class_representatives;  // (s_hat, free x) of converged starts
  std::vector<StartOutcome> starts;
};

// Multistart Levenberg-Marquardt fit of y (stacked odd/even, length 2N) by
// sqrt(rho) B(x) s_hat over s_hat and the non-pilot symbols. Throws
// std::invalid_argument if position 1 is not a pilot or |x_1| < 1e-9.
RecoveryResult recover_joint_oversampled(const BlockSpec& spec, const CVector& y_stacked,
                                         const PilotSet& pilots, double rho,
                                         const RecoveryOptions& opts = {});

struct LinearRecovery {
  CVector s_est;  // unnormalized s, minimum-norm least squares
  int rank = 0;
  int unknowns = 0;
  bool determined = false;
  RVector singular_values;
  CMatrix null_space;  // Q x (Q - rank), orthonormal
  double residual = 0.0;
  std::string diagnosis;
};

// Solves y_k = sqrt(rho) x_k V_k s on the pilot rows. Under-determination is
// reported, not thrown.
LinearRecovery recover_linear_symbol_rate(const BlockSpec& spec, const CVector& y,
                                          const PilotSet& pilots, double rho);

struct MultiplicityReport {
  int distinct_solution_classes = 0;
  int converged_starts = 0;
  int n_starts = 0;
  bool truth_found = false;
  std::vector<CVector> classes;
};

// Noiseless: simulates y from the truth, runs n_starts random starts plus one
// truth-seeded start and counts distinct converged solutions.
MultiplicityReport multiplicity_probe(const BlockSpec& spec, const FadingCoeffs& truth,
                                      const CVector& x_truth, const PilotSet& pilots,
                                      int n_starts, std::uint64_t seed);

double noisy_residual_bound(int n);

nlohmann::json to_json(const LinearRecovery& r);
nlohmann::json to_json(const MultiplicityReport& r);

}  // namespace prelog
