#pragma once

#include <array>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "prelog/quadrature.hpp"
#include "prelog/random.hpp"
#include "prelog/types.hpp"

namespace prelog {

// Raised when block parameters violate a structural requirement. condition()
// names the violated inequality, e.g. "Q < N".
class SpecError : public std::invalid_argument {
 public:
  SpecError(std::string condition, const std::string& detail)
      : std::invalid_argument(condition + ": " + detail), condition_(std::move(condition)) {}
  const std::string& condition() const { return condition_; }

 private:
  std::string condition_;
};

enum class PsdKind { FlatBandLimited, Periodic, UserTable };

// Descriptor of the fading power spectral density. The band edge nu_max is
// carried by BlockSpec.
//  - FlatBandLimited: S(nu) = total_power / (2 nu_max) on [-nu_max, nu_max].
//  - Periodic: block-periodic correlation r(tau) = sum_k c_k e^{j 2 pi k tau / T}
//    with c_k >= 0, k = -K..K; a line spectrum with weights c_k.
//  - UserTable: even PSD, piecewise linear through (nu, S) points on
//    [0, nu_max], rescaled so it integrates to total_power.
struct PsdSpec {
  PsdKind kind = PsdKind::FlatBandLimited;
  double total_power = 1.0;
  std::vector<double> coeffs;
  std::vector<std::array<double, 2>> table;

  static PsdSpec flat(double total_power = 1.0);
  static PsdSpec periodic(std::vector<double> coeffs);
  static PsdSpec user_table(std::vector<std::array<double, 2>> table, double total_power = 1.0);
};

const char* to_string(PsdKind kind);

// Deterministic parameters of one fading block.
//
// Index convention used throughout: the Fourier index m runs -M..M and is
// stored at column m + M; symbol index k and sample index n are 1-based in
// formulas and 0-based in storage.
class BlockSpec {
 public:
  double symbol_period() const { return t_s_; }
  int symbols() const { return n_; }
  double block_length() const { return t_; }
  double nu_max() const { return nu_max_; }
  int m_max() const { return m_; }
  int q() const { return 2 * m_ + 1; }
  double coherence_time() const { return 1.0 / (2.0 * nu_max_); }
  const PsdSpec& psd() const { return psd_; }

  // S_h(nu); zero outside [-nu_max, nu_max]. Periodic PSDs are line spectra
  // and report their line weight c_m at nu = m / T instead (see
  // coefficient_variance), so density() returns 0 for them.
  double psd_density(double nu) const;
  // r_h(tau).
  cplx correlation(double tau) const;
  // Variance of s_m under the diagonal model, S_h(m/T)/T (c_m for periodic).
  double coefficient_variance(int m) const;

  friend BlockSpec make_block_spec(double t_s, int n, double nu_max, PsdSpec psd);

 private:
  BlockSpec() = default;
  double t_s_ = 0.0;
  int n_ = 0;
  double t_ = 0.0;
  double nu_max_ = 0.0;
  int m_ = 0;
  PsdSpec psd_;
  // UserTable, normalized to total_power.
  std::vector<std::array<double, 2>> scaled_table_;
};

// Validates and derives T = N T_S, M = floor(T nu_max), Q = 2M + 1.
// Throws SpecError when nu_max >= 1/(2 T_S) or Q >= N.
BlockSpec make_block_spec(double t_s, int n, double nu_max, PsdSpec psd = PsdSpec::flat());

// Spec with the requested (N, Q): T_S = 1 ms and nu_max = (M + 1/2) / T.
BlockSpec grid_spec(int n, int q);

struct FadingCoeffs {
  CVector s_hat;  // normalized, i.i.d. CN(0, 1)
  CVector s;      // s_m = s_hat_m sqrt(S_h(m/T)/T)
};

FadingCoeffs coeffs_from_normalized(const BlockSpec& spec, const CVector& s_hat);
FadingCoeffs sample_fading(const BlockSpec& spec, Rng& rng);

// Truncated series h(t) = sum_m s_m e^{j 2 pi m t / T}, 0 <= t <= T.
cplx eval_h(const BlockSpec& spec, const FadingCoeffs& coeffs, double t);

using CorrelationFn = std::function<cplx(double)>;

// E[s_m s_n^*] from the exact double integral, evaluated by nested
// Gauss-Legendre quadrature to abs_tol. Throws QuadratureError if either
// level fails to converge.
QuadratureResult<cplx> covariance_exact(const BlockSpec& spec, int m, int n,
                                        const CorrelationFn& r_h, double abs_tol = 1e-9);
QuadratureResult<cplx> covariance_exact(const BlockSpec& spec, int m, int n,
                                        double abs_tol = 1e-9);

// Diagonal approximation: S_h(m/T)/T if m == n, else 0.
cplx covariance_approx(const BlockSpec& spec, int m, int n);

// JSON field names: t_s, n, nu_max, psd.kind, psd.total_power, psd.coeffs,
// psd.table.
nlohmann::json to_json(const BlockSpec& spec);
nlohmann::json to_json(const PsdSpec& psd);

}  // namespace prelog
