#pragma once

#include <vector>

#include <json.hpp>

#include "prelog/fading_model.hpp"
#include "prelog/quadrature.hpp"
#include "prelog/random.hpp"
#include "prelog/types.hpp"

namespace prelog {

// p_m = (1/sqrt 2) e^{-j pi m / (2N)} sinc(m / (2N)) sqrt(S_h(m/T)/T), m = -M..M.
CVector build_p(const BlockSpec& spec);
// N x Q with entries e^{j pi m (2k - 1) / N} and e^{j pi m (2k) / N}.
CMatrix build_qo(const BlockSpec& spec);
CMatrix build_qe(const BlockSpec& spec);

// B = [diag(x) Qo ; diag(x) Qe] diag(p), 2N x Q. Throws on size mismatch.
CMatrix build_b(const CVector& p, const CMatrix& qo, const CMatrix& qe, const CVector& x);

struct FrontendMatrices {
  CVector p;
  CMatrix qo;
  CMatrix qe;

  CMatrix b(const CVector& x) const { return build_b(p, qo, qe, x); }
  // [Qo; Qe] diag(p): row n of the stacked (odd, even) system without x.
  CMatrix stacked_gain() const;
};

FrontendMatrices build_frontend_matrices(const BlockSpec& spec);

// V_km = e^{j 2 pi m (k - 1/2) / N} sinc(m / N), N x Q.
CMatrix symbol_rate_basis(const BlockSpec& spec);
// h_k = sum_m s_m e^{j 2 pi m (k - 1/2) / N} sinc(m / N).
CVector symbol_rate_fading(const BlockSpec& spec, const FadingCoeffs& coeffs);

// Both front-ends are conditionally linear-Gaussian in s_hat:
//   y = sqrt(rho) diag(x[symbol_of_row]) gain s_hat + w.
// Symbol rate: gain = V diag(sqrt(S_h(m/T)/T)), one row per symbol.
// Oversampled: gain = [Qo; Qe] diag(p), rows in (odd, even) stacked order.
struct LinearFrontend {
  Frontend kind = Frontend::Oversampled;
  int symbols = 0;
  CMatrix gain;
  std::vector<int> symbol_of_row;

  Eigen::Index rows() const { return gain.rows(); }
  Eigen::Index q() const { return gain.cols(); }
  CMatrix b(const CVector& x) const;
  // Rows of the stacked output that carry symbol k (0-based).
  std::vector<int> rows_of_symbol(int k) const;
};

LinearFrontend make_linear_frontend(const BlockSpec& spec, Frontend kind);

// One simulated block. For the oversampled front-end, y and noise are stored
// stacked as (y_1, y_3, ..., y_{2N-1}, y_2, y_4, ..., y_{2N}); noise variance
// is 1 per sample in both front-ends.
struct BlockObservation {
  Frontend frontend = Frontend::SymbolRate;
  CVector x;
  double rho = 1.0;
  CVector y;
  CVector noise;

  CVector y_odd() const;
  CVector y_even() const;
  // Oversampled samples in natural order y_1, y_2, ..., y_{2N}.
  CVector interleaved() const;
};

// noise == nullptr gives the noiseless output.
BlockObservation simulate_symbol_rate(const BlockSpec& spec, const FadingCoeffs& coeffs,
                                      const CVector& x, double rho, Rng* noise = nullptr);
BlockObservation simulate_oversampled(const BlockSpec& spec, const FadingCoeffs& coeffs,
                                      const CVector& x, double rho, Rng* noise = nullptr);

// gain * integral_a^b h(tau) x(tau) dtau for the rectangular-pulse transmit
// waveform x(tau) = sqrt(rho) x_l / sqrt(T_S) on the l-th symbol interval.
// The window is split at symbol boundaries so each piece is smooth.
QuadratureResult<cplx> oracle_integrate(const BlockSpec& spec, const FadingCoeffs& coeffs,
                                        const CVector& x, double rho, double a, double b,
                                        double gain, double abs_tol = 1e-10);

// Matched-filter sample k (1-based) and half-symbol sample n (1-based)
// computed by quadrature of the continuous-time model.
cplx oracle_symbol_rate_sample(const BlockSpec& spec, const FadingCoeffs& coeffs,
                               const CVector& x, double rho, int k);
cplx oracle_oversampled_sample(const BlockSpec& spec, const FadingCoeffs& coeffs,
                               const CVector& x, double rho, int n);

// C_kl = E[h_k h_l^*] of the symbol-rate fading vector.
CMatrix symbol_rate_fading_covariance(const BlockSpec& spec);

struct RankReport {
  RVector singular_values;
  int numerical_rank = 0;
  // sigma_Q / sigma_1 and sigma_{Q+1} / sigma_1 (0 when Q == N).
  double ratio_q = 0.0;
  double ratio_q_plus_1 = 0.0;
};

// Rank of the symbol-rate covariance: counts sigma_i / sigma_1 > 1e-9.
RankReport symbol_rate_covariance_rank(const BlockSpec& spec);

nlohmann::json to_json(const BlockObservation& obs);

}  // namespace prelog
