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

double db_to_linear(double db);
double linear_to_db(double rho);

enum class MiEstimator { BoundChain, DirectMixture };
const char* to_string(MiEstimator e);

// One point of an MI-versus-SNR sweep. mi_nats is per block.
struct MISweepPoint {
  double rho_db = 0.0;
  double mi_nats = 0.0;
  double std_error = 0.0;
  MiEstimator estimator = MiEstimator::DirectMixture;
  Frontend frontend = Frontend::Oversampled;
  std::uint64_t n_samples = 0;  // outer samples (mixture) or kNN samples (bound)
  int n_outer = 0;
  int n_inner = 0;
  std::uint64_t seed = 0;
  int n = 0;
  int q = 0;
  bool coherent = false;
  int low_ess = 0;       // outer samples whose importance ESS fell below 50
  double min_ess = 0.0;

  double mi_bits() const;
};

// log det(rho B^H B + I_Q) and log det(rho B B^H + I_rows).
struct LogDetForms {
  double small = 0.0;
  double large = 0.0;
};
LogDetForms log_det_forms(const CMatrix& b, double rho);

// h(y|x) = E_x[log((pi e)^L det(rho B B^H + I))], x ~ CN(0, I_N), L the number
// of output samples. The sweep reuses each x draw for every rho.
std::vector<double> cond_entropy_sweep(const BlockSpec& spec, const std::vector<double>& rhos,
                                       std::uint64_t n_x_samples, std::uint64_t seed,
                                       Frontend frontend = Frontend::Oversampled,
                                       int workers = 1);
double cond_entropy_mc(const BlockSpec& spec, double rho, std::uint64_t n_x_samples,
                       std::uint64_t seed, Frontend frontend = Frontend::Oversampled,
                       int workers = 1);

struct JensenEstimate {
  double log_mean_det = 0.0;  // the constant: log E[det(B^H B + I_Q)]
  double mean_log_det = 0.0;  // E[log det(B^H B + I_Q)] from the same draws
  double std_error = 0.0;     // delta-method error of log_mean_det
  std::uint64_t n_samples = 0;
};
JensenEstimate jensen_const(const BlockSpec& spec, std::uint64_t n_samples, std::uint64_t seed,
                            int workers = 1);
// E[det(B^H B + I)] = 1 + ||[Qo; Qe] diag(p)||_F^2, exact only for Q = 1.
double expected_det_q1(const BlockSpec& spec);

// Noiseless outputs on I = [1:N+Q-1] for x, s_hat ~ CN(0, I), as real rows
// (Re, Im): n x 2(N+Q-1).
RMatrix noiseless_output_samples(const BlockSpec& spec, std::uint64_t n, std::uint64_t seed,
                                 int workers = 1);

// rho-independent pieces of the lower bound
//   (N+Q-1) log rho + h(ybar_I) + (N-Q+1) log(pi e)
//     - [Q log rho + jensen + 2N log(pi e)].
struct BoundTerms {
  int n = 0;
  int q = 0;
  double h_ybar_i = 0.0;
  double jensen = 0.0;
  double jensen_se = 0.0;
  int knn_k = 4;
  std::uint64_t n_samples = 0;
};
BoundTerms bound_chain_terms(const BlockSpec& spec, std::uint64_t n_samples, std::uint64_t seed,
                             int knn_k = 4, int workers = 1);
double bound_value(const BoundTerms& t, double rho);
// Throws std::invalid_argument for rho <= 1 and std::runtime_error if the
// entropy estimate is not finite.
MISweepPoint mi_lower_bound_chain(const BlockSpec& spec, double rho, std::uint64_t n_samples,
                                  std::uint64_t seed, int knn_k = 4, int workers = 1);

struct MixtureOptions {
  int n_outer = 200;
  int n_inner = 10000;
  Frontend frontend = Frontend::Oversampled;
  // Reveal s_hat to both densities; compares against coherent_mi_reference.
  bool coherent = false;
  double defensive_weight = 0.2;  // prior share of the importance proposal
  double inflation = 2.0;         // proposal covariance = inflation * H^{-1}
  double radial_step = 0.2;       // trapezoid step in log r
  int workers = 1;
};

// log f(y|x) for y ~ CN(0, I + rho B B^H).
double log_conditional_density(const LinearFrontend& fe, const CVector& y, const CVector& x,
                               double rho);

struct MarginalEstimate {
  double log_f = 0.0;
  double ess = 0.0;
};
// Importance-sampling estimate of log f(y) with x marginalized exactly and
// s_hat = a (u + E zeta): the radius |a| by quadrature, zeta by sampling.
MarginalEstimate log_marginal_density(const LinearFrontend& fe, const CVector& y, double rho,
                                      int n_inner, Rng& rng, const MixtureOptions& opts = {});

// E[log f(y|x) - log f(y)] over (x, s_hat, w). Outer sample i draws from
// make_rng(seed, 2i) and samples from make_rng(seed, 2i + 1), so different
// rho with one seed share their channel draws. Requires N <= 8,
// rho <= 40 dB, n_inner >= 1e4.
MISweepPoint mi_direct_mixture(const BlockSpec& spec, double rho_db, std::uint64_t seed,
                               const MixtureOptions& opts = {});

// E_s[sum_k log(1 + rho ||G_k s_hat||^2)] with its standard error.
std::pair<double, double> coherent_mi_reference(const BlockSpec& spec, double rho_db,
                                                std::uint64_t n_samples, std::uint64_t seed,
                                                Frontend frontend);

struct PrelogFit {
  double slope = 0.0;  // nats per ln(rho), per block
  double slope_se = 0.0;
  double intercept = 0.0;
  double slope_per_channel_use = 0.0;
  double slope_se_per_channel_use = 0.0;
  double r_squared = 0.0;
  double rho_lo_db = 0.0;
  double rho_hi_db = 0.0;
  int points = 0;
};

// OLS of mi_nats against ln(rho); needs >= 3 points with >= 3 distinct rho.
PrelogFit prelog_fit(const std::vector<MISweepPoint>& points, int n);

// Leave-one-out jackknife standard error of the mean.
double jackknife_mean_se(const std::vector<double>& values);

// Batch means of log|det J| over Gaussian (x_1, s_hat, x_2..x_N); batch b
// draws from make_rng(seed, b).
std::vector<double> jacobian_log_det_batch_means(const BlockSpec& spec, int n_batches,
                                                 int batch_size, std::uint64_t seed,
                                                 int workers = 1);

nlohmann::json to_json(const MISweepPoint& p);
nlohmann::json to_json(const PrelogFit& f);
nlohmann::json to_json(const BoundTerms& t);

}  // namespace prelog
