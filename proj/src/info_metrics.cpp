#include "prelog/info_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "prelog/identifiability.hpp"
#include "prelog/knn_entropy.hpp"
#include "prelog/parallel.hpp"

namespace prelog {

namespace {

const double kLogPi = std::log(kPi);
const double kLogPiE = std::log(kPi) + 1.0;
constexpr std::uint64_t kChunk = 4096;

double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) {
    return b;
  }
  if (b == -std::numeric_limits<double>::infinity()) {
    return a;
  }
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double log_det_hpd(const CMatrix& a) {
  const Eigen::LLT<CMatrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("log_det_hpd: matrix is not positive definite");
  }
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().real().array().log().sum();
}

}  // namespace

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double rho) { return 10.0 * std::log10(rho); }

const char* to_string(MiEstimator e) {
  return e == MiEstimator::BoundChain ? "bound_chain" : "direct_mixture";
}

double MISweepPoint::mi_bits() const { return mi_nats / std::log(2.0); }

LogDetForms log_det_forms(const CMatrix& b, double rho) {
  LogDetForms f;
  const CMatrix small = CMatrix::Identity(b.cols(), b.cols()) + rho * b.adjoint() * b;
  const CMatrix large = CMatrix::Identity(b.rows(), b.rows()) + rho * b * b.adjoint();
  f.small = log_det_hpd(small);
  f.large = log_det_hpd(large);
  return f;
}

std::vector<double> cond_entropy_sweep(const BlockSpec& spec, const std::vector<double>& rhos,
                                       std::uint64_t n_x_samples, std::uint64_t seed,
                                       Frontend frontend, int workers) {
  if (n_x_samples < 1) {
    throw std::invalid_argument("cond_entropy_sweep: need at least one sample");
  }
  for (double r : rhos) {
    if (!(r > 0.0)) {
      throw std::invalid_argument("cond_entropy_sweep: rho must be positive");
    }
  }
  const LinearFrontend fe = make_linear_frontend(spec, frontend);
  const std::uint64_t n_chunks = (n_x_samples + kChunk - 1) / kChunk;
  const auto parts = run_chunks<std::vector<double>>(n_chunks, workers, [&](std::uint64_t c) {
    std::vector<double> acc(rhos.size(), 0.0);
    Rng rng = make_rng(seed, c);
    const std::uint64_t end = std::min(n_x_samples, (c + 1) * kChunk);
    Eigen::SelfAdjointEigenSolver<CMatrix> eig;
    for (std::uint64_t i = c * kChunk; i < end; ++i) {
      const CVector x = complex_normal_vector(rng, spec.symbols());
      const CMatrix b = fe.b(x);
      eig.compute(b.adjoint() * b, Eigen::EigenvaluesOnly);
      const RVector lam = eig.eigenvalues().cwiseMax(0.0);
      for (std::size_t r = 0; r < rhos.size(); ++r) {
        acc[r] += (rhos[r] * lam.array()).log1p().sum();
      }
    }
    return acc;
  });
  std::vector<double> out(rhos.size(), 0.0);
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < rhos.size(); ++r) {
      out[r] += p[r];
    }
  }
  for (double& v : out) {
    v = v / static_cast<double>(n_x_samples) + static_cast<double>(fe.rows()) * kLogPiE;
  }
  return out;
}

double cond_entropy_mc(const BlockSpec& spec, double rho, std::uint64_t n_x_samples,
                       std::uint64_t seed, Frontend frontend, int workers) {
  return cond_entropy_sweep(spec, {rho}, n_x_samples, seed, frontend, workers).front();
}

JensenEstimate jensen_const(const BlockSpec& spec, std::uint64_t n_samples, std::uint64_t seed,
                            int workers) {
  if (n_samples < 2) {
    throw std::invalid_argument("jensen_const: need at least two samples");
  }
  const LinearFrontend fe = make_linear_frontend(spec, Frontend::Oversampled);
  struct Part {
    double sum = 0.0;
    double sum_sq = 0.0;
    double sum_log = 0.0;
  };
  const std::uint64_t n_chunks = (n_samples + kChunk - 1) / kChunk;
  const auto parts = run_chunks<Part>(n_chunks, workers, [&](std::uint64_t c) {
    Part p;
    Rng rng = make_rng(seed, c);
    const std::uint64_t end = std::min(n_samples, (c + 1) * kChunk);
    for (std::uint64_t i = c * kChunk; i < end; ++i) {
      const CMatrix b = fe.b(complex_normal_vector(rng, spec.symbols()));
      const double ld = log_det_hpd(CMatrix::Identity(b.cols(), b.cols()) + b.adjoint() * b);
      const double det = std::exp(ld);
      p.sum += det;
      p.sum_sq += det * det;
      p.sum_log += ld;
    }
    return p;
  });
  Part t;
  for (const auto& p : parts) {
    t.sum += p.sum;
    t.sum_sq += p.sum_sq;
    t.sum_log += p.sum_log;
  }
  const double n = static_cast<double>(n_samples);
  const double mean = t.sum / n;
  const double var = std::max(t.sum_sq / n - mean * mean, 0.0) * n / (n - 1.0);
  JensenEstimate j;
  j.log_mean_det = std::log(mean);
  j.mean_log_det = t.sum_log / n;
  j.std_error = std::sqrt(var / n) / mean;
  j.n_samples = n_samples;
  return j;
}

double expected_det_q1(const BlockSpec& spec) {
  if (spec.q() != 1) {
    throw std::invalid_argument("expected_det_q1: closed form needs Q = 1");
  }
  return 1.0 + build_frontend_matrices(spec).stacked_gain().squaredNorm();
}

RMatrix noiseless_output_samples(const BlockSpec& spec, std::uint64_t n, std::uint64_t seed,
                                 int workers) {
  const int dim = spec.symbols() + spec.q() - 1;
  const FrontendMatrices fm = build_frontend_matrices(spec);
  RMatrix out(static_cast<Eigen::Index>(n), 2 * dim);
  const std::uint64_t n_chunks = (n + kChunk - 1) / kChunk;
  run_chunks<int>(n_chunks, workers, [&](std::uint64_t c) {
    Rng rng = make_rng(seed, c);
    const std::uint64_t end = std::min(n, (c + 1) * kChunk);
    for (std::uint64_t i = c * kChunk; i < end; ++i) {
      const CVector x = complex_normal_vector(rng, spec.symbols());
      const CVector s = complex_normal_vector(rng, spec.q());
      const CVector y = forward_map_i(fm, x, s);
      const auto row = static_cast<Eigen::Index>(i);
      out.row(row).head(dim) = y.real().transpose();
      out.row(row).tail(dim) = y.imag().transpose();
    }
    return 0;
  });
  return out;
}

BoundTerms bound_chain_terms(const BlockSpec& spec, std::uint64_t n_samples, std::uint64_t seed,
                             int knn_k, int workers) {
  BoundTerms t;
  t.n = spec.symbols();
  t.q = spec.q();
  t.knn_k = knn_k;
  t.n_samples = n_samples;
  const KnnEntropyResult h =
      entropy_knn(noiseless_output_samples(spec, n_samples, seed, workers), knn_k, workers, seed);
  if (!std::isfinite(h.entropy)) {
    throw std::runtime_error("bound_chain_terms: entropy estimate of ybar_I is not finite");
  }
  t.h_ybar_i = h.entropy;
  const JensenEstimate j = jensen_const(spec, n_samples, seed ^ 0x9e3779b97f4a7c15ull, workers);
  t.jensen = j.log_mean_det;
  t.jensen_se = j.std_error;
  return t;
}

double bound_value(const BoundTerms& t, double rho) {
  // The rho terms are grouped so that only (N-1) log rho carries rho.
  const double constant = t.h_ybar_i + (t.n - t.q + 1) * kLogPiE - t.jensen - 2.0 * t.n * kLogPiE;
  return (t.n - 1) * std::log(rho) + constant;
}

MISweepPoint mi_lower_bound_chain(const BlockSpec& spec, double rho, std::uint64_t n_samples,
                                  std::uint64_t seed, int knn_k, int workers) {
  if (!(rho > 1.0)) {
    throw std::invalid_argument("mi_lower_bound_chain: needs rho > 1");
  }
  const BoundTerms t = bound_chain_terms(spec, n_samples, seed, knn_k, workers);
  MISweepPoint p;
  p.rho_db = linear_to_db(rho);
  p.mi_nats = bound_value(t, rho);
  p.std_error = t.jensen_se;
  p.estimator = MiEstimator::BoundChain;
  p.frontend = Frontend::Oversampled;
  p.n_samples = n_samples;
  p.seed = seed;
  p.n = t.n;
  p.q = t.q;
  return p;
}

double log_conditional_density(const LinearFrontend& fe, const CVector& y, const CVector& x,
                               double rho) {
  const CMatrix b = fe.b(x);
  const CMatrix a = CMatrix::Identity(b.cols(), b.cols()) + rho * b.adjoint() * b;
  const Eigen::LLT<CMatrix> llt(a);
  const CVector bh_y = b.adjoint() * y;
  const CVector z = llt.solve(bh_y);
  const double ld = 2.0 * llt.matrixL().toDenseMatrix().diagonal().real().array().log().sum();
  const double quad = y.squaredNorm() - rho * bh_y.dot(z).real();
  return -static_cast<double>(y.size()) * kLogPi - ld - quad;
}

namespace {

// Per-symbol pieces of the likelihood with x marginalized:
// f(y_k | s) = CN(y_k; 0, I + rho v_k v_k^H), v_k = G_k s.
struct Groups {
  std::vector<CMatrix> g;
  std::vector<CVector> y;
  std::vector<double> y_sq;
  int q = 0;
};

Groups split_groups(const LinearFrontend& fe, const CVector& y) {
  Groups gr;
  gr.q = static_cast<int>(fe.q());
  for (int k = 0; k < fe.symbols; ++k) {
    const std::vector<int> rows = fe.rows_of_symbol(k);
    CMatrix gk(rows.size(), fe.q());
    CVector yk(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      gk.row(static_cast<Eigen::Index>(i)) = fe.gain.row(rows[i]);
      yk(static_cast<Eigen::Index>(i)) = y(rows[i]);
    }
    gr.g.push_back(gk);
    gr.y.push_back(yk);
    gr.y_sq.push_back(yk.squaredNorm());
  }
  return gr;
}

// log of 2 pi int r^{2Q-1} pi^{-Q} e^{-r^2 ||w||^2} prod_k f(y_k | r w) dr,
// trapezoid in t = log r on the region within 45 nats of the peak.
double log_radial(const Groups& gr, const CVector& w, double rho, double step) {
  const std::size_t n = gr.g.size();
  double a[16];
  double b[16];
  double c0 = std::log(2.0 * kPi) - gr.q * kLogPi;
  std::vector<double> av(n), bv(n);
  double* pa = n <= 16 ? a : av.data();
  double* pb = n <= 16 ? b : bv.data();
  for (std::size_t k = 0; k < n; ++k) {
    const CVector v = gr.g[k] * w;
    pa[k] = v.squaredNorm();
    pb[k] = std::norm(v.dot(gr.y[k]));
    c0 -= static_cast<double>(gr.y[k].size()) * kLogPi + gr.y_sq[k];
  }
  const double ww = w.squaredNorm();
  auto lg = [&](double t) {
    const double r2 = std::exp(2.0 * t);
    double acc = c0 + 2.0 * gr.q * t - r2 * ww;
    for (std::size_t k = 0; k < n; ++k) {
      const double s = rho * r2 * pa[k];
      acc += -std::log1p(s) + rho * r2 * pb[k] / (1.0 + s);
    }
    return acc;
  };
  constexpr double kLo = -30.0;
  double peak = -std::numeric_limits<double>::infinity();
  double coarse[46];
  for (int i = 0; i <= 45; ++i) {
    coarse[i] = lg(kLo + i);
    peak = std::max(peak, coarse[i]);
  }
  int first = 45;
  int last = 0;
  for (int i = 0; i <= 45; ++i) {
    if (coarse[i] > peak - 45.0) {
      first = std::min(first, i);
      last = std::max(last, i);
    }
  }
  const double t0 = kLo + first - 1.0;
  const double t1 = kLo + last + 1.0;
  const int steps = static_cast<int>(std::ceil((t1 - t0) / step));
  double m = -std::numeric_limits<double>::infinity();
  std::vector<double> vals(steps + 1);
  for (int i = 0; i <= steps; ++i) {
    vals[i] = lg(t0 + i * step);
    m = std::max(m, vals[i]);
  }
  double sum = 0.0;
  for (double v : vals) {
    sum += std::exp(v - m);
  }
  return m + std::log(sum * step);
}

double log_prior_zeta(const CVector& zeta, int q) {
  return std::lgamma(static_cast<double>(q)) - (q - 1) * kLogPi -
         q * std::log1p(zeta.squaredNorm());
}

}  // namespace

MarginalEstimate log_marginal_density(const LinearFrontend& fe, const CVector& y, double rho,
                                      int n_inner, Rng& rng, const MixtureOptions& opts) {
  const Groups gr = split_groups(fe, y);
  const int q = gr.q;
  MarginalEstimate est;
  if (q == 1) {
    est.log_f = log_radial(gr, CVector::Ones(1), rho, opts.radial_step);
    est.ess = static_cast<double>(n_inner);
    return est;
  }

  // Direction u of the fading vector and, when every symbol has two samples,
  // a Gaussian approximation of the posterior of zeta.
  CVector u = CVector::Unit(q, 0);
  bool laplace = true;
  CMatrix r_rows(gr.g.size(), q);
  for (std::size_t k = 0; k < gr.g.size(); ++k) {
    if (gr.g[k].rows() != 2) {
      laplace = false;
      break;
    }
    r_rows.row(static_cast<Eigen::Index>(k)) =
        gr.y[k](1) * gr.g[k].row(0) - gr.y[k](0) * gr.g[k].row(1);
  }
  CMatrix a_mat;
  if (laplace) {
    Eigen::JacobiSVD<CMatrix> svd(r_rows, Eigen::ComputeFullV);
    u = svd.matrixV().col(q - 1);
    for (int pass = 0; pass < 3; ++pass) {
      a_mat = CMatrix::Zero(q, q);
      for (std::size_t k = 0; k < gr.g.size(); ++k) {
        const double ck = std::max((gr.g[k] * u).squaredNorm(), 1e-300);
        const CVector rk = r_rows.row(static_cast<Eigen::Index>(k)).adjoint();
        a_mat += rk * rk.adjoint() / ck;
      }
      if (pass < 2) {
        Eigen::SelfAdjointEigenSolver<CMatrix> eig(a_mat);
        u = eig.eigenvectors().col(0);
      }
    }
  }
  const Eigen::HouseholderQR<CMatrix> qr(u);
  const CMatrix basis = qr.householderQ() * CMatrix::Identity(q, q);
  u = basis.col(0);
  const CMatrix e = basis.rightCols(q - 1);

  CVector mu;
  CMatrix chol;
  double log_det_sigma = 0.0;
  if (laplace) {
    // a_mat was formed with the pre-QR u; rephasing u does not change it.
    const CMatrix h = e.adjoint() * a_mat * e;
    const Eigen::LLT<CMatrix> hl(h);
    if (hl.info() == Eigen::Success) {
      mu = -hl.solve(e.adjoint() * a_mat * u);
      const CMatrix sigma = opts.inflation * hl.solve(CMatrix::Identity(q - 1, q - 1));
      const Eigen::LLT<CMatrix> sl(0.5 * (sigma + sigma.adjoint()));
      if (sl.info() == Eigen::Success && mu.allFinite()) {
        chol = sl.matrixL();
        log_det_sigma = 2.0 * chol.diagonal().real().array().log().sum();
      } else {
        laplace = false;
      }
    } else {
      laplace = false;
    }
  }
  const double lam = laplace ? opts.defensive_weight : 1.0;
  const double log_lam = std::log(lam);
  const double log_1m_lam = laplace ? std::log1p(-lam) : 0.0;

  std::vector<double> lw(static_cast<std::size_t>(n_inner));
  for (int j = 0; j < n_inner; ++j) {
    CVector zeta;
    if (!laplace || uniform01(rng) < lam) {
      const CVector s = complex_normal_vector(rng, q);
      zeta = e.adjoint() * s / u.dot(s);
    } else {
      zeta = mu + chol * complex_normal_vector(rng, q - 1);
    }
    double lq = log_prior_zeta(zeta, q);
    if (laplace) {
      const CVector dz = chol.triangularView<Eigen::Lower>().solve(zeta - mu);
      const double lg = -(q - 1) * kLogPi - log_det_sigma - dz.squaredNorm();
      lq = log_sum_exp(log_lam + lq, log_1m_lam + lg);
    }
    lw[j] = log_radial(gr, u + e * zeta, rho, opts.radial_step) - lq;
  }
  const double m = *std::max_element(lw.begin(), lw.end());
  double s1 = 0.0;
  double s2 = 0.0;
  for (double v : lw) {
    const double wgt = std::exp(v - m);
    s1 += wgt;
    s2 += wgt * wgt;
  }
  est.log_f = m + std::log(s1 / n_inner);
  est.ess = s1 * s1 / s2;
  return est;
}

namespace {

struct OuterSample {
  double value = 0.0;
  double ess = 0.0;
};

double log_group_density_coherent(const CVector& yk, const CVector& vk, double rho,
                                  int n_inner, Rng& rng) {
  std::vector<double> lw(static_cast<std::size_t>(n_inner));
  const double sr = std::sqrt(rho);
  for (int j = 0; j < n_inner; ++j) {
    const cplx xp = complex_normal(rng);
    lw[j] = -static_cast<double>(yk.size()) * kLogPi - (yk - sr * xp * vk).squaredNorm();
  }
  const double m = *std::max_element(lw.begin(), lw.end());
  double s = 0.0;
  for (double v : lw) {
    s += std::exp(v - m);
  }
  return m + std::log(s / n_inner);
}

}  // namespace

MISweepPoint mi_direct_mixture(const BlockSpec& spec, double rho_db, std::uint64_t seed,
                               const MixtureOptions& opts) {
  if (spec.symbols() > 8) {
    throw std::invalid_argument("mi_direct_mixture: limited to N <= 8");
  }
  if (rho_db > 40.0) {
    throw std::invalid_argument("mi_direct_mixture: limited to rho <= 40 dB");
  }
  if (opts.n_inner < 10000) {
    throw std::invalid_argument("mi_direct_mixture: n_inner must be at least 1e4");
  }
  if (opts.n_outer < 2) {
    throw std::invalid_argument("mi_direct_mixture: n_outer must be at least 2");
  }
  const double rho = db_to_linear(rho_db);
  const double sr = std::sqrt(rho);
  const LinearFrontend fe = make_linear_frontend(spec, opts.frontend);
  const int n = spec.symbols();
  const int q = spec.q();

  const auto samples = run_chunks<OuterSample>(
      static_cast<std::uint64_t>(opts.n_outer), opts.workers, [&](std::uint64_t i) {
        Rng outer = make_rng(seed, 2 * i);
        Rng inner = make_rng(seed, 2 * i + 1);
        const CVector x = complex_normal_vector(outer, n);
        const CVector s = complex_normal_vector(outer, q);
        const CVector w = complex_normal_vector(outer, fe.rows());
        const CVector y = sr * (fe.b(x) * s) + w;
        OuterSample o;
        if (opts.coherent) {
          const double log_cond = -static_cast<double>(y.size()) * kLogPi - w.squaredNorm();
          double log_marg = 0.0;
          const CVector gs = fe.gain * s;
          for (int k = 0; k < n; ++k) {
            const std::vector<int> rows = fe.rows_of_symbol(k);
            CVector yk(rows.size());
            CVector vk(rows.size());
            for (std::size_t r = 0; r < rows.size(); ++r) {
              yk(static_cast<Eigen::Index>(r)) = y(rows[r]);
              vk(static_cast<Eigen::Index>(r)) = gs(rows[r]);
            }
            log_marg += log_group_density_coherent(yk, vk, rho, opts.n_inner, inner);
          }
          o.value = log_cond - log_marg;
          o.ess = static_cast<double>(opts.n_inner);
        } else {
          const MarginalEstimate m = log_marginal_density(fe, y, rho, opts.n_inner, inner, opts);
          o.value = log_conditional_density(fe, y, x, rho) - m.log_f;
          o.ess = m.ess;
        }
        return o;
      });

  std::vector<double> values;
  MISweepPoint p;
  p.min_ess = std::numeric_limits<double>::infinity();
  for (const auto& o : samples) {
    if (!std::isfinite(o.value)) {
      throw std::runtime_error("mi_direct_mixture: non-finite per-sample estimate");
    }
    values.push_back(o.value);
    p.min_ess = std::min(p.min_ess, o.ess);
    p.low_ess += o.ess < 50.0 ? 1 : 0;
  }
  p.rho_db = rho_db;
  p.mi_nats = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  p.std_error = jackknife_mean_se(values);
  p.estimator = MiEstimator::DirectMixture;
  p.frontend = opts.frontend;
  p.n_samples = static_cast<std::uint64_t>(opts.n_outer);
  p.n_outer = opts.n_outer;
  p.n_inner = opts.n_inner;
  p.seed = seed;
  p.n = n;
  p.q = q;
  p.coherent = opts.coherent;
  return p;
}

std::pair<double, double> coherent_mi_reference(const BlockSpec& spec, double rho_db,
                                                std::uint64_t n_samples, std::uint64_t seed,
                                                Frontend frontend) {
  const double rho = db_to_linear(rho_db);
  const LinearFrontend fe = make_linear_frontend(spec, frontend);
  Rng rng = make_rng(seed, 0);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::uint64_t i = 0; i < n_samples; ++i) {
    const CVector gs = fe.gain * complex_normal_vector(rng, spec.q());
    double v = 0.0;
    for (int k = 0; k < fe.symbols; ++k) {
      double norm2 = 0.0;
      for (int r : fe.rows_of_symbol(k)) {
        norm2 += std::norm(gs(r));
      }
      v += std::log1p(rho * norm2);
    }
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(n_samples);
  const double mean = sum / n;
  const double var = std::max(sum_sq / n - mean * mean, 0.0);
  return {mean, std::sqrt(var / n)};
}

PrelogFit prelog_fit(const std::vector<MISweepPoint>& points, int n) {
  if (points.size() < 3) {
    throw std::invalid_argument("prelog_fit: need at least 3 points");
  }
  std::vector<double> rhos;
  for (const auto& p : points) {
    rhos.push_back(p.rho_db);
  }
  std::sort(rhos.begin(), rhos.end());
  if (std::unique(rhos.begin(), rhos.end()) - rhos.begin() < 3) {
    throw std::invalid_argument("prelog_fit: need at least 3 distinct rho values");
  }
  const double m = static_cast<double>(points.size());
  double sx = 0.0;
  double sy = 0.0;
  for (const auto& p : points) {
    sx += std::log(db_to_linear(p.rho_db));
    sy += p.mi_nats;
  }
  const double mx = sx / m;
  const double my = sy / m;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const auto& p : points) {
    const double dx = std::log(db_to_linear(p.rho_db)) - mx;
    const double dy = p.mi_nats - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  PrelogFit f;
  f.points = static_cast<int>(points.size());
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (const auto& p : points) {
    const double r = p.mi_nats - f.intercept - f.slope * std::log(db_to_linear(p.rho_db));
    sse += r * r;
  }
  f.slope_se = m > 2 ? std::sqrt(sse / (m - 2.0) / sxx) : 0.0;
  f.r_squared = syy > 0.0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 1.0;
  f.slope_per_channel_use = f.slope / n;
  f.slope_se_per_channel_use = f.slope_se / n;
  f.rho_lo_db = rhos.front();
  f.rho_hi_db = rhos.back();
  return f;
}

double jackknife_mean_se(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 2) {
    return 0.0;
  }
  const double total = std::accumulate(values.begin(), values.end(), 0.0);
  const double mean = total / n;
  double acc = 0.0;
  for (double v : values) {
    const double loo = (total - v) / (n - 1.0);
    acc += (loo - mean) * (loo - mean);
  }
  return std::sqrt((n - 1.0) / n * acc);
}

std::vector<double> jacobian_log_det_batch_means(const BlockSpec& spec, int n_batches,
                                                 int batch_size, std::uint64_t seed,
                                                 int workers) {
  if (n_batches < 1 || batch_size < 1) {
    throw std::invalid_argument("jacobian_log_det_batch_means: need positive sizes");
  }
  const FrontendMatrices fm = build_frontend_matrices(spec);
  const int n = spec.symbols();
  const int q = spec.q();
  return run_chunks<double>(static_cast<std::uint64_t>(n_batches), workers, [&](std::uint64_t b) {
    Rng rng = make_rng(seed, b);
    double acc = 0.0;
    for (int t = 0; t < batch_size; ++t) {
      const cplx x1 = complex_normal(rng);
      const CVector s = complex_normal_vector(rng, q);
      const CVector xr = complex_normal_vector(rng, n - 1);
      acc += log_abs_det(build_jacobian(fm, x1, s, xr));
    }
    return acc / batch_size;
  });
}

nlohmann::json to_json(const MISweepPoint& p) {
  return {{"rho_db", p.rho_db},
          {"mi_nats", p.mi_nats},
          {"mi_bits", p.mi_bits()},
          {"stderr", p.std_error},
          {"estimator", to_string(p.estimator)},
          {"frontend", to_string(p.frontend)},
          {"n_samples", p.n_samples},
          {"n_outer", p.n_outer},
          {"n_inner", p.n_inner},
          {"seed", p.seed},
          {"n", p.n},
          {"q", p.q},
          {"coherent", p.coherent},
          {"low_ess", p.low_ess},
          {"min_ess", p.min_ess}};
}

nlohmann::json to_json(const PrelogFit& f) {
  return {{"slope", f.slope},
          {"slope_se", f.slope_se},
          {"intercept", f.intercept},
          {"slope_per_channel_use", f.slope_per_channel_use},
          {"slope_se_per_channel_use", f.slope_se_per_channel_use},
          {"r_squared", f.r_squared},
          {"rho_range_db", {f.rho_lo_db, f.rho_hi_db}},
          {"points", f.points}};
}

nlohmann::json to_json(const BoundTerms& t) {
  return {{"n", t.n},
          {"q", t.q},
          {"h_ybar_i", t.h_ybar_i},
          {"jensen_const", t.jensen},
          {"jensen_se", t.jensen_se},
          {"knn_k", t.knn_k},
          {"n_samples", t.n_samples}};
}

}  // namespace prelog
