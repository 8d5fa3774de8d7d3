#include "prelog/discretization.hpp"

#include <stdexcept>
#include <string>

#include "prelog/io.hpp"

namespace prelog {

CVector build_p(const BlockSpec& spec) {
  const int n = spec.symbols();
  const int m_max = spec.m_max();
  CVector p(spec.q());
  for (int m = -m_max; m <= m_max; ++m) {
    const double arg = static_cast<double>(m) / (2.0 * n);
    p(m + m_max) = (1.0 / std::sqrt(2.0)) * phasor(-kPi * arg) * sinc(arg) *
                   std::sqrt(spec.coefficient_variance(m));
  }
  return p;
}

namespace {

CMatrix phase_matrix(const BlockSpec& spec, int offset) {
  const int n = spec.symbols();
  const int m_max = spec.m_max();
  CMatrix out(n, spec.q());
  for (int k = 1; k <= n; ++k) {
    for (int m = -m_max; m <= m_max; ++m) {
      out(k - 1, m + m_max) = phasor(kPi * m * (2.0 * k + offset) / n);
    }
  }
  return out;
}

void require_size(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": expected length " + std::to_string(want) +
                                ", got " + std::to_string(got));
  }
}

}  // namespace

CMatrix build_qo(const BlockSpec& spec) { return phase_matrix(spec, -1); }
CMatrix build_qe(const BlockSpec& spec) { return phase_matrix(spec, 0); }

CMatrix build_b(const CVector& p, const CMatrix& qo, const CMatrix& qe, const CVector& x) {
  if (qo.rows() != qe.rows() || qo.cols() != qe.cols() || qo.cols() != p.size()) {
    throw std::invalid_argument("build_b: Qo, Qe and p disagree in shape");
  }
  require_size(x.size(), qo.rows(), "build_b");
  const Eigen::Index n = qo.rows();
  CMatrix b(2 * n, p.size());
  b.topRows(n) = x.asDiagonal() * qo * p.asDiagonal();
  b.bottomRows(n) = x.asDiagonal() * qe * p.asDiagonal();
  return b;
}

CMatrix FrontendMatrices::stacked_gain() const {
  CMatrix g(2 * qo.rows(), p.size());
  g.topRows(qo.rows()) = qo * p.asDiagonal();
  g.bottomRows(qe.rows()) = qe * p.asDiagonal();
  return g;
}

FrontendMatrices build_frontend_matrices(const BlockSpec& spec) {
  return {build_p(spec), build_qo(spec), build_qe(spec)};
}

CMatrix symbol_rate_basis(const BlockSpec& spec) {
  const int n = spec.symbols();
  const int m_max = spec.m_max();
  CMatrix v(n, spec.q());
  for (int k = 1; k <= n; ++k) {
    for (int m = -m_max; m <= m_max; ++m) {
      v(k - 1, m + m_max) =
          phasor(2.0 * kPi * m * (k - 0.5) / n) * sinc(static_cast<double>(m) / n);
    }
  }
  return v;
}

CVector symbol_rate_fading(const BlockSpec& spec, const FadingCoeffs& coeffs) {
  require_size(coeffs.s.size(), spec.q(), "symbol_rate_fading");
  const int n = spec.symbols();
  const int m_max = spec.m_max();
  CVector h = CVector::Zero(n);
  for (int k = 1; k <= n; ++k) {
    for (int m = -m_max; m <= m_max; ++m) {
      h(k - 1) += coeffs.s(m + m_max) * phasor(2.0 * kPi * m * (k - 0.5) / n) *
                  sinc(static_cast<double>(m) / n);
    }
  }
  return h;
}

CMatrix LinearFrontend::b(const CVector& x) const {
  require_size(x.size(), symbols, "LinearFrontend::b");
  CMatrix out(gain.rows(), gain.cols());
  for (Eigen::Index r = 0; r < gain.rows(); ++r) {
    out.row(r) = x(symbol_of_row[r]) * gain.row(r);
  }
  return out;
}

std::vector<int> LinearFrontend::rows_of_symbol(int k) const {
  std::vector<int> rows;
  for (std::size_t r = 0; r < symbol_of_row.size(); ++r) {
    if (symbol_of_row[r] == k) {
      rows.push_back(static_cast<int>(r));
    }
  }
  return rows;
}

LinearFrontend make_linear_frontend(const BlockSpec& spec, Frontend kind) {
  LinearFrontend f;
  f.kind = kind;
  f.symbols = spec.symbols();
  const int n = spec.symbols();
  if (kind == Frontend::SymbolRate) {
    RVector scale(spec.q());
    for (int m = -spec.m_max(); m <= spec.m_max(); ++m) {
      scale(m + spec.m_max()) = std::sqrt(spec.coefficient_variance(m));
    }
    f.gain = symbol_rate_basis(spec) * scale.cast<cplx>().asDiagonal();
    for (int k = 0; k < n; ++k) {
      f.symbol_of_row.push_back(k);
    }
  } else {
    f.gain = build_frontend_matrices(spec).stacked_gain();
    for (int half = 0; half < 2; ++half) {
      for (int k = 0; k < n; ++k) {
        f.symbol_of_row.push_back(k);
      }
    }
  }
  return f;
}

CVector BlockObservation::y_odd() const {
  if (frontend != Frontend::Oversampled) {
    throw std::logic_error("y_odd: observation is not oversampled");
  }
  return y.head(y.size() / 2);
}

CVector BlockObservation::y_even() const {
  if (frontend != Frontend::Oversampled) {
    throw std::logic_error("y_even: observation is not oversampled");
  }
  return y.tail(y.size() / 2);
}

CVector BlockObservation::interleaved() const {
  const Eigen::Index n = y.size() / 2;
  CVector out(y.size());
  for (Eigen::Index k = 0; k < n; ++k) {
    out(2 * k) = y(k);
    out(2 * k + 1) = y(n + k);
  }
  return out;
}

BlockObservation simulate_symbol_rate(const BlockSpec& spec, const FadingCoeffs& coeffs,
                                      const CVector& x, double rho, Rng* noise) {
  require_size(x.size(), spec.symbols(), "simulate_symbol_rate");
  if (!(rho > 0.0)) {
    throw std::invalid_argument("simulate_symbol_rate: rho must be positive");
  }
  const int n = spec.symbols();
  BlockObservation obs;
  obs.frontend = Frontend::SymbolRate;
  obs.x = x;
  obs.rho = rho;
  obs.noise = noise ? complex_normal_vector(*noise, n) : CVector::Zero(n);
  const CVector h = symbol_rate_fading(spec, coeffs);
  obs.y = std::sqrt(rho) * h.cwiseProduct(x) + obs.noise;
  return obs;
}

BlockObservation simulate_oversampled(const BlockSpec& spec, const FadingCoeffs& coeffs,
                                      const CVector& x, double rho, Rng* noise) {
  require_size(x.size(), spec.symbols(), "simulate_oversampled");
  require_size(coeffs.s_hat.size(), spec.q(), "simulate_oversampled");
  if (!(rho > 0.0)) {
    throw std::invalid_argument("simulate_oversampled: rho must be positive");
  }
  const int n = spec.symbols();
  const int m_max = spec.m_max();
  const CVector p = build_p(spec);
  BlockObservation obs;
  obs.frontend = Frontend::Oversampled;
  obs.x = x;
  obs.rho = rho;
  obs.y.resize(2 * n);
  // y_n = sqrt(rho) x_{ceil(n/2)} sum_m p_m s_hat_m e^{j pi m n / N}, n = 1..2N
  for (int sample = 1; sample <= 2 * n; ++sample) {
    cplx acc = 0.0;
    for (int m = -m_max; m <= m_max; ++m) {
      acc += p(m + m_max) * coeffs.s_hat(m + m_max) *
             phasor(kPi * static_cast<double>(m) * sample / n);
    }
    const int k = (sample + 1) / 2;
    const Eigen::Index slot = (sample % 2 == 1) ? (k - 1) : (n + k - 1);
    obs.y(slot) = std::sqrt(rho) * x(k - 1) * acc;
  }
  obs.noise = noise ? complex_normal_vector(*noise, 2 * n) : CVector::Zero(2 * n);
  obs.y += obs.noise;
  return obs;
}

QuadratureResult<cplx> oracle_integrate(const BlockSpec& spec, const FadingCoeffs& coeffs,
                                        const CVector& x, double rho, double a, double b,
                                        double gain, double abs_tol) {
  const double t_s = spec.symbol_period();
  const double t = spec.block_length();
  const double slack = 1e-12 * t;
  if (!(a >= -slack && b <= t + slack && a <= b)) {
    throw std::out_of_range("oracle_integrate: window must lie inside [0, T]");
  }
  a = std::max(a, 0.0);
  b = std::min(b, t);
  require_size(x.size(), spec.symbols(), "oracle_integrate");
  QuadratureResult<cplx> total;
  total.converged = true;
  const double amplitude = std::sqrt(rho) / std::sqrt(t_s);
  // Split at symbol boundaries; a window edge within a relative 1e-9 of a
  // boundary is snapped to it.
  double lo = a;
  while (lo < b) {
    int l = static_cast<int>(std::floor(lo / t_s + 1e-9));
    l = std::min(l, spec.symbols() - 1);
    const double hi = std::min(b, (l + 1) * t_s);
    if (hi - lo > 1e-12 * t_s) {
      const cplx xl = x(l);
      auto integrand = [&](double tau) {
        return eval_h(spec, coeffs, std::clamp(tau, 0.0, t)) * xl * amplitude;
      };
      const auto piece = integrate(integrand, lo, hi, {.abs_tol = abs_tol / std::max(1.0, gain)});
      total.value += piece.value;
      total.error_estimate += piece.error_estimate * gain;
      total.levels = std::max(total.levels, piece.levels);
      total.converged = total.converged && piece.converged;
    }
    lo = hi;
  }
  total.value *= gain;
  return total;
}

cplx oracle_symbol_rate_sample(const BlockSpec& spec, const FadingCoeffs& coeffs,
                               const CVector& x, double rho, int k) {
  const double t_s = spec.symbol_period();
  const auto r = oracle_integrate(spec, coeffs, x, rho, (k - 1) * t_s, k * t_s,
                                  1.0 / std::sqrt(t_s));
  if (!r.converged) {
    throw QuadratureError("oracle_symbol_rate_sample did not converge", r.error_estimate);
  }
  return r.value;
}

cplx oracle_oversampled_sample(const BlockSpec& spec, const FadingCoeffs& coeffs,
                               const CVector& x, double rho, int n) {
  const double half = 0.5 * spec.symbol_period();
  const auto r = oracle_integrate(spec, coeffs, x, rho, (n - 1) * half, n * half,
                                  std::sqrt(2.0 / spec.symbol_period()));
  if (!r.converged) {
    throw QuadratureError("oracle_oversampled_sample did not converge", r.error_estimate);
  }
  return r.value;
}

CMatrix symbol_rate_fading_covariance(const BlockSpec& spec) {
  const CMatrix v = symbol_rate_basis(spec);
  RVector d(spec.q());
  for (int m = -spec.m_max(); m <= spec.m_max(); ++m) {
    d(m + spec.m_max()) = spec.coefficient_variance(m);
  }
  return v * d.cast<cplx>().asDiagonal() * v.adjoint();
}

RankReport symbol_rate_covariance_rank(const BlockSpec& spec) {
  const CMatrix c = symbol_rate_fading_covariance(spec);
  Eigen::JacobiSVD<CMatrix> svd(c);
  RankReport rep;
  rep.singular_values = svd.singularValues();
  const double s1 = rep.singular_values(0);
  const int q = spec.q();
  for (Eigen::Index i = 0; i < rep.singular_values.size(); ++i) {
    if (rep.singular_values(i) > 1e-9 * s1) {
      ++rep.numerical_rank;
    }
  }
  rep.ratio_q = rep.singular_values(q - 1) / s1;
  rep.ratio_q_plus_1 = q < rep.singular_values.size() ? rep.singular_values(q) / s1 : 0.0;
  return rep;
}

nlohmann::json to_json(const BlockObservation& obs) {
  nlohmann::json j{{"frontend", to_string(obs.frontend)},
                   {"rho", obs.rho},
                   {"noise_variance", 1.0},
                   {"x", complex_array(obs.x)}};
  if (obs.frontend == Frontend::SymbolRate) {
    j["y_sym"] = complex_array(obs.y);
  } else {
    j["y_odd"] = complex_array(obs.y_odd());
    j["y_even"] = complex_array(obs.y_even());
  }
  j["noise"] = complex_array(obs.noise);
  return j;
}

}  // namespace prelog
