#include "prelog/fading_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace prelog {

PsdSpec PsdSpec::flat(double total_power) {
  PsdSpec psd;
  psd.kind = PsdKind::FlatBandLimited;
  psd.total_power = total_power;
  return psd;
}

PsdSpec PsdSpec::periodic(std::vector<double> coeffs) {
  PsdSpec psd;
  psd.kind = PsdKind::Periodic;
  psd.total_power = 0.0;
  for (double c : coeffs) {
    psd.total_power += c;
  }
  psd.coeffs = std::move(coeffs);
  return psd;
}

PsdSpec PsdSpec::user_table(std::vector<std::array<double, 2>> table, double total_power) {
  PsdSpec psd;
  psd.kind = PsdKind::UserTable;
  psd.total_power = total_power;
  psd.table = std::move(table);
  return psd;
}

const char* to_string(PsdKind kind) {
  switch (kind) {
    case PsdKind::FlatBandLimited:
      return "flat";
    case PsdKind::Periodic:
      return "periodic";
    case PsdKind::UserTable:
      return "table";
  }
  return "unknown";
}

namespace {

void validate_psd(const PsdSpec& psd, int m_max) {
  if (!(psd.total_power > 0.0) || !std::isfinite(psd.total_power)) {
    throw SpecError("psd.total_power > 0", "total power must be positive and finite");
  }
  if (psd.kind == PsdKind::Periodic) {
    if (psd.coeffs.empty() || psd.coeffs.size() % 2 == 0) {
      throw SpecError("psd.coeffs has odd length", "periodic coefficients run over k = -K..K");
    }
    const int k_max = static_cast<int>(psd.coeffs.size() / 2);
    if (k_max > m_max) {
      throw SpecError("K <= M", "periodic correlation has lines outside [-nu_max, nu_max]");
    }
    for (double c : psd.coeffs) {
      if (!(c >= 0.0)) {
        throw SpecError("psd.coeffs >= 0", "line weights of a PSD must be nonnegative");
      }
    }
  }
  if (psd.kind == PsdKind::UserTable) {
    if (psd.table.size() < 2) {
      throw SpecError("psd.table has >= 2 points", "need at least two (nu, S) points");
    }
    for (std::size_t i = 0; i < psd.table.size(); ++i) {
      if (!(psd.table[i][1] >= 0.0)) {
        throw SpecError("psd.table S >= 0", "PSD values must be nonnegative");
      }
      if (i > 0 && !(psd.table[i][0] > psd.table[i - 1][0])) {
        throw SpecError("psd.table sorted", "frequencies must be strictly increasing");
      }
    }
    if (psd.table.front()[0] < 0.0) {
      throw SpecError("psd.table nu >= 0", "table covers the nonnegative half of an even PSD");
    }
  }
}

double table_area(const std::vector<std::array<double, 2>>& table, double nu_max) {
  double area = 0.0;
  for (std::size_t i = 1; i < table.size(); ++i) {
    const double f0 = std::min(table[i - 1][0], nu_max);
    const double f1 = std::min(table[i][0], nu_max);
    area += 0.5 * (table[i - 1][1] + table[i][1]) * (f1 - f0);
  }
  return 2.0 * area;
}

double table_lookup(const std::vector<std::array<double, 2>>& table, double nu) {
  const double f = std::abs(nu);
  if (f < table.front()[0] || f > table.back()[0]) {
    return 0.0;
  }
  auto it = std::lower_bound(table.begin(), table.end(), f,
                             [](const std::array<double, 2>& p, double v) { return p[0] < v; });
  if (it == table.begin()) {
    return it->at(1);
  }
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double w = (f - lo[0]) / (hi[0] - lo[0]);
  return lo[1] + w * (hi[1] - lo[1]);
}

// 2 * integral over [0, nu_max] of S(f) cos(2 pi f tau), exact for the
// piecewise-linear table.
double table_correlation(const std::vector<std::array<double, 2>>& table, double nu_max,
                         double tau) {
  const double w = 2.0 * kPi * tau;
  double total = 0.0;
  for (std::size_t i = 1; i < table.size(); ++i) {
    const double f0 = std::min(table[i - 1][0], nu_max);
    const double f1 = std::min(table[i][0], nu_max);
    if (f1 <= f0) {
      continue;
    }
    const double s0 = table[i - 1][1];
    const double slope = (table[i][1] - s0) / (table[i][0] - table[i - 1][0]);
    const double s1 = s0 + slope * (f1 - f0);
    if (std::abs(w) < 1e-12) {
      total += 0.5 * (s0 + s1) * (f1 - f0);
      continue;
    }
    total += (s1 * std::sin(w * f1) - s0 * std::sin(w * f0)) / w +
             slope * (std::cos(w * f1) - std::cos(w * f0)) / (w * w);
  }
  return 2.0 * total;
}

}  // namespace

BlockSpec make_block_spec(double t_s, int n, double nu_max, PsdSpec psd) {
  if (!(t_s > 0.0) || !std::isfinite(t_s)) {
    throw SpecError("T_S > 0", "symbol period must be positive");
  }
  if (n < 2) {
    throw SpecError("N >= 2", "a block needs at least two symbols, got N = " + std::to_string(n));
  }
  if (!(nu_max > 0.0) || !std::isfinite(nu_max)) {
    throw SpecError("nu_max > 0", "Doppler bandwidth must be positive");
  }
  if (nu_max >= 1.0 / (2.0 * t_s)) {
    std::ostringstream msg;
    msg << "fading bandwidth " << nu_max << " Hz is not below half the symbol rate "
        << 1.0 / (2.0 * t_s) << " Hz";
    throw SpecError("nu_max < 1/(2 T_S)", msg.str());
  }
  BlockSpec spec;
  spec.t_s_ = t_s;
  spec.n_ = n;
  spec.t_ = static_cast<double>(n) * t_s;
  spec.nu_max_ = nu_max;
  spec.m_ = static_cast<int>(std::floor(spec.t_ * nu_max));
  const int q = spec.q();
  if (q >= n) {
    throw SpecError("Q < N", "Q = " + std::to_string(q) + " is not below N = " + std::to_string(n));
  }
  validate_psd(psd, spec.m_);
  if (psd.kind == PsdKind::UserTable) {
    const double area = table_area(psd.table, nu_max);
    if (!(area > 0.0)) {
      throw SpecError("psd.table area > 0", "table integrates to zero inside the band");
    }
    spec.scaled_table_ = psd.table;
    for (auto& p : spec.scaled_table_) {
      p[1] *= psd.total_power / area;
    }
  }
  spec.psd_ = std::move(psd);
  return spec;
}

BlockSpec grid_spec(int n, int q) {
  if (q < 1 || q % 2 == 0) {
    throw SpecError("Q odd", "Q = 2M + 1 must be a positive odd integer");
  }
  const double t_s = 1e-3;
  const double t = n * t_s;
  const int m = (q - 1) / 2;
  return make_block_spec(t_s, n, (m + 0.5) / t);
}

double BlockSpec::psd_density(double nu) const {
  if (std::abs(nu) > nu_max_) {
    return 0.0;
  }
  switch (psd_.kind) {
    case PsdKind::FlatBandLimited:
      return psd_.total_power / (2.0 * nu_max_);
    case PsdKind::Periodic:
      return 0.0;
    case PsdKind::UserTable:
      return table_lookup(scaled_table_, nu);
  }
  return 0.0;
}

cplx BlockSpec::correlation(double tau) const {
  switch (psd_.kind) {
    case PsdKind::FlatBandLimited:
      return psd_.total_power * sinc(2.0 * nu_max_ * tau);
    case PsdKind::Periodic: {
      const int k_max = static_cast<int>(psd_.coeffs.size() / 2);
      cplx r = 0.0;
      for (int k = -k_max; k <= k_max; ++k) {
        r += psd_.coeffs[k + k_max] * phasor(2.0 * kPi * k * tau / t_);
      }
      return r;
    }
    case PsdKind::UserTable:
      return table_correlation(scaled_table_, nu_max_, tau);
  }
  return 0.0;
}

double BlockSpec::coefficient_variance(int m) const {
  if (psd_.kind == PsdKind::Periodic) {
    const int k_max = static_cast<int>(psd_.coeffs.size() / 2);
    return std::abs(m) <= k_max ? psd_.coeffs[m + k_max] : 0.0;
  }
  return psd_density(static_cast<double>(m) / t_) / t_;
}

FadingCoeffs coeffs_from_normalized(const BlockSpec& spec, const CVector& s_hat) {
  if (s_hat.size() != spec.q()) {
    throw std::invalid_argument("coeffs_from_normalized: expected " + std::to_string(spec.q()) +
                                " coefficients");
  }
  FadingCoeffs c{s_hat, CVector(spec.q())};
  for (int m = -spec.m_max(); m <= spec.m_max(); ++m) {
    const int col = m + spec.m_max();
    c.s(col) = s_hat(col) * std::sqrt(spec.coefficient_variance(m));
  }
  return c;
}

FadingCoeffs sample_fading(const BlockSpec& spec, Rng& rng) {
  return coeffs_from_normalized(spec, complex_normal_vector(rng, spec.q()));
}

cplx eval_h(const BlockSpec& spec, const FadingCoeffs& coeffs, double t) {
  if (!(t >= 0.0 && t <= spec.block_length())) {
    throw std::out_of_range("eval_h: t = " + std::to_string(t) + " outside the block [0, T]");
  }
  cplx h = 0.0;
  for (int m = -spec.m_max(); m <= spec.m_max(); ++m) {
    h += coeffs.s(m + spec.m_max()) * phasor(2.0 * kPi * m * t / spec.block_length());
  }
  return h;
}

QuadratureResult<cplx> covariance_exact(const BlockSpec& spec, int m, int n,
                                        const CorrelationFn& r_h, double abs_tol) {
  // Normalized variables u = alpha / T, v = tau / T:
  //   E[s_m s_n^*] = int_0^1 e^{-j 2 pi (m - n) u} int_{-u}^{1-u} r(vT) e^{-j 2 pi m v} dv du
  const double t = spec.block_length();
  const int panels = std::max(1, static_cast<int>(std::ceil(t / spec.coherence_time() / 2.0)));
  QuadratureOptions inner_opts{.abs_tol = 0.1 * abs_tol, .initial_panels = panels};
  QuadratureOptions outer_opts{.abs_tol = abs_tol, .initial_panels = panels};
  double worst_inner = 0.0;
  auto inner = [&](double u) {
    auto integrand = [&](double v) { return r_h(v * t) * phasor(-2.0 * kPi * m * v); };
    const auto res = integrate(integrand, -u, 1.0 - u, inner_opts);
    if (!res.converged) {
      throw QuadratureError("covariance_exact: inner integral did not converge",
                            res.error_estimate);
    }
    worst_inner = std::max(worst_inner, res.error_estimate);
    return res.value * phasor(-2.0 * kPi * (m - n) * u);
  };
  auto outer = integrate(inner, 0.0, 1.0, outer_opts);
  if (!outer.converged) {
    throw QuadratureError("covariance_exact: outer integral did not converge",
                          outer.error_estimate);
  }
  outer.error_estimate += worst_inner;
  return outer;
}

QuadratureResult<cplx> covariance_exact(const BlockSpec& spec, int m, int n, double abs_tol) {
  return covariance_exact(
      spec, m, n, [&spec](double tau) { return spec.correlation(tau); }, abs_tol);
}

cplx covariance_approx(const BlockSpec& spec, int m, int n) {
  return m == n ? cplx(spec.coefficient_variance(m)) : cplx(0.0);
}

nlohmann::json to_json(const PsdSpec& psd) {
  nlohmann::json j{{"kind", to_string(psd.kind)}, {"total_power", psd.total_power}};
  if (psd.kind == PsdKind::Periodic) {
    j["coeffs"] = psd.coeffs;
  }
  if (psd.kind == PsdKind::UserTable) {
    j["table"] = psd.table;
  }
  return j;
}

nlohmann::json to_json(const BlockSpec& spec) {
  return {{"t_s", spec.symbol_period()},
          {"n", spec.symbols()},
          {"nu_max", spec.nu_max()},
          {"psd", to_json(spec.psd())}};
}

}  // namespace prelog
