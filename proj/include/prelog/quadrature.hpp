#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/gauss.hpp>

#include "prelog/types.hpp"

namespace prelog {

template <typename T>
struct QuadratureResult {
  T value{};
  // |I_l - I_{l-1}| at the final refinement level.
  double error_estimate = 0.0;
  int levels = 0;
  bool converged = false;
};

struct QuadratureOptions {
  double abs_tol = 1e-10;
  int max_levels = 20;
  int min_levels = 2;
  int initial_panels = 1;
};

namespace detail {

inline double magnitude(double v) { return std::abs(v); }
inline double magnitude(const cplx& v) { return std::abs(v); }

template <typename F>
auto gauss_legendre_panels(F& f, double a, double b, long panels) {
  using Gauss = boost::math::quadrature::gauss<double, 20>;
  static const auto& nodes = Gauss::abscissa();
  static const auto& weights = Gauss::weights();
  using T = decltype(f(a));
  T total{};
  const double width = (b - a) / static_cast<double>(panels);
  const double half = 0.5 * width;
  for (long p = 0; p < panels; ++p) {
    const double mid = a + (static_cast<double>(p) + 0.5) * width;
    T panel{};
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double dx = half * nodes[i];
      panel += weights[i] * (f(mid - dx) + f(mid + dx));
    }
    total += half * panel;
  }
  return total;
}

}  // namespace detail

// Composite 20-point Gauss-Legendre rule with global panel doubling. Stops
// once two successive levels agree to abs_tol; a result that never gets there
// comes back with converged == false and the last difference it achieved.
template <typename F>
auto integrate(F&& f, double a, double b, const QuadratureOptions& opts = {})
    -> QuadratureResult<decltype(f(a))> {
  using T = decltype(f(a));
  QuadratureResult<T> out;
  if (a == b) {
    out.converged = true;
    return out;
  }
  long panels = std::max(1, opts.initial_panels);
  T previous = detail::gauss_legendre_panels(f, a, b, panels);
  for (int level = 1; level <= opts.max_levels; ++level) {
    panels *= 2;
    const T current = detail::gauss_legendre_panels(f, a, b, panels);
    out.value = current;
    out.error_estimate = detail::magnitude(current - previous);
    out.levels = level;
    if (level >= opts.min_levels && out.error_estimate < opts.abs_tol) {
      out.converged = true;
      return out;
    }
    previous = current;
  }
  return out;
}

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double achieved)
      : std::runtime_error(what + " (achieved tolerance " + std::to_string(achieved) + ")"),
        achieved_(achieved) {}
  double achieved() const { return achieved_; }

 private:
  double achieved_;
};

}  // namespace prelog
