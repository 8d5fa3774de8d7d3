#pragma once

#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/Dense>

namespace prelog {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr cplx kJ{0.0, 1.0};

// Normalized sinc, sin(pi x) / (pi x), with the removable singularity at 0.
inline double sinc(double x) {
  if (x == 0.0) {
    return 1.0;
  }
  const double a = kPi * x;
  return std::sin(a) / a;
}

// Unit phasor e^{j theta}.
inline cplx phasor(double theta) { return {std::cos(theta), std::sin(theta)}; }

// Which discrete-time receiver produced a set of samples.
enum class Frontend { SymbolRate, Oversampled };

inline const char* to_string(Frontend f) {
  return f == Frontend::SymbolRate ? "symbol_rate" : "oversampled";
}

}  // namespace prelog
