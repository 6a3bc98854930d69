#pragma once

#include <functional>

namespace mtfb {

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
};

/// Adaptive 15-point Gauss-Kronrod integration of f over [a, b].
/// `b` may be +infinity. Throws NumericError when the error estimate exceeds
/// rel_tol * max(|value|, L1 norm) after the maximum refinement depth.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double rel_tol = 1e-8, unsigned max_depth = 30);

/// Convenience wrapper returning only the value.
double integral(const std::function<double(double)>& f, double a, double b,
                double rel_tol = 1e-8);

} // namespace mtfb
