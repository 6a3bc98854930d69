#include "mtfb/quadrature.hpp"

#include "mtfb/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace mtfb {

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double rel_tol, unsigned max_depth) {
  if (a == b) {
    return {};
  }
  double error = 0.0;
  double l1 = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      f, a, b, max_depth, rel_tol, &error, &l1);
  if (!std::isfinite(value)) {
    throw NumericError(fmt::format("quadrature on [{}, {}] produced non-finite value", a, b));
  }
  // Kronrod estimates overshoot the true error on smooth integrands; 100x slack.
  const double scale = std::max(std::abs(value), l1);
  if (error > 100.0 * rel_tol * scale && error > 1e-300) {
    throw NumericError(fmt::format(
        "quadrature on [{}, {}] did not converge: value={}, error_estimate={}, L1={}, rel_tol={}",
        a, b, value, error, l1, rel_tol));
  }
  return {value, error};
}

double integral(const std::function<double(double)>& f, double a, double b, double rel_tol) {
  return integrate(f, a, b, rel_tol).value;
}

} // namespace mtfb
