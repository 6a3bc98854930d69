#pragma once

// Reference computations for tests. Deliberately independent of the library:
// tanh-sinh instead of Gauss-Kronrod, direct sums instead of incomplete
// beta/gamma functions, plain loops instead of the sweep engine.

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

inline double integrate(const std::function<double(double)>& f, double a, double b) {
  boost::math::quadrature::tanh_sinh<double> ts;
  if (std::isinf(b)) {
    // x = a + t / (1 - t)
    return ts.integrate(
        [&](double t) {
          if (t >= 1.0) {
            return 0.0;
          }
          const double s = 1.0 - t;
          return f(a + t / s) / (s * s);
        },
        0.0, 1.0, 1e-12);
  }
  return ts.integrate(f, a, b, 1e-12);
}

inline double choose(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) {
    c = c * (n - k + i) / i;
  }
  return c;
}

/// P{j-th largest of K <= x} = P{fewer than j of K exceed x}.
inline double order_stat_cdf(double F, int K, int j) {
  double s = 0.0;
  for (int i = 0; i < j; ++i) {
    s += choose(K, i) * std::pow(1.0 - F, i) * std::pow(F, K - i);
  }
  return s;
}

/// Gamma(shape, rho) cdf for integer shape via the Poisson series.
inline double gamma_cdf(double rho, int shape, double x) {
  const double y = x / rho;
  double term = 1.0;
  double s = 0.0;
  for (int i = 0; i < shape; ++i) {
    if (i > 0) {
      term *= y / i;
    }
    s += term;
  }
  return 1.0 - std::exp(-y) * s;
}

/// Kolmogorov limiting distribution: P{sqrt(n) D_n > t}.
inline double kolmogorov_survival(double t) {
  if (t < 0.2) {
    return 1.0;
  }
  double s = 0.0;
  for (int k = 1; k < 200; ++k) {
    const double term = std::exp(-2.0 * k * k * t * t);
    s += (k % 2 == 1 ? 1.0 : -1.0) * term;
    if (term < 1e-18) {
      break;
    }
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

/// One-sample KS p-value (asymptotic with the Stephens small-n correction).
inline double ks_pvalue(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double F = cdf(sample[i]);
    d = std::max({d, (i + 1) / n - F, F - i / n});
  }
  const double sn = std::sqrt(n);
  return kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
}

/// Two-sample KS p-value (asymptotic).
inline double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n = static_cast<double>(a.size());
  const double m = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) {
      ++i;
    }
    while (j < b.size() && b[j] <= x) {
      ++j;
    }
    d = std::max(d, std::abs(i / n - j / m));
  }
  const double en = std::sqrt(n * m / (n + m));
  return kolmogorov_survival((en + 0.12 + 0.11 / en) * d);
}

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

inline Moments moments(const std::vector<double>& x) {
  double m = 0.0;
  for (const double v : x) {
    m += v;
  }
  m /= x.size();
  double ss = 0.0;
  for (const double v : x) {
    ss += (v - m) * (v - m);
  }
  return {m, std::sqrt(ss / (x.size() - 1) / x.size())};
}

} // namespace oracle
