#include "mtfb/bounds.hpp"

#include "mtfb/quadrature.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <fmt/format.h>

#include <cmath>
#include <stdexcept>

namespace mtfb {

namespace {

template <unsigned Digits>
using WideFloat =
    boost::multiprecision::number<boost::multiprecision::cpp_bin_float<Digits>,
                                  boost::multiprecision::et_off>;

/// Decimal digits lost to cancellation in sum_t (-1)^t C(K-1, t) a_t when the
/// result is of order (1 - q)^K: the largest binomial plus the smallness of
/// the result.
int cancellation_digits(int num_users, double fraction) {
  const double k = num_users;
  const double largest_binomial =
      (std::lgamma(k) - 2.0 * std::lgamma(0.5 * (k + 1.0))) / std::log(10.0);
  const double smallness = fraction < 1.0 ? -k * std::log10(1.0 - fraction) : 0.0;
  return static_cast<int>(std::ceil(largest_binomial + smallness));
}

/// Runs `f` with a floating type carrying at least 40 guard digits beyond
/// `digits_lost`.
template <typename F>
double with_precision(int digits_lost, F&& f) {
  const int need = digits_lost + 40;
  if (need <= 100) {
    return f(WideFloat<100>{});
  }
  if (need <= 300) {
    return f(WideFloat<300>{});
  }
  if (need <= 800) {
    return f(WideFloat<800>{});
  }
  return f(WideFloat<2000>{});
}

constexpr double kTwinTolerance = 1e-11;

void require_exponential(const SnrModel& model) {
  if (!model.is_exponential()) {
    throw std::domain_error("closed-form bounds are derived for the exponential model (Mr = Mt)");
  }
}

void require_regions(int num_users, int num_regions) {
  if (num_regions < 1 || num_regions > num_users) {
    throw std::domain_error(
        fmt::format("need 1 <= N <= K (N={}, K={})", num_regions, num_users));
  }
}

CheckedValue reconcile(double closed_form, double quadrature, bool evaluated) {
  CheckedValue out;
  out.closed_form = closed_form;
  out.quadrature = quadrature;
  if (!evaluated) {
    out.value = quadrature;
    return out;
  }
  const double scale = std::max(std::abs(quadrature), 1e-300);
  if (std::isfinite(closed_form) &&
      std::abs(closed_form - quadrature) <= kCancellationTolerance * scale) {
    out.value = closed_form;
    out.closed_form_used = true;
  } else {
    out.value = quadrature;
    out.cancellation_detected = true;
  }
  return out;
}

/// int_a^b g(x) K f(x) F(x)^{K-1} dx
double max_weighted_integral(const SnrModel& model, int num_users, double a, double b,
                             const std::function<double(double)>& g) {
  if (std::isinf(b)) {
    b = model.inv_survival(std::min(1.0, 1e-13 / num_users));
    if (b <= a) {
      return 0.0;
    }
  }
  return integral([&](double x) { return g(x) * order_stat_pdf(model, num_users, 1, x); }, a, b,
                  kTwinTolerance);
}

/// int_a^b g(x) f(x) dx
double marginal_weighted_integral(const SnrModel& model, double a, double b,
                                  const std::function<double(double)>& g) {
  if (std::isinf(b)) {
    b = model.inv_survival(1e-16);
  }
  return integral([&](double x) { return g(x) * model.pdf(x); }, a, b, kTwinTolerance);
}

double identity(double x) { return x; }
double log_rate(double x) { return std::log2(1.0 + x); }

} // namespace

namespace detail {

double gap_closed_form(double rho, int num_users, double fraction) {
  return with_precision(cancellation_digits(num_users, fraction), [&](auto zero) {
    using Wide = decltype(zero);
    const Wide r(rho);
    const Wide q(fraction);
    const Wide log_ratio = -log(q);
    const int k = num_users;

    Wide sum = 0;
    Wide binom = 1;  // C(K-1, t)
    Wide q_pow = q;  // q^{1+t} = (N/K)^{c rho}
    for (int t = 0; t < k; ++t) {
      const Wide c = Wide(1 + t) / r;
      const Wide term = (1 - q_pow) / (c * c) - r * log_ratio * q_pow / c;
      sum += (t % 2 == 0 ? binom : Wide(-binom)) * term;
      binom = binom * (k - 1 - t) / (t + 1);
      q_pow *= q;
    }
    const Wide below = pow(1 - q, k);
    const Wide mean_best = (Wide(k) / r) * sum / below;
    const Wide mean_random = r * (1 - log_ratio * q / (1 - q));
    return static_cast<double>(mean_best - mean_random);
  });
}

double gap_quadrature(const SnrModel& model, int num_users, double threshold) {
  const double below_all = std::pow(model.cdf(threshold), num_users);
  const double best =
      max_weighted_integral(model, num_users, 0.0, threshold, identity) / below_all;
  const double random = marginal_weighted_integral(model, 0.0, threshold, identity) /
                        model.cdf(threshold);
  return best - random;
}

double max_first_moment_closed_form(double rho, int num_users, int low_count, int high_count) {
  const double low_fraction = static_cast<double>(low_count) / num_users;
  return with_precision(cancellation_digits(num_users, low_fraction), [&](auto zero) {
    using Wide = decltype(zero);
    const Wide r(rho);
    const Wide k(num_users);
    const Wide s_low = Wide(low_count) / k;
    const Wide s_high = Wide(high_count) / k;
    // c a = -(1 + t) ln s_low
    const Wide log_low = low_count == num_users ? Wide(0) : Wide(-log(s_low));
    const Wide log_high = high_count == 0 ? Wide(0) : Wide(-log(s_high));

    Wide sum = 0;
    Wide binom = 1;
    Wide pow_low = s_low;
    Wide pow_high = s_high;
    for (int t = 0; t < num_users; ++t) {
      const Wide c = Wide(1 + t) / r;
      const Wide at_low = ((1 + t) * log_low + 1) * pow_low;
      const Wide at_high = high_count == 0 ? Wide(0) : Wide(((1 + t) * log_high + 1) * pow_high);
      const Wide term = (at_low - at_high) / (c * c);
      sum += (t % 2 == 0 ? binom : Wide(-binom)) * term;
      binom = binom * (num_users - 1 - t) / (t + 1);
      pow_low *= s_low;
      pow_high *= s_high;
    }
    return static_cast<double>(k / r * sum);
  });
}

} // namespace detail

double rate_loss_probability(int num_users, int num_regions) {
  require_regions(num_users, num_regions);
  return std::pow(1.0 - static_cast<double>(num_regions) / num_users, num_users);
}

CheckedValue conditional_gap_below_threshold(const SnrModel& model, int num_users,
                                             int num_regions) {
  require_exponential(model);
  require_regions(num_users, num_regions);
  if (num_regions == num_users) {
    throw std::domain_error("the gap below r_th,K = 0 is undefined; need N < K");
  }
  const double quad =
      detail::gap_quadrature(model, num_users, threshold(model, num_users, num_regions));
  if (num_users > kClosedFormMaxUsers) {
    return reconcile(0.0, quad, false);
  }
  const double closed = detail::gap_closed_form(
      model.rho(), num_users, static_cast<double>(num_regions) / num_users);
  return reconcile(closed, quad, true);
}

LossAnalysis analyze_loss(const SnrModel& model, int num_users, int num_regions,
                          int transmit_antennas) {
  require_exponential(model);
  LossAnalysis out;
  out.num_users = num_users;
  out.num_regions = num_regions;
  out.model = model;
  out.transmit_antennas = transmit_antennas;
  out.p_loss = rate_loss_probability(num_users, num_regions);
  if (num_regions < num_users) {
    const CheckedValue gap = conditional_gap_below_threshold(model, num_users, num_regions);
    out.gap_mean = std::max(0.0, gap.value);
    out.gap_fallback = !gap.closed_form_used;
    out.loss_upper_bound = transmit_antennas * std::log2(1.0 + out.gap_mean) * out.p_loss;
  }
  return out;
}

double rate_loss_upper_bound(const SnrModel& model, int num_users, int num_regions,
                             int transmit_antennas) {
  return analyze_loss(model, num_users, num_regions, transmit_antennas).loss_upper_bound;
}

double rate_loss_exact(const SnrModel& model, int num_users, int num_regions,
                       int transmit_antennas) {
  require_regions(num_users, num_regions);
  if (num_regions == num_users) {
    return 0.0;
  }
  const double r = threshold(model, num_users, num_regions);
  const double p_loss = std::pow(model.cdf(r), num_users);
  // P_L E{log(1+X_(1)) - log(1+X_k) | X_(1) < r}
  const double best = max_weighted_integral(model, num_users, 0.0, r, log_rate);
  const double random =
      marginal_weighted_integral(model, 0.0, r, log_rate) * p_loss / model.cdf(r);
  return transmit_antennas * (best - random);
}

int min_regions(const SnrModel& model, int num_users, int transmit_antennas,
                double tolerable_loss) {
  if (!(tolerable_loss > 0.0)) {
    throw std::domain_error("tolerable loss must be positive");
  }
  for (int n = 1; n < num_users; ++n) {
    if (rate_loss_upper_bound(model, num_users, n, transmit_antennas) <= tolerable_loss) {
      return n;
    }
  }
  return num_users;
}

double increment_probability(int num_users, int num_regions) {
  if (num_regions < 1 || num_regions + 1 > num_users) {
    throw std::domain_error(
        fmt::format("need 1 <= N < K (N={}, K={})", num_regions, num_users));
  }
  const double k = num_users;
  return std::pow((k - num_regions) / k, num_users) -
         std::pow((k - num_regions - 1) / k, num_users);
}

IncrementAnalysis increment_bounds(const SnrModel& model, int num_users, int num_regions,
                                   int transmit_antennas) {
  require_exponential(model);
  IncrementAnalysis out;
  out.num_users = num_users;
  out.num_regions = num_regions;
  out.model = model;
  out.transmit_antennas = transmit_antennas;
  out.p_inc = increment_probability(num_users, num_regions);

  const double rho = model.rho();
  const double low = threshold(model, num_users, num_regions + 1);  // r_th,N+1
  const double high = threshold(model, num_users, num_regions);     // r_th,N
  const double p_inc = out.p_inc;

  // Best user inside [low, high): alternating sum with a quadrature twin.
  const double quad_best = max_weighted_integral(model, num_users, low, high, identity);
  if (num_users <= kClosedFormMaxUsers) {
    const double closed_best = detail::max_first_moment_closed_form(
        rho, num_users, num_regions + 1, num_regions);
    out.mean_best = reconcile(closed_best / p_inc, quad_best / p_inc, true);
  } else {
    out.mean_best = reconcile(0.0, quad_best / p_inc, false);
  }

  // Randomly scheduled user: others' max in [low, high) while X_k < low (P_A),
  // or X_k in [low, high) with everyone else below high (P_B).
  const double f_high = model.cdf(high);
  const double f_low = model.cdf(low);
  const double p_a = std::pow(f_high, num_users - 1) - std::pow(f_low, num_users - 1);
  const double p_b = std::pow(f_high, num_users - 1);
  const double moment_below = rho - (rho + low) * std::exp(-low / rho);
  const double moment_inside =
      (rho + low) * std::exp(-low / rho) - (rho + high) * std::exp(-high / rho);
  out.mean_random = (p_a * moment_below + p_b * moment_inside) / p_inc;

  const double gap = std::max(0.0, out.mean_best.value - out.mean_random);
  out.upper = transmit_antennas * std::log2(1.0 + gap) * p_inc;
  out.lower =
      transmit_antennas * (std::log2(1.0 + low) - std::log2(1.0 + out.mean_random)) * p_inc;
  return out;
}

double rate_increment_exact(const SnrModel& model, int num_users, int num_regions,
                            int transmit_antennas) {
  const double low = threshold(model, num_users, num_regions + 1);
  const double high = threshold(model, num_users, num_regions);
  const double f_high = model.cdf(high);
  const double f_low = model.cdf(low);
  const double p_a = std::pow(f_high, num_users - 1) - std::pow(f_low, num_users - 1);
  const double p_b = std::pow(f_high, num_users - 1);
  const double best = max_weighted_integral(model, num_users, low, high, log_rate);
  const double random = p_a * marginal_weighted_integral(model, 0.0, low, log_rate) +
                        p_b * marginal_weighted_integral(model, low, high, log_rate);
  return transmit_antennas * (best - random);
}

Envelopes asymptotic_envelopes(const SnrModel& model, int num_users, int num_regions,
                               int transmit_antennas) {
  require_exponential(model);
  require_regions(num_users, num_regions);
  const double rho = model.rho();
  const double p_loss = rate_loss_probability(num_users, num_regions);
  const double lowest = threshold(model, num_users, num_regions);
  Envelopes out;
  out.lower = transmit_antennas * (1.0 - p_loss) * std::log2(1.0 + lowest);
  out.upper = transmit_antennas *
              ((1.0 - p_loss) * std::log2(1.0 + rho * (std::log(num_users) + 1.0) + lowest) +
               p_loss * std::log2(1.0 + rho));
  out.limit_fraction = -std::expm1(-static_cast<double>(num_regions));
  return out;
}

} // namespace mtfb
