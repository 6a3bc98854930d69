#include "mtfb/stats.hpp"

#include "mtfb/errors.hpp"
#include "mtfb/quadrature.hpp"

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mtfb {

namespace {

void require_nonnegative(double x, const char* what) {
  if (!(x >= 0.0)) {
    throw std::domain_error(fmt::format("{} must be >= 0, got {}", what, x));
  }
}

void require_rank(int num_users, int rank) {
  if (num_users < 1 || rank < 1 || rank > num_users) {
    throw std::domain_error(fmt::format("rank {} out of range for {} users", rank, num_users));
  }
}

} // namespace

SnrModel::SnrModel(double rho, int shape) : rho_(rho), shape_(shape) {
  if (!(rho > 0.0) || !std::isfinite(rho)) {
    throw std::domain_error(fmt::format("rho must be positive and finite, got {}", rho));
  }
  if (shape < 1) {
    throw std::domain_error(fmt::format("shape must be >= 1, got {}", shape));
  }
}

SnrModel SnrModel::for_antennas(double rho, int receive_antennas, int transmit_antennas) {
  if (transmit_antennas < 1 || receive_antennas < transmit_antennas) {
    throw std::domain_error(fmt::format("ZF needs Mr >= Mt >= 1 (Mr={}, Mt={})",
                                        receive_antennas, transmit_antennas));
  }
  return SnrModel(rho, receive_antennas - transmit_antennas + 1);
}

double SnrModel::pdf(double x) const {
  require_nonnegative(x, "SNR");
  const double y = x / rho_;
  if (shape_ == 1) {
    return std::exp(-y) / rho_;
  }
  if (y == 0.0) {
    return 0.0;
  }
  return std::exp(-y + (shape_ - 1) * std::log(y) - std::lgamma(static_cast<double>(shape_))) /
         rho_;
}

double SnrModel::cdf(double x) const {
  require_nonnegative(x, "SNR");
  if (std::isinf(x)) {
    return 1.0;
  }
  if (shape_ == 1) {
    return -std::expm1(-x / rho_);
  }
  return boost::math::gamma_p(static_cast<double>(shape_), x / rho_);
}

double SnrModel::survival(double x) const {
  require_nonnegative(x, "SNR");
  if (std::isinf(x)) {
    return 0.0;
  }
  if (shape_ == 1) {
    return std::exp(-x / rho_);
  }
  return boost::math::gamma_q(static_cast<double>(shape_), x / rho_);
}

double SnrModel::inv_cdf(double u) const {
  if (!(u >= 0.0 && u < 1.0)) {
    throw std::domain_error(fmt::format("probability must lie in [0, 1), got {}", u));
  }
  if (u == 0.0) {
    return 0.0;
  }
  if (shape_ == 1) {
    return -rho_ * std::log1p(-u);
  }
  if (u > 0.5) {
    return inv_survival(1.0 - u);
  }
  // Bisection on the CDF; bracket grows geometrically from the mean.
  double lo = 0.0;
  double hi = mean();
  while (cdf(hi) < u) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < u ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double SnrModel::inv_survival(double q) const {
  if (!(q > 0.0 && q <= 1.0)) {
    throw std::domain_error(fmt::format("tail probability must lie in (0, 1], got {}", q));
  }
  if (q == 1.0) {
    return 0.0;
  }
  if (shape_ == 1) {
    return -rho_ * std::log(q);
  }
  if (q > 0.5) {
    return inv_cdf(1.0 - q);
  }
  double lo = 0.0;
  double hi = mean();
  while (survival(hi) > q) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (survival(mid) > q ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double SnrModel::partial_moment(int order, double a, double b) const {
  if (order < 0 || order > 2) {
    throw std::domain_error("partial_moment supports orders 0, 1, 2");
  }
  require_nonnegative(a, "lower limit");
  if (!(b >= a)) {
    throw std::domain_error(fmt::format("empty interval [{}, {}]", a, b));
  }
  // int_a^b x^n f(x) dx = rho^n Gamma(s+n)/Gamma(s) [Q(s+n, a/rho) - Q(s+n, b/rho)]
  const double s = static_cast<double>(shape_ + order);
  double scale = 1.0;
  for (int i = 0; i < order; ++i) {
    scale *= rho_ * (shape_ + i);
  }
  const double qa = boost::math::gamma_q(s, a / rho_);
  const double qb = std::isinf(b) ? 0.0 : boost::math::gamma_q(s, b / rho_);
  return scale * (qa - qb);
}

double order_stat_cdf(const SnrModel& model, int num_users, int rank, double x) {
  require_rank(num_users, rank);
  const double f = model.cdf(x);
  if (rank == 1) {
    return std::pow(f, num_users);
  }
  if (f <= 0.0) {
    return 0.0;
  }
  if (f >= 1.0) {
    return 1.0;
  }
  // P{at least K - j + 1 of K users below x}
  return boost::math::ibeta(static_cast<double>(num_users - rank + 1),
                            static_cast<double>(rank), f);
}

double order_stat_pdf(const SnrModel& model, int num_users, int rank, double x) {
  require_rank(num_users, rank);
  const double density = model.pdf(x);
  const double f = model.cdf(x);
  if (rank == 1) {
    return num_users * density * std::pow(f, num_users - 1);
  }
  if (f <= 0.0) {
    // Only the minimum (rank K) has mass at the origin.
    return rank == num_users ? num_users * density : 0.0;
  }
  if (f >= 1.0) {
    return 0.0;
  }
  return density * boost::math::ibeta_derivative(static_cast<double>(num_users - rank + 1),
                                                 static_cast<double>(rank), f);
}

double RankDistribution::total() const {
  return std::accumulate(probs.begin(), probs.end(), 0.0);
}

int RankDistribution::most_probable() const {
  const auto it = std::max_element(probs.begin(), probs.end());
  return static_cast<int>(it - probs.begin()) + 1;
}

RankDistribution rank_probability_iid(const SnrModel& model, int num_users, double snr) {
  if (num_users < 1) {
    throw std::domain_error("need at least one user");
  }
  require_nonnegative(snr, "SNR");
  // Rank - 1 counts the other users above snr: Binomial(K - 1, 1 - F(snr)).
  const boost::math::binomial_distribution<double> above(num_users - 1, model.survival(snr));
  RankDistribution out;
  out.probs.resize(static_cast<std::size_t>(num_users));
  for (int p = 1; p <= num_users; ++p) {
    out.probs[static_cast<std::size_t>(p - 1)] = boost::math::pdf(above, p - 1);
  }
  return out;
}

namespace {

std::vector<double> other_cdf_values(std::span<const CdfFunction> cdfs, int user, double snr) {
  const int k = static_cast<int>(cdfs.size());
  if (user < 0 || user >= k) {
    throw std::domain_error(fmt::format("user index {} out of range for {} users", user, k));
  }
  require_nonnegative(snr, "SNR");
  std::vector<double> below;
  below.reserve(cdfs.size());
  for (int j = 0; j < k; ++j) {
    if (j != user) {
      const double v = cdfs[static_cast<std::size_t>(j)](snr);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::domain_error(fmt::format("CDF of user {} returned {}", j, v));
      }
      below.push_back(v);
    }
  }
  return below;
}

} // namespace

RankDistribution rank_probability_noniid(std::span<const CdfFunction> cdfs, int user, double snr) {
  const int k = static_cast<int>(cdfs.size());
  if (k > kMaxEnumeratedUsers) {
    throw CapacityError(fmt::format("subset enumeration is limited to {} users, got {}",
                                    kMaxEnumeratedUsers, k));
  }
  const std::vector<double> below = other_cdf_values(cdfs, user, snr);
  const int others = k - 1;

  RankDistribution out;
  out.probs.assign(static_cast<std::size_t>(k), 0.0);
  // Bit i set: other user i lies below snr. With m users below, the rank is K - m.
  for (unsigned mask = 0; mask < (1u << others); ++mask) {
    double term = 1.0;
    for (int i = 0; i < others; ++i) {
      const double fi = below[static_cast<std::size_t>(i)];
      term *= (mask >> i) & 1u ? fi : 1.0 - fi;
    }
    const int rank = k - std::popcount(mask);
    out.probs[static_cast<std::size_t>(rank - 1)] += term;
  }
  return out;
}

RankDistribution rank_probability_poisson_binomial(std::span<const CdfFunction> cdfs, int user,
                                                   double snr) {
  const std::vector<double> below = other_cdf_values(cdfs, user, snr);
  // count[m] = P{exactly m of the others below snr}
  std::vector<double> count(below.size() + 1, 0.0);
  count[0] = 1.0;
  for (std::size_t i = 0; i < below.size(); ++i) {
    for (std::size_t m = i + 1; m > 0; --m) {
      count[m] = count[m] * (1.0 - below[i]) + count[m - 1] * below[i];
    }
    count[0] *= 1.0 - below[i];
  }
  const int k = static_cast<int>(cdfs.size());
  RankDistribution out;
  out.probs.resize(static_cast<std::size_t>(k));
  for (int p = 1; p <= k; ++p) {
    out.probs[static_cast<std::size_t>(p - 1)] = count[static_cast<std::size_t>(k - p)];
  }
  return out;
}

double threshold(const SnrModel& model, int num_users, int j) {
  require_rank(num_users, j);
  if (j == num_users) {
    return 0.0;
  }
  if (model.is_exponential()) {
    return model.rho() * std::log(static_cast<double>(num_users) / j);
  }
  return model.inv_survival(static_cast<double>(j) / num_users);
}

ThresholdSet::ThresholdSet(SnrModel model, int num_users, std::vector<double> thresholds)
    : model_(model), num_users_(num_users), thresholds_(std::move(thresholds)) {
  if (thresholds_.empty()) {
    throw std::domain_error("a threshold set needs at least one region");
  }
  if (static_cast<int>(thresholds_.size()) > num_users_) {
    throw std::domain_error(fmt::format("{} regions exceed {} users", thresholds_.size(),
                                        num_users_));
  }
  for (std::size_t i = 0; i < thresholds_.size(); ++i) {
    if (!(thresholds_[i] >= 0.0) || (i > 0 && !(thresholds_[i] < thresholds_[i - 1]))) {
      throw std::domain_error("thresholds must be nonnegative and strictly decreasing");
    }
  }
}

double ThresholdSet::lower(int j) const {
  require_rank(num_regions(), j);
  return thresholds_[static_cast<std::size_t>(j - 1)];
}

double ThresholdSet::upper(int j) const {
  require_rank(num_regions(), j);
  return j == 1 ? kInfinity : thresholds_[static_cast<std::size_t>(j - 2)];
}

double ThresholdSet::region_mass(int j) const {
  return model_.survival(lower(j)) - model_.survival(upper(j));
}

double ThresholdSet::feedback_probability() const {
  return static_cast<double>(num_regions()) / num_users_;
}

int ThresholdSet::region_of(double snr) const {
  // First threshold (from the top) that snr reaches.
  const auto it = std::find_if(thresholds_.begin(), thresholds_.end(),
                               [snr](double t) { return snr >= t; });
  return it == thresholds_.end() ? 0 : static_cast<int>(it - thresholds_.begin()) + 1;
}

ThresholdSet make_thresholds(const SnrModel& model, int num_users, int num_regions) {
  if (num_regions < 1 || num_regions > num_users) {
    throw std::domain_error(fmt::format("need 1 <= N <= K (N={}, K={})", num_regions, num_users));
  }
  std::vector<double> t(static_cast<std::size_t>(num_regions));
  for (int j = 1; j <= num_regions; ++j) {
    t[static_cast<std::size_t>(j - 1)] = threshold(model, num_users, j);
  }
  return ThresholdSet(model, num_users, std::move(t));
}

int most_probable_rank(const SnrModel& model, int num_users, double snr) {
  if (num_users < 1) {
    throw std::domain_error("need at least one user");
  }
  require_nonnegative(snr, "SNR");
  // Initial guess from ceil(K (1 - F)), then settle against the exact table.
  const double guess = std::ceil(num_users * model.survival(snr));
  int j = std::clamp(static_cast<int>(guess), 1, num_users);
  while (j > 1 && snr >= threshold(model, num_users, j - 1)) {
    --j;
  }
  while (j < num_users && snr < threshold(model, num_users, j)) {
    ++j;
  }
  return j;
}

double expected_log_rate_of_max(const SnrModel& model, int num_users) {
  if (num_users < 1) {
    throw std::domain_error("need at least one user");
  }
  // P{max > u} <= n * survival(u); truncate where that bound reaches 1e-12.
  const double upper = model.inv_survival(std::min(1.0, 1e-12 / num_users));
  return integral(
      [&](double x) { return std::log2(1.0 + x) * order_stat_pdf(model, num_users, 1, x); }, 0.0,
      upper);
}

double expected_sum_rate_random_feedback(const SnrModel& model, int num_users,
                                         double feedback_probability, int transmit_antennas) {
  if (!(feedback_probability >= 0.0 && feedback_probability <= 1.0)) {
    throw std::domain_error(
        fmt::format("feedback probability must lie in [0, 1], got {}", feedback_probability));
  }
  if (num_users < 1 || transmit_antennas < 1) {
    throw std::domain_error("need K >= 1 and Mt >= 1");
  }
  const boost::math::binomial_distribution<double> reporters(num_users, feedback_probability);
  double per_beam = 0.0;
  for (int n = 1; n <= num_users; ++n) {
    const double w = boost::math::pdf(reporters, n);
    if (w > 1e-18) {
      per_beam += w * expected_log_rate_of_max(model, n);
    }
  }
  const double none = boost::math::pdf(reporters, 0);
  if (none > 0.0) {
    per_beam += none * expected_log_rate_of_max(model, 1);
  }
  return transmit_antennas * per_beam;
}

} // namespace mtfb
