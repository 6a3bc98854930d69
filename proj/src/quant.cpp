#include "mtfb/quant.hpp"

#include "mtfb/errors.hpp"
#include "mtfb/quadrature.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mtfb {

namespace {

/// F(x)^K, accurate when F is close to 1.
double max_cdf(const SnrModel& model, int num_users, double x) {
  if (std::isinf(x)) {
    return 1.0;
  }
  const double tail = model.survival(x);
  if (tail >= 1.0) {
    return 0.0;
  }
  return std::exp(num_users * std::log1p(-tail));
}

IntervalDensity exponential_density(double rho, double lower, double upper) {
  IntervalDensity d;
  d.lower = lower;
  d.upper = upper;
  d.scale = rho;
  d.mass = [rho](double a, double b) {
    const double head = std::exp(-a / rho);
    return std::isinf(b) ? head : head * -std::expm1(-(b - a) / rho);
  };
  d.centroid = [rho](double a, double b) {
    if (std::isinf(b)) {
      return a + rho;
    }
    const double w = b - a;
    const double y = w / rho;
    if (y < 1e-8) {
      return a + 0.5 * w;
    }
    return a + rho - w / std::expm1(y);
  };
  d.variance = [rho](double a, double b) {
    if (std::isinf(b)) {
      return rho * rho;
    }
    const double w = b - a;
    const double y = w / rho;
    if (y < 1e-3) {
      return w * w / 12.0 * (1.0 - y * y / 20.0);
    }
    const double em = std::expm1(-y);
    return rho * rho - w * w * std::exp(-y) / (em * em);
  };
  // Companding start: boundaries at quantiles of the density's cube root,
  // which for an exponential is again exponential with mean 3 rho.
  d.initial_point = [rho, lower, upper](double u) {
    const double s = 3.0 * rho;
    if (std::isinf(upper)) {
      return lower - s * std::log1p(-u);
    }
    return lower - s * std::log1p(u * std::expm1(-(upper - lower) / s));
  };
  return d;
}

IntervalDensity gamma_density(const SnrModel& model, double lower, double upper) {
  IntervalDensity d;
  d.lower = lower;
  d.upper = upper;
  d.scale = model.rho();
  d.mass = [model](double a, double b) { return model.partial_moment(0, a, b); };
  d.centroid = [model](double a, double b) {
    const double m0 = model.partial_moment(0, a, b);
    if (m0 <= 0.0) {
      return std::isinf(b) ? a : 0.5 * (a + b);
    }
    return model.partial_moment(1, a, b) / m0;
  };
  d.variance = [model](double a, double b) {
    const double m0 = model.partial_moment(0, a, b);
    if (m0 <= 0.0) {
      return 0.0;
    }
    const double c = model.partial_moment(1, a, b) / m0;
    return std::max(0.0, model.partial_moment(2, a, b) / m0 - c * c);
  };
  d.initial_point = [model, lower, upper](double u) {
    const double head = model.survival(lower);
    const double tail = std::isinf(upper) ? 0.0 : model.survival(upper);
    return model.inv_survival(head - u * (head - tail));
  };
  return d;
}

} // namespace

IntervalDensity truncated_density(const SnrModel& model, double lower, double upper) {
  if (!(lower >= 0.0) || !(upper > lower)) {
    throw std::domain_error(fmt::format("invalid region [{}, {})", lower, upper));
  }
  return model.is_exponential() ? exponential_density(model.rho(), lower, upper)
                                : gamma_density(model, lower, upper);
}

IntervalDensity uniform_density(double lower, double upper) {
  if (!(upper > lower) || std::isinf(upper)) {
    throw std::domain_error("uniform density needs a finite nonempty interval");
  }
  IntervalDensity d;
  d.lower = lower;
  d.upper = upper;
  d.scale = upper - lower;
  const double width = upper - lower;
  d.mass = [width](double a, double b) { return (b - a) / width; };
  d.centroid = [](double a, double b) { return 0.5 * (a + b); };
  d.variance = [](double a, double b) { return (b - a) * (b - a) / 12.0; };
  d.initial_point = [lower, width](double u) { return lower + u * width; };
  return d;
}

IntervalDensity numeric_density(std::function<double(double)> cdf,
                                std::function<double(double)> pdf, double lower, double upper,
                                double scale) {
  if (!(upper > lower)) {
    throw std::domain_error("numeric density needs a nonempty interval");
  }
  // Effective end of an unbounded support.
  double end = upper;
  if (std::isinf(upper)) {
    end = std::max(lower, scale);
    while (1.0 - cdf(end) > 1e-15) {
      end = lower + 2.0 * (end - lower) + scale;
    }
  }
  const auto clip = [end](double b) { return std::min(b, end); };

  IntervalDensity d;
  d.lower = lower;
  d.upper = upper;
  d.scale = scale;
  d.mass = [cdf](double a, double b) { return (std::isinf(b) ? 1.0 : cdf(b)) - cdf(a); };
  d.centroid = [=](double a, double b) {
    const double hi = clip(b);
    const double m0 = integral(pdf, a, hi, 1e-10);
    if (m0 <= 0.0) {
      return 0.5 * (a + hi);
    }
    return integral([&](double x) { return x * pdf(x); }, a, hi, 1e-10) / m0;
  };
  d.variance = [=](double a, double b) {
    const double hi = clip(b);
    const double m0 = integral(pdf, a, hi, 1e-10);
    if (m0 <= 0.0) {
      return 0.0;
    }
    const double c = integral([&](double x) { return x * pdf(x); }, a, hi, 1e-10) / m0;
    return integral([&](double x) { return (x - c) * (x - c) * pdf(x); }, a, hi, 1e-10) / m0;
  };
  d.initial_point = [=](double u) {
    const double lo_p = cdf(lower);
    const double hi_p = std::isinf(upper) ? 1.0 : cdf(upper);
    const double target = lo_p + u * (hi_p - lo_p);
    double lo = lower;
    double hi = end;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      (cdf(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  return d;
}

int RegionQuantizer::cell_of(double x) const {
  const auto it = std::upper_bound(levels.begin() + 1, levels.end() - 1, x);
  return static_cast<int>(it - (levels.begin() + 1));
}

namespace {

/// One Lloyd map: interior boundaries to midpoints of adjacent centroids.
/// Returns the largest boundary move.
double lloyd_map(const IntervalDensity& density, const std::vector<double>& levels,
                 std::vector<double>& centroids, std::vector<double>& next) {
  const std::size_t n = centroids.size();
  for (std::size_t i = 0; i < n; ++i) {
    centroids[i] = density.centroid(levels[i], levels[i + 1]);
  }
  next = levels;
  double largest = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    next[i] = 0.5 * (centroids[i - 1] + centroids[i]);
    largest = std::max(largest, std::abs(next[i] - levels[i]));
  }
  return largest;
}

/// Newton step on G(t) = T(t) - t, T the Lloyd map. G's Jacobian is
/// tridiagonal; centroid derivatives come from central differences.
/// Returns false if the system is singular or the step breaks the ordering.
bool newton_step(const IntervalDensity& density, const std::vector<double>& levels,
                 const std::vector<double>& mapped, std::vector<double>& out) {
  const std::size_t n = levels.size() - 1;  // cells
  const std::size_t m = n - 1;              // unknowns t_1 .. t_{n-1}
  // d centroid(cell) / d lower edge, / d upper edge.
  std::vector<double> d_lo(n, 0.0);
  std::vector<double> d_hi(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    const double a = levels[c];
    const double b = levels[c + 1];
    const double width = std::isinf(b) ? density.scale : b - a;
    const double h = 1e-6 * std::min(width, density.scale);
    if (c > 0) {
      d_lo[c] = (density.centroid(a + h, b) - density.centroid(a - h, b)) / (2 * h);
    }
    if (c + 1 < n) {
      d_hi[c] = (density.centroid(a, b + h) - density.centroid(a, b - h)) / (2 * h);
    }
  }
  // Row i (boundary t_{i+1}) of J - I.
  std::vector<double> lower(m, 0.0);
  std::vector<double> diag(m, 0.0);
  std::vector<double> upper(m, 0.0);
  std::vector<double> rhs(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t left = i;       // cell below t_{i+1}
    const std::size_t right = i + 1;  // cell above
    lower[i] = 0.5 * d_lo[left];
    diag[i] = 0.5 * (d_hi[left] + d_lo[right]) - 1.0;
    upper[i] = 0.5 * d_hi[right];
    rhs[i] = -(mapped[i + 1] - levels[i + 1]);
  }
  // Thomas algorithm.
  for (std::size_t i = 1; i < m; ++i) {
    const double w = lower[i] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  std::vector<double> delta(m);
  for (std::size_t i = m; i-- > 0;) {
    const double tail = i + 1 < m ? upper[i] * delta[i + 1] : 0.0;
    delta[i] = (rhs[i] - tail) / diag[i];
    if (!std::isfinite(delta[i])) {
      return false;
    }
  }
  out = levels;
  for (std::size_t i = 0; i < m; ++i) {
    out[i + 1] = levels[i + 1] + delta[i];
  }
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (!(out[i] > out[i - 1])) {
      return false;
    }
  }
  return true;
}

} // namespace

RegionQuantizer lloyd_max(const IntervalDensity& density, int bits, int region_index) {
  if (bits < 0 || bits > 24) {
    throw std::domain_error(fmt::format("quantizer bits must lie in [0, 24], got {}", bits));
  }
  const std::size_t n = std::size_t{1} << bits;
  RegionQuantizer q;
  q.region_index = region_index;
  q.bits = bits;
  q.levels.resize(n + 1);
  q.levels.front() = density.lower;
  q.levels.back() = density.upper;
  for (std::size_t i = 1; i < n; ++i) {
    q.levels[i] = density.initial_point(static_cast<double>(i) / static_cast<double>(n));
  }
  q.centroids.resize(n);
  if (n == 1) {
    q.centroids[0] = density.centroid(q.levels[0], q.levels[1]);
    return q;
  }

  const double tolerance = 1e-9 * density.scale;
  std::vector<double> mapped;
  std::vector<double> trial;
  std::vector<double> trial_centroids(n);
  std::vector<double> trial_mapped;
  double move = lloyd_map(density, q.levels, q.centroids, mapped);
  while (move >= tolerance) {
    if (q.iterations >= kLloydMaxIterations) {
      throw NumericError(fmt::format(
          "Lloyd iteration on [{}, {}) with {} bits did not converge after {} iterations "
          "(last move {}, tolerance {}; last interior levels {} .. {})",
          density.lower, density.upper, bits, q.iterations, move, tolerance, q.levels[1],
          q.levels[n - 1]));
    }
    ++q.iterations;
    // Prefer the Newton point when it shrinks the fixed-point residual;
    // otherwise take the plain Lloyd step.
    if (newton_step(density, q.levels, mapped, trial)) {
      const double trial_move = lloyd_map(density, trial, trial_centroids, trial_mapped);
      if (trial_move < move) {
        q.levels.swap(trial);
        q.centroids.swap(trial_centroids);
        mapped.swap(trial_mapped);
        move = trial_move;
        continue;
      }
    }
    q.levels.swap(mapped);
    move = lloyd_map(density, q.levels, q.centroids, mapped);
  }
  return q;
}

RegionQuantizer lloyd_max(const SnrModel& model, double lower, double upper, int bits,
                          int region_index) {
  return lloyd_max(truncated_density(model, lower, upper), bits, region_index);
}

double quantizer_mse(const IntervalDensity& density, const RegionQuantizer& q) {
  double weighted = 0.0;
  double total = 0.0;
  for (int t = 0; t < q.cells(); ++t) {
    const double a = q.levels[static_cast<std::size_t>(t)];
    const double b = q.levels[static_cast<std::size_t>(t + 1)];
    const double m = density.mass(a, b);
    // Centroid reconstruction: cell MSE equals the conditional cell variance.
    weighted += m * density.variance(a, b);
    total += m;
  }
  return weighted / total;
}

int BitAllocation::expected_load(int transmit_antennas) const {
  return transmit_antennas * (num_regions() * rank_bits + budget);
}

int rank_bits_for(int num_regions) {
  if (num_regions < 1) {
    throw std::domain_error("need at least one region");
  }
  int bits = 0;
  while ((1 << bits) < num_regions) {
    ++bits;
  }
  return bits;
}

BitAllocation make_allocation(std::vector<int> bits) {
  if (bits.empty()) {
    throw std::domain_error("allocation needs at least one region");
  }
  if (std::any_of(bits.begin(), bits.end(), [](int b) { return b < 0; })) {
    throw std::domain_error("bit counts must be nonnegative");
  }
  BitAllocation out;
  out.rank_bits = rank_bits_for(static_cast<int>(bits.size()));
  out.budget = std::accumulate(bits.begin(), bits.end(), 0);
  out.bits = std::move(bits);
  return out;
}

double region_variance(const SnrModel& model, const ThresholdSet& thresholds, int j) {
  if (!model.is_exponential()) {
    throw std::domain_error("region variance is defined for the exponential model");
  }
  const double a = thresholds.lower(j);
  const double b = thresholds.upper(j);
  return truncated_density(model, a, b).variance(a, b);
}

std::vector<double> region_variances(const SnrModel& model, const ThresholdSet& thresholds) {
  std::vector<double> out;
  for (int j = 1; j <= thresholds.num_regions(); ++j) {
    out.push_back(region_variance(model, thresholds, j));
  }
  return out;
}

std::vector<RegionQuantizer> build_quantizers(const ThresholdSet& thresholds,
                                              const BitAllocation& alloc) {
  if (alloc.num_regions() != thresholds.num_regions()) {
    throw std::domain_error(fmt::format("allocation has {} regions, thresholds have {}",
                                        alloc.num_regions(), thresholds.num_regions()));
  }
  std::vector<RegionQuantizer> out;
  for (int j = 1; j <= thresholds.num_regions(); ++j) {
    out.push_back(lloyd_max(thresholds.model(), thresholds.lower(j), thresholds.upper(j),
                            alloc.bits[static_cast<std::size_t>(j - 1)], j));
  }
  return out;
}

double region_rate(const SnrModel& model, int num_users, int transmit_antennas,
                   const RegionQuantizer& q) {
  double sum = 0.0;
  double below = max_cdf(model, num_users, q.levels.front());
  for (int t = 0; t < q.cells(); ++t) {
    const double above = max_cdf(model, num_users, q.levels[static_cast<std::size_t>(t + 1)]);
    sum += std::log2(1.0 + q.levels[static_cast<std::size_t>(t)]) * (above - below);
    below = above;
  }
  return transmit_antennas * sum;
}

double quantized_rate_lower_bound(const SnrModel& model, int num_users, int transmit_antennas,
                                  const ThresholdSet& thresholds, const BitAllocation& alloc,
                                  std::span<const RegionQuantizer> quantizers) {
  if (static_cast<int>(quantizers.size()) != thresholds.num_regions() ||
      alloc.num_regions() != thresholds.num_regions()) {
    throw std::domain_error("quantizers, allocation and thresholds disagree on region count");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < quantizers.size(); ++j) {
    if (quantizers[j].bits != alloc.bits[j]) {
      throw std::domain_error(fmt::format("region {} quantizer has {} bits, allocation says {}",
                                          j + 1, quantizers[j].bits, alloc.bits[j]));
    }
    total += region_rate(model, num_users, transmit_antennas, quantizers[j]);
  }
  return total;
}

double quantized_rate_lower_bound(const ThresholdSet& thresholds, int transmit_antennas,
                                  const BitAllocation& alloc) {
  const auto quantizers = build_quantizers(thresholds, alloc);
  return quantized_rate_lower_bound(thresholds.model(), thresholds.num_users(), transmit_antennas,
                                    thresholds, alloc, quantizers);
}

namespace {

/// rate[j][b]: region j+1's contribution with b bits, built on demand.
class RegionRateTable {
public:
  RegionRateTable(const ThresholdSet& thresholds, int transmit_antennas)
      : thresholds_(thresholds), transmit_antennas_(transmit_antennas),
        rates_(static_cast<std::size_t>(thresholds.num_regions())) {}

  double operator()(int region, int bits) {
    auto& row = rates_[static_cast<std::size_t>(region - 1)];
    while (static_cast<int>(row.size()) <= bits) {
      const auto q = lloyd_max(thresholds_.model(), thresholds_.lower(region),
                               thresholds_.upper(region), static_cast<int>(row.size()), region);
      row.push_back(region_rate(thresholds_.model(), thresholds_.num_users(),
                                transmit_antennas_, q));
    }
    return row[static_cast<std::size_t>(bits)];
  }

private:
  const ThresholdSet& thresholds_;
  int transmit_antennas_;
  std::vector<std::vector<double>> rates_;
};

} // namespace

BitAllocation greedy_allocate(const ThresholdSet& thresholds, int transmit_antennas, int budget) {
  if (budget < 0) {
    throw std::domain_error("bit budget must be nonnegative");
  }
  const int n = thresholds.num_regions();
  RegionRateTable rate(thresholds, transmit_antennas);
  std::vector<int> bits(static_cast<std::size_t>(n), 0);
  for (int s = 1; s <= budget; ++s) {
    int best = 1;
    double best_gain = -kInfinity;
    for (int l = 1; l <= n; ++l) {
      const int b = bits[static_cast<std::size_t>(l - 1)];
      const double gain = rate(l, b + 1) - rate(l, b);
      if (gain > best_gain) {
        best_gain = gain;
        best = l;
      }
    }
    ++bits[static_cast<std::size_t>(best - 1)];
  }
  return make_allocation(std::move(bits));
}

BitAllocation exhaustive_allocate(const ThresholdSet& thresholds, int transmit_antennas,
                                  int budget) {
  if (budget < 0) {
    throw std::domain_error("bit budget must be nonnegative");
  }
  const int n = thresholds.num_regions();
  RegionRateTable rate(thresholds, transmit_antennas);

  std::vector<int> current(static_cast<std::size_t>(n), 0);
  std::vector<int> best;
  double best_rate = -kInfinity;
  // Enumerate compositions in reverse-lexicographic order of the tail.
  const std::function<void(int, int)> visit = [&](int index, int remaining) {
    if (index == n - 1) {
      current[static_cast<std::size_t>(index)] = remaining;
      double total = 0.0;
      for (int j = 0; j < n; ++j) {
        total += rate(j + 1, current[static_cast<std::size_t>(j)]);
      }
      if (total > best_rate) {
        best_rate = total;
        best = current;
      }
      return;
    }
    for (int b = 0; b <= remaining; ++b) {
      current[static_cast<std::size_t>(index)] = b;
      visit(index + 1, remaining - b);
    }
  };
  visit(0, budget);
  return make_allocation(std::move(best));
}

std::vector<double> fast_allocate_real(std::span<const double> variances, int budget,
                                       FastRule rule) {
  if (variances.empty()) {
    throw std::domain_error("need at least one region variance");
  }
  if (std::any_of(variances.begin(), variances.end(), [](double v) { return !(v > 0.0); })) {
    throw std::domain_error("region variances must be positive");
  }
  if (budget < 0) {
    throw std::domain_error("bit budget must be nonnegative");
  }
  const std::size_t n = variances.size();
  std::vector<double> bits(n, 0.0);

  if (rule == FastRule::ClosedForm) {
    const double ln4 = std::log(4.0);
    const double ln10 = std::log(10.0);
    std::vector<double> t(n);
    for (std::size_t j = 0; j < n; ++j) {
      t[j] = std::log(ln4 * variances[j]) / ln10;
    }
    const double v = budget * ln4 / ln10;
    const double w = (std::accumulate(t.begin(), t.end(), 0.0) - v) / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
      if (w > t[j]) {
        bits[j] = 0.0;
      } else if (w < t[j] - v) {
        bits[j] = budget;
      } else {
        bits[j] = (t[j] - w) * ln10 / ln4;
      }
    }
    return bits;
  }

  // Stationarity of sum sigma^2 2^{-b} under sum b = B: log2 sigma_j^2 - b_j
  // is equal across the free set. Components driven negative are clamped at
  // zero; they stay clamped as the level only rises.
  std::vector<double> level(n);
  for (std::size_t j = 0; j < n; ++j) {
    level[j] = std::log2(variances[j]);
  }
  std::vector<bool> free(n, true);
  for (;;) {
    double sum_level = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (free[j]) {
        sum_level += level[j];
        ++count;
      }
    }
    const double water = (sum_level - budget) / static_cast<double>(count);
    bool clamped = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (free[j]) {
        bits[j] = level[j] - water;
        if (bits[j] < 0.0) {
          bits[j] = 0.0;
          free[j] = false;
          clamped = true;
        }
      }
    }
    if (!clamped) {
      break;
    }
  }
  for (double& b : bits) {
    b = std::min(b, static_cast<double>(budget));
  }
  return bits;
}

std::vector<int> round_preserving_sum(std::span<const double> values, int total) {
  const std::size_t n = values.size();
  std::vector<int> out(n);
  std::vector<double> remainder(n);
  int sum = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double v = std::max(0.0, values[j]);
    out[j] = static_cast<int>(std::floor(v));
    remainder[j] = v - out[j];
    sum += out[j];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Largest remainder first; ties to the smaller index.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; sum < total; i = (i + 1) % n) {
    ++out[order[i]];
    ++sum;
  }
  // Only reachable when the real values overshoot the total.
  for (std::size_t i = n; sum > total;) {
    i = i == 0 ? n - 1 : i - 1;
    if (out[order[i]] > 0) {
      --out[order[i]];
      --sum;
    }
  }
  return out;
}

BitAllocation fast_allocate(std::span<const double> variances, int budget, FastRule rule) {
  const auto real = fast_allocate_real(variances, budget, rule);
  return make_allocation(round_preserving_sum(real, budget));
}

double quantization_error_bound(double variance, int bits, double epsilon) {
  if (bits < 0 || !(epsilon > 0.0)) {
    throw std::domain_error("need bits >= 0 and epsilon > 0");
  }
  return epsilon * epsilon * variance / std::ldexp(1.0, bits);
}

} // namespace mtfb
