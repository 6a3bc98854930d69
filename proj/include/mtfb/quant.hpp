#pragma once

#include "mtfb/stats.hpp"

#include <functional>
#include <span>
#include <vector>

namespace mtfb {

/// A density restricted to [lower, upper), described by the per-cell
/// quantities Lloyd iteration needs. `upper` may be +inf.
struct IntervalDensity {
  double lower = 0.0;
  double upper = kInfinity;
  /// Length scale for the convergence test (rho for SNR densities).
  double scale = 1.0;
  std::function<double(double, double)> mass;      ///< int_a^b f
  std::function<double(double, double)> centroid;  ///< E{X | a <= X < b}
  std::function<double(double, double)> variance;  ///< Var{X | a <= X < b}
  /// Initial boundary placement: maps u in (0, 1) to a point of the interval.
  std::function<double(double)> initial_point;
};

/// The SNR model conditioned on [lower, upper).
IntervalDensity truncated_density(const SnrModel& model, double lower, double upper);
/// Uniform density on a finite interval.
IntervalDensity uniform_density(double lower, double upper);
/// Arbitrary density given by cdf/pdf; moments by quadrature.
IntervalDensity numeric_density(std::function<double(double)> cdf,
                                std::function<double(double)> pdf, double lower, double upper,
                                double scale);

/// Scalar quantizer of one region: 2^bits cells bounded by `levels`
/// (levels.front() = region lower edge, levels.back() = region upper edge).
struct RegionQuantizer {
  int region_index = 0;
  int bits = 0;
  std::vector<double> levels;
  std::vector<double> centroids;
  int iterations = 0;

  int cells() const { return static_cast<int>(levels.size()) - 1; }
  /// 0-based cell containing x (clamped to the first/last cell).
  int cell_of(double x) const;
  double cell_lower(int cell) const { return levels[static_cast<std::size_t>(cell)]; }
};

inline constexpr int kLloydMaxIterations = 10000;

/// MSE-optimal quantizer by Lloyd iteration. Converged when the largest
/// boundary move is below 1e-9 * density.scale. Throws NumericError after
/// kLloydMaxIterations without convergence.
RegionQuantizer lloyd_max(const IntervalDensity& density, int bits, int region_index = 0);
RegionQuantizer lloyd_max(const SnrModel& model, double lower, double upper, int bits,
                          int region_index = 0);

/// Mean squared error of `q` under `density`, conditional on the interval.
double quantizer_mse(const IntervalDensity& density, const RegionQuantizer& q);

struct BitAllocation {
  std::vector<int> bits;  ///< b_1..b_N
  int rank_bits = 0;      ///< ceil(log2 N)
  int budget = 0;         ///< B_Q = sum(bits)

  int num_regions() const { return static_cast<int>(bits.size()); }
  /// M_t (N B_R + B_Q): average feedback bits per scheduling instant.
  int expected_load(int transmit_antennas) const;

  bool operator==(const BitAllocation&) const = default;
};

int rank_bits_for(int num_regions);
BitAllocation make_allocation(std::vector<int> bits);

/// Conditional variance of the SNR in region j (exponential model).
double region_variance(const SnrModel& model, const ThresholdSet& thresholds, int j);
std::vector<double> region_variances(const SnrModel& model, const ThresholdSet& thresholds);

/// Lloyd-Max quantizers for every region of `thresholds` under `alloc`.
std::vector<RegionQuantizer> build_quantizers(const ThresholdSet& thresholds,
                                              const BitAllocation& alloc);

/// Contribution of one quantized region to the rate lower bound:
/// M_t sum_t log2(1 + l_t) [F^K(l_{t+1}) - F^K(l_t)].
double region_rate(const SnrModel& model, int num_users, int transmit_antennas,
                   const RegionQuantizer& q);

/// Lower bound on the sum rate with rank + quantized-SNR feedback.
double quantized_rate_lower_bound(const SnrModel& model, int num_users, int transmit_antennas,
                                  const ThresholdSet& thresholds, const BitAllocation& alloc,
                                  std::span<const RegionQuantizer> quantizers);
/// Same, building the Lloyd-Max quantizers internally.
double quantized_rate_lower_bound(const ThresholdSet& thresholds, int transmit_antennas,
                                  const BitAllocation& alloc);

/// Assigns the budget one bit at a time to the region with the largest rate
/// gain; ties go to the smaller region index.
BitAllocation greedy_allocate(const ThresholdSet& thresholds, int transmit_antennas, int budget);

/// Best allocation by enumerating every composition of the budget.
BitAllocation exhaustive_allocate(const ThresholdSet& thresholds, int transmit_antennas,
                                  int budget);

enum class FastRule {
  /// Minimize sum sigma_j^2 2^{-b_j} exactly (active-set water-filling).
  WaterFilling,
  /// Closed form derived from sigma_j^2 2^{-2 b_j}, clamped to [0, B_Q].
  ClosedForm,
};

/// Real-valued allocation before rounding.
std::vector<double> fast_allocate_real(std::span<const double> variances, int budget,
                                       FastRule rule = FastRule::WaterFilling);
/// Rounded to nonnegative integers summing to the budget (largest remainder).
BitAllocation fast_allocate(std::span<const double> variances, int budget,
                            FastRule rule = FastRule::WaterFilling);
std::vector<int> round_preserving_sum(std::span<const double> values, int total);

/// epsilon^2 sigma^2 / 2^bits.
double quantization_error_bound(double variance, int bits, double epsilon = 1.0);

} // namespace mtfb
