#pragma once

#include "mtfb/stats.hpp"

namespace mtfb {

/// A closed-form alternating sum paired with its quadrature twin.
/// `value` is what callers should use: the closed form when it agrees with
/// the twin, the twin otherwise (or when K is above kClosedFormMaxUsers).
struct CheckedValue {
  double value = 0.0;
  double closed_form = 0.0;
  double quadrature = 0.0;
  bool closed_form_used = false;
  /// Closed form was evaluated but disagreed with the twin beyond 1e-4 relative.
  bool cancellation_detected = false;
};

/// Above this user count the quadrature twin is authoritative.
inline constexpr int kClosedFormMaxUsers = 200;

/// Relative disagreement that marks the alternating sum as numerically lost.
inline constexpr double kCancellationTolerance = 1e-4;

struct LossAnalysis {
  int num_users = 0;
  int num_regions = 0;
  SnrModel model{1.0};
  int transmit_antennas = 0;
  double p_loss = 0.0;
  double gap_mean = 0.0;
  double loss_upper_bound = 0.0;
  bool gap_fallback = false;
};

struct IncrementAnalysis {
  int num_users = 0;
  int num_regions = 0;
  SnrModel model{1.0};
  int transmit_antennas = 0;
  double p_inc = 0.0;
  double upper = 0.0;
  double lower = 0.0;
  /// E{X_(1) | r_th,N+1 <= X_(1) < r_th,N}
  CheckedValue mean_best;
  /// E{X_k | same event}, X_k the randomly scheduled user.
  double mean_random = 0.0;

  bool ordered() const { return lower <= upper; }
};

struct Envelopes {
  double lower = 0.0;  ///< R_L(K, N)
  double upper = 0.0;  ///< R_U(K, N)
  double limit_fraction = 0.0;  ///< 1 - e^{-N}
};

/// P_L = P{all K users below r_th,N} = (1 - N/K)^K.
double rate_loss_probability(int num_users, int num_regions);

/// E{X_(1) - X_k | X_(1) < r_th,N} for the exponential model, closed form
/// checked against quadrature. Requires N < K.
CheckedValue conditional_gap_below_threshold(const SnrModel& model, int num_users,
                                             int num_regions);

/// M_t log2(1 + gap) P_L; zero when N == K.
double rate_loss_upper_bound(const SnrModel& model, int num_users, int num_regions,
                             int transmit_antennas);

LossAnalysis analyze_loss(const SnrModel& model, int num_users, int num_regions,
                          int transmit_antennas);

/// Exact sum-rate loss versus always-feedback, by quadrature.
double rate_loss_exact(const SnrModel& model, int num_users, int num_regions,
                       int transmit_antennas);

/// Smallest N in [1, K] whose loss bound is within tolerance (K if none).
int min_regions(const SnrModel& model, int num_users, int transmit_antennas,
                double tolerable_loss);

/// P_I = ((K - N)/K)^K - ((K - N - 1)/K)^K.
double increment_probability(int num_users, int num_regions);

/// Upper and lower bounds on the rate gained going from N to N + 1 regions.
IncrementAnalysis increment_bounds(const SnrModel& model, int num_users, int num_regions,
                                   int transmit_antennas);

/// Exact rate gained going from N to N + 1 regions, by quadrature.
double rate_increment_exact(const SnrModel& model, int num_users, int num_regions,
                            int transmit_antennas);

Envelopes asymptotic_envelopes(const SnrModel& model, int num_users, int num_regions,
                               int transmit_antennas);

namespace detail {

/// Closed-form gap as a function of the feedback fraction q = N/K in (0, 1).
/// Evaluated in 100-digit arithmetic.
double gap_closed_form(double rho, int num_users, double fraction);

/// Quadrature twin of the gap below an arbitrary threshold (may be +inf).
double gap_quadrature(const SnrModel& model, int num_users, double threshold);

/// int_a^b x K f(x) F(x)^{K-1} dx for the exponential model as the
/// alternating sum over t = 0..K-1, with the limits given through their tail
/// masses e^{-a/rho} = low_count/K and e^{-b/rho} = high_count/K
/// (high_count = 0 means b = +inf). Evaluated in 100-digit arithmetic.
double max_first_moment_closed_form(double rho, int num_users, int low_count, int high_count);

} // namespace detail

} // namespace mtfb
