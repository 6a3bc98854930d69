#pragma once

#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace mtfb {

/// Distribution of the post-ZF SNR on one beam: a scaled chi-square with
/// 2*shape degrees of freedom, i.e. Gamma(shape, rho). shape = Mr - Mt + 1;
/// shape == 1 is the exponential case with mean rho. All values are linear SNR.
class SnrModel {
public:
  explicit SnrModel(double rho, int shape = 1);

  /// Model for a Mr x Mt ZF receiver with per-beam SNR rho (requires Mr >= Mt).
  static SnrModel for_antennas(double rho, int receive_antennas, int transmit_antennas);

  double rho() const noexcept { return rho_; }
  int shape() const noexcept { return shape_; }
  bool is_exponential() const noexcept { return shape_ == 1; }
  double mean() const noexcept { return rho_ * shape_; }

  double pdf(double x) const;
  double cdf(double x) const;
  /// 1 - cdf(x), computed without cancellation in the upper tail.
  double survival(double x) const;

  /// x with cdf(x) = u, u in [0, 1).
  double inv_cdf(double u) const;
  /// x with survival(x) = q, q in (0, 1]. Accurate for tiny q.
  double inv_survival(double q) const;

  /// Integral of x^order * pdf(x) over [a, b]; order in {0, 1, 2}, b may be +inf.
  double partial_moment(int order, double a, double b) const;

  /// Effective upper end of the support used for truncated quadrature.
  double support_limit() const { return inv_survival(1e-12); }

  bool operator==(const SnrModel&) const = default;

private:
  double rho_;
  int shape_;
};

double order_stat_cdf(const SnrModel& model, int num_users, int rank, double x);
double order_stat_pdf(const SnrModel& model, int num_users, int rank, double x);

/// Conditional rank distribution of one user given its own SNR.
/// probs[p - 1] = P{user is ranked p-th | its SNR}.
struct RankDistribution {
  std::vector<double> probs;

  double total() const;
  /// 1-based argmax; ties resolve to the smaller rank.
  int most_probable() const;
};

RankDistribution rank_probability_iid(const SnrModel& model, int num_users, double snr);

using CdfFunction = std::function<double(double)>;

/// Largest user count accepted by the subset-enumeration path.
inline constexpr int kMaxEnumeratedUsers = 12;

/// Rank distribution of user `user` among independent users with distinct
/// CDFs, by enumerating which of the other users fall below `snr`.
/// Throws CapacityError when cdfs.size() > kMaxEnumeratedUsers.
RankDistribution rank_probability_noniid(std::span<const CdfFunction> cdfs, int user, double snr);

/// Same quantity by the Poisson-binomial recursion; no size limit.
RankDistribution rank_probability_poisson_binomial(std::span<const CdfFunction> cdfs, int user,
                                                   double snr);

/// r_th,j: the SNR at which ranks j and j+1 are equally likely (cdf = 1 - j/K).
double threshold(const SnrModel& model, int num_users, int j);

/// Region boundaries r_th,1 > ... > r_th,N for K users. Region j is
/// [r_th,j, r_th,j-1) with r_th,0 = +inf.
class ThresholdSet {
public:
  ThresholdSet(SnrModel model, int num_users, std::vector<double> thresholds);

  const std::vector<double>& thresholds() const noexcept { return thresholds_; }
  const SnrModel& model() const noexcept { return model_; }
  int num_users() const noexcept { return num_users_; }
  int num_regions() const noexcept { return static_cast<int>(thresholds_.size()); }

  /// Lower edge r_th,j of region j (1-based).
  double lower(int j) const;
  /// Upper edge r_th,j-1 of region j; +inf for j = 1.
  double upper(int j) const;
  double lowest() const { return thresholds_.back(); }

  /// Probability mass of region j under the model.
  double region_mass(int j) const;
  /// N / K.
  double feedback_probability() const;
  /// Region index containing snr, or 0 when snr < r_th,N.
  int region_of(double snr) const;

private:
  SnrModel model_;
  int num_users_;
  std::vector<double> thresholds_;
};

ThresholdSet make_thresholds(const SnrModel& model, int num_users, int num_regions);

/// argmax_p of the iid rank distribution, computed via the full K-region
/// threshold table. Exact ties at a threshold go to the smaller rank.
int most_probable_rank(const SnrModel& model, int num_users, double snr);

/// E{log2(1 + X_(1)^n)}: mean rate of the best of n users on one beam.
double expected_log_rate_of_max(const SnrModel& model, int num_users);

/// Sum rate when each user feeds back independently with probability p_f and
/// the BS schedules the best reporter (random user if nobody reports).
double expected_sum_rate_random_feedback(const SnrModel& model, int num_users,
                                         double feedback_probability, int transmit_antennas);

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

} // namespace mtfb
