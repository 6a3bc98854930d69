#pragma once

#include "mtfb/channel.hpp"
#include "mtfb/quant.hpp"
#include "mtfb/rng.hpp"
#include "mtfb/stats.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mtfb {

enum class SchemeTag { A, B, C, D };

/// How Scheme C splits its refinement budget across regions.
enum class AllocationRule { Fixed, Greedy, Fast, FastClosedForm };

/// Where Scheme D takes its single feedback threshold from.
enum class ThresholdSource { FixedOutage, SchemeCLowest };

char tag_letter(SchemeTag tag);

/// K-independent description of a feedback scheme.
struct SchemeSpec {
  SchemeTag tag = SchemeTag::C;
  std::string name;

  /// B_Q,A / B_Q,B / B_Q,D
  int snr_bits = 5;

  // Scheme C (and Scheme D's companion threshold set).
  int regions = 4;
  int budget = 5;
  AllocationRule allocation = AllocationRule::Fast;
  std::vector<int> fixed_bits;

  // Scheme D.
  ThresholdSource threshold_source = ThresholdSource::FixedOutage;
  double outage_probability = 0.1;

  static SchemeSpec full_feedback(int snr_bits);
  static SchemeSpec best_beam(int snr_bits);
  static SchemeSpec multi_threshold(int regions, int budget, AllocationRule rule);
  static SchemeSpec multi_threshold_fixed(std::vector<int> bits);
  static SchemeSpec single_threshold_outage(int snr_bits, double outage_probability);
  static SchemeSpec single_threshold_lowest(int snr_bits, int regions);

  void validate() const;

  bool operator==(const SchemeSpec&) const = default;
};

struct SchemeDThreshold {
  double value = 0.0;
  /// Above the model's effective support: nobody will ever report.
  bool degenerate = false;
};

SchemeDThreshold derive_scheme_d_threshold(const SnrModel& model, int num_users,
                                           const SchemeSpec& spec);

/// A scheme specialized to (model, K, Mt): thresholds, bit allocation and
/// quantizers are fixed here, once per K.
struct PreparedScheme {
  SchemeSpec spec;
  SnrModel model{1.0};
  int num_users = 0;
  int num_beams = 0;

  std::optional<ThresholdSet> thresholds;  ///< Scheme C
  BitAllocation allocation;                ///< Scheme C
  /// Scheme C: one per region. A/B/D: a single SNR quantizer.
  std::vector<RegionQuantizer> quantizers;
  SchemeDThreshold feedback_threshold;     ///< Scheme D
  int index_bits = 0;                      ///< Scheme B: ceil(log2 Mt)
};

PreparedScheme prepare_scheme(const SchemeSpec& spec, const SnrModel& model, int num_users,
                              int num_beams);

struct TrialOutcome {
  std::vector<int> scheduled;
  /// log2(1 + true SNR of the scheduled user).
  std::vector<double> genie_rate;
  /// log2(1 + lower edge of the winning reported cell); the true rate on
  /// beams where nobody reported.
  std::vector<double> robust_rate;
  long feedback_bits = 0;
  /// Same count without Scheme B's beam-index bits.
  long feedback_bits_no_index = 0;
  int outages = 0;

  double genie_sum() const;
  double robust_sum() const;
};

TrialOutcome run_trial(const PreparedScheme& scheme, const SnrTable& snr, Rng& rng);

/// Sum over beams of log2(1 + best SNR): every user always reports exactly.
double full_csi_rate(const SnrTable& snr);

enum class SamplingPath { Direct, ZeroForcing };

struct SweepOptions {
  long trials = 1000;
  std::uint64_t base_seed = 1;
  SamplingPath sampling = SamplingPath::Direct;
  /// Only used by the ZF path.
  int receive_antennas = 4;
  /// OpenMP worker count; 0 keeps the runtime default.
  int threads = 0;
};

struct SweepResult {
  std::string scheme;
  SchemeTag tag = SchemeTag::A;
  int num_users = 0;
  long trials = 0;
  double mean_rate_genie = 0.0;
  double se_genie = 0.0;
  double mean_rate_robust = 0.0;
  double se_robust = 0.0;
  double mean_bits = 0.0;
  double se_bits = 0.0;
  double mean_bits_no_index = 0.0;
  /// Fraction of (trial, beam) pairs with no report.
  double outage_fraction = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const SweepResult&) const = default;
};

/// SNR table of trial `trial` at K users. Shared by every scheme so schemes
/// are compared on identical channels.
SnrTable trial_snr(const SnrModel& model, int num_users, int num_beams, long trial,
                   const SweepOptions& options);

/// Runs `trials` independent trials per K with OpenMP. Trial t draws its
/// channel from substream (seed, K, t) and its tie-breaks from
/// (seed, scheme tag, K, t); aggregation is in trial order, so results do
/// not depend on the worker count.
std::vector<SweepResult> run_sweep(const SchemeSpec& spec, const SnrModel& model, int num_beams,
                                   std::span<const int> user_counts, const SweepOptions& options);

namespace reference {
/// Single-threaded twin of mtfb::run_sweep.
std::vector<SweepResult> run_sweep(const SchemeSpec& spec, const SnrModel& model, int num_beams,
                                   std::span<const int> user_counts, const SweepOptions& options);
} // namespace reference

struct LoadFormula {
  double bits = 0.0;        ///< with Scheme B's index bits
  double bits_no_index = 0.0;  ///< without them
};

/// Expected feedback bits per scheduling instant.
LoadFormula scheme_load_formula(const SchemeSpec& spec, const SnrModel& model, int num_users,
                                int num_beams);

/// Mean and standard error of a sample, with pairwise summation.
struct SampleSummary {
  double mean = 0.0;
  double standard_error = 0.0;
};
SampleSummary summarize(std::span<const double> samples);

} // namespace mtfb
