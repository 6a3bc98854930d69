#include "mtfb/sim.hpp"

#include <cmath>
#include <stdexcept>

#include <omp.h>

#include <exception>

namespace mtfb {

namespace {

double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 64) {
    double s = 0.0;
    for (const double v : x) {
      s += v;
    }
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

std::uint64_t tie_stream_tag(SchemeTag tag) {
  return 0x5c000000ULL + static_cast<std::uint64_t>(tag_letter(tag));
}

/// Per-trial samples of one K, filled in any order and reduced in trial order.
struct TrialSamples {
  explicit TrialSamples(long n)
      : genie(static_cast<std::size_t>(n)), robust(static_cast<std::size_t>(n)),
        bits(static_cast<std::size_t>(n)), bits_no_index(static_cast<std::size_t>(n)),
        outages(static_cast<std::size_t>(n)) {}

  void record(long t, const TrialOutcome& o) {
    const auto i = static_cast<std::size_t>(t);
    genie[i] = o.genie_sum();
    robust[i] = o.robust_sum();
    bits[i] = static_cast<double>(o.feedback_bits);
    bits_no_index[i] = static_cast<double>(o.feedback_bits_no_index);
    outages[i] = o.outages;
  }

  std::vector<double> genie;
  std::vector<double> robust;
  std::vector<double> bits;
  std::vector<double> bits_no_index;
  std::vector<double> outages;
};

TrialOutcome one_trial(const PreparedScheme& prepared, const SnrModel& model, int users,
                       int beams, long t, const SweepOptions& options) {
  const SnrTable snr = trial_snr(model, users, beams, t, options);
  Rng ties = substream({options.base_seed, tie_stream_tag(prepared.spec.tag),
                        static_cast<std::uint64_t>(users), static_cast<std::uint64_t>(t)});
  return run_trial(prepared, snr, ties);
}

SweepResult reduce(const SchemeSpec& spec, int users, int beams, const SweepOptions& options,
                   const TrialSamples& s) {
  SweepResult r;
  r.scheme = spec.name;
  r.tag = spec.tag;
  r.num_users = users;
  r.trials = options.trials;
  r.seed = options.base_seed;
  const SampleSummary genie = summarize(s.genie);
  const SampleSummary robust = summarize(s.robust);
  const SampleSummary bits = summarize(s.bits);
  r.mean_rate_genie = genie.mean;
  r.se_genie = genie.standard_error;
  r.mean_rate_robust = robust.mean;
  r.se_robust = robust.standard_error;
  r.mean_bits = bits.mean;
  r.se_bits = bits.standard_error;
  r.mean_bits_no_index = summarize(s.bits_no_index).mean;
  r.outage_fraction = summarize(s.outages).mean / beams;
  return r;
}

void check_options(const SweepOptions& options) {
  if (options.trials < 1) {
    throw std::domain_error("need at least one trial");
  }
}

} // namespace

SampleSummary summarize(std::span<const double> samples) {
  if (samples.empty()) {
    throw std::domain_error("cannot summarize an empty sample");
  }
  const double n = static_cast<double>(samples.size());
  const double mean = pairwise_sum(samples) / n;
  if (samples.size() == 1) {
    return {mean, 0.0};
  }
  std::vector<double> sq(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double d = samples[i] - mean;
    sq[i] = d * d;
  }
  const double variance = pairwise_sum(sq) / (n - 1.0);
  return {mean, std::sqrt(variance / n)};
}

SnrTable trial_snr(const SnrModel& model, int num_users, int num_beams, long trial,
                   const SweepOptions& options) {
  Rng rng = substream({options.base_seed, static_cast<std::uint64_t>(num_users),
                       static_cast<std::uint64_t>(trial)});
  if (options.sampling == SamplingPath::ZeroForcing) {
    return sample_snr_zf(model.rho(), num_users, options.receive_antennas, num_beams, rng);
  }
  return sample_snr_direct(model, num_users, num_beams, rng);
}

std::vector<SweepResult> run_sweep(const SchemeSpec& spec, const SnrModel& model, int num_beams,
                                   std::span<const int> user_counts, const SweepOptions& options) {
  check_options(options);
  std::vector<SweepResult> results;
  for (const int users : user_counts) {
    const PreparedScheme prepared = prepare_scheme(spec, model, users, num_beams);
    TrialSamples samples(options.trials);
    const int workers = options.threads > 0 ? options.threads : omp_get_max_threads();
    // Exceptions must not escape a parallel region.
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 16) num_threads(workers)
    for (long t = 0; t < options.trials; ++t) {
      try {
        samples.record(t, one_trial(prepared, model, users, num_beams, t, options));
      } catch (...) {
#pragma omp critical
        if (!failure) {
          failure = std::current_exception();
        }
      }
    }
    if (failure) {
      std::rethrow_exception(failure);
    }
    results.push_back(reduce(spec, users, num_beams, options, samples));
  }
  return results;
}

namespace reference {

std::vector<SweepResult> run_sweep(const SchemeSpec& spec, const SnrModel& model, int num_beams,
                                   std::span<const int> user_counts, const SweepOptions& options) {
  check_options(options);
  std::vector<SweepResult> results;
  for (const int users : user_counts) {
    const PreparedScheme prepared = prepare_scheme(spec, model, users, num_beams);
    TrialSamples samples(options.trials);
    for (long t = 0; t < options.trials; ++t) {
      samples.record(t, one_trial(prepared, model, users, num_beams, t, options));
    }
    results.push_back(reduce(spec, users, num_beams, options, samples));
  }
  return results;
}

} // namespace reference

} // namespace mtfb
