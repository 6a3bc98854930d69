#include "mtfb/sim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <climits>
#include <cmath>
#include <stdexcept>

namespace mtfb {

char tag_letter(SchemeTag tag) {
  switch (tag) {
  case SchemeTag::A:
    return 'A';
  case SchemeTag::B:
    return 'B';
  case SchemeTag::C:
    return 'C';
  case SchemeTag::D:
    return 'D';
  }
  return '?';
}

SchemeSpec SchemeSpec::full_feedback(int snr_bits) {
  SchemeSpec s;
  s.tag = SchemeTag::A;
  s.name = "A";
  s.snr_bits = snr_bits;
  return s;
}

SchemeSpec SchemeSpec::best_beam(int snr_bits) {
  SchemeSpec s;
  s.tag = SchemeTag::B;
  s.name = "B";
  s.snr_bits = snr_bits;
  return s;
}

SchemeSpec SchemeSpec::multi_threshold(int regions, int budget, AllocationRule rule) {
  SchemeSpec s;
  s.tag = SchemeTag::C;
  s.name = "C";
  s.regions = regions;
  s.budget = budget;
  s.allocation = rule;
  return s;
}

SchemeSpec SchemeSpec::multi_threshold_fixed(std::vector<int> bits) {
  SchemeSpec s;
  s.tag = SchemeTag::C;
  s.name = "C";
  s.regions = static_cast<int>(bits.size());
  s.budget = 0;
  for (const int b : bits) {
    s.budget += b;
  }
  s.allocation = AllocationRule::Fixed;
  s.fixed_bits = std::move(bits);
  return s;
}

SchemeSpec SchemeSpec::single_threshold_outage(int snr_bits, double outage_probability) {
  SchemeSpec s;
  s.tag = SchemeTag::D;
  s.name = "D";
  s.snr_bits = snr_bits;
  s.threshold_source = ThresholdSource::FixedOutage;
  s.outage_probability = outage_probability;
  return s;
}

SchemeSpec SchemeSpec::single_threshold_lowest(int snr_bits, int regions) {
  SchemeSpec s;
  s.tag = SchemeTag::D;
  s.name = "D";
  s.snr_bits = snr_bits;
  s.threshold_source = ThresholdSource::SchemeCLowest;
  s.regions = regions;
  return s;
}

void SchemeSpec::validate() const {
  if (snr_bits < 0 || budget < 0) {
    throw std::domain_error(fmt::format("scheme {}: bit counts must be nonnegative", name));
  }
  if (regions < 1) {
    throw std::domain_error(fmt::format("scheme {}: need at least one region", name));
  }
  if (tag == SchemeTag::C && allocation == AllocationRule::Fixed) {
    if (static_cast<int>(fixed_bits.size()) != regions) {
      throw std::domain_error(fmt::format("scheme {}: fixed allocation has {} entries for {} regions",
                                          name, fixed_bits.size(), regions));
    }
    if (std::any_of(fixed_bits.begin(), fixed_bits.end(), [](int b) { return b < 0; })) {
      throw std::domain_error(fmt::format("scheme {}: negative bit count", name));
    }
  }
  if (tag == SchemeTag::D && threshold_source == ThresholdSource::FixedOutage &&
      !(outage_probability > 0.0 && outage_probability < 1.0)) {
    throw std::domain_error(
        fmt::format("scheme {}: outage probability must lie in (0, 1)", name));
  }
}

SchemeDThreshold derive_scheme_d_threshold(const SnrModel& model, int num_users,
                                           const SchemeSpec& spec) {
  if (spec.tag != SchemeTag::D) {
    throw std::domain_error("threshold derivation applies to Scheme D only");
  }
  spec.validate();
  if (spec.threshold_source == ThresholdSource::SchemeCLowest) {
    return {make_thresholds(model, num_users, spec.regions).lowest(), false};
  }
  // F(tau)^K = P_out, so the per-user report probability is 1 - P_out^{1/K}.
  const double report = -std::expm1(std::log(spec.outage_probability) / num_users);
  if (!(report > 0.0)) {
    return {kInfinity, true};
  }
  const double tau = model.inv_survival(report);
  return {tau, tau > model.support_limit()};
}

namespace {

int index_bits_for(int beams) { return rank_bits_for(beams); }

RegionQuantizer best_beam_quantizer(const SnrModel& model, int beams, int bits) {
  // Reported value is the largest of `beams` i.i.d. SNRs.
  auto cdf = [model, beams](double x) { return std::pow(model.cdf(x), beams); };
  auto pdf = [model, beams](double x) {
    return beams * model.pdf(x) * std::pow(model.cdf(x), beams - 1);
  };
  return lloyd_max(numeric_density(cdf, pdf, 0.0, kInfinity, model.rho()), bits);
}

/// Keeps the highest key seen; equal keys are resolved uniformly at random
/// (reservoir rule) so that every maximizer is equally likely.
class BestReport {
public:
  void offer(int user, long key, Rng& rng) {
    if (key > best_key_) {
      best_key_ = key;
      user_ = user;
      ties_ = 1;
    } else if (key == best_key_) {
      ++ties_;
      if (uniform_index(rng, ties_) == 0) {
        user_ = user;
      }
    }
  }
  int user() const { return user_; }
  bool any() const { return user_ >= 0; }

private:
  long best_key_ = LONG_MIN;
  int user_ = -1;
  int ties_ = 0;
};

double log_rate(double snr) { return std::log2(1.0 + snr); }

} // namespace

PreparedScheme prepare_scheme(const SchemeSpec& spec, const SnrModel& model, int num_users,
                              int num_beams) {
  spec.validate();
  if (num_users < 1 || num_beams < 1) {
    throw std::domain_error("need K >= 1 and Mt >= 1");
  }
  PreparedScheme p;
  p.spec = spec;
  p.model = model;
  p.num_users = num_users;
  p.num_beams = num_beams;

  switch (spec.tag) {
  case SchemeTag::A:
    p.quantizers.push_back(lloyd_max(model, 0.0, kInfinity, spec.snr_bits));
    break;
  case SchemeTag::B:
    p.index_bits = index_bits_for(num_beams);
    p.quantizers.push_back(best_beam_quantizer(model, num_beams, spec.snr_bits));
    break;
  case SchemeTag::C: {
    const ThresholdSet thresholds = make_thresholds(model, num_users, spec.regions);
    switch (spec.allocation) {
    case AllocationRule::Fixed:
      p.allocation = make_allocation(spec.fixed_bits);
      break;
    case AllocationRule::Greedy:
      p.allocation = greedy_allocate(thresholds, num_beams, spec.budget);
      break;
    case AllocationRule::Fast:
    case AllocationRule::FastClosedForm: {
      std::vector<double> variances;
      for (int j = 1; j <= thresholds.num_regions(); ++j) {
        const double a = thresholds.lower(j);
        const double b = thresholds.upper(j);
        variances.push_back(truncated_density(model, a, b).variance(a, b));
      }
      p.allocation = fast_allocate(variances, spec.budget,
                                   spec.allocation == AllocationRule::Fast
                                       ? FastRule::WaterFilling
                                       : FastRule::ClosedForm);
      break;
    }
    }
    p.quantizers = build_quantizers(thresholds, p.allocation);
    p.thresholds = thresholds;
    break;
  }
  case SchemeTag::D:
    p.feedback_threshold = derive_scheme_d_threshold(model, num_users, spec);
    if (std::isfinite(p.feedback_threshold.value)) {
      p.quantizers.push_back(
          lloyd_max(model, p.feedback_threshold.value, kInfinity, spec.snr_bits));
    }
    break;
  }
  return p;
}

double TrialOutcome::genie_sum() const {
  double s = 0.0;
  for (const double r : genie_rate) {
    s += r;
  }
  return s;
}

double TrialOutcome::robust_sum() const {
  double s = 0.0;
  for (const double r : robust_rate) {
    s += r;
  }
  return s;
}

TrialOutcome run_trial(const PreparedScheme& scheme, const SnrTable& snr, Rng& rng) {
  const int users = snr.num_users();
  const int beams = snr.num_beams();
  if (users != scheme.num_users || beams != scheme.num_beams) {
    throw std::domain_error(fmt::format("SNR table is {}x{}, scheme prepared for {}x{}", users,
                                        beams, scheme.num_users, scheme.num_beams));
  }
  TrialOutcome out;
  out.scheduled.assign(static_cast<std::size_t>(beams), -1);
  out.genie_rate.assign(static_cast<std::size_t>(beams), 0.0);
  out.robust_rate.assign(static_cast<std::size_t>(beams), 0.0);

  std::vector<BestReport> best(static_cast<std::size_t>(beams));
  // Lower edge of the winning cell, per beam.
  std::vector<double> floor_snr(static_cast<std::size_t>(beams), 0.0);
  const auto lower_edge_key = [](const RegionQuantizer& q, double x) {
    const int cell = q.cell_of(x);
    return std::pair<long, double>{cell, q.cell_lower(cell)};
  };

  switch (scheme.spec.tag) {
  case SchemeTag::A: {
    const RegionQuantizer& q = scheme.quantizers.front();
    for (int m = 0; m < beams; ++m) {
      auto& pick = best[static_cast<std::size_t>(m)];
      for (int k = 0; k < users; ++k) {
        pick.offer(k, q.cell_of(snr(k, m)), rng);
      }
    }
    out.feedback_bits = static_cast<long>(users) * beams * scheme.spec.snr_bits;
    out.feedback_bits_no_index = out.feedback_bits;
    break;
  }
  case SchemeTag::B: {
    const RegionQuantizer& q = scheme.quantizers.front();
    for (int k = 0; k < users; ++k) {
      int top = 0;
      for (int m = 1; m < beams; ++m) {
        if (snr(k, m) > snr(k, top)) {
          top = m;
        }
      }
      best[static_cast<std::size_t>(top)].offer(k, q.cell_of(snr(k, top)), rng);
    }
    out.feedback_bits_no_index = static_cast<long>(users) * scheme.spec.snr_bits;
    out.feedback_bits = static_cast<long>(users) * (scheme.spec.snr_bits + scheme.index_bits);
    break;
  }
  case SchemeTag::C: {
    const ThresholdSet& th = *scheme.thresholds;
    const int regions = th.num_regions();
    const double lowest = th.lowest();
    const long per_report_rank = scheme.allocation.rank_bits;
    for (int m = 0; m < beams; ++m) {
      auto& pick = best[static_cast<std::size_t>(m)];
      for (int k = 0; k < users; ++k) {
        const double x = snr(k, m);
        if (x < lowest) {
          continue;
        }
        const int j = th.region_of(x);
        const RegionQuantizer& q = scheme.quantizers[static_cast<std::size_t>(j - 1)];
        out.feedback_bits += per_report_rank + q.bits;
        // Smaller region index first, then higher cell within the region.
        const long key = static_cast<long>(regions - j) * (1L << 30) + q.cell_of(x);
        pick.offer(k, key, rng);
      }
    }
    out.feedback_bits_no_index = out.feedback_bits;
    break;
  }
  case SchemeTag::D: {
    const double tau = scheme.feedback_threshold.value;
    if (!scheme.quantizers.empty()) {
      const RegionQuantizer& q = scheme.quantizers.front();
      for (int m = 0; m < beams; ++m) {
        auto& pick = best[static_cast<std::size_t>(m)];
        for (int k = 0; k < users; ++k) {
          const double x = snr(k, m);
          if (x >= tau) {
            out.feedback_bits += scheme.spec.snr_bits;
            pick.offer(k, q.cell_of(x), rng);
          }
        }
      }
    }
    out.feedback_bits_no_index = out.feedback_bits;
    break;
  }
  }

  for (int m = 0; m < beams; ++m) {
    const auto mi = static_cast<std::size_t>(m);
    int user = best[mi].user();
    if (!best[mi].any()) {
      // Nobody reported: random user, no CSI; credit the delivered rate.
      ++out.outages;
      user = uniform_index(rng, users);
      out.scheduled[mi] = user;
      out.genie_rate[mi] = log_rate(snr(user, m));
      out.robust_rate[mi] = out.genie_rate[mi];
      continue;
    }
    const double x = snr(user, m);
    double edge = 0.0;
    switch (scheme.spec.tag) {
    case SchemeTag::C: {
      const int j = scheme.thresholds->region_of(x);
      edge = lower_edge_key(scheme.quantizers[static_cast<std::size_t>(j - 1)], x).second;
      break;
    }
    default:
      edge = lower_edge_key(scheme.quantizers.front(), x).second;
      break;
    }
    out.scheduled[mi] = user;
    out.genie_rate[mi] = log_rate(x);
    out.robust_rate[mi] = log_rate(edge);
  }
  return out;
}

double full_csi_rate(const SnrTable& snr) {
  double total = 0.0;
  for (int m = 0; m < snr.num_beams(); ++m) {
    double best = 0.0;
    for (int k = 0; k < snr.num_users(); ++k) {
      best = std::max(best, snr(k, m));
    }
    total += log_rate(best);
  }
  return total;
}

LoadFormula scheme_load_formula(const SchemeSpec& spec, const SnrModel& model, int num_users,
                                int num_beams) {
  spec.validate();
  const double k = num_users;
  switch (spec.tag) {
  case SchemeTag::A: {
    const double bits = k * num_beams * spec.snr_bits;
    return {bits, bits};
  }
  case SchemeTag::B:
    return {k * (spec.snr_bits + index_bits_for(num_beams)), k * spec.snr_bits};
  case SchemeTag::C: {
    const double bits = num_beams * (spec.regions * rank_bits_for(spec.regions) + spec.budget);
    return {bits, bits};
  }
  case SchemeTag::D: {
    const SchemeDThreshold tau = derive_scheme_d_threshold(model, num_users, spec);
    const double report = std::isinf(tau.value) ? 0.0 : model.survival(tau.value);
    const double bits = num_beams * spec.snr_bits * k * report;
    return {bits, bits};
  }
  }
  return {};
}

} // namespace mtfb
