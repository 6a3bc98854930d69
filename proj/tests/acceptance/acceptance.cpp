// Acceptance checks. Run with --criterion N (1..10); prints detail lines and
// one PASS/FAIL line, exits nonzero on FAIL.

#include "mtfb/bounds.hpp"
#include "mtfb/channel.hpp"
#include "mtfb/cli.hpp"
#include "mtfb/quant.hpp"
#include "mtfb/sim.hpp"
#include "mtfb/stats.hpp"
#include "oracles.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace mtfb;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 0x5eed2024;
constexpr int kMt = 4;
const SnrModel kModel(10.0);  // rho = 10 dB

class Checks {
public:
  void expect(bool ok, const std::string& what) {
    fmt::print("  {} {}\n", ok ? "ok  " : "MISS", what);
    ok_ = ok_ && ok;
  }
  bool ok() const { return ok_; }

private:
  bool ok_ = true;
};

/// Running mean and standard error.
struct Accumulator {
  double sum = 0.0;
  double sum_sq = 0.0;
  long n = 0;
  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++n;
  }
  double mean() const { return sum / n; }
  double se() const {
    const double m = mean();
    return std::sqrt(std::max(0.0, (sum_sq / n - m * m)) * n / (n - 1) / n);
  }
};

/// Per-beam best SNR and the SNR of a uniformly drawn user.
struct BeamDraw {
  double best = 0.0;
  double random = 0.0;
};

std::vector<BeamDraw> draw_beams(int num_users, Rng& rng) {
  const SnrTable t = sample_snr_direct(kModel, num_users, kMt, rng);
  std::vector<BeamDraw> out(kMt);
  for (int m = 0; m < kMt; ++m) {
    double best = 0.0;
    for (int k = 0; k < num_users; ++k) {
      best = std::max(best, t(k, m));
    }
    out[static_cast<std::size_t>(m)] = {best, t(uniform_index(rng, num_users), m)};
  }
  return out;
}

double rate(double snr) { return std::log2(1.0 + snr); }

double rth(int num_users, int j) { return kModel.rho() * std::log(static_cast<double>(num_users) / j); }

// 1. Thresholds.
bool criterion_thresholds(Checks& c) {
  double worst = 0.0;
  double worst_general = 0.0;
  for (const double rho : {0.1, 1.0, 10.0, 100.0, 1000.0}) {
    const SnrModel m(rho);
    for (const int k : {2, 5, 10, 37, 100, 1000, 100000}) {
      for (int n = 1; n <= std::min(k, 16); ++n) {
        const ThresholdSet t = make_thresholds(m, k, n);
        for (int j = 1; j <= n; ++j) {
          const double expect = rho * std::log(static_cast<double>(k) / j);
          const double got = t.lower(j);
          const double general = m.inv_survival(static_cast<double>(j) / k);
          const double scale = std::max(std::abs(expect), rho);
          worst = std::max(worst, std::abs(got - expect) / scale);
          worst_general = std::max(worst_general, std::abs(general - expect) / scale);
        }
      }
    }
  }
  c.expect(worst <= 1e-9, fmt::format("closed form vs rho ln(K/j): max rel err {:.3g}", worst));
  c.expect(worst_general <= 1e-9,
           fmt::format("inverse-CDF path vs rho ln(K/j): max rel err {:.3g}", worst_general));

  // Non-exponential models take the inverse-CDF path: F(r_th,j) = 1 - j/K.
  double worst_gamma = 0.0;
  for (const int shape : {2, 3}) {
    const SnrModel m(10.0, shape);
    for (const int k : {10, 100, 1000}) {
      const ThresholdSet t = make_thresholds(m, k, 8);
      for (int j = 1; j <= 8; ++j) {
        const double tail = 1.0 - oracle::gamma_cdf(10.0, shape, t.lower(j));
        worst_gamma = std::max(worst_gamma, std::abs(tail - static_cast<double>(j) / k) / (1.0 / k));
      }
    }
  }
  c.expect(worst_gamma <= 1e-9,
           fmt::format("gamma model: max rel err of survival at r_th,j vs j/K {:.3g}", worst_gamma));
  return c.ok();
}

// 2. Minimum regions and the loss upper bound.
bool criterion_min_regions(Checks& c) {
  const long trials = 100000;
  for (const int k : {10, 20, 50, 100}) {
    const int mr = min_regions(kModel, k, kMt, 0.25);
    c.expect(mr == 4, fmt::format("K={:3d}: min_regions = {} (expect 4)", k, mr));

    const int max_n = std::min(8, k - 1);
    std::vector<Accumulator> loss(static_cast<std::size_t>(max_n + 1));
    Rng rng = substream({kSeed, 2, static_cast<std::uint64_t>(k)});
    for (long t = 0; t < trials; ++t) {
      const auto beams = draw_beams(k, rng);
      for (int n = 1; n <= max_n; ++n) {
        const double r = rth(k, n);
        double sum = 0.0;
        for (const auto& b : beams) {
          if (b.best < r) {
            sum += rate(b.best) - rate(b.random);
          }
        }
        loss[static_cast<std::size_t>(n)].add(sum);
      }
    }
    for (int n = 1; n <= max_n; ++n) {
      const auto& a = loss[static_cast<std::size_t>(n)];
      const double bound = rate_loss_upper_bound(kModel, k, n, kMt);
      c.expect(a.mean() - 3 * a.se() <= bound,
               fmt::format("K={:3d} N={}: simulated loss {:.4f} (SE {:.4f}) <= bound {:.4f}", k,
                           n, a.mean(), a.se(), bound));
      if (n >= 4) {
        c.expect(bound - a.mean() <= 0.1,
                 fmt::format("K={:3d} N={}: bound - simulated = {:.4f} <= 0.1", k, n,
                             bound - a.mean()));
      }
    }
  }
  return c.ok();
}

// 3. Increment sandwich.
bool criterion_increment(Checks& c) {
  const int k = 100;
  const long trials = 100000;
  std::vector<Accumulator> inc(9);
  Rng rng = substream({kSeed, 3});
  for (long t = 0; t < trials; ++t) {
    const auto beams = draw_beams(k, rng);
    for (int n = 1; n <= 8; ++n) {
      const double hi = rth(k, n);
      const double lo = rth(k, n + 1);
      double sum = 0.0;
      for (const auto& b : beams) {
        if (b.best >= lo && b.best < hi) {
          sum += rate(b.best) - rate(b.random);
        }
      }
      inc[static_cast<std::size_t>(n)].add(sum);
    }
  }
  double previous_exact = kInfinity;
  for (int n = 1; n <= 8; ++n) {
    const auto& a = inc[static_cast<std::size_t>(n)];
    const IncrementAnalysis b = increment_bounds(kModel, k, n, kMt);
    c.expect(a.mean() + 3 * a.se() >= b.lower && a.mean() - 3 * a.se() <= b.upper,
             fmt::format("N={}: simulated {:.5f} (SE {:.5f}) in [{:.5f}, {:.5f}]", n, a.mean(),
                         a.se(), b.lower, b.upper));
    const double exact = rate_increment_exact(kModel, k, n, kMt);
    c.expect(exact < previous_exact, fmt::format("N={}: exact increment {:.6f} decreasing", n, exact));
    previous_exact = exact;
    if (n > 1) {
      const auto& p = inc[static_cast<std::size_t>(n - 1)];
      const double slack = 3 * std::hypot(a.se(), p.se());
      c.expect(a.mean() <= p.mean() + slack,
               fmt::format("N={}: simulated increment not above N={} (within 3 SE)", n, n - 1));
    }
  }
  return c.ok();
}

// 4. Growth relative to Mt log2 log2 K.
bool criterion_growth(Checks& c) {
  const std::vector<std::pair<int, long>> grid{{100, 20000}, {1000, 5000}, {10000, 1000}, {100000, 200}};
  for (const int n : {1, 2, 4}) {
    const double limit = -std::expm1(-static_cast<double>(n));
    double previous_distance = kInfinity;
    double last_ratio = 0.0;
    for (const auto& [k, trials] : grid) {
      Rng rng = substream({kSeed, 4, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(k)});
      const double r = rth(k, n);
      Accumulator a;
      for (long t = 0; t < trials; ++t) {
        double sum = 0.0;
        for (const auto& b : draw_beams(k, rng)) {
          sum += b.best >= r ? rate(b.best) : rate(b.random);
        }
        a.add(sum);
      }
      const double norm = kMt * std::log2(std::log2(static_cast<double>(k)));
      const Envelopes e = asymptotic_envelopes(kModel, k, n, kMt);
      const double ratio = a.mean() / norm;
      c.expect(a.mean() + 3 * a.se() >= e.lower && a.mean() - 3 * a.se() <= e.upper,
               fmt::format("N={} K={:6d}: ratio {:.4f} in [{:.4f}, {:.4f}]", n, k, ratio,
                           e.lower / norm, e.upper / norm));
      const double distance = std::abs(ratio - limit);
      c.expect(distance < previous_distance,
               fmt::format("N={} K={:6d}: distance to limit {:.4f} shrinks", n, k, distance));
      previous_distance = distance;
      last_ratio = ratio;
    }
    c.expect(std::abs(last_ratio - limit) <= 0.1 * limit,
             fmt::format("N={}: ratio {:.4f} at K=1e5 within 10% of limit {:.4f}", n, last_ratio,
                         limit));
  }
  return c.ok();
}

// 5. Quantized-rate lower bound against the robust simulated rate.
bool criterion_quantized_bound(Checks& c) {
  const std::vector<int> bits{0, 0, 0, 3};
  const SchemeSpec spec = SchemeSpec::multi_threshold_fixed(bits);
  const std::vector<int> ks{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  SweepOptions o;
  o.trials = 50000;
  o.base_seed = kSeed;
  const auto results = run_sweep(spec, kModel, kMt, ks, o);
  for (const auto& r : results) {
    const double bound = quantized_rate_lower_bound(make_thresholds(kModel, r.num_users, 4), kMt,
                                                    make_allocation(bits));
    const double diff = r.mean_rate_robust - bound;
    c.expect(diff >= 0.0 && diff <= 0.3,
             fmt::format("K={:3d}: robust {:.4f} (SE {:.4f}) - bound {:.4f} = {:.4f} in [0, 0.3]",
                         r.num_users, r.mean_rate_robust, r.se_robust, bound, diff));
  }
  return c.ok();
}

// 6. Bit allocation.
bool criterion_allocation(Checks& c) {
  for (int k = 10; k <= 100; k += 10) {
    const ThresholdSet t = make_thresholds(kModel, k, 4);
    for (int budget = 1; budget <= 3; ++budget) {
      const BitAllocation g = greedy_allocate(t, kMt, budget);
      const BitAllocation e = exhaustive_allocate(t, kMt, budget);
      const double bg = quantized_rate_lower_bound(t, kMt, g);
      const double be = quantized_rate_lower_bound(t, kMt, e);
      c.expect(std::abs(bg - be) <= 1e-12 * be,
               fmt::format("K={:3d} B_Q={}: greedy ({}) bound {:.6f} = exhaustive ({}) {:.6f}", k,
                           budget, fmt::join(g.bits, " "), bg, fmt::join(e.bits, " "), be));
    }
    const auto variances = region_variances(kModel, t);
    for (int budget = 1; budget <= 6; ++budget) {
      const BitAllocation f = fast_allocate(variances, budget);
      const double bf = quantized_rate_lower_bound(t, kMt, f);
      const double bg = quantized_rate_lower_bound(t, kMt, greedy_allocate(t, kMt, budget));
      c.expect(bf >= 0.99 * bg, fmt::format("K={:3d} B_Q={}: fast ({}) {:.5f} within 1% of greedy {:.5f}",
                                            k, budget, fmt::join(f.bits, " "), bf, bg));
    }
  }
  return c.ok();
}

// 7. Feedback load.
bool criterion_load(Checks& c) {
  const std::vector<int> ks{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  SweepOptions o;
  o.base_seed = kSeed;

  o.trials = 20000;
  const auto cres = run_sweep(SchemeSpec::multi_threshold(4, 5, AllocationRule::Fast), kModel, kMt, ks, o);
  const double target = 52.0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& r : cres) {
    c.expect(std::abs(r.mean_bits - target) <= 0.02 * target,
             fmt::format("C K={:3d}: mean load {:.3f} (SE {:.3f}) within 2% of 52", r.num_users,
                         r.mean_bits, r.se_bits));
    sx += r.num_users;
    sy += r.mean_bits;
    sxx += double(r.num_users) * r.num_users;
    sxy += r.num_users * r.mean_bits;
  }
  const double n = static_cast<double>(cres.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double drift = slope * (ks.back() - ks.front());
  c.expect(std::abs(drift) <= 0.02 * target,
           fmt::format("C: fitted drift over K=10..100 is {:.3f} bits (flat within 2%)", drift));

  o.trials = 200;
  const auto ares = run_sweep(SchemeSpec::full_feedback(5), kModel, kMt, ks, o);
  const auto bres = run_sweep(SchemeSpec::best_beam(5), kModel, kMt, ks, o);
  bool a_ok = true;
  bool b_ok = true;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    a_ok = a_ok && ares[i].mean_bits == kMt * 5.0 * ks[i];
    b_ok = b_ok && bres[i].mean_bits == (5.0 + rank_bits_for(kMt)) * ks[i] &&
           bres[i].mean_bits_no_index == 5.0 * ks[i];
  }
  c.expect(a_ok, "A: load = Mt B K = 20 K exactly");
  c.expect(b_ok, "B: load = (B + ceil(log2 Mt)) K = 7 K exactly (5 K without index bits)");

  const std::vector<int> dks{10, 100, 1000, 10000};
  o.trials = 4000;
  for (const double p : {1e-1, 1e-4}) {
    const SchemeSpec d = SchemeSpec::single_threshold_outage(5, p);
    const auto dres = run_sweep(d, kModel, kMt, dks, o);
    const double limit = kMt * 5.0 * std::log(1.0 / p);
    double previous = 0.0;
    for (const auto& r : dres) {
      const double formula = scheme_load_formula(d, kModel, r.num_users, kMt).bits;
      c.expect(std::abs(r.mean_bits - formula) <= 3 * r.se_bits + 1e-9,
               fmt::format("D P_out={:g} K={:5d}: load {:.3f} (SE {:.3f}) matches {:.3f}", p,
                           r.num_users, r.mean_bits, r.se_bits, formula));
      c.expect(r.mean_bits + 3 * r.se_bits >= previous,
               fmt::format("D P_out={:g} K={:5d}: load nondecreasing", p, r.num_users));
      previous = r.mean_bits;
    }
    const double last = dres.back().mean_bits;
    c.expect(std::abs(last - limit) <= 0.05 * limit,
             fmt::format("D P_out={:g}: load {:.3f} at K=1e4 within 5% of Mt B ln(1/P_out) = {:.3f}",
                         p, last, limit));
  }
  return c.ok();
}

// 8. ZF SNR law.
bool criterion_zf(Checks& c) {
  const int users = 100;
  for (const int mr : {4, 5, 6}) {
    Rng rng = substream({kSeed, 8, static_cast<std::uint64_t>(mr)});
    std::vector<double> samples;
    samples.reserve(100000);
    // Beam 0 only: users are independent given the beams, beams of one user
    // are not.
    while (samples.size() < 100000) {
      const SnrTable t = sample_snr_zf(kModel.rho(), users, mr, kMt, rng);
      for (int k = 0; k < users; ++k) {
        samples.push_back(t(k, 0));
      }
    }
    const int shape = mr - kMt + 1;
    const double p = oracle::ks_pvalue(
        samples, [shape](double x) { return oracle::gamma_cdf(10.0, shape, x); });
    c.expect(p > 0.01, fmt::format("(Mr, Mt) = ({}, {}): KS p = {:.4f} against Gamma({}, rho)", mr,
                                   kMt, p, shape));
  }
  return c.ok();
}

// 9. Closed forms against independent quadrature.
bool criterion_oracles(Checks& c) {
  const double rho = kModel.rho();
  const auto pdf = [rho](double x) { return std::exp(-x / rho) / rho; };
  const auto cdf = [rho](double x) { return -std::expm1(-x / rho); };
  const std::vector<int> ks{2, 3, 5, 10, 25, 50, 100, 150, 200};

  double worst_gap = 0.0;
  std::string where_gap;
  for (const int k : ks) {
    for (int n = 1; n < k; ++n) {
      const double r = rho * std::log(static_cast<double>(k) / n);
      // (F(x) / F(r))^{K-1} keeps the integrand representable when F(r)^K underflows.
      const double fr = cdf(r);
      const double best = oracle::integrate(
          [&](double x) { return x * k * pdf(x) * std::pow(cdf(x) / fr, k - 1); }, 0.0, r) / fr;
      const double one = oracle::integrate([&](double x) { return x * pdf(x); }, 0.0, r) / cdf(r);
      const double expect = best - one;
      const double got = detail::gap_closed_form(rho, k, static_cast<double>(n) / k);
      const double err = std::abs(got - expect) / std::abs(expect);
      if (err > worst_gap) {
        worst_gap = err;
        where_gap = fmt::format("K={} N={}", k, n);
      }
    }
  }
  c.expect(worst_gap <= 1e-6, fmt::format("gap below r_th,N: max rel err {:.3g} ({})", worst_gap, where_gap));

  double worst_moment = 0.0;
  std::string where_moment;
  for (const int k : ks) {
    std::vector<std::pair<int, int>> pairs;
    for (int low = 1; low <= std::min(k, 10); ++low) {
      for (int high = 0; high < low; ++high) {
        pairs.emplace_back(low, high);
      }
    }
    pairs.emplace_back(k, 0);
    for (const auto& [low, high] : pairs) {
      const double a = rho * std::log(static_cast<double>(k) / low);
      const double b = high == 0 ? kInfinity : rho * std::log(static_cast<double>(k) / high);
      const double expect = oracle::integrate(
          [&](double x) { return x * k * pdf(x) * std::pow(cdf(x), k - 1); }, a, b);
      const double got = detail::max_first_moment_closed_form(rho, k, low, high);
      const double err = std::abs(got - expect) / std::abs(expect);
      if (err > worst_moment) {
        worst_moment = err;
        where_moment = fmt::format("K={} low={} high={}", k, low, high);
      }
    }
  }
  c.expect(worst_moment <= 1e-6,
           fmt::format("first moment of the max over a region: max rel err {:.3g} ({})",
                       worst_moment, where_moment));

  double worst_rank = 0.0;
  for (int k = 1; k <= 8; ++k) {
    std::vector<CdfFunction> cdfs(static_cast<std::size_t>(k),
                                  [](double x) { return kModel.cdf(x); });
    for (const double snr : {0.0, 0.5, 3.0, 7.0, 10.0, 20.0, 45.0, 100.0}) {
      const RankDistribution iid = rank_probability_iid(kModel, k, snr);
      for (int user = 0; user < k; ++user) {
        const RankDistribution non = rank_probability_noniid(cdfs, user, snr);
        for (int p = 0; p < k; ++p) {
          worst_rank = std::max(worst_rank, std::abs(iid.probs[static_cast<std::size_t>(p)] -
                                                     non.probs[static_cast<std::size_t>(p)]));
        }
      }
    }
  }
  c.expect(worst_rank <= 1e-12,
           fmt::format("non-iid rank law with identical marginals vs iid: max err {:.3g}", worst_rank));
  return c.ok();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// 10. Determinism.
bool criterion_determinism(Checks& c) {
  ExperimentConfig config;
  config.user_counts = {10, 20, 40};
  config.trials = 2000;
  config.base_seed = kSeed;
  config.rate_meter = RateMeter::Both;
  const fs::path root = fs::temp_directory_path() / "mtfb_acceptance_determinism";
  fs::remove_all(root);
  const auto run = [&](const std::string& name, int threads) {
    SimulateOptions o;
    o.threads = threads;
    o.max_compare_budget = 4;
    return cmd_simulate(config, root / name, o);
  };
  const auto first = run("first", 1);
  const auto second = run("second", 1);
  const auto wide = run("wide", 4);
  const auto odd = run("odd", 3);
  for (std::size_t i = 0; i < first.size(); ++i) {
    const std::string a = slurp(first[i]);
    const std::string name = first[i].filename().string();
    c.expect(!a.empty() && a == slurp(second[i]), fmt::format("{}: identical across runs", name));
    c.expect(a == slurp(wide[i]) && a == slurp(odd[i]),
             fmt::format("{}: identical for 1, 3 and 4 workers", name));
  }
  fs::remove_all(root);
  return c.ok();
}

struct Criterion {
  const char* title;
  std::function<bool(Checks&)> run;
};

} // namespace

int main(int argc, char** argv) {
  const std::map<int, Criterion> criteria{
      {1, {"threshold formula", criterion_thresholds}},
      {2, {"four regions keep the loss below 0.25 bps/Hz; loss bound holds and is tight", criterion_min_regions}},
      {3, {"rate increment lies between its bounds and decreases in N", criterion_increment}},
      {4, {"rate over Mt log2 log2 K approaches 1 - e^-N within the envelopes", criterion_growth}},
      {5, {"robust Scheme C rate minus quantized lower bound in [0, 0.3]", criterion_quantized_bound}},
      {6, {"greedy allocation is optimal; fast allocation within 1%", criterion_allocation}},
      {7, {"feedback load of schemes A/B/C/D", criterion_load}},
      {8, {"ZF SNR follows the scaled chi-square law", criterion_zf}},
      {9, {"closed forms agree with quadrature; non-iid rank law reduces to iid", criterion_oracles}},
      {10, {"simulate output is byte-identical across runs and worker counts", criterion_determinism}},
  };

  CLI::App app{"mtfb acceptance checks"};
  std::vector<int> selected;
  app.add_option("--criterion", selected, "criterion number (repeatable; default all)")
      ->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) {
    for (const auto& [id, _] : criteria) {
      selected.push_back(id);
    }
  }

  bool all = true;
  for (const int id : selected) {
    const Criterion& cr = criteria.at(id);
    Checks checks;
    const auto start = std::chrono::steady_clock::now();
    bool ok = false;
    try {
      ok = cr.run(checks);
    } catch (const std::exception& e) {
      fmt::print("  MISS exception: {}\n", e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    fmt::print("{} criterion {}: {} ({:.1f} s)\n", ok ? "PASS" : "FAIL", id, cr.title, seconds);
    all = all && ok;
  }
  return all ? 0 : 1;
}
