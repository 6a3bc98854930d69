#include "mtfb/bounds.hpp"
#include "mtfb/cli.hpp"
#include "mtfb/errors.hpp"
#include "mtfb/quant.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>

namespace mtfb {

namespace {

/// Shortest representation that parses back to the same double.
std::string num(double x) {
  if (std::isinf(x)) {
    return x > 0 ? "inf" : "-inf";
  }
  return fmt::format("{}", x);
}

std::string opt(const std::optional<double>& x) { return x ? num(*x) : std::string(); }

void provenance(std::ostream& out, const ExperimentConfig& config, const char* command) {
  fmt::print(out, "# mtfb {}\n", command);
  fmt::print(out, "# config_hash: {:016x}\n", config_hash(config));
  fmt::print(out, "# seed: {}\n", config.base_seed);
}

void require_exponential(const ExperimentConfig& config) {
  if (!config.model().is_exponential()) {
    throw ConfigError("analytic bounds need M_r = M_t (exponential SNR)");
  }
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  }
  return out;
}

nlohmann::json allocation_json(const BitAllocation& a, const ThresholdSet& th, int mt) {
  return {{"bits", a.bits},
          {"rank_bits", a.rank_bits},
          {"budget", a.budget},
          {"expected_load", a.expected_load(mt)},
          {"rate_bound", quantized_rate_lower_bound(th, mt, a)}};
}

BitAllocation fast_for(const ThresholdSet& th, int budget) {
  std::vector<double> variances;
  for (int j = 1; j <= th.num_regions(); ++j) {
    const double a = th.lower(j);
    const double b = th.upper(j);
    variances.push_back(truncated_density(th.model(), a, b).variance(a, b));
  }
  return fast_allocate(variances, budget);
}

struct AnalyticColumns {
  std::optional<double> full_csi_rate;
  std::optional<double> loss_upper_bound;
  std::optional<double> rate_lower_bound;
  LoadFormula load;
};

AnalyticColumns analytic_for(const SchemeSpec& spec, const SnrModel& model, int users, int mt) {
  AnalyticColumns a;
  a.full_csi_rate = mt * expected_log_rate_of_max(model, users);
  a.load = scheme_load_formula(spec, model, users, mt);
  if (spec.tag == SchemeTag::C) {
    if (model.is_exponential() && spec.regions < users) {
      a.loss_upper_bound = rate_loss_upper_bound(model, users, spec.regions, mt);
    }
    const PreparedScheme p = prepare_scheme(spec, model, users, mt);
    a.rate_lower_bound = quantized_rate_lower_bound(model, users, mt, *p.thresholds, p.allocation,
                                                    p.quantizers);
  }
  return a;
}

} // namespace

void cmd_thresholds(const ExperimentConfig& config, std::ostream& out) {
  config.validate();
  const SnrModel model = config.model();
  provenance(out, config, "thresholds");
  out << "K,j,r_th_linear,r_th_db,region_mass\n";
  for (const int k : config.user_counts) {
    const ThresholdSet th = make_thresholds(model, k, config.regions);
    for (int j = 1; j <= th.num_regions(); ++j) {
      const double r = th.lower(j);
      fmt::print(out, "{},{},{},{},{}\n", k, j, num(r), num(linear_to_db(r)),
                 num(th.region_mass(j)));
    }
  }
}

void cmd_bounds(const ExperimentConfig& config, std::ostream& out) {
  config.validate();
  require_exponential(config);
  const SnrModel model = config.model();
  const int mt = config.transmit_antennas;
  provenance(out, config, "bounds");
  fmt::print(out, "# tolerable_loss: {}\n", num(config.tolerable_loss));
  out << "K,N,P_L,gap_mean,loss_upper,P_I,increment_lower,increment_upper,R_L,R_U,"
         "limit_fraction,min_regions,flag\n";
  for (const int k : config.user_counts) {
    const int needed = min_regions(model, k, mt, config.tolerable_loss);
    for (const int n : config.bounds_regions) {
      if (n >= k) {
        continue;
      }
      const LossAnalysis loss = analyze_loss(model, k, n, mt);
      const IncrementAnalysis inc = increment_bounds(model, k, n, mt);
      const Envelopes env = asymptotic_envelopes(model, k, n, mt);
      std::string flag;
      if (!inc.ordered()) {
        flag = "increment_bounds_crossed";
      } else if (loss.gap_fallback) {
        flag = "gap_quadrature_fallback";
      }
      fmt::print(out, "{},{},{},{},{},{},{},{},{},{},{},{},{}\n", k, n, num(loss.p_loss),
                 num(loss.gap_mean), num(loss.loss_upper_bound), num(inc.p_inc), num(inc.lower),
                 num(inc.upper), num(env.lower), num(env.upper), num(env.limit_fraction), needed,
                 flag);
    }
  }
}

void cmd_allocate(const ExperimentConfig& config, std::ostream& out) {
  config.validate();
  const SnrModel model = config.model();
  const int mt = config.transmit_antennas;
  nlohmann::json doc;
  doc["config_hash"] = fmt::format("{:016x}", config_hash(config));
  doc["seed"] = config.base_seed;
  doc["N"] = config.regions;
  doc["B_Q"] = config.budget;
  doc["M_t"] = mt;
  auto& rows = doc["results"] = nlohmann::json::array();
  for (const int k : config.user_counts) {
    const ThresholdSet th = make_thresholds(model, k, config.regions);
    const BitAllocation greedy = greedy_allocate(th, mt, config.budget);
    const BitAllocation fast = fast_for(th, config.budget);
    nlohmann::json row;
    row["K"] = k;
    row["greedy"] = allocation_json(greedy, th, mt);
    row["fast"] = allocation_json(fast, th, mt);
    const double g = row["greedy"]["rate_bound"].get<double>();
    const double f = row["fast"]["rate_bound"].get<double>();
    row["fast_vs_greedy_gap"] = g > 0.0 ? (g - f) / g : 0.0;
    if (config.regions <= 4 && config.budget <= 6) {
      row["exhaustive"] = allocation_json(exhaustive_allocate(th, mt, config.budget), th, mt);
    }
    rows.push_back(std::move(row));
  }
  out << doc.dump(2) << "\n";
}

std::vector<std::filesystem::path> cmd_simulate(const ExperimentConfig& config,
                                                const std::filesystem::path& dir,
                                                const SimulateOptions& options) {
  config.validate();
  const SnrModel model = config.model();
  const int mt = config.transmit_antennas;
  std::filesystem::create_directories(dir);

  SweepOptions sweep;
  sweep.trials = config.trials;
  sweep.base_seed = config.base_seed;
  sweep.sampling = config.sampling;
  sweep.receive_antennas = config.receive_antennas;
  sweep.threads = options.threads;

  const std::vector<std::filesystem::path> paths = {
      dir / "rate_vs_k.csv", dir / "load_vs_k.csv", dir / "rate_vs_load.csv",
      dir / "allocation_compare.csv"};
  std::ofstream rate = open_csv(paths[0]);
  std::ofstream load = open_csv(paths[1]);
  std::ofstream scatter = open_csv(paths[2]);
  std::ofstream alloc = open_csv(paths[3]);

  provenance(rate, config, "simulate");
  rate << "scheme,tag,K,trials,mean_rate_genie,se_genie,mean_rate_robust,se_robust,mean_bits,"
          "se_bits,outage_fraction,analytic_full_csi_rate,analytic_loss_upper,"
          "analytic_rate_lower_bound\n";
  provenance(load, config, "simulate");
  load << "scheme,tag,K,trials,mean_bits,se_bits,mean_bits_no_index,analytic_bits,"
          "analytic_bits_no_index\n";
  provenance(scatter, config, "simulate");
  fmt::print(scatter, "# rate_meter: {}\n", to_string(config.rate_meter));
  scatter << "scheme,K,meter,mean_rate,mean_bits\n";

  for (const SchemeSpec& spec : config.schemes) {
    const auto results = run_sweep(spec, model, mt, config.user_counts, sweep);
    for (const SweepResult& r : results) {
      const AnalyticColumns a = analytic_for(spec, model, r.num_users, mt);
      const std::string bits = num(r.mean_bits);
      fmt::print(rate, "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.scheme, tag_letter(r.tag),
                 r.num_users, r.trials, num(r.mean_rate_genie), num(r.se_genie),
                 num(r.mean_rate_robust), num(r.se_robust), bits, num(r.se_bits),
                 num(r.outage_fraction), opt(a.full_csi_rate), opt(a.loss_upper_bound),
                 opt(a.rate_lower_bound));
      fmt::print(load, "{},{},{},{},{},{},{},{},{}\n", r.scheme, tag_letter(r.tag), r.num_users,
                 r.trials, bits, num(r.se_bits), num(r.mean_bits_no_index), num(a.load.bits),
                 num(a.load.bits_no_index));
      if (config.rate_meter != RateMeter::Robust) {
        fmt::print(scatter, "{},{},genie,{},{}\n", r.scheme, r.num_users,
                   num(r.mean_rate_genie), bits);
      }
      if (config.rate_meter != RateMeter::Genie) {
        fmt::print(scatter, "{},{},robust,{},{}\n", r.scheme, r.num_users,
                   num(r.mean_rate_robust), bits);
      }
    }
  }

  provenance(alloc, config, "simulate");
  alloc << "K,N,B_Q,rule,bits,rate_bound,relative_gap_to_greedy\n";
  for (const int k : config.user_counts) {
    const ThresholdSet th = make_thresholds(model, k, config.regions);
    for (int budget = 0; budget <= options.max_compare_budget; ++budget) {
      const BitAllocation greedy = greedy_allocate(th, mt, budget);
      const BitAllocation fast = fast_for(th, budget);
      const double g = quantized_rate_lower_bound(th, mt, greedy);
      const double f = quantized_rate_lower_bound(th, mt, fast);
      fmt::print(alloc, "{},{},{},greedy,{},{},0\n", k, config.regions, budget,
                 fmt::join(greedy.bits, " "), num(g));
      fmt::print(alloc, "{},{},{},fast,{},{},{}\n", k, config.regions, budget,
                 fmt::join(fast.bits, " "), num(f), num(g > 0.0 ? (g - f) / g : 0.0));
    }
  }
  return paths;
}

} // namespace mtfb
