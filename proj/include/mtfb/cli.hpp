#pragma once

#include "mtfb/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace mtfb {

enum class RateMeter { Genie, Robust, Both };

struct ExperimentConfig {
  double snr_db = 10.0;
  int transmit_antennas = 4;  ///< M_t
  int receive_antennas = 4;   ///< M_r
  std::vector<int> user_counts{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  int regions = 4;  ///< N
  int budget = 5;   ///< B_Q
  long trials = 1000;
  std::uint64_t base_seed = 1;
  std::string output = "results";
  RateMeter rate_meter = RateMeter::Genie;
  SamplingPath sampling = SamplingPath::Direct;
  double tolerable_loss = 0.25;
  std::vector<int> bounds_regions{1, 2, 3, 4, 5, 6, 7, 8};
  /// One `[scheme.<name>]` section each, in file order.
  std::vector<SchemeSpec> schemes = default_schemes();

  /// Linear SNR, 10^(snr_db / 10).
  double rho() const;
  SnrModel model() const;
  /// Throws ConfigError on the first violated constraint.
  void validate() const;

  static std::vector<SchemeSpec> default_schemes();

  bool operator==(const ExperimentConfig&) const = default;
};

double db_to_linear(double db);
double linear_to_db(double linear);

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& config);

/// FNV-1a 64 of the serialized config.
std::uint64_t config_hash(const ExperimentConfig& config);

const char* to_string(RateMeter meter);
RateMeter parse_rate_meter(const std::string& text);

// Each command writes a complete document (CSV with `#` header, or JSON).

void cmd_thresholds(const ExperimentConfig& config, std::ostream& out);
void cmd_bounds(const ExperimentConfig& config, std::ostream& out);
void cmd_allocate(const ExperimentConfig& config, std::ostream& out);

struct SimulateOptions {
  /// OpenMP worker count; 0 keeps the runtime default.
  int threads = 0;
  /// Budgets swept in the allocation comparison.
  int max_compare_budget = 6;
};

/// Writes rate_vs_k.csv, load_vs_k.csv, rate_vs_load.csv and
/// allocation_compare.csv into `dir`. Returns the paths written.
std::vector<std::filesystem::path> cmd_simulate(const ExperimentConfig& config,
                                                const std::filesystem::path& dir,
                                                const SimulateOptions& options = {});

} // namespace mtfb
