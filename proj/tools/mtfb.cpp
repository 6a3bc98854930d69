// Command-line front end: thresholds, bounds, allocate, simulate.

#include "mtfb/cli.hpp"
#include "mtfb/errors.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<long> trials;
  std::optional<std::string> rate_meter;
  int threads = 0;
};

mtfb::ExperimentConfig resolve(const Flags& f) {
  mtfb::ExperimentConfig c =
      f.config_path.empty() ? mtfb::ExperimentConfig{} : mtfb::load_config(f.config_path);
  if (f.seed) {
    c.base_seed = *f.seed;
  }
  if (f.out) {
    c.output = *f.out;
  }
  if (f.trials) {
    c.trials = *f.trials;
  }
  if (f.rate_meter) {
    c.rate_meter = mtfb::parse_rate_meter(*f.rate_meter);
  }
  c.validate();
  return c;
}

/// Table commands print to stdout, or to <out>/<name> when --out is given.
void emit(const Flags& f, const mtfb::ExperimentConfig& c, const char* name,
          void (*command)(const mtfb::ExperimentConfig&, std::ostream&)) {
  if (!f.out) {
    command(c, std::cout);
    return;
  }
  std::filesystem::create_directories(*f.out);
  const auto path = std::filesystem::path(*f.out) / name;
  std::ofstream file(path, std::ios::binary);
  if (!file) {
    throw mtfb::ConfigError(fmt::format("cannot write '{}'", path.string()));
  }
  command(c, file);
  std::cout << path.string() << "\n";
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-threshold CSI feedback analysis and simulation"};
  app.require_subcommand(1);
  Flags flags;
  app.add_option("--config", flags.config_path, "INI experiment file")->check(CLI::ExistingFile);
  app.add_option("--seed", flags.seed, "Base seed (overrides base_seed)");
  app.add_option("--out", flags.out, "Output directory (overrides output)");
  app.add_option("--trials", flags.trials, "Trials per K (overrides trials)");
  app.add_option("--rate-meter", flags.rate_meter, "genie, robust or both")
      ->check(CLI::IsMember({"genie", "robust", "both"}));
  app.add_option("--threads", flags.threads, "Worker threads (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);

  auto* thresholds = app.add_subcommand("thresholds", "Region thresholds per K");
  auto* bounds = app.add_subcommand("bounds", "Loss/increment bounds and envelopes");
  auto* allocate = app.add_subcommand("allocate", "Greedy, fast and exhaustive bit allocation");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo sweep; writes CSVs to the output dir");
  auto* print_config = app.add_subcommand("config", "Print the resolved configuration");
  for (auto* sub : {thresholds, bounds, allocate, simulate, print_config}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const mtfb::ExperimentConfig config = resolve(flags);
    if (*thresholds) {
      emit(flags, config, "thresholds.csv", mtfb::cmd_thresholds);
    } else if (*bounds) {
      emit(flags, config, "bounds.csv", mtfb::cmd_bounds);
    } else if (*allocate) {
      emit(flags, config, "allocation.json", mtfb::cmd_allocate);
    } else if (*simulate) {
      mtfb::SimulateOptions options;
      options.threads = flags.threads;
      for (const auto& path : mtfb::cmd_simulate(config, config.output, options)) {
        std::cout << path.string() << "\n";
      }
    } else if (*print_config) {
      std::cout << mtfb::serialize_config(config);
    }
  } catch (const mtfb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const mtfb::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
