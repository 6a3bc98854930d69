#include "mtfb/cli.hpp"

#include "mtfb/errors.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

namespace mtfb {

namespace pt = boost::property_tree;

namespace {

constexpr const char* kSchemePrefix = "scheme.";

const std::set<std::string> kGlobalKeys = {
    "snr_db", "M_t",    "M_r",        "K_list",   "N",              "B_Q",           "trials",
    "base_seed", "output", "rate_meter", "sampling", "tolerable_loss", "bounds_N_list"};

const std::set<std::string> kSchemeKeys = {"type",       "bits",      "regions", "budget",
                                           "allocation", "bits_vector", "threshold", "p_out"};

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  try {
    return boost::lexical_cast<T>(boost::trim_copy(text));
  } catch (const boost::bad_lexical_cast&) {
    throw ConfigError(fmt::format("{}: cannot parse '{}'", key, text));
  }
}

std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(","));
  std::vector<int> out;
  for (const auto& p : parts) {
    out.push_back(parse_value<int>(key, p));
  }
  return out;
}

std::string join(const std::vector<int>& v) {
  return fmt::format("{}", fmt::join(v, ","));
}

const char* to_string(AllocationRule rule) {
  switch (rule) {
  case AllocationRule::Fixed:
    return "fixed";
  case AllocationRule::Greedy:
    return "greedy";
  case AllocationRule::Fast:
    return "fast";
  case AllocationRule::FastClosedForm:
    return "fast_literal";
  }
  return "?";
}

AllocationRule parse_allocation(const std::string& text) {
  if (text == "fixed") {
    return AllocationRule::Fixed;
  }
  if (text == "greedy") {
    return AllocationRule::Greedy;
  }
  if (text == "fast") {
    return AllocationRule::Fast;
  }
  if (text == "fast_literal") {
    return AllocationRule::FastClosedForm;
  }
  throw ConfigError(fmt::format("allocation: unknown rule '{}'", text));
}

SamplingPath parse_sampling(const std::string& text) {
  if (text == "direct") {
    return SamplingPath::Direct;
  }
  if (text == "zf") {
    return SamplingPath::ZeroForcing;
  }
  throw ConfigError(fmt::format("sampling: expected direct or zf, got '{}'", text));
}

SchemeSpec parse_scheme(const std::string& name, const pt::ptree& section, int regions,
                        int budget) {
  for (const auto& [key, value] : section) {
    if (!kSchemeKeys.contains(key)) {
      throw ConfigError(fmt::format("[scheme.{}]: unknown key '{}'", name, key));
    }
  }
  const auto get = [&](const char* key) -> std::optional<std::string> {
    if (auto v = section.get_optional<std::string>(key)) {
      return boost::trim_copy(*v);
    }
    return std::nullopt;
  };
  const auto type = get("type");
  if (!type) {
    throw ConfigError(fmt::format("[scheme.{}]: missing type", name));
  }
  const int bits = get("bits") ? parse_value<int>("bits", *get("bits")) : 5;

  SchemeSpec spec;
  if (*type == "A") {
    spec = SchemeSpec::full_feedback(bits);
  } else if (*type == "B") {
    spec = SchemeSpec::best_beam(bits);
  } else if (*type == "C") {
    const AllocationRule rule = get("allocation") ? parse_allocation(*get("allocation"))
                                                  : AllocationRule::Fast;
    if (rule == AllocationRule::Fixed) {
      if (!get("bits_vector")) {
        throw ConfigError(fmt::format("[scheme.{}]: fixed allocation needs bits_vector", name));
      }
      spec = SchemeSpec::multi_threshold_fixed(parse_int_list("bits_vector", *get("bits_vector")));
    } else {
      spec = SchemeSpec::multi_threshold(
          get("regions") ? parse_value<int>("regions", *get("regions")) : regions,
          get("budget") ? parse_value<int>("budget", *get("budget")) : budget, rule);
    }
  } else if (*type == "D") {
    const std::string source = get("threshold").value_or("outage");
    if (source == "outage") {
      spec = SchemeSpec::single_threshold_outage(
          bits, get("p_out") ? parse_value<double>("p_out", *get("p_out")) : 0.1);
    } else if (source == "lowest") {
      spec = SchemeSpec::single_threshold_lowest(
          bits, get("regions") ? parse_value<int>("regions", *get("regions")) : regions);
    } else {
      throw ConfigError(
          fmt::format("[scheme.{}]: threshold must be outage or lowest, got '{}'", name, source));
    }
  } else {
    throw ConfigError(fmt::format("[scheme.{}]: unknown type '{}'", name, *type));
  }
  spec.name = name;
  return spec;
}

void write_scheme(std::ostream& out, const SchemeSpec& s) {
  out << "\n[" << kSchemePrefix << s.name << "]\n";
  out << "type = " << tag_letter(s.tag) << "\n";
  switch (s.tag) {
  case SchemeTag::A:
  case SchemeTag::B:
    out << "bits = " << s.snr_bits << "\n";
    break;
  case SchemeTag::C:
    out << "allocation = " << to_string(s.allocation) << "\n";
    if (s.allocation == AllocationRule::Fixed) {
      out << "bits_vector = " << join(s.fixed_bits) << "\n";
    } else {
      out << "regions = " << s.regions << "\n";
      out << "budget = " << s.budget << "\n";
    }
    break;
  case SchemeTag::D:
    out << "bits = " << s.snr_bits << "\n";
    if (s.threshold_source == ThresholdSource::FixedOutage) {
      out << "threshold = outage\n";
      out << "p_out = " << fmt::format("{}", s.outage_probability) << "\n";
    } else {
      out << "threshold = lowest\n";
      out << "regions = " << s.regions << "\n";
    }
    break;
  }
}

std::vector<SchemeSpec> make_default_schemes(int regions, int budget) {
  std::vector<SchemeSpec> out;
  out.push_back(SchemeSpec::full_feedback(5));
  out.push_back(SchemeSpec::best_beam(5));
  out.push_back(SchemeSpec::multi_threshold(regions, budget, AllocationRule::Fast));
  auto d1 = SchemeSpec::single_threshold_outage(5, 1e-1);
  d1.name = "D_pout_1e-1";
  auto d4 = SchemeSpec::single_threshold_outage(5, 1e-4);
  d4.name = "D_pout_1e-4";
  auto dl = SchemeSpec::single_threshold_lowest(5, regions);
  dl.name = "D_rth_N";
  out.push_back(d1);
  out.push_back(d4);
  out.push_back(dl);
  return out;
}

} // namespace

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

double ExperimentConfig::rho() const { return db_to_linear(snr_db); }

SnrModel ExperimentConfig::model() const {
  return SnrModel::for_antennas(rho(), receive_antennas, transmit_antennas);
}

std::vector<SchemeSpec> ExperimentConfig::default_schemes() { return make_default_schemes(4, 5); }

void ExperimentConfig::validate() const {
  if (!std::isfinite(snr_db)) {
    throw ConfigError("snr_db must be finite");
  }
  if (transmit_antennas < 1 || receive_antennas < 1) {
    throw ConfigError("M_t and M_r must be positive");
  }
  if (receive_antennas < transmit_antennas) {
    throw ConfigError("zero-forcing needs M_r >= M_t");
  }
  if (user_counts.empty()) {
    throw ConfigError("K_list must not be empty");
  }
  if (user_counts.front() < 1 || !std::is_sorted(user_counts.begin(), user_counts.end(),
                                                 std::less_equal<>())) {
    throw ConfigError("K_list must be positive and strictly ascending");
  }
  if (regions < 1 || regions > user_counts.front()) {
    throw ConfigError(fmt::format("N must lie in [1, {}]", user_counts.front()));
  }
  if (budget < 0) {
    throw ConfigError("B_Q must be nonnegative");
  }
  if (trials < 1) {
    throw ConfigError("trials must be positive");
  }
  if (!(tolerable_loss > 0.0)) {
    throw ConfigError("tolerable_loss must be positive");
  }
  if (bounds_regions.empty() ||
      std::any_of(bounds_regions.begin(), bounds_regions.end(), [](int n) { return n < 1; })) {
    throw ConfigError("bounds_N_list must be a nonempty list of positive counts");
  }
  if (schemes.empty()) {
    throw ConfigError("no schemes configured");
  }
  std::set<std::string> names;
  for (const auto& s : schemes) {
    if (s.name.empty() || !names.insert(s.name).second) {
      throw ConfigError(fmt::format("duplicate or empty scheme name '{}'", s.name));
    }
    try {
      s.validate();
    } catch (const std::domain_error& e) {
      throw ConfigError(e.what());
    }
    if ((s.tag == SchemeTag::C || (s.tag == SchemeTag::D &&
                                   s.threshold_source == ThresholdSource::SchemeCLowest)) &&
        s.regions > user_counts.front()) {
      throw ConfigError(fmt::format("scheme {}: {} regions exceed K = {}", s.name, s.regions,
                                    user_counts.front()));
    }
  }
}

ExperimentConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  ExperimentConfig c;
  std::vector<std::pair<std::string, const pt::ptree*>> scheme_sections;
  for (const auto& [key, node] : tree) {
    if (boost::starts_with(key, kSchemePrefix)) {
      scheme_sections.emplace_back(key.substr(std::string(kSchemePrefix).size()), &node);
      continue;
    }
    if (!node.empty()) {
      throw ConfigError(fmt::format("unknown section [{}]", key));
    }
    if (!kGlobalKeys.contains(key)) {
      throw ConfigError(fmt::format("unknown key '{}'", key));
    }
    const std::string value = boost::trim_copy(node.data());
    if (key == "snr_db") {
      c.snr_db = parse_value<double>(key, value);
    } else if (key == "M_t") {
      c.transmit_antennas = parse_value<int>(key, value);
    } else if (key == "M_r") {
      c.receive_antennas = parse_value<int>(key, value);
    } else if (key == "K_list") {
      c.user_counts = parse_int_list(key, value);
    } else if (key == "N") {
      c.regions = parse_value<int>(key, value);
    } else if (key == "B_Q") {
      c.budget = parse_value<int>(key, value);
    } else if (key == "trials") {
      c.trials = parse_value<long>(key, value);
    } else if (key == "base_seed") {
      c.base_seed = parse_value<std::uint64_t>(key, value);
    } else if (key == "output") {
      c.output = value;
    } else if (key == "rate_meter") {
      c.rate_meter = parse_rate_meter(value);
    } else if (key == "sampling") {
      c.sampling = parse_sampling(value);
    } else if (key == "tolerable_loss") {
      c.tolerable_loss = parse_value<double>(key, value);
    } else if (key == "bounds_N_list") {
      c.bounds_regions = parse_int_list(key, value);
    }
  }
  if (scheme_sections.empty()) {
    c.schemes = make_default_schemes(c.regions, c.budget);
  } else {
    c.schemes.clear();
    for (const auto& [name, node] : scheme_sections) {
      c.schemes.push_back(parse_scheme(name, *node, c.regions, c.budget));
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
  }
  return parse_config(in);
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "snr_db = " << fmt::format("{}", c.snr_db) << "\n";
  out << "M_t = " << c.transmit_antennas << "\n";
  out << "M_r = " << c.receive_antennas << "\n";
  out << "K_list = " << join(c.user_counts) << "\n";
  out << "N = " << c.regions << "\n";
  out << "B_Q = " << c.budget << "\n";
  out << "trials = " << c.trials << "\n";
  out << "base_seed = " << c.base_seed << "\n";
  out << "output = " << c.output << "\n";
  out << "rate_meter = " << to_string(c.rate_meter) << "\n";
  out << "sampling = " << (c.sampling == SamplingPath::Direct ? "direct" : "zf") << "\n";
  out << "tolerable_loss = " << fmt::format("{}", c.tolerable_loss) << "\n";
  out << "bounds_N_list = " << join(c.bounds_regions) << "\n";
  for (const auto& s : c.schemes) {
    write_scheme(out, s);
  }
  return out.str();
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : serialize_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

const char* to_string(RateMeter meter) {
  switch (meter) {
  case RateMeter::Genie:
    return "genie";
  case RateMeter::Robust:
    return "robust";
  case RateMeter::Both:
    return "both";
  }
  return "?";
}

RateMeter parse_rate_meter(const std::string& text) {
  if (text == "genie") {
    return RateMeter::Genie;
  }
  if (text == "robust") {
    return RateMeter::Robust;
  }
  if (text == "both") {
    return RateMeter::Both;
  }
  throw ConfigError(fmt::format("rate_meter: expected genie, robust or both, got '{}'", text));
}

} // namespace mtfb
