#include "mtfb/cli.hpp"
#include "mtfb/errors.hpp"

#include <doctest.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace mtfb;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) {
      cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
      cells.emplace_back();
    }
    rows.push_back(cells);
  }
  return rows;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mtfb_test_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig small_config() {
  ExperimentConfig c = parse("K_list = 8,16\ntrials = 200\nbase_seed = 9\n");
  return c;
}

} // namespace

TEST_CASE("default config") {
  const ExperimentConfig c;
  CHECK(c.transmit_antennas == 4);
  CHECK(c.receive_antennas == 4);
  CHECK(c.regions == 4);
  CHECK(c.budget == 5);
  CHECK(c.rho() == 10.0);
  CHECK(c.schemes.size() == 6);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("dB conversion") {
  for (int db = -30; db <= 30; ++db) {
    CHECK(db_to_linear(db) == std::pow(10.0, db / 10.0));
  }
  CHECK(db_to_linear(10) == 10.0);
  CHECK(db_to_linear(20) == 100.0);
  CHECK(linear_to_db(100.0) == doctest::Approx(20.0));
}

TEST_CASE("config round trip") {
  const std::string text = R"(snr_db = 7.5
M_t = 2
M_r = 3
K_list = 5, 10,40
N = 3
B_Q = 4
trials = 123
base_seed = 18446744073709551615
output = out/dir
rate_meter = both
sampling = zf
tolerable_loss = 0.3
bounds_N_list = 1,2

[scheme.full]
type = A
bits = 3

[scheme.fixed]
type = C
allocation = fixed
bits_vector = 0,1,3

[scheme.greedy]
type = C
allocation = greedy

[scheme.d]
type = D
bits = 4
threshold = outage
p_out = 0.001

[scheme.dl]
type = D
threshold = lowest
)";
  const ExperimentConfig a = parse(text);
  CHECK(a.user_counts == std::vector<int>{5, 10, 40});
  CHECK(a.base_seed == 18446744073709551615ULL);
  CHECK(a.sampling == SamplingPath::ZeroForcing);
  CHECK(a.rate_meter == RateMeter::Both);
  REQUIRE(a.schemes.size() == 5);
  CHECK(a.schemes[1].fixed_bits == std::vector<int>{0, 1, 3});
  CHECK(a.schemes[2].regions == 3);
  CHECK(a.schemes[2].budget == 4);
  CHECK(a.schemes[4].regions == 3);
  const ExperimentConfig b = parse(serialize_config(a));
  CHECK(a == b);
  CHECK(serialize_config(a) == serialize_config(b));
  CHECK(config_hash(a) == config_hash(b));

  const ExperimentConfig d;
  CHECK(parse(serialize_config(d)) == d);
  CHECK(parse("") == d);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("M_t = four\n"), ConfigError);
  CHECK_THROWS_AS(parse("K_list = 20,10\n"), ConfigError);
  CHECK_THROWS_AS(parse("K_list = \n"), ConfigError);
  CHECK_THROWS_AS(parse("N = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("N = 11\nK_list = 10\n"), ConfigError);
  CHECK_THROWS_AS(parse("trials = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("snr_db = inf\n"), ConfigError);
  CHECK_THROWS_AS(parse("M_r = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse("rate_meter = loud\n"), ConfigError);
  CHECK_THROWS_AS(parse("[scheme.x]\ntype = E\n"), ConfigError);
  CHECK_THROWS_AS(parse("[scheme.x]\nbits = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse("[scheme.x]\ntype = D\np_out = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse("[scheme.x]\ntype = C\nallocation = fixed\n"), ConfigError);
  CHECK_THROWS_AS(parse("[other]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("N = 1\nN = 2\n"), ConfigError);
}

TEST_CASE("thresholds table") {
  ExperimentConfig c;
  c.user_counts = {100};
  std::ostringstream out;
  cmd_thresholds(c, out);
  CHECK(out.str().find(fmt::format("# config_hash: {:016x}", config_hash(c))) !=
        std::string::npos);
  CHECK(out.str().find("# seed: 1") != std::string::npos);
  const auto rows = csv_rows(out.str());
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == std::vector<std::string>{"K", "j", "r_th_linear", "r_th_db", "region_mass"});
  for (int j = 1; j <= 4; ++j) {
    CHECK(std::stod(rows[j][2]) == doctest::Approx(10.0 * std::log(100.0 / j)).epsilon(1e-12));
    CHECK(std::stod(rows[j][4]) == doctest::Approx(0.01).epsilon(1e-9));
  }

  c.user_counts = {4};
  std::ostringstream full;
  cmd_thresholds(c, full);
  const auto last = csv_rows(full.str()).back();
  CHECK(last[2] == "0");
}

TEST_CASE("bounds table") {
  ExperimentConfig c;
  c.user_counts = {10, 100};
  std::ostringstream out;
  cmd_bounds(c, out);
  const auto rows = csv_rows(out.str());
  REQUIRE(rows.size() == 1 + 8 + 8);
  CHECK(rows[0].size() == 13);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(std::stod(rows[i][6]) <= std::stod(rows[i][7]));
    CHECK(rows[i][12].empty());
  }
  // Rows for K = 100 span N = 1..8.
  for (int n = 1; n <= 8; ++n) {
    CHECK(rows[8 + n][1] == std::to_string(n));
  }
  c.receive_antennas = 5;
  std::ostringstream bad;
  CHECK_THROWS_AS(cmd_bounds(c, bad), ConfigError);
}

TEST_CASE("allocation report") {
  ExperimentConfig c;
  c.user_counts = {50, 100};
  c.budget = 3;
  std::ostringstream out;
  cmd_allocate(c, out);
  const auto doc = nlohmann::json::parse(out.str());
  REQUIRE(doc["results"].size() == 2);
  for (const auto& row : doc["results"]) {
    CHECK(row["greedy"]["bits"] == row["exhaustive"]["bits"]);
    CHECK(row["fast_vs_greedy_gap"].get<double>() <= 0.01);
    CHECK(row["greedy"]["expected_load"] == 4 * (4 * 2 + 3));
  }
  c.budget = 5;
  std::ostringstream five;
  cmd_allocate(c, five);
  CHECK(nlohmann::json::parse(five.str())["results"][0]["fast"]["expected_load"] == 52);
}

TEST_CASE("simulate writes deterministic, joinable tables") {
  ExperimentConfig c = small_config();
  c.rate_meter = RateMeter::Both;
  const fs::path a = scratch("sim_a");
  const fs::path b = scratch("sim_b");
  SimulateOptions one;
  one.threads = 1;
  one.max_compare_budget = 3;
  SimulateOptions many = one;
  many.threads = 4;
  const auto pa = cmd_simulate(c, a, one);
  const auto pb = cmd_simulate(c, b, many);
  REQUIRE(pa.size() == 4);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(slurp(pa[i]) == slurp(pb[i]));
  }

  const auto rate = csv_rows(slurp(a / "rate_vs_k.csv"));
  const auto load = csv_rows(slurp(a / "load_vs_k.csv"));
  const auto scatter = csv_rows(slurp(a / "rate_vs_load.csv"));
  CHECK(rate.size() == 1 + 6 * 2);
  std::map<std::pair<std::string, std::string>, std::pair<std::string, std::string>> joined;
  for (std::size_t i = 1; i < rate.size(); ++i) {
    joined[{rate[i][0], rate[i][2]}] = {rate[i][4], rate[i][6]};
  }
  std::map<std::pair<std::string, std::string>, std::string> bits;
  for (std::size_t i = 1; i < load.size(); ++i) {
    bits[{load[i][0], load[i][2]}] = load[i][4];
  }
  REQUIRE(scatter.size() == 1 + 2 * 6 * 2);
  for (std::size_t i = 1; i < scatter.size(); ++i) {
    const auto key = std::make_pair(scatter[i][0], scatter[i][1]);
    const auto& rates = joined.at(key);
    CHECK(scatter[i][3] == (scatter[i][2] == "genie" ? rates.first : rates.second));
    CHECK(scatter[i][4] == bits.at(key));
  }

  for (const auto& p : pa) {
    const std::string text = slurp(p);
    CHECK(text.rfind("# mtfb simulate\n", 0) == 0);
    CHECK(text.find("# seed: 9") != std::string::npos);
  }
}

TEST_CASE("command-line exit codes") {
  const char* cli = std::getenv("MTFB_CLI");
  if (cli == nullptr) {
    MESSAGE("MTFB_CLI not set; skipping");
    return;
  }
  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  const auto run = [&](const std::string& args) {
    const int status = std::system((std::string(cli) + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  CHECK(run("thresholds") == 0);
  CHECK(run("--trials 0 thresholds") == 2);
  CHECK(run("--config /nonexistent thresholds") == 2);
  CHECK(run("--rate-meter loud thresholds") == 2);
  CHECK(run("") == 2);

  std::ofstream(dir / "bad.ini") << "K_list = 5,3\n";
  CHECK(run("--config " + (dir / "bad.ini").string() + " thresholds") == 2);

  std::ofstream(dir / "ok.ini") << "K_list = 6\ntrials = 20\n";
  CHECK(run("--config " + (dir / "ok.ini").string() + " --out " + (dir / "o").string() +
            " simulate") == 0);
  CHECK(fs::exists(dir / "o" / "rate_vs_k.csv"));
  CHECK(run("--config " + (dir / "ok.ini").string() + " --out " + (dir / "o").string() +
            " bounds") == 0);
  CHECK(fs::exists(dir / "o" / "bounds.csv"));
}
