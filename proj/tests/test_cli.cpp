#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "initial_state.hpp"
#include "mfnet/error.hpp"
#include "spec_file.hpp"

using namespace mfnet;
namespace fs = std::filesystem;

namespace {

const std::string kExamples = MFNET_EXAMPLES_DIR;

std::string example(const std::string& name) { return kExamples + "/" + name; }

struct Result {
  int rc;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "mfnet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {rc, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mfnet_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Column `name` of a CSV written by the tool, as numbers.
std::vector<double> column(const fs::path& p, const std::string& name) {
  const auto ls = lines(p);
  REQUIRE(ls.size() >= 2);
  std::vector<std::string> header;
  std::stringstream hs(ls[1]);
  for (std::string f; std::getline(hs, f, ',');) header.push_back(f);
  const auto it = std::find(header.begin(), header.end(), name);
  REQUIRE(it != header.end());
  const auto col = static_cast<std::size_t>(it - header.begin());
  std::vector<double> out;
  for (std::size_t i = 2; i < ls.size(); ++i) {
    std::stringstream rs(ls[i]);
    std::string f;
    for (std::size_t k = 0; k <= col; ++k) std::getline(rs, f, ',');
    out.push_back(std::stod(f));
  }
  return out;
}

double report_value(const std::string& out, const std::string& key) {
  const auto pos = out.find(key + ": ");
  REQUIRE(pos != std::string::npos);
  return std::stod(out.substr(pos + key.size() + 2));
}

}  // namespace

TEST_CASE("parse_spec") {
  SUBCASE("reference network") {
    const auto loaded = cli::load_spec(example("e1.json"));
    const auto& s = loaded.spec;
    CHECK(s.num_classes == 2);
    CHECK(s.routing.at(0, 1) == 0.5);
    CHECK(s.routing.at(1, 0) == 0.0);
    CHECK(s.lambda.is_constant());
    CHECK(s.discipline.kind == DisciplineKind::Fifo);
    CHECK(s.discipline.base_rate == std::vector<double>{1.0, 1.0});
    CHECK(s.truncation_K == 8);
    CHECK(loaded.hash.size() == 16);
  }
  SUBCASE("schedule and per-class rates") {
    const auto s = cli::parse_spec(R"({"classes": 2, "routing": [[0, 0], [0, 0]],
      "lambda": [[0, [0.1, 0]], [2.5, [0, 0.1]]], "discipline": "ps", "base_rate": [1, 3],
      "gamma_minus": 0.5})");
    REQUIRE(s.lambda.breakpoints().size() == 2);
    CHECK(s.lambda.rates_at(3.0)[1] == 0.1);
    CHECK(s.discipline.kind == DisciplineKind::ProcessorSharing);
    CHECK(s.discipline.base_rate == std::vector<double>{1.0, 3.0});
    CHECK(s.gamma_minus == 0.5);
    CHECK(!s.gamma_plus);
  }
  SUBCASE("errors") {
    const char* bad[] = {
        R"({"routing": [[0]], "lambda": [0.1], "discipline": "fifo", "base_rate": 1})",
        R"({"classes": 2, "routing": [[0, 0]], "lambda": [0.1, 0.1], "discipline": "fifo", "base_rate": 1})",
        R"({"classes": 1, "routing": [[0]], "lambda": [0.1], "discipline": "random", "base_rate": 1})",
        R"({"classes": 1, "routing": [[0]], "lambda": ["x"], "discipline": "fifo", "base_rate": 1})",
        R"({"classes": 1, "routing": [[0]], "lambda": [[1, [0.1]]], "discipline": "fifo", "base_rate": 1})",
        R"([1, 2])",
        R"({"classes": 1,)",
    };
    for (const char* text : bad) {
      try {
        cli::parse_spec(text);
        FAIL("expected ParseError for " << text);
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParseError);
      }
    }
  }
}

TEST_CASE("fnv1a_hex") {
  CHECK(cli::fnv1a_hex("") == "cbf29ce484222325");
  CHECK(cli::fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(cli::fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("initial state descriptors") {
  const DisciplineSpec d{DisciplineKind::Fifo, {1.0, 1.0}};
  const WordSpace space(2, 3, d);
  CHECK(cli::initial_measure("empty", space).weights[0] == 1.0);
  const auto w = cli::initial_measure("word:121", space);
  CHECK(w.weights[*space.index_of(QueueWord{1, 2, 1})] == 1.0);

  const auto g = cli::initial_measure("geometric:0.5", space);
  double by_length[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < space.size(); ++i) by_length[space.length(i)] += g.weights[i];
  const double norm = 1 + 0.5 + 0.25 + 0.125;
  for (int k = 0; k <= 3; ++k) CHECK(by_length[k] == doctest::Approx(std::pow(0.5, k) / norm));
  CHECK(g.weights[*space.index_of(QueueWord{1, 2})] == doctest::Approx(g.weights[*space.index_of(QueueWord{2, 2})]));

  const fs::path dir = fresh_dir("init");
  {
    std::ofstream f(dir / "mu.csv");
    f << "word,weight\n-,3\n12,1\n";
  }
  const auto c = cli::initial_measure("csv:" + (dir / "mu.csv").string(), space);
  CHECK(c.weights[0] == 0.75);
  CHECK(c.weights[*space.index_of(QueueWord{1, 2})] == 0.25);

  for (const char* bad : {"full", "word:13", "geometric:1.5", "geometric:x", "csv:/nonexistent/file.csv"}) {
    try {
      cli::initial_measure(bad, space);
      FAIL("expected InvalidArgument for " << bad);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidArgument);
    }
  }
  try {
    cli::initial_measure("word:1111", space);
    FAIL("expected TruncationMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TruncationMismatch);
  }

  const auto ens = cli::initial_ensemble("word:12", 5, space, 1);
  CHECK(ens.queues == std::vector<QueueWord>(5, QueueWord{1, 2}));
  const auto drawn = cli::initial_ensemble("geometric:0.5", 2000, space, 1);
  std::size_t empty = 0;
  for (const auto& q : drawn.queues) empty += q.empty();
  CHECK(std::abs(empty / 2000.0 - 1 / norm) < 4 * std::sqrt(0.25 / 2000));
}

TEST_CASE("validate") {
  const auto ok = run({"validate", "--spec", example("e1.json")});
  CHECK(ok.rc == 0);
  CHECK(report_value(ok.out, "kappa") == doctest::Approx(0.1));
  CHECK(ok.out.find("w_star: 0 0.025\n") != std::string::npos);
  CHECK(ok.out.find("p_empty >= 0.9\n") != std::string::npos);

  const auto malformed = run({"validate", "--spec", example("malformed.json")});
  CHECK(malformed.rc == 2);
  CHECK(malformed.err.find("ParseError") != std::string::npos);
  CHECK(malformed.err.find("line 4") != std::string::npos);

  const auto super = run({"validate", "--spec", example("supercritical.json")});
  CHECK(super.rc == 3);
  CHECK(super.err.find("SpectralRadiusNotSubcritical") != std::string::npos);

  CHECK(run({"validate"}).rc == 2);
  CHECK(run({"validate", "--spec", example("e1.json"), "--bogus"}).rc == 2);
  CHECK(run({"--help"}).rc == 0);
}

TEST_CASE("nlmp and stationary outputs") {
  const fs::path dir = fresh_dir("nlmp");
  const auto r = run({"nlmp", "--spec", example("e1.json"), "--out-dir", dir.string(), "--t-end", "5",
                      "--stride", "50", "--weights"});
  REQUIRE(r.rc == 0);
  const auto ls = lines(dir / "trajectory.csv");
  REQUIRE(ls.size() == 2 + 11);
  CHECK(ls[0].starts_with("# spec_hash="));
  CHECK(ls[0].find(" seed=1") != std::string::npos);
  CHECK(ls[1] == "t,mass,leaked,alpha,L,S,drift,u_1,u_2,w_1,w_2,v_1,v_2");
  CHECK(column(dir / "trajectory.csv", "t").back() == 5.0);
  CHECK(lines(dir / "weights.csv")[1] == "t,word,weight");
  CHECK(lines(dir / "weights.csv")[2] == "0,-,1");

  const auto s = run({"stationary", "--spec", example("mm1.json"), "--out-dir", dir.string()});
  REQUIRE(s.rc == 0);
  CHECK(report_value(s.out, "p_empty") == doctest::Approx(0.95).epsilon(1e-6));
  CHECK(lines(dir / "stationary.csv")[2].starts_with("-,0.95"));

  CHECK(run({"nlmp", "--spec", example("e1.json"), "--out-dir", dir.string(), "--dt", "0.5"}).rc == 4);
  CHECK(run({"stationary", "--spec", example("e1.json"), "--out-dir", dir.string(), "--t-end", "2"}).rc == 5);
  CHECK(run({"nlmp", "--spec", example("e1.json"), "--out-dir", dir.string(), "--init", "word:9"}).rc == 2);
}

TEST_CASE("schedules run through the solver") {
  const fs::path dir = fresh_dir("ramp");
  const auto r = run({"nlmp", "--spec", example("e1_ramp.json"), "--out-dir", dir.string(), "--t-end", "60",
                      "--stride", "100"});
  REQUIRE(r.rc == 0);
  const auto t = column(dir / "trajectory.csv", "t");
  const auto v1 = column(dir / "trajectory.csv", "v_1");
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < 10.0) CHECK(v1[k] == 0.0);
    if (t[k] > 50.0) CHECK(v1[k] == doctest::Approx(0.1));
  }
}

TEST_CASE("couple and ergodicity") {
  const fs::path dir = fresh_dir("erg");
  SUBCASE("identical initial states") {
    const auto r = run({"ergodicity", "--spec", example("e1.json"), "--out-dir", dir.string(), "--t-end", "5",
                        "--init-a", "word:12", "--init-b", "word:12", "--stride", "50"});
    REQUIRE(r.rc == 0);
    CHECK(r.out.find("tv_crossing_time: 0\n") != std::string::npos);
    for (double x : column(dir / "ergodicity.csv", "tv")) CHECK(x == 0.0);
    for (double x : column(dir / "ergodicity.csv", "r_t")) CHECK(x == 0.0);
  }
  SUBCASE("reference merge") {
    const auto r = run({"ergodicity", "--spec", example("e1.json"), "--out-dir", dir.string(), "--t-end", "60",
                        "--trunc-K", "10", "--coupled-K", "5"});
    REQUIRE(r.rc == 0);
    const double crossing = report_value(r.out, "tv_crossing_time");
    CHECK(crossing > 0.0);
    CHECK(crossing < 60.0);
    const auto tv = column(dir / "ergodicity.csv", "tv");
    CHECK(tv.front() == 1.0);
  }
  SUBCASE("high load is reported, not an error") {
    const auto r = run({"ergodicity", "--spec", example("e1_high_load.json"), "--out-dir", dir.string(),
                        "--t-end", "5", "--coupled-K", "4"});
    CHECK(r.rc == 0);
    CHECK(r.out.find("none within horizon") != std::string::npos);
  }
  SUBCASE("couple columns") {
    const auto r = run({"couple", "--spec", example("e1.json"), "--out-dir", dir.string(), "--t-end", "2",
                        "--trunc-K", "4", "--stride", "10"});
    REQUIRE(r.rc == 0);
    CHECK(lines(dir / "coupled.csv")[1] == "t,w_mass,r_mass,leaked,tv_bound,tv_actual,red_L");
    const auto tv = column(dir / "coupled.csv", "tv_actual");
    const auto bound = column(dir / "coupled.csv", "tv_bound");
    for (std::size_t k = 0; k < tv.size(); ++k) CHECK(tv[k] <= bound[k] + 1e-12);
  }
}

TEST_CASE("simulate is reproducible") {
  const fs::path a = fresh_dir("sim_a");
  const fs::path b = fresh_dir("sim_b");
  const fs::path c = fresh_dir("sim_c");
  const std::vector<std::string> base{"simulate", "--spec", example("e1.json"), "--M", "300", "--t-end", "20",
                                      "--events"};
  auto with = [&](const fs::path& dir, const std::string& seed) {
    auto args = base;
    args.insert(args.end(), {"--out-dir", dir.string(), "--seed", seed});
    return run(args);
  };
  REQUIRE(with(a, "5").rc == 0);
  REQUIRE(with(b, "5").rc == 0);
  REQUIRE(with(c, "6").rc == 0);
  CHECK(slurp(a / "events.csv") == slurp(b / "events.csv"));
  CHECK(slurp(a / "simulate.csv") == slurp(b / "simulate.csv"));
  CHECK(slurp(a / "events.csv") != slurp(c / "events.csv"));
  CHECK(lines(a / "events.csv")[1] == "time,kind,copy,target,class_before,class_after");
  CHECK(lines(a / "simulate.csv")[1].starts_with("t,occupancy,leaked,arrivals_1,arrivals_2,departures_1,departures_2,mu_-,mu_1,"));
}

TEST_CASE("compare") {
  const fs::path dir = fresh_dir("compare");
  SUBCASE("one copy is far from the limit") {
    const auto r = run({"compare", "--spec", example("e1.json"), "--out-dir", dir.string(), "--M", "1",
                        "--t-end", "100"});
    REQUIRE(r.rc == 0);
    CHECK(report_value(r.out, "final_tv_distance") > 0.1);
  }
  SUBCASE("seed variation stays within binomial error") {
    std::vector<double> d;
    for (const char* seed : {"1", "2"}) {
      const auto r = run({"compare", "--spec", example("e1.json"), "--out-dir", dir.string(), "--M", "2000",
                          "--t-end", "100", "--seed", seed});
      REQUIRE(r.rc == 0);
      d.push_back(report_value(r.out, "final_tv_distance"));
      CHECK(d.back() <= 0.02);
    }
    CHECK(std::abs(d[0] - d[1]) <= 2 * std::sqrt(0.1 / 2000));
    CHECK(lines(dir / "ks.csv")[1] == "class,rate,n,statistic,p_value");
  }
}

TEST_CASE("config file with command-line override") {
  const fs::path dir = fresh_dir("config");
  {
    std::ofstream f(dir / "run.ini");
    f << "spec = " << example("e1.json") << "\n"
      << "out-dir = " << dir.string() << "\n"
      << "t-end = 3\n"
      << "[nlmp]\nstride = 100\n";
  }
  auto r = run({"--config", (dir / "run.ini").string(), "nlmp"});
  REQUIRE(r.rc == 0);
  CHECK(column(dir / "trajectory.csv", "t") == std::vector<double>{0, 1, 2, 3});
  r = run({"--config", (dir / "run.ini").string(), "nlmp", "--t-end", "1", "--stride", "50"});
  REQUIRE(r.rc == 0);
  CHECK(column(dir / "trajectory.csv", "t") == std::vector<double>{0, 0.5, 1});
}
