#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "riskgym/harness.hpp"

using namespace riskgym;

namespace {

std::string temp_file(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// Realistic pools underpopulate the rare (low CR, 3 obstacles) cells, so the
// suite and draw tests use a pool with relabeled CR values that covers every
// (bin, obstacle count) cell. The scenarios themselves stay playable.
const ScenarioPool& shared_pool() {
  static const ScenarioPool pool = [] {
    const ScenarioPool real =
        generate_pool(200, VehicleModel::point_mass(), CrConfig{},
                      ScenarioRanges::point_mass(), 424242, 1);
    std::array<const Scenario*, 3> base{};
    for (const Scenario& s : real.scenarios()) base[s.n_obst() - 1] = &s;
    std::vector<Scenario> cells;
    Rng rng = derived_rng(424243, 0);
    for (int b = 0; b < 10; ++b) {
      for (int n = 0; n < 3; ++n) {
        for (int k = 0; k < 6; ++k) {
          Scenario s = *base[n];
          s.cr = (b + uniform(rng, 0.0, 1.0)) / 10.0;
          cells.push_back(std::move(s));
        }
      }
    }
    return ScenarioPool(std::move(cells),
                        env_digest(VehicleModel::point_mass(), CrConfig{},
                                   ScenarioRanges::point_mass()),
                        CrConfig{});
  }();
  return pool;
}

}  // namespace

TEST_CASE("largest remainder allocation") {
  CHECK(largest_remainder({1.0, 1.0, 1.0}, 3) == std::vector<long>{1, 1, 1});
  CHECK(largest_remainder({1.0, 1.0, 1.0}, 500) ==
        std::vector<long>{167, 167, 166});
  CHECK(largest_remainder({0.5, 0.25, 0.25}, 2) ==
        std::vector<long>{1, 1, 0});
  const auto counts = largest_remainder(std::vector<double>(30, 1.0), 500);
  long total = 0;
  for (long c : counts) {
    total += c;
    CHECK(c >= 16);
    CHECK(c <= 17);
  }
  CHECK(total == 500);
}

TEST_CASE("validation suites are deterministic and balanced") {
  const ScenarioPool& pool = shared_pool();
  const ValidationSuite a = build_validation_suite(pool, 90, 5);
  const ValidationSuite b = build_validation_suite(pool, 90, 5);
  const ValidationSuite c = build_validation_suite(pool, 90, 6);
  REQUIRE(a.scenarios.size() == 90);
  CHECK(a.digest() == b.digest());
  CHECK(a.digest() != c.digest());

  // 30 cells x 3 scenarios: each CR bin gets 9, each obstacle count 30.
  std::array<long, 10> bins{};
  std::array<long, 3> counts{};
  for (const Scenario& s : a.scenarios) {
    int bin = static_cast<int>(s.cr * 10.0);
    if (bin > 9) bin = 9;
    ++bins[bin];
    ++counts[s.n_obst() - 1];
  }
  for (long bc : bins) CHECK(bc == 9);
  for (long nc : counts) CHECK(nc == 30);
}

TEST_CASE("evaluation is deterministic and counts non-collisions as success") {
  const EnvConfig cfg = EnvConfig::point_mass();
  const ValidationSuite suite = build_validation_suite(shared_pool(), 30, 5);
  Rng init = derived_rng(50, 0);
  Td3Config td3;
  td3.hidden = 16;
  const Td3Agent agent(cfg.obs_dim(), td3, init);

  const EvalStats s1 = evaluate(agent.actor(), suite, cfg);
  const EvalStats s2 = evaluate(agent.actor(), suite, cfg);
  CHECK(s1.success_ratio == s2.success_ratio);
  CHECK(s1.collision_rate == s2.collision_rate);
  CHECK(s1.mean_episode_len == s2.mean_episode_len);
  CHECK(s1.success_ratio + s1.collision_rate == doctest::Approx(1.0));
  CHECK(s1.mean_episode_len > 0.0);

  // Noisy evaluation with a fixed noise seed is reproducible too.
  const EvalStats n1 = evaluate(agent.actor(), suite, cfg, 0.15, 99);
  const EvalStats n2 = evaluate(agent.actor(), suite, cfg, 0.15, 99);
  CHECK(n1.success_ratio == n2.success_ratio);
}

TEST_CASE("worker count honors the environment variable") {
  setenv("RISKGYM_THREADS", "3", 1);
  CHECK(worker_count() == 3);
  setenv("RISKGYM_THREADS", "0", 1);
  CHECK(worker_count() >= 1);
  unsetenv("RISKGYM_THREADS");
  CHECK(worker_count() >= 1);
}

TEST_CASE("run config parsing") {
  const std::string path = temp_file("riskgym_cfg.toml");
  std::ofstream(path) << "# experiment grid\n"
                         "env = \"point-mass\"\n"
                         "pool = \"pool.jsonl\"\n"
                         "dists = [\"preset:1\", \"preset:7\"]\n"
                         "ratios = [\"1,1,1\"]\n"
                         "budget = 50000\n"
                         "eval_interval = 10000\n"
                         "validation_size = 100\n"
                         "seeds = [1, 2, 3]\n"
                         "sigma_n = 0.15\n"
                         "out_dir = \"out\"\n";
  const RunConfig cfg = parse_run_config(path);
  CHECK(cfg.env == "point-mass");
  CHECK(cfg.pool == "pool.jsonl");
  CHECK(cfg.dists == std::vector<std::string>{"preset:1", "preset:7"});
  CHECK(cfg.ratios == std::vector<std::string>{"1,1,1"});
  CHECK(cfg.budget == 50000);
  CHECK(cfg.eval_interval == 10000);
  CHECK(cfg.validation_size == 100);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(cfg.sigma_n == 0.15);
  CHECK(cfg.out_dir == "out");

  SUBCASE("unknown keys are rejected with the line number") {
    std::ofstream(path) << "budget = 50000\nbogus_key = 1\n";
    try {
      parse_run_config(path);
      FAIL("expected std::invalid_argument");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }

  SUBCASE("budget below the eval interval is rejected") {
    std::ofstream(path) << "budget = 100\neval_interval = 1000\n";
    CHECK_THROWS_AS(parse_run_config(path), std::invalid_argument);
  }

  SUBCASE("missing files are rejected") {
    CHECK_THROWS_AS(parse_run_config(path + ".nope"), std::invalid_argument);
  }
}

TEST_CASE("distribution and ratio spec parsing") {
  const CrDistribution p4 = parse_dist_spec("preset:4");
  CHECK(p4.masses[0] == doctest::Approx(0.1));
  const CrDistribution iv = parse_dist_spec("interval:0.8,1.0");
  CHECK(iv.masses[8] == doctest::Approx(0.5));
  CHECK(iv.masses[9] == doctest::Approx(0.5));
  CHECK_THROWS_AS(parse_dist_spec("preset"), std::invalid_argument);
  CHECK_THROWS_AS(parse_dist_spec("gauss:1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_dist_spec("interval:0.5"), std::invalid_argument);

  const ObstacleRatio r = parse_ratio_spec("2,1,1");
  CHECK(r.p1 == doctest::Approx(0.5));
  CHECK(r.p2 == doctest::Approx(0.25));
  CHECK(r.p3 == doctest::Approx(0.25));
  CHECK_THROWS_AS(parse_ratio_spec("1,1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_ratio_spec("0,0,0"), std::invalid_argument);
}

TEST_CASE("metrics CSVs round-trip and carry the suite digest") {
  const std::string path = temp_file("riskgym_metrics.csv");
  const std::vector<EvalPoint> series{
      {20000, 0.512, 0.488, 133.25},
      {40000, 0.73400000000000001, 0.266, 150.0},
  };
  write_metrics_csv(path, 0xdeadbeef12345678ULL, series);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "# suite_digest=deadbeef12345678");

  const std::vector<EvalPoint> back = read_metrics_csv(path);
  REQUIRE(back.size() == series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    CHECK(back[i].step == series[i].step);
    CHECK(back[i].success_ratio == series[i].success_ratio);
    CHECK(back[i].collision_rate == series[i].collision_rate);
    CHECK(back[i].mean_episode_len == series[i].mean_episode_len);
  }
}

TEST_CASE("learning curve SVGs contain one polyline per series") {
  const std::string path = temp_file("riskgym_curves.svg");
  std::vector<CurveSeries> series(3);
  for (int k = 0; k < 3; ++k) {
    series[k].label = "series " + std::to_string(k);
    series[k].shade = 2 * k;
    series[k].dashed = (k == 2);
    series[k].points = {{10000, 0.2 + 0.1 * k, 0.0, 0.0},
                        {20000, 0.5 + 0.1 * k, 0.0, 0.0}};
  }
  write_learning_curve_svg(path, series);
  std::ifstream in(path);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  CHECK(content.find("<svg") != std::string::npos);
  std::size_t polylines = 0, pos = 0;
  while ((pos = content.find("<polyline", pos)) != std::string::npos) {
    ++polylines;
    ++pos;
  }
  CHECK(polylines == 3);
  CHECK(content.find("stroke-dasharray") != std::string::npos);
}

TEST_CASE("audit separates zero, one, and intermediate risk masses") {
  EnvConfig cfg = EnvConfig::point_mass();
  const AuditResult res = audit_random_init(cfg, 400, 31, 35.0, 5, 2);
  CHECK(res.samples == 400);
  double mass = res.mass_zero + res.mass_one;
  for (const auto& row : res.histogram) {
    for (double m : row) mass += m;
  }
  CHECK(mass == doctest::Approx(1.0));

  // Identical inputs reproduce identical masses regardless of thread count.
  const AuditResult res2 = audit_random_init(cfg, 400, 31, 35.0, 5, 1);
  CHECK(res2.mass_zero == res.mass_zero);
  CHECK(res2.mass_one == res.mass_one);
  CHECK(res2.histogram == res.histogram);

  // A vanishing collision radius pushes everything to CR = 0.
  EnvConfig tiny = cfg;
  tiny.model.r_coll = 0.01;
  const AuditResult none = audit_random_init(tiny, 100, 31, 35.0, 1, 1);
  CHECK(none.mass_zero > 0.9);
}

TEST_CASE("traced episodes write a complete CSV") {
  const EnvConfig cfg = EnvConfig::point_mass();
  const ValidationSuite suite = build_validation_suite(shared_pool(), 3, 5);
  Rng init = derived_rng(51, 0);
  Td3Config td3;
  td3.hidden = 16;
  const Td3Agent agent(cfg.obs_dim(), td3, init);
  const std::string path = temp_file("riskgym_trace.csv");
  run_traced_episode(agent.actor(), suite.scenarios[0], cfg, path);

  std::ifstream in(path);
  std::string header;
  REQUIRE(std::getline(in, header));
  CHECK(header.find("t,x,y,psi,u,r,a0,a1") == 0);
  CHECK(header.find("obst1_x") != std::string::npos);
  std::string last, line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    last = line;
  }
  CHECK(rows >= 2);
  const bool terminal = last.find("collision") != std::string::npos ||
                        last.find("success") != std::string::npos ||
                        last.find("truncated") != std::string::npos;
  CHECK(terminal);
}

TEST_CASE("a small study produces metrics, plots, and a summary") {
  const std::string dir = temp_file("riskgym_study");
  std::filesystem::remove_all(dir);
  const std::string pool_path = temp_file("riskgym_study_pool.jsonl");
  shared_pool().save(pool_path);

  RunConfig cfg;
  cfg.env = "point-mass";
  cfg.pool = pool_path;
  cfg.dists = {"interval:0.5,1.0"};
  cfg.ratios = {"1,0,0"};
  cfg.budget = 400;
  cfg.eval_interval = 200;
  cfg.validation_size = 10;
  cfg.seeds = {1};
  cfg.out_dir = dir;
  setenv("RISKGYM_THREADS", "1", 1);
  const StudyResult res = run_study(cfg);
  unsetenv("RISKGYM_THREADS");

  REQUIRE(res.cells.size() == 1);
  CHECK(res.cells[0].series.size() == 2);
  CHECK(std::filesystem::exists(dir + "/curves.svg"));
  CHECK(std::filesystem::exists(dir + "/summary.csv"));
  CHECK(std::filesystem::exists(
      dir + "/metrics_interval-0.5-1.0_1-0-0_seed1.csv"));
  const auto metrics =
      read_metrics_csv(dir + "/metrics_interval-0.5-1.0_1-0-0_seed1.csv");
  REQUIRE(metrics.size() == 2);
  CHECK(metrics[0].step == 200);
  CHECK(metrics[1].step == 400);

  std::ifstream summary(dir + "/summary.csv");
  std::string line;
  std::getline(summary, line);
  CHECK(line == "dist,ratio,n_seeds,final_mean,final_sd");
  REQUIRE(std::getline(summary, line));
  CHECK(line.find("\"interval:0.5,1.0\",\"1,0,0\",1,") == 0);
}
