#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>

#include "riskgym/scenario.hpp"

using namespace riskgym;

namespace {

double dist_mean(const CrDistribution& d) {
  double m = 0.0;
  for (std::size_t k = 0; k < d.masses.size(); ++k) {
    m += d.masses[k] * 0.5 * (d.bin_edges[k] + d.bin_edges[k + 1]);
  }
  return m;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

const ScenarioPool& shared_pool() {
  static const ScenarioPool pool = generate_pool(
      2000, VehicleModel::point_mass(), CrConfig{},
      ScenarioRanges::point_mass(), 42, 1);
  return pool;
}

}  // namespace

TEST_CASE("presets are valid distributions with increasing mean") {
  double prev_mean = -1.0;
  for (int level = 1; level <= 7; ++level) {
    const CrDistribution d = preset_distribution(level);
    REQUIRE(d.masses.size() == 10);
    const double sum = std::accumulate(d.masses.begin(), d.masses.end(), 0.0);
    CHECK(std::abs(sum - 1.0) < 1e-12);
    const double m = dist_mean(d);
    CHECK(m > prev_mean);
    prev_mean = m;
  }
  CHECK_THROWS_AS(preset_distribution(0), std::invalid_argument);
  CHECK_THROWS_AS(preset_distribution(8), std::invalid_argument);
}

TEST_CASE("preset 4 is the uniform distribution") {
  const CrDistribution d = preset_distribution(4);
  for (double m : d.masses) CHECK(m == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("edge presets follow the closed-form Beta CDF") {
  // Level 1 ~ Beta(1, 5): mass of bin k is (1-k/10)^5 - (1-(k+1)/10)^5.
  const CrDistribution low = preset_distribution(1);
  CHECK(low.masses[0] ==
        doctest::Approx(1.0 - std::pow(0.9, 5.0)).epsilon(1e-12));
  CHECK(low.masses[9] == doctest::Approx(std::pow(0.1, 5.0)).epsilon(1e-12));
  // Level 7 ~ Beta(5, 1): CDF x^5.
  const CrDistribution high = preset_distribution(7);
  CHECK(high.masses[9] ==
        doctest::Approx(1.0 - std::pow(0.9, 5.0)).epsilon(1e-12));
  CHECK(high.masses[0] == doctest::Approx(std::pow(0.1, 5.0)).epsilon(1e-12));
}

TEST_CASE("interval distributions spread mass proportionally") {
  const CrDistribution d1 = interval_distribution(0.0, 0.2);
  CHECK(d1.masses[0] == doctest::Approx(0.5));
  CHECK(d1.masses[1] == doctest::Approx(0.5));
  for (int k = 2; k < 10; ++k) CHECK(d1.masses[k] == 0.0);

  const CrDistribution d2 = interval_distribution(0.85, 1.0);
  CHECK(d2.masses[8] == doctest::Approx(1.0 / 3.0));
  CHECK(d2.masses[9] == doctest::Approx(2.0 / 3.0));

  const CrDistribution d3 = interval_distribution(0.03, 0.07);
  CHECK(d3.masses[0] == doctest::Approx(1.0));

  CHECK_THROWS_AS(interval_distribution(0.5, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(interval_distribution(-0.1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(interval_distribution(0.2, 1.1), std::invalid_argument);
}

TEST_CASE("placed obstacles intersect a feasible trajectory") {
  const VehicleModel pm = VehicleModel::point_mass();
  const CrConfig cfg;
  const ScenarioRanges ranges = ScenarioRanges::point_mass();
  Rng rng = derived_rng(99, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const double u0 = uniform(rng, ranges.u0_min, ranges.u0_max);
    const double r0 = uniform(rng, ranges.r0_min, ranges.r0_max);
    const Obstacle ob = place_threat_obstacle(u0, r0, pm, cfg, ranges, rng);
    // Some grid rollout must pass through the obstacle's position exactly at
    // a shared sample time.
    const AgentState start{{0.0, 0.0, 0.0}, {u0, 0.0, r0}};
    double best = 1e18;
    for (int i = 0; i < cfg.grid.n_u; ++i) {
      for (int j = 0; j < cfg.grid.n_r; ++j) {
        const Action a{cfg.grid.level_u(i), cfg.grid.level_r(j)};
        const auto poses =
            rollout_constant_action(start, a, pm, cfg.dt, cfg.t_lim);
        for (std::size_t k = 0; k < poses.size(); ++k) {
          const Pose op = obstacle_position(ob, k * cfg.dt);
          best = std::min(best, std::hypot(poses[k].x - op.x,
                                           poses[k].y - op.y));
        }
      }
    }
    CHECK(best < 1e-6);
  }
}

TEST_CASE("every pooled scenario has nonzero risk") {
  for (const Scenario& s : shared_pool().scenarios()) {
    CHECK(s.cr >= 1.0 / 121.0);
    CHECK(s.cr <= 1.0);
    CHECK(s.n_obst() >= 1);
    CHECK(s.n_obst() <= 3);
  }
}

TEST_CASE("pool generation is deterministic and thread-count independent") {
  const VehicleModel pm = VehicleModel::point_mass();
  const CrConfig cfg;
  const ScenarioRanges ranges = ScenarioRanges::point_mass();
  const ScenarioPool a = generate_pool(64, pm, cfg, ranges, 7, 1);
  const ScenarioPool b = generate_pool(64, pm, cfg, ranges, 7, 3);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Scenario& sa = a.scenarios()[i];
    const Scenario& sb = b.scenarios()[i];
    CHECK(sa.u0 == sb.u0);
    CHECK(sa.r0 == sb.r0);
    CHECK(sa.cr == sb.cr);
    REQUIRE(sa.n_obst() == sb.n_obst());
    for (int o = 0; o < sa.n_obst(); ++o) {
      CHECK(sa.obstacles[o].pose.x == sb.obstacles[o].pose.x);
      CHECK(sa.obstacles[o].pose.y == sb.obstacles[o].pose.y);
      CHECK(sa.obstacles[o].pose.psi == sb.obstacles[o].pose.psi);
      CHECK(sa.obstacles[o].speed == sb.obstacles[o].speed);
    }
  }

  const ScenarioPool c = generate_pool(64, pm, cfg, ranges, 8, 1);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.scenarios()[i].u0 != c.scenarios()[i].u0) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("save and load round-trips every field bit for bit") {
  const ScenarioPool& pool = shared_pool();
  const std::string path = temp_path("riskgym_pool_roundtrip.jsonl");
  pool.save(path);
  const ScenarioPool loaded = ScenarioPool::load(path, pool.digest());
  REQUIRE(loaded.size() == pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const Scenario& a = pool.scenarios()[i];
    const Scenario& b = loaded.scenarios()[i];
    CHECK(a.u0 == b.u0);
    CHECK(a.r0 == b.r0);
    CHECK(a.cr == b.cr);
    REQUIRE(a.n_obst() == b.n_obst());
    for (int o = 0; o < a.n_obst(); ++o) {
      CHECK(a.obstacles[o].pose.x == b.obstacles[o].pose.x);
      CHECK(a.obstacles[o].pose.y == b.obstacles[o].pose.y);
      CHECK(a.obstacles[o].pose.psi == b.obstacles[o].pose.psi);
      CHECK(a.obstacles[o].speed == b.obstacles[o].speed);
      CHECK(a.obstacles[o].r_coll == b.obstacles[o].r_coll);
    }
  }
  CHECK(loaded.cr_config().t_lim == pool.cr_config().t_lim);
  CHECK(loaded.cr_config().dt == pool.cr_config().dt);
}

TEST_CASE("loading against a different environment digest fails") {
  const ScenarioPool& pool = shared_pool();
  const std::string path = temp_path("riskgym_pool_digest.jsonl");
  pool.save(path);
  CHECK_THROWS_AS(ScenarioPool::load(path, pool.digest() ^ 1),
                  DigestMismatchError);
}

TEST_CASE("corrupt records are reported with their line number") {
  const ScenarioPool& pool = shared_pool();
  const std::string path = temp_path("riskgym_pool_corrupt.jsonl");
  pool.save(path);

  // Mangle line 3 of the data file.
  std::ifstream in(path);
  std::string content, line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    content += (n == 3) ? "{not json" : line;
    content += '\n';
  }
  in.close();
  std::ofstream(path) << content;

  try {
    ScenarioPool::load(path, pool.digest());
    FAIL("expected CorruptRecordError");
  } catch (const CorruptRecordError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("a truncated pool file fails the manifest count check") {
  const ScenarioPool& pool = shared_pool();
  const std::string path = temp_path("riskgym_pool_truncated.jsonl");
  pool.save(path);
  // Keep only the first half of the records.
  std::ifstream in(path);
  std::string content, line;
  for (std::size_t i = 0; i < pool.size() / 2 && std::getline(in, line); ++i) {
    content += line + '\n';
  }
  in.close();
  std::ofstream(path) << content;
  CHECK_THROWS_AS(ScenarioPool::load(path, pool.digest()), CorruptRecordError);
}

TEST_CASE("cell counts match a direct bin count") {
  const ScenarioPool& pool = shared_pool();
  const auto cells = pool.cell_counts();
  long total = 0;
  for (const auto& row : cells) {
    for (long c : row) total += c;
  }
  CHECK(total == static_cast<long>(pool.size()));

  std::array<std::array<long, kCrBins>, kMaxObstacles> expect{};
  for (const Scenario& s : pool.scenarios()) {
    int bin = static_cast<int>(s.cr * 10.0);
    if (bin > 9) bin = 9;
    ++expect[s.n_obst() - 1][bin];
  }
  CHECK(expect == cells);
}

TEST_CASE("draws follow the target distribution and obstacle ratio") {
  const ScenarioPool& pool = shared_pool();
  const CrDistribution dist = interval_distribution(0.5, 1.0);
  const ObstacleRatio ratio{0.2, 0.3, 0.5};
  Rng rng = derived_rng(4711, 0);

  const int draws = 50000;
  std::array<long, kCrBins> bin_counts{};
  std::array<long, kMaxObstacles> n_counts{};
  for (int k = 0; k < draws; ++k) {
    const Scenario& s = pool.draw(dist, ratio, rng);
    CHECK(s.cr >= 0.5);
    int bin = static_cast<int>(s.cr * 10.0);
    if (bin > 9) bin = 9;
    ++bin_counts[bin];
    ++n_counts[s.n_obst() - 1];
  }
  double tv = 0.0;
  for (int b = 0; b < kCrBins; ++b) {
    tv += std::abs(bin_counts[b] / static_cast<double>(draws) - dist.masses[b]);
  }
  CHECK(tv / 2.0 <= 0.02);
  CHECK(n_counts[0] / static_cast<double>(draws) == doctest::Approx(0.2).epsilon(0.05));
  CHECK(n_counts[1] / static_cast<double>(draws) == doctest::Approx(0.3).epsilon(0.05));
  CHECK(n_counts[2] / static_cast<double>(draws) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("drawing from an unpopulated cell fails loudly") {
  // A tiny pool cannot cover every (bin, count) cell.
  const ScenarioPool pool = generate_pool(
      3, VehicleModel::point_mass(), CrConfig{}, ScenarioRanges::point_mass(),
      5, 1);
  const auto cells = pool.cell_counts();
  int empty_bin = -1, empty_n = -1;
  for (int n = 0; n < kMaxObstacles && empty_bin < 0; ++n) {
    for (int b = 0; b < kCrBins; ++b) {
      if (cells[n][b] == 0) {
        empty_bin = b;
        empty_n = n;
        break;
      }
    }
  }
  REQUIRE(empty_bin >= 0);
  CrDistribution dist;
  dist.bin_edges.resize(kCrBins + 1);
  for (int k = 0; k <= kCrBins; ++k) dist.bin_edges[k] = k / 10.0;
  dist.masses.assign(kCrBins, 0.0);
  dist.masses[empty_bin] = 1.0;
  const ObstacleRatio ratio{empty_n == 0 ? 1.0 : 0.0, empty_n == 1 ? 1.0 : 0.0,
                            empty_n == 2 ? 1.0 : 0.0};
  Rng rng = derived_rng(6, 0);
  CHECK_THROWS_AS(pool.draw(dist, ratio, rng), EmptyCellError);
}

TEST_CASE("environment digest separates models and parameters") {
  const std::uint64_t pm = env_digest(VehicleModel::point_mass(), CrConfig{},
                                      ScenarioRanges::point_mass());
  const std::uint64_t rb = env_digest(VehicleModel::kinematic_robot(),
                                      CrConfig{}, ScenarioRanges::robot());
  CHECK(pm != rb);
  CrConfig other;
  other.dt = 0.05;
  CHECK(env_digest(VehicleModel::point_mass(), other,
                   ScenarioRanges::point_mass()) != pm);
  CHECK(env_digest(VehicleModel::point_mass(), CrConfig{},
                   ScenarioRanges::point_mass()) == pm);
}

TEST_CASE("distribution validation rejects malformed inputs") {
  CrDistribution d;
  d.bin_edges = {0.0, 0.5, 1.0};
  d.masses = {0.5, 0.5};
  CHECK_NOTHROW(d.validate());
  d.masses = {0.7, 0.7};
  CHECK_THROWS_AS(d.validate(), DataError);
  d.masses = {-0.1, 1.1};
  CHECK_THROWS_AS(d.validate(), DataError);
  d.bin_edges = {0.1, 0.5, 1.0};
  d.masses = {0.5, 0.5};
  CHECK_THROWS_AS(d.validate(), DataError);
}
