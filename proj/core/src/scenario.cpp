#include "riskgym/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace riskgym {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double beta_cdf_shape1(double x, double alpha, double beta) {
  // Only pairs with alpha == 1 or beta == 1 are needed; both have a
  // closed-form CDF.
  if (alpha == 1.0) return 1.0 - std::pow(1.0 - x, beta);
  return std::pow(x, alpha);
}

std::vector<double> default_edges() {
  std::vector<double> e(kCrBins + 1);
  for (int k = 0; k <= kCrBins; ++k) e[k] = static_cast<double>(k) / kCrBins;
  return e;
}

}  // namespace

void CrDistribution::validate() const {
  if (bin_edges.size() < 2 || masses.size() + 1 != bin_edges.size()) {
    throw DataError("CrDistribution: inconsistent bin layout");
  }
  if (bin_edges.front() != 0.0 || bin_edges.back() != 1.0) {
    throw DataError("CrDistribution: edges must span [0, 1]");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < bin_edges.size(); ++k) {
    if (bin_edges[k + 1] <= bin_edges[k]) {
      throw DataError("CrDistribution: edges not strictly ascending");
    }
    if (masses[k] < 0.0) throw DataError("CrDistribution: negative mass");
    sum += masses[k];
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw DataError("CrDistribution: masses do not sum to 1");
  }
}

CrDistribution preset_distribution(int level) {
  if (level < 1 || level > 7) {
    throw std::invalid_argument("preset level must be in 1..7");
  }
  // Beta(alpha, beta) discretized over 10 bins; mean strictly increasing in
  // the level, level 4 uniform.
  static constexpr double kShapes[7][2] = {
      {1.0, 5.0}, {1.0, 3.0}, {1.0, 1.5}, {1.0, 1.0},
      {1.5, 1.0}, {3.0, 1.0}, {5.0, 1.0}};
  const double a = kShapes[level - 1][0];
  const double b = kShapes[level - 1][1];
  CrDistribution d;
  d.bin_edges = default_edges();
  d.masses.resize(kCrBins);
  for (int k = 0; k < kCrBins; ++k) {
    d.masses[k] = beta_cdf_shape1(d.bin_edges[k + 1], a, b) -
                  beta_cdf_shape1(d.bin_edges[k], a, b);
  }
  d.validate();
  return d;
}

CrDistribution interval_distribution(double lo, double hi) {
  if (!(0.0 <= lo && lo < hi && hi <= 1.0)) {
    throw std::invalid_argument("interval must satisfy 0 <= lo < hi <= 1");
  }
  CrDistribution d;
  d.bin_edges = default_edges();
  d.masses.resize(kCrBins);
  const double width = hi - lo;
  for (int k = 0; k < kCrBins; ++k) {
    const double overlap = std::max(
        0.0, std::min(hi, d.bin_edges[k + 1]) - std::max(lo, d.bin_edges[k]));
    d.masses[k] = overlap / width;
  }
  d.validate();
  return d;
}

std::uint64_t env_digest(const VehicleModel& model, const CrConfig& cfg,
                         const ScenarioRanges& ranges) {
  std::ostringstream os;
  os << static_cast<int>(model.kind) << '|' << fmt17(model.mass) << '|'
     << fmt17(model.inertia) << '|' << fmt17(model.rear_axle) << '|'
     << fmt17(model.wheelbase) << '|' << fmt17(model.tau_u_max) << '|'
     << fmt17(model.tau_r_max) << '|' << fmt17(model.steer_max) << '|'
     << fmt17(model.r_coll) << '|' << fmt17(cfg.t_lim) << '|' << fmt17(cfg.dt)
     << '|' << cfg.grid.n_u << '|' << cfg.grid.n_r << '|'
     << fmt17(ranges.u0_min) << '|' << fmt17(ranges.u0_max) << '|'
     << fmt17(ranges.r0_min) << '|' << fmt17(ranges.r0_max) << '|'
     << fmt17(ranges.u_obst_min) << '|' << fmt17(ranges.u_obst_max);
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : os.str()) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

ScenarioPool::ScenarioPool(std::vector<Scenario> scenarios,
                           std::uint64_t digest, CrConfig cfg)
    : scenarios_(std::move(scenarios)), digest_(digest), cfg_(cfg) {
  build_index();
}

void ScenarioPool::build_index() {
  for (auto& v : by_count_) v.clear();
  for (std::size_t i = 0; i < scenarios_.size(); ++i) {
    const int n = scenarios_[i].n_obst();
    if (n < 1 || n > kMaxObstacles) {
      throw DataError("scenario with obstacle count outside 1..3");
    }
    by_count_[n - 1].push_back(i);
  }
  for (auto& v : by_count_) {
    std::sort(v.begin(), v.end(), [this](std::size_t a, std::size_t b) {
      if (scenarios_[a].cr != scenarios_[b].cr) {
        return scenarios_[a].cr < scenarios_[b].cr;
      }
      return a < b;
    });
  }
}

std::array<std::array<long, kCrBins>, kMaxObstacles> ScenarioPool::cell_counts()
    const {
  std::array<std::array<long, kCrBins>, kMaxObstacles> cells{};
  for (const auto& s : scenarios_) {
    int bin = static_cast<int>(s.cr * kCrBins);
    bin = std::clamp(bin, 0, kCrBins - 1);
    ++cells[s.n_obst() - 1][bin];
  }
  return cells;
}

const Scenario& ScenarioPool::draw(const CrDistribution& dist,
                                   const ObstacleRatio& ratio, Rng& rng) const {
  dist.validate();
  // Obstacle count.
  const double pu = uniform(rng, 0.0, 1.0);
  int n = 1;
  if (pu >= ratio.p1) n = (pu < ratio.p1 + ratio.p2) ? 2 : 3;
  // CR bin.
  const double pb = uniform(rng, 0.0, 1.0);
  std::size_t bin = 0;
  double acc = 0.0;
  for (std::size_t k = 0; k < dist.masses.size(); ++k) {
    acc += dist.masses[k];
    bin = k;
    if (pb < acc) break;
  }
  const double lo = dist.bin_edges[bin];
  const double hi = dist.bin_edges[bin + 1];
  const bool last = (bin + 1 == dist.masses.size());

  const auto& idx = by_count_[n - 1];
  const auto first = std::lower_bound(
      idx.begin(), idx.end(), lo,
      [this](std::size_t i, double v) { return scenarios_[i].cr < v; });
  auto past = idx.end();
  if (!last) {
    past = std::lower_bound(
        first, idx.end(), hi,
        [this](std::size_t i, double v) { return scenarios_[i].cr < v; });
  }
  if (first == past) {
    std::ostringstream os;
    os << "empty pool cell: CR bin [" << lo << ", " << hi << (last ? "]" : ")")
       << ", " << n << " obstacle(s)";
    throw EmptyCellError(os.str());
  }
  const auto count = static_cast<std::size_t>(past - first);
  const std::size_t pick =
      std::uniform_int_distribution<std::size_t>(0, count - 1)(rng);
  return scenarios_[*(first + pick)];
}

Obstacle place_threat_obstacle(double u0, double r0, const VehicleModel& model,
                               const CrConfig& cfg, const ScenarioRanges& ranges,
                               Rng& rng) {
  const double psi_obst = uniform(rng, 0.0, 2.0 * M_PI);
  const double u_obst = uniform(rng, ranges.u_obst_min, ranges.u_obst_max);
  const int i = std::uniform_int_distribution<int>(0, cfg.grid.n_u - 1)(rng);
  const int j = std::uniform_int_distribution<int>(0, cfg.grid.n_r - 1)(rng);
  // Collision time snapped to the simulation grid so the rollout visits the
  // intersection point exactly.
  const auto k_max = static_cast<long>(rollout_steps(cfg.dt, cfg.t_lim));
  const auto k_min =
      static_cast<long>(std::ceil(0.2 * cfg.t_lim / cfg.dt - 1e-9));
  const long k_star =
      std::uniform_int_distribution<long>(k_min, k_max)(rng);
  const double t_star = k_star * cfg.dt;

  AgentState start;
  start.vel.u = u0;
  start.vel.r = r0;
  const Action a{cfg.grid.level_u(i), cfg.grid.level_r(j)};
  const Control ctrl = action_to_control(a, model);
  Pose pose = start.pose;
  Velocity vel = start.vel;
  for (long k = 0; k < k_star; ++k) {
    std::tie(pose, vel) = integrate_step(pose, vel, ctrl, model, cfg.dt);
  }

  Obstacle obst;
  obst.pose.psi = psi_obst;
  obst.pose.x = pose.x - t_star * u_obst * std::cos(psi_obst);
  obst.pose.y = pose.y - t_star * u_obst * std::sin(psi_obst);
  obst.speed = u_obst;
  obst.r_coll = model.r_coll;
  return obst;
}

ScenarioPool generate_pool(long target_count, const VehicleModel& model,
                           const CrConfig& cfg, const ScenarioRanges& ranges,
                           std::uint64_t seed, int threads) {
  if (target_count < 1) throw std::invalid_argument("target_count must be >= 1");
  std::vector<Scenario> scenarios(static_cast<std::size_t>(target_count));

  const auto worker = [&](long begin, long end) {
    for (long i = begin; i < end; ++i) {
      Rng rng = derived_rng(seed, static_cast<std::uint64_t>(i));
      Scenario s;
      s.u0 = uniform(rng, ranges.u0_min, ranges.u0_max);
      s.r0 = uniform(rng, ranges.r0_min, ranges.r0_max);
      const int n = std::uniform_int_distribution<int>(1, kMaxObstacles)(rng);
      s.obstacles.reserve(n);
      for (int o = 0; o < n; ++o) {
        s.obstacles.push_back(
            place_threat_obstacle(s.u0, s.r0, model, cfg, ranges, rng));
      }
      AgentState agent;
      agent.vel.u = s.u0;
      agent.vel.r = s.r0;
      s.cr = collision_risk(agent, s.obstacles, model, cfg);
      scenarios[static_cast<std::size_t>(i)] = std::move(s);
    }
  };

  threads = std::max(1, threads);
  if (threads == 1 || target_count < 2 * threads) {
    worker(0, target_count);
  } else {
    std::vector<std::thread> pool;
    const long chunk = (target_count + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const long begin = t * chunk;
      const long end = std::min(target_count, begin + chunk);
      if (begin < end) pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  return ScenarioPool(std::move(scenarios), env_digest(model, cfg, ranges), cfg);
}

void ScenarioPool::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open pool file for writing: " + path);
  for (const auto& s : scenarios_) {
    out << "{\"u0\":" << fmt17(s.u0) << ",\"r0\":" << fmt17(s.r0)
        << ",\"obst\":[";
    for (std::size_t o = 0; o < s.obstacles.size(); ++o) {
      const auto& ob = s.obstacles[o];
      if (o > 0) out << ',';
      out << "{\"x\":" << fmt17(ob.pose.x) << ",\"y\":" << fmt17(ob.pose.y)
          << ",\"psi\":" << fmt17(ob.pose.psi) << ",\"u\":" << fmt17(ob.speed)
          << '}';
    }
    out << "],\"cr\":" << fmt17(s.cr) << ",\"n\":" << s.n_obst() << "}\n";
  }

  char digest_hex[20];
  std::snprintf(digest_hex, sizeof(digest_hex), "%016llx",
                static_cast<unsigned long long>(digest_));
  nlohmann::json manifest;
  manifest["version"] = 1;
  manifest["count"] = scenarios_.size();
  manifest["env_digest"] = digest_hex;
  manifest["r_coll"] =
      scenarios_.empty() ? 3.0 : scenarios_.front().obstacles.front().r_coll;
  manifest["cr_config"] = {{"t_lim", cfg_.t_lim},
                           {"dt", cfg_.dt},
                           {"n_u", cfg_.grid.n_u},
                           {"n_r", cfg_.grid.n_r}};
  const auto cells = cell_counts();
  nlohmann::json jcells = nlohmann::json::array();
  for (const auto& row : cells) jcells.push_back(row);
  manifest["cell_counts"] = jcells;
  std::ofstream mout(path + ".manifest.json");
  if (!mout) throw DataError("cannot open manifest for writing");
  mout << manifest.dump(2) << '\n';
}

ScenarioPool ScenarioPool::load(const std::string& path,
                                std::uint64_t expected_digest) {
  std::ifstream min(path + ".manifest.json");
  if (!min) throw DataError("missing pool manifest: " + path + ".manifest.json");
  nlohmann::json manifest;
  try {
    min >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptRecordError(std::string("malformed manifest: ") + e.what());
  }

  const std::string digest_hex = manifest.at("env_digest");
  const auto digest =
      static_cast<std::uint64_t>(std::stoull(digest_hex, nullptr, 16));
  if (digest != expected_digest) {
    throw DigestMismatchError(
        "pool was generated for different environment parameters");
  }
  CrConfig cfg;
  cfg.t_lim = manifest.at("cr_config").at("t_lim");
  cfg.dt = manifest.at("cr_config").at("dt");
  cfg.grid.n_u = manifest.at("cr_config").at("n_u");
  cfg.grid.n_r = manifest.at("cr_config").at("n_r");
  const double r_coll = manifest.at("r_coll");
  const auto expected_count = manifest.at("count").get<std::size_t>();

  std::ifstream in(path);
  if (!in) throw DataError("cannot open pool file: " + path);
  std::vector<Scenario> scenarios;
  scenarios.reserve(expected_count);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      Scenario s;
      s.u0 = j.at("u0");
      s.r0 = j.at("r0");
      s.cr = j.at("cr");
      for (const auto& jo : j.at("obst")) {
        Obstacle ob;
        ob.pose.x = jo.at("x");
        ob.pose.y = jo.at("y");
        ob.pose.psi = jo.at("psi");
        ob.speed = jo.at("u");
        ob.r_coll = r_coll;
        s.obstacles.push_back(ob);
      }
      if (j.at("n").get<int>() != s.n_obst()) {
        throw CorruptRecordError("obstacle count mismatch at line " +
                                 std::to_string(line_no));
      }
      scenarios.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw CorruptRecordError("malformed pool record at line " +
                               std::to_string(line_no) + ": " + e.what());
    }
  }
  if (scenarios.size() != expected_count) {
    throw CorruptRecordError(
        "pool record count " + std::to_string(scenarios.size()) +
        " does not match manifest count " + std::to_string(expected_count) +
        " (file truncated after line " + std::to_string(line_no) + "?)");
  }
  return ScenarioPool(std::move(scenarios), digest, cfg);
}

}  // namespace riskgym
