#include "riskgym/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

namespace riskgym {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void fnv_mix(std::uint64_t& h, const std::string& s) {
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
}

constexpr std::uint64_t kSuiteSeedSalt = 0x5347ULL;

}  // namespace

std::uint64_t ValidationSuite::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& s : scenarios) {
    fnv_mix(h, fmt17(s.u0));
    fnv_mix(h, fmt17(s.r0));
    fnv_mix(h, fmt17(s.cr));
    for (const auto& ob : s.obstacles) {
      fnv_mix(h, fmt17(ob.pose.x));
      fnv_mix(h, fmt17(ob.pose.y));
      fnv_mix(h, fmt17(ob.pose.psi));
      fnv_mix(h, fmt17(ob.speed));
    }
  }
  return h;
}

std::vector<long> largest_remainder(const std::vector<double>& weights,
                                    long total) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<long> counts(weights.size(), 0);
  std::vector<std::pair<double, std::size_t>> rema(weights.size());
  long assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = total * weights[i] / sum;
    counts[i] = static_cast<long>(std::floor(quota));
    assigned += counts[i];
    rema[i] = {quota - counts[i], i};
  }
  std::stable_sort(rema.begin(), rema.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (long k = 0; k < total - assigned; ++k) {
    ++counts[rema[static_cast<std::size_t>(k) % rema.size()].second];
  }
  return counts;
}

ValidationSuite build_validation_suite(const ScenarioPool& pool, int size,
                                       std::uint64_t seed) {
  if (size < 1) throw std::invalid_argument("suite size must be >= 1");
  ValidationSuite suite;
  suite.seed = seed;
  Rng rng = derived_rng(seed, kSuiteSeedSalt);
  // 30 equally weighted cells, CR-bin major with obstacle count innermost,
  // rounded by largest remainder.
  const std::vector<double> weights(static_cast<std::size_t>(kCrBins) * 3, 1.0);
  const std::vector<long> counts = largest_remainder(weights, size);
  for (int b = 0; b < kCrBins; ++b) {
    CrDistribution dist;
    dist.bin_edges.resize(kCrBins + 1);
    for (int k = 0; k <= kCrBins; ++k) {
      dist.bin_edges[k] = static_cast<double>(k) / kCrBins;
    }
    dist.masses.assign(kCrBins, 0.0);
    dist.masses[b] = 1.0;
    for (int n = 1; n <= 3; ++n) {
      ObstacleRatio ratio{n == 1 ? 1.0 : 0.0, n == 2 ? 1.0 : 0.0,
                          n == 3 ? 1.0 : 0.0};
      const long cell = counts[static_cast<std::size_t>(b) * 3 + (n - 1)];
      for (long k = 0; k < cell; ++k) {
        suite.scenarios.push_back(pool.draw(dist, ratio, rng));
      }
    }
  }
  return suite;
}

EvalStats evaluate(const Mlp& actor, const ValidationSuite& suite,
                   const EnvConfig& cfg, double sigma_n,
                   std::uint64_t noise_seed) {
  EvalStats stats;
  long successes = 0, collisions = 0, total_steps = 0;
  ScenarioEnv env(cfg);
  for (std::size_t i = 0; i < suite.scenarios.size(); ++i) {
    Rng noise_rng = derived_rng(noise_seed, i);
    std::vector<double> s = env.reset_to(suite.scenarios[i]);
    Outcome outcome = Outcome::Running;
    long steps = 0;
    while (outcome == Outcome::Running) {
      std::vector<double> obs =
          sigma_n > 0.0 ? noise_wrap(s, sigma_n, noise_rng) : s;
      const std::vector<double> mu = actor.forward(obs);
      StepResult res = env.step({mu[0], mu[1]});
      s = std::move(res.state);
      outcome = res.outcome;
      ++steps;
    }
    if (outcome != Outcome::Collision) ++successes; else ++collisions;
    total_steps += steps;
  }
  const auto n = static_cast<double>(suite.scenarios.size());
  stats.success_ratio = successes / n;
  stats.collision_rate = collisions / n;
  stats.mean_episode_len = total_steps / n;
  return stats;
}

AuditResult audit_random_init(const EnvConfig& cfg, long samples,
                              std::uint64_t seed, double box_edge,
                              int box_obstacles, int threads) {
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
  AuditResult result;
  result.samples = samples;

  std::vector<double> crs(static_cast<std::size_t>(samples));
  std::vector<int> threats(static_cast<std::size_t>(samples));

  const auto worker = [&](long begin, long end) {
    for (long i = begin; i < end; ++i) {
      Rng rng = derived_rng(seed, static_cast<std::uint64_t>(i));
      AgentState agent;
      agent.vel.u = uniform(rng, cfg.ranges.u0_min, cfg.ranges.u0_max);
      agent.vel.r = uniform(rng, cfg.ranges.r0_min, cfg.ranges.r0_max);
      std::vector<Obstacle> obstacles(box_obstacles);
      for (Obstacle& ob : obstacles) {
        ob.pose.x = uniform(rng, -box_edge / 2.0, box_edge / 2.0);
        ob.pose.y = uniform(rng, -box_edge / 2.0, box_edge / 2.0);
        ob.pose.psi = uniform(rng, 0.0, 2.0 * M_PI);
        ob.speed = uniform(rng, cfg.ranges.u_obst_min, cfg.ranges.u_obst_max);
        ob.r_coll = cfg.model.r_coll;
      }
      // Per-obstacle masks give both the union CR and the threat count.
      long union_hits = 0;
      std::vector<char> combined(
          static_cast<std::size_t>(cfg.cr_cfg.grid.size()), 0);
      int threatening = 0;
      for (const Obstacle& ob : obstacles) {
        const CollisionMask mask = per_action_collision_mask(
            agent, std::span<const Obstacle>(&ob, 1), cfg.model, cfg.cr_cfg);
        bool any = false;
        for (std::size_t k = 0; k < combined.size(); ++k) {
          if (mask.flags[k]) {
            any = true;
            if (!combined[k]) {
              combined[k] = 1;
              ++union_hits;
            }
          }
        }
        if (any) ++threatening;
      }
      crs[static_cast<std::size_t>(i)] =
          static_cast<double>(union_hits) / static_cast<double>(combined.size());
      threats[static_cast<std::size_t>(i)] = threatening;
    }
  };

  threads = std::max(1, threads);
  if (threads == 1) {
    worker(0, samples);
  } else {
    std::vector<std::thread> pool;
    const long chunk = (samples + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const long begin = t * chunk;
      const long end = std::min(samples, begin + chunk);
      if (begin < end) pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  long zero = 0, one = 0;
  for (long i = 0; i < samples; ++i) {
    const double cr = crs[static_cast<std::size_t>(i)];
    if (cr == 0.0) {
      ++zero;
    } else if (cr == 1.0) {
      ++one;
    } else {
      const int bin = std::clamp(static_cast<int>(cr * kCrBins), 0, kCrBins - 1);
      const int row = std::min(threats[static_cast<std::size_t>(i)], 3) - 1;
      result.histogram[row][bin] += 1.0 / static_cast<double>(samples);
    }
  }
  result.mass_zero = static_cast<double>(zero) / static_cast<double>(samples);
  result.mass_one = static_cast<double>(one) / static_cast<double>(samples);
  return result;
}

int worker_count() {
  if (const char* env = std::getenv("RISKGYM_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

std::vector<std::string> split_array(const std::string& v) {
  std::vector<std::string> out;
  std::string body = trim(v);
  if (body.size() < 2 || body.front() != '[' || body.back() != ']') {
    throw std::invalid_argument("config: expected an array: " + v);
  }
  body = body.substr(1, body.size() - 2);
  std::string item;
  bool in_quotes = false;
  for (char c : body) {
    if (c == '"') in_quotes = !in_quotes;
    if (c == ',' && !in_quotes) {
      out.push_back(unquote(trim(item)));
      item.clear();
    } else {
      item += c;
    }
  }
  if (!trim(item).empty()) out.push_back(unquote(trim(item)));
  return out;
}

}  // namespace

RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos && line.find('"') == std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "env") {
        cfg.env = unquote(value);
      } else if (key == "pool") {
        cfg.pool = unquote(value);
      } else if (key == "dists") {
        cfg.dists = split_array(value);
      } else if (key == "ratios") {
        cfg.ratios = split_array(value);
      } else if (key == "budget") {
        cfg.budget = std::stol(value);
      } else if (key == "eval_interval") {
        cfg.eval_interval = std::stol(value);
      } else if (key == "validation_size") {
        cfg.validation_size = std::stoi(value);
      } else if (key == "seeds") {
        cfg.seeds.clear();
        for (const auto& s : split_array(value)) {
          cfg.seeds.push_back(std::stoull(s));
        }
      } else if (key == "sigma_n") {
        cfg.sigma_n = std::stod(value);
      } else if (key == "out_dir") {
        cfg.out_dir = unquote(value);
      } else if (key == "box_edge") {
        cfg.box_edge = std::stod(value);
      } else if (key == "box_obstacles") {
        cfg.box_obstacles = std::stoi(value);
      } else {
        throw std::invalid_argument("unknown key");
      }
    } catch (const std::exception& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  " (" + key + "): " + e.what());
    }
  }
  if (cfg.budget < cfg.eval_interval) {
    throw std::invalid_argument("config: budget must be >= eval_interval");
  }
  if (cfg.validation_size < 1 || cfg.seeds.empty()) {
    throw std::invalid_argument("config: need validation_size >= 1 and seeds");
  }
  return cfg;
}

EnvConfig env_config_for(const std::string& env_kind) {
  if (env_kind == "point-mass" || env_kind == "baseline-box") {
    return EnvConfig::point_mass();
  }
  if (env_kind == "robot") return EnvConfig::robot();
  throw std::invalid_argument("unknown env kind: " + env_kind);
}

CrDistribution parse_dist_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    throw std::invalid_argument("dist spec must be preset:K or interval:lo,hi");
  }
  const std::string kind = spec.substr(0, colon);
  const std::string args = spec.substr(colon + 1);
  if (kind == "preset") return preset_distribution(std::stoi(args));
  if (kind == "interval") {
    const auto comma = args.find(',');
    if (comma == std::string::npos) {
      throw std::invalid_argument("interval spec needs lo,hi");
    }
    return interval_distribution(std::stod(args.substr(0, comma)),
                                 std::stod(args.substr(comma + 1)));
  }
  throw std::invalid_argument("unknown dist spec kind: " + kind);
}

ObstacleRatio parse_ratio_spec(const std::string& spec) {
  std::stringstream ss(spec);
  std::string part;
  std::vector<double> parts;
  while (std::getline(ss, part, ',')) parts.push_back(std::stod(part));
  if (parts.size() != 3) {
    throw std::invalid_argument("ratio spec needs three comma-separated values");
  }
  const double sum = parts[0] + parts[1] + parts[2];
  if (sum <= 0.0) throw std::invalid_argument("ratio must have positive sum");
  return {parts[0] / sum, parts[1] / sum, parts[2] / sum};
}

void write_metrics_csv(const std::string& path, std::uint64_t suite_digest,
                       const std::vector<EvalPoint>& series) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open metrics file for writing: " + path);
  char digest_hex[20];
  std::snprintf(digest_hex, sizeof(digest_hex), "%016llx",
                static_cast<unsigned long long>(suite_digest));
  out << "# suite_digest=" << digest_hex << '\n';
  out << "step,success_ratio,collision_rate,mean_episode_len\n";
  for (const EvalPoint& p : series) {
    out << p.step << ',' << fmt17(p.success_ratio) << ','
        << fmt17(p.collision_rate) << ',' << fmt17(p.mean_episode_len) << '\n';
  }
}

std::vector<EvalPoint> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open metrics file: " + path);
  std::vector<EvalPoint> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 's') continue;
    EvalPoint p;
    if (std::sscanf(line.c_str(), "%ld,%lf,%lf,%lf", &p.step, &p.success_ratio,
                    &p.collision_rate, &p.mean_episode_len) == 4) {
      out.push_back(p);
    }
  }
  return out;
}

namespace {

// Blues ramp, light to dark.
void ramp_color(int shade, int& r, int& g, int& b) {
  shade = std::clamp(shade, 0, 6);
  const double t = shade / 6.0;
  r = static_cast<int>(198 + t * (8 - 198));
  g = static_cast<int>(219 + t * (48 - 219));
  b = static_cast<int>(239 + t * (107 - 239));
}

}  // namespace

void write_learning_curve_svg(const std::string& path,
                              const std::vector<CurveSeries>& series) {
  const int width = 720, height = 440;
  const int ml = 60, mr = 20, mt = 20, mb = 50;
  long max_step = 1;
  for (const auto& s : series) {
    for (const auto& p : s.points) max_step = std::max(max_step, p.step);
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open SVG for writing: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // Axes and gridlines.
  for (int k = 0; k <= 10; ++k) {
    const double y = mt + (height - mt - mb) * (1.0 - k / 10.0);
    out << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << width - mr
        << "\" y2=\"" << y << "\" stroke=\"#eeeeee\"/>\n";
    if (k % 2 == 0) {
      out << "<text x=\"" << ml - 8 << "\" y=\"" << y + 4
          << "\" font-size=\"11\" text-anchor=\"end\">" << k / 10.0
          << "</text>\n";
    }
  }
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\""
      << width - mr << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 14
      << "\" font-size=\"12\" text-anchor=\"middle\">training steps (max "
      << max_step << ")</text>\n";
  out << "<text x=\"16\" y=\"" << (mt + height - mb) / 2
      << "\" font-size=\"12\" transform=\"rotate(-90 16 "
      << (mt + height - mb) / 2 << ")\" text-anchor=\"middle\">"
      << "validation success ratio</text>\n";

  for (const auto& s : series) {
    int r, g, b;
    ramp_color(s.shade, r, g, b);
    out << "<polyline fill=\"none\" stroke=\"rgb(" << r << ',' << g << ',' << b
        << ")\" stroke-width=\"1.5\"";
    if (s.dashed) out << " stroke-dasharray=\"6,4\"";
    out << " points=\"";
    for (const auto& p : s.points) {
      const double x =
          ml + (width - ml - mr) * (static_cast<double>(p.step) / max_step);
      const double y =
          mt + (height - mt - mb) * (1.0 - std::clamp(p.success_ratio, 0.0, 1.0));
      out << x << ',' << y << ' ';
    }
    out << "\"><title>" << s.label << "</title></polyline>\n";
  }
  out << "</svg>\n";
}

namespace {

std::string sanitize_label(std::string s) {
  for (char& c : s) {
    if (c == ':' || c == ',' || c == '/' || c == ' ') c = '-';
  }
  return s;
}

}  // namespace

StudyResult run_study(const RunConfig& config) {
  const EnvConfig env_cfg = env_config_for(config.env);
  const std::uint64_t digest =
      env_digest(env_cfg.model, env_cfg.cr_cfg, env_cfg.ranges);
  const ScenarioPool pool = ScenarioPool::load(config.pool, digest);
  const ValidationSuite suite =
      build_validation_suite(pool, config.validation_size, config.seeds[0]);

  std::filesystem::create_directories(config.out_dir);

  struct Cell {
    std::string dist, ratio;
    std::uint64_t seed;
    int shade;
  };
  std::vector<Cell> cells;
  for (std::size_t di = 0; di < config.dists.size(); ++di) {
    const int shade =
        config.dists.size() > 1
            ? static_cast<int>(di * 6 / (config.dists.size() - 1))
            : 3;
    for (const auto& ratio : config.ratios) {
      for (const auto seed : config.seeds) {
        cells.push_back({config.dists[di], ratio, seed, shade});
      }
    }
  }

  StudyResult result;
  result.suite_digest = suite.digest();
  result.cells.resize(cells.size());

  const auto run_cell = [&](std::size_t ci) {
    const Cell& cell = cells[ci];
    const EvalFn eval = [&](const Mlp& actor, long step) {
      const EvalStats st = evaluate(actor, suite, env_cfg, config.sigma_n,
                                    suite.seed ^ static_cast<std::uint64_t>(step));
      return EvalPoint{step, st.success_ratio, st.collision_rate,
                       st.mean_episode_len};
    };
    Td3Config td3_cfg;
    TrainOptions opts{config.budget, config.eval_interval};
    TrainResult tr = [&] {
      if (config.env == "baseline-box") {
        BoxEnv env(env_cfg, config.box_edge, config.box_obstacles);
        return train(env, td3_cfg, opts, cell.seed, eval);
      }
      const CrDistribution dist = parse_dist_spec(cell.dist);
      const ObstacleRatio ratio = parse_ratio_spec(cell.ratio);
      ScenarioEnv env(env_cfg, [&pool, dist, ratio](Rng& rng) -> const Scenario& {
        return pool.draw(dist, ratio, rng);
      });
      return train(env, td3_cfg, opts, cell.seed, eval);
    }();
    result.cells[ci] = {cell.dist, cell.ratio, cell.seed, tr.metrics};
    const std::string name = "metrics_" + sanitize_label(cell.dist) + "_" +
                             sanitize_label(cell.ratio) + "_seed" +
                             std::to_string(cell.seed) + ".csv";
    write_metrics_csv(config.out_dir + "/" + name, result.suite_digest,
                      tr.metrics);
    save_checkpoint(tr.agent.actor(), tr.agent.actor_opt_step(),
                    config.out_dir + "/actor_" + sanitize_label(cell.dist) +
                        "_" + sanitize_label(cell.ratio) + "_seed" +
                        std::to_string(cell.seed) + ".json");
  };

  const int workers = std::min<int>(worker_count(), static_cast<int>(cells.size()));
  if (workers <= 1) {
    for (std::size_t ci = 0; ci < cells.size(); ++ci) run_cell(ci);
  } else {
    std::vector<std::thread> pool_threads;
    std::atomic<std::size_t> next{0};
    for (int t = 0; t < workers; ++t) {
      pool_threads.emplace_back([&] {
        for (std::size_t ci = next.fetch_add(1); ci < cells.size();
             ci = next.fetch_add(1)) {
          run_cell(ci);
        }
      });
    }
    for (auto& th : pool_threads) th.join();
  }

  // Combined plot.
  std::vector<CurveSeries> curves;
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    curves.push_back({cells[ci].dist + " " + cells[ci].ratio + " seed " +
                          std::to_string(cells[ci].seed),
                      cells[ci].shade, config.env == "baseline-box",
                      result.cells[ci].series});
  }
  write_learning_curve_svg(config.out_dir + "/curves.svg", curves);

  // Per-(dist, ratio) summary of final success ratios.
  std::ofstream summary(config.out_dir + "/summary.csv");
  summary << "dist,ratio,n_seeds,final_mean,final_sd\n";
  for (const auto& dist : config.dists) {
    for (const auto& ratio : config.ratios) {
      std::vector<double> finals;
      for (const auto& c : result.cells) {
        if (c.dist == dist && c.ratio == ratio && !c.series.empty()) {
          finals.push_back(c.series.back().success_ratio);
        }
      }
      if (finals.empty()) continue;
      const double mean =
          std::accumulate(finals.begin(), finals.end(), 0.0) / finals.size();
      double sd = 0.0;
      if (finals.size() >= 2) {
        for (double f : finals) sd += (f - mean) * (f - mean);
        sd = std::sqrt(sd / (finals.size() - 1));
      }
      summary << '"' << dist << "\",\"" << ratio << "\"," << finals.size()
              << ',' << fmt17(mean) << ',' << fmt17(sd) << '\n';
    }
  }
  return result;
}

void run_traced_episode(const Mlp& actor, const Scenario& scenario,
                        const EnvConfig& cfg, const std::string& path) {
  ScenarioEnv env(cfg);
  std::vector<double> s = env.reset_to(scenario);
  std::vector<TraceRow> rows;
  TraceRow first;
  first.agent = env.agent();
  for (const auto& ob : env.obstacles()) first.obstacle_poses.push_back(ob.pose);
  rows.push_back(first);
  double t = 0.0;
  Outcome outcome = Outcome::Running;
  while (outcome == Outcome::Running) {
    const std::vector<double> mu = actor.forward(s);
    const Action a{mu[0], mu[1]};
    StepResult res = env.step(a);
    t += cfg.dt;
    TraceRow row;
    row.t = t;
    row.agent = env.agent();
    row.action = a;
    for (const auto& ob : env.obstacles()) row.obstacle_poses.push_back(ob.pose);
    row.reward = res.reward;
    row.outcome = res.outcome;
    rows.push_back(row);
    s = std::move(res.state);
    outcome = res.outcome;
  }
  write_episode_trace(path, rows, scenario.n_obst());
}

}  // namespace riskgym
