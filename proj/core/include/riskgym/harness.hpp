#ifndef RISKGYM_HARNESS_HPP_
#define RISKGYM_HARNESS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "riskgym/td3.hpp"

namespace riskgym {

/// Frozen evaluation set: CR uniform across the 10 bins, obstacle counts
/// 1/3 each, identical for every agent within one study.
struct ValidationSuite {
  std::vector<Scenario> scenarios;
  std::uint64_t seed = 0;

  std::uint64_t digest() const;
};

/// Largest-remainder allocation of `total` into weighted parts.
std::vector<long> largest_remainder(const std::vector<double>& weights,
                                    long total);

ValidationSuite build_validation_suite(const ScenarioPool& pool, int size,
                                       std::uint64_t seed);

struct EvalStats {
  double success_ratio = 0.0;
  double collision_rate = 0.0;
  double mean_episode_len = 0.0;
};

/// Deterministic-policy evaluation over the suite; optional multiplicative
/// sensor noise on every observation. Success is any episode without a
/// collision.
EvalStats evaluate(const Mlp& actor, const ValidationSuite& suite,
                   const EnvConfig& cfg, double sigma_n = 0.0,
                   std::uint64_t noise_seed = 0);

/// CR audit of random box-environment initializations: probability mass at
/// CR = 0 and CR = 1, and the 10-bin histogram of the remaining scenarios
/// split by the number of threatening obstacles (1, 2, 3+).
struct AuditResult {
  long samples = 0;
  double mass_zero = 0.0;
  double mass_one = 0.0;
  // rows: 1, 2, 3-or-more threatening obstacles; columns: CR bins. Masses
  // are fractions of all samples; together with mass_zero/mass_one they sum
  // to 1.
  std::array<std::array<double, kCrBins>, 3> histogram{};
};

AuditResult audit_random_init(const EnvConfig& cfg, long samples,
                              std::uint64_t seed, double box_edge = 35.0,
                              int box_obstacles = 5, int threads = 1);

/// Worker cap: RISKGYM_THREADS when set, hardware concurrency otherwise.
int worker_count();

struct RunConfig {
  std::string env = "point-mass";  // point-mass | robot | baseline-box
  std::string pool;
  std::vector<std::string> dists = {"preset:4"};
  std::vector<std::string> ratios = {"1,1,1"};
  long budget = 1000000;
  long eval_interval = 20000;
  int validation_size = 500;
  std::vector<std::uint64_t> seeds = {1};
  double sigma_n = 0.0;
  std::string out_dir = "study_out";
  double box_edge = 35.0;
  int box_obstacles = 5;
};

/// Parse a plain key-value (TOML syntax) config file.
RunConfig parse_run_config(const std::string& path);

EnvConfig env_config_for(const std::string& env_kind);

CrDistribution parse_dist_spec(const std::string& spec);
ObstacleRatio parse_ratio_spec(const std::string& spec);

void write_metrics_csv(const std::string& path, std::uint64_t suite_digest,
                       const std::vector<EvalPoint>& series);
std::vector<EvalPoint> read_metrics_csv(const std::string& path);

/// Standalone SVG learning-curve plot; one polyline per labeled series,
/// shade index selecting the darker-is-harder color ramp.
struct CurveSeries {
  std::string label;
  int shade = 0;  // 0 (light) .. 6 (dark)
  bool dashed = false;
  std::vector<EvalPoint> points;
};
void write_learning_curve_svg(const std::string& path,
                              const std::vector<CurveSeries>& series);

struct StudyCell {
  std::string dist;
  std::string ratio;
  std::uint64_t seed = 0;
  std::vector<EvalPoint> series;
};

struct StudyResult {
  std::vector<StudyCell> cells;
  std::uint64_t suite_digest = 0;
};

/// Train every (dist, ratio, seed) cell of the grid, emit per-cell metrics
/// CSVs, a combined SVG plot, and a summary table with per-cell mean/sd of
/// the final success ratio.
StudyResult run_study(const RunConfig& config);

/// Run one episode with a deterministic policy and export the trace CSV.
void run_traced_episode(const Mlp& actor, const Scenario& scenario,
                        const EnvConfig& cfg, const std::string& path);

}  // namespace riskgym

#endif  // RISKGYM_HARNESS_HPP_
