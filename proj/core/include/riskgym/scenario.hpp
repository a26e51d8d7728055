#ifndef RISKGYM_SCENARIO_HPP_
#define RISKGYM_SCENARIO_HPP_

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskgym/risk.hpp"
#include "riskgym/rng.hpp"

namespace riskgym {

/// Sampling ranges for the scenario variables of one environment.
struct ScenarioRanges {
  double u0_min = 1.0, u0_max = 2.0;
  double r0_min = -0.1, r0_max = 0.1;
  double u_obst_min = 0.0, u_obst_max = 2.0;

  static ScenarioRanges point_mass() { return {}; }
  static ScenarioRanges robot() { return {2.0, 4.0, 0.0, 0.0, 0.0, 4.0}; }
};

inline constexpr int kMaxObstacles = 3;
inline constexpr int kCrBins = 10;

/// One training episode: agent initial speeds, 1..3 threat obstacles, and
/// the labeled collision risk.
struct Scenario {
  double u0 = 0.0;
  double r0 = 0.0;
  std::vector<Obstacle> obstacles;
  double cr = 0.0;

  int n_obst() const { return static_cast<int>(obstacles.size()); }
};

/// Binned target histogram over CR in [0, 1].
struct CrDistribution {
  std::vector<double> bin_edges;  // K+1 ascending, edges[0]=0, edges[K]=1
  std::vector<double> masses;     // K non-negative, summing to 1

  void validate() const;
};

/// Built-in 10-bin presets with strictly increasing mean CR; level 4 is the
/// uniform distribution.
CrDistribution preset_distribution(int level);

/// Uniform mass on [lo, hi], zero elsewhere, on the default 10-bin grid
/// (partial bins get proportional mass).
CrDistribution interval_distribution(double lo, double hi);

struct ObstacleRatio {
  double p1 = 1.0 / 3.0;
  double p2 = 1.0 / 3.0;
  double p3 = 1.0 / 3.0;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyCellError : DataError {
  using DataError::DataError;
};
struct DigestMismatchError : DataError {
  using DataError::DataError;
};
struct CorruptRecordError : DataError {
  using DataError::DataError;
};

/// Digest of the environment parameters a pool was built for; pools only
/// load against a matching digest.
std::uint64_t env_digest(const VehicleModel& model, const CrConfig& cfg,
                         const ScenarioRanges& ranges);

class ScenarioPool {
 public:
  ScenarioPool() = default;
  ScenarioPool(std::vector<Scenario> scenarios, std::uint64_t digest,
               CrConfig cfg);

  const std::vector<Scenario>& scenarios() const { return scenarios_; }
  std::uint64_t digest() const { return digest_; }
  const CrConfig& cr_config() const { return cfg_; }
  std::size_t size() const { return scenarios_.size(); }

  /// Count of scenarios in each (CR bin, obstacle count) cell.
  std::array<std::array<long, kCrBins>, kMaxObstacles> cell_counts() const;

  /// Draw a scenario whose obstacle count follows the ratio and whose CR
  /// falls in a bin drawn from the target distribution, uniform within the
  /// selected cell. Throws EmptyCellError when a positive-mass cell is
  /// unpopulated.
  const Scenario& draw(const CrDistribution& dist, const ObstacleRatio& ratio,
                       Rng& rng) const;

  /// Writes <path> (JSON lines, one scenario each) plus <path>.manifest.json.
  void save(const std::string& path) const;

  /// Load and verify against the expected digest.
  static ScenarioPool load(const std::string& path,
                           std::uint64_t expected_digest);

 private:
  void build_index();

  std::vector<Scenario> scenarios_;
  std::uint64_t digest_ = 0;
  CrConfig cfg_;
  // Per obstacle count, scenario indices sorted by CR.
  std::array<std::vector<std::size_t>, kMaxObstacles> by_count_;
};

/// Construct one obstacle guaranteed to intersect a feasible agent
/// trajectory at a grid-sampled time inside [0.2 t_lim, t_lim].
Obstacle place_threat_obstacle(double u0, double r0, const VehicleModel& model,
                               const CrConfig& cfg, const ScenarioRanges& ranges,
                               Rng& rng);

/// Monte Carlo pool generation. Deterministic in (seed); the result does not
/// depend on the thread count.
ScenarioPool generate_pool(long target_count, const VehicleModel& model,
                           const CrConfig& cfg, const ScenarioRanges& ranges,
                           std::uint64_t seed, int threads = 1);

}  // namespace riskgym

#endif  // RISKGYM_SCENARIO_HPP_
