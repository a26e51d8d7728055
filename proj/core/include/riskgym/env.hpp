#ifndef RISKGYM_ENV_HPP_
#define RISKGYM_ENV_HPP_

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "riskgym/rng.hpp"
#include "riskgym/scenario.hpp"

namespace riskgym {

struct EnvScales {
  double u_scale = 1.5;  // m/s
  double r_scale = 0.5;  // 1/s
  double d_scale = 15.0; // m
  double t_scale = 20.0; // s
};

struct EnvConfig {
  VehicleModel model;
  EnvScales scales;
  double dt = 0.1;
  int n_slots = 3;
  int max_steps = 400;  // ceil(2 t_lim / dt)
  ScenarioRanges ranges;
  CrConfig cr_cfg;

  int obs_dim() const { return 2 + 6 * n_slots; }

  static EnvConfig point_mass();
  static EnvConfig robot();
};

enum class Outcome { Running, Collision, Success, Truncated };

const char* outcome_name(Outcome o);

struct StepResult {
  std::vector<double> state;
  double reward = 0.0;
  bool done = false;
  Outcome outcome = Outcome::Running;
};

struct SlotOverflowError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StepAfterDoneError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Build the flat observation: (u, r) scaled, then per slot
/// (d, u_obst, theta, theta_obst, DCPA, TCPA) scaled, slots sorted by
/// ascending TCPA (ties: smaller d, then obstacle id). Unused slots hold the
/// far-dummy pad.
std::vector<double> observe(const AgentState& agent,
                            std::span<const Obstacle> obstacles,
                            const EnvConfig& cfg);

/// Multiplicative Gaussian sensor noise: each component times N(1, sigma_n).
std::vector<double> noise_wrap(std::span<const double> state, double sigma_n,
                               Rng& rng);

class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::vector<double> reset(Rng& rng) = 0;
  virtual StepResult step(const Action& a) = 0;
  virtual int obs_dim() const = 0;
  virtual const AgentState& agent() const = 0;
  virtual std::span<const Obstacle> obstacles() const = 0;
};

/// CR-scenario episodes: the agent starts at the origin with the scenario's
/// speeds, obstacles move linearly, and the episode ends on collision, on
/// every distance strictly increasing (success), or at max_steps.
class ScenarioEnv : public Environment {
 public:
  using ScenarioSource = std::function<const Scenario&(Rng&)>;

  explicit ScenarioEnv(EnvConfig cfg, ScenarioSource source = nullptr);

  std::vector<double> reset(Rng& rng) override;
  std::vector<double> reset_to(const Scenario& scenario);
  StepResult step(const Action& a) override;
  int obs_dim() const override { return cfg_.obs_dim(); }
  const AgentState& agent() const override { return agent_; }
  std::span<const Obstacle> obstacles() const override { return obstacles_; }
  const EnvConfig& config() const { return cfg_; }
  bool done() const { return done_; }

 private:
  EnvConfig cfg_;
  ScenarioSource source_;
  AgentState agent_;
  std::vector<Obstacle> obstacles_;  // poses kept at the current time
  std::vector<Obstacle> anchors_;    // poses at episode start
  std::vector<double> prev_dist_;
  double time_ = 0.0;
  int steps_ = 0;
  bool done_ = true;
};

/// Baseline environment: an agent-centered square box with randomly
/// initialized linear obstacles that are beamed across the boundary, long
/// fixed-length episodes, and a dense survival reward.
class BoxEnv : public Environment {
 public:
  explicit BoxEnv(EnvConfig cfg, double edge = 35.0, int n_obstacles = 5,
                  int episode_len = 500);

  std::vector<double> reset(Rng& rng) override;
  StepResult step(const Action& a) override;
  int obs_dim() const override { return cfg_.obs_dim(); }
  const AgentState& agent() const override { return agent_; }
  std::span<const Obstacle> obstacles() const override { return obstacles_; }
  const EnvConfig& config() const { return cfg_; }

 private:
  EnvConfig cfg_;
  double edge_;
  int n_obstacles_;
  int episode_len_;
  AgentState agent_;
  std::vector<Obstacle> obstacles_;
  int steps_ = 0;
  bool done_ = true;
};

/// One row of an episode trace CSV.
struct TraceRow {
  double t = 0.0;
  AgentState agent;
  Action action;
  std::vector<Pose> obstacle_poses;
  double reward = 0.0;
  Outcome outcome = Outcome::Running;
};

void write_episode_trace(const std::string& path,
                         std::span<const TraceRow> rows, int n_obst);

}  // namespace riskgym

#endif  // RISKGYM_ENV_HPP_
