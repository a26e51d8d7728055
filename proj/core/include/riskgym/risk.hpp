#ifndef RISKGYM_RISK_HPP_
#define RISKGYM_RISK_HPP_

#include <span>
#include <vector>

#include "riskgym/dynamics.hpp"

namespace riskgym {

/// Uniform grid of constant actions: n_u longitudinal levels crossed with
/// n_r steering/torque levels, each component equally spaced over [-1, 1].
struct ControlGrid {
  int n_u = 11;
  int n_r = 11;

  double level_u(int i) const { return -1.0 + 2.0 * i / (n_u - 1); }
  double level_r(int j) const { return -1.0 + 2.0 * j / (n_r - 1); }
  int size() const { return n_u * n_r; }
};

struct CrConfig {
  double t_lim = 20.0;  // s
  double dt = 0.1;      // s
  ControlGrid grid;
};

/// Per-action collision flags, row-major over (i, j) = (a_u level, a_r level).
struct CollisionMask {
  int n_u = 0;
  int n_r = 0;
  std::vector<char> flags;  // n_u * n_r entries

  bool at(int i, int j) const { return flags[i * n_r + j] != 0; }
  double mean() const;
};

/// Fraction of grid actions whose constant-action rollout collides with any
/// obstacle within t_lim. Always a multiple of 1 / (n_u * n_r).
double collision_risk(const AgentState& agent, std::span<const Obstacle> obstacles,
                      const VehicleModel& model, const CrConfig& cfg);

CollisionMask per_action_collision_mask(const AgentState& agent,
                                        std::span<const Obstacle> obstacles,
                                        const VehicleModel& model,
                                        const CrConfig& cfg);

struct CpaResult {
  double dcpa = 0.0;  // m
  double tcpa = 0.0;  // s
};

/// Closest point of approach under zero control: the agent drifts with its
/// current velocities (point mass keeps its yaw rate), the obstacle moves
/// linearly. tcpa is the earliest sampled time attaining the minimum
/// distance; 0 when the pair is already diverging, clamped to the horizon
/// when the distance is still shrinking there.
CpaResult cpa(const AgentState& agent, const Obstacle& obstacle,
              const VehicleModel& model, double dt, double horizon);

}  // namespace riskgym

#endif  // RISKGYM_RISK_HPP_
