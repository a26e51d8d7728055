#include "riskgym/risk.hpp"

#include <cmath>
#include <limits>
#include <tuple>

namespace riskgym {

double CollisionMask::mean() const {
  long hits = 0;
  for (char f : flags) hits += (f != 0);
  return static_cast<double>(hits) / static_cast<double>(flags.size());
}

CollisionMask per_action_collision_mask(const AgentState& agent,
                                        std::span<const Obstacle> obstacles,
                                        const VehicleModel& model,
                                        const CrConfig& cfg) {
  CollisionMask mask;
  mask.n_u = cfg.grid.n_u;
  mask.n_r = cfg.grid.n_r;
  mask.flags.assign(static_cast<std::size_t>(cfg.grid.size()), 0);
  if (obstacles.empty()) return mask;

  const std::size_t steps = rollout_steps(cfg.dt, cfg.t_lim);

  // Obstacle trajectories are shared across all grid actions.
  std::vector<std::vector<Pose>> obst_traj(obstacles.size());
  for (std::size_t o = 0; o < obstacles.size(); ++o) {
    obst_traj[o].reserve(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
      obst_traj[o].push_back(obstacle_position(obstacles[o], k * cfg.dt));
    }
  }

  for (int i = 0; i < cfg.grid.n_u; ++i) {
    for (int j = 0; j < cfg.grid.n_r; ++j) {
      const Action a{cfg.grid.level_u(i), cfg.grid.level_r(j)};
      const Control ctrl = action_to_control(a, model);
      Pose pose = agent.pose;
      Velocity vel = agent.vel;
      bool hit = false;
      for (std::size_t k = 0; k <= steps && !hit; ++k) {
        if (k > 0) std::tie(pose, vel) = integrate_step(pose, vel, ctrl, model, cfg.dt);
        for (std::size_t o = 0; o < obstacles.size(); ++o) {
          const Pose& op = obst_traj[o][k];
          const double dx = pose.x - op.x;
          const double dy = pose.y - op.y;
          const double reach = model.r_coll + obstacles[o].r_coll;
          if (dx * dx + dy * dy < reach * reach) {
            hit = true;
            break;
          }
        }
      }
      if (hit) mask.flags[static_cast<std::size_t>(i) * cfg.grid.n_r + j] = 1;
    }
  }
  return mask;
}

double collision_risk(const AgentState& agent, std::span<const Obstacle> obstacles,
                      const VehicleModel& model, const CrConfig& cfg) {
  return per_action_collision_mask(agent, obstacles, model, cfg).mean();
}

CpaResult cpa(const AgentState& agent, const Obstacle& obstacle,
              const VehicleModel& model, double dt, double horizon) {
  const Control zero{};
  const std::size_t steps = rollout_steps(dt, horizon);
  Pose pose = agent.pose;
  Velocity vel = agent.vel;
  CpaResult best;
  best.dcpa = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k <= steps; ++k) {
    if (k > 0) std::tie(pose, vel) = integrate_step(pose, vel, zero, model, dt);
    const Pose op = obstacle_position(obstacle, k * dt);
    const double d = std::hypot(pose.x - op.x, pose.y - op.y);
    if (d < best.dcpa) {
      best.dcpa = d;
      best.tcpa = k * dt;
    }
  }
  return best;
}

}  // namespace riskgym
