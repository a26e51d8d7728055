#include "riskgym/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace riskgym {

EnvConfig EnvConfig::point_mass() {
  EnvConfig cfg;
  cfg.model = VehicleModel::point_mass();
  cfg.scales = {1.5, 0.5, 15.0, 20.0};
  cfg.dt = 0.1;
  cfg.ranges = ScenarioRanges::point_mass();
  cfg.cr_cfg.t_lim = cfg.scales.t_scale;
  cfg.cr_cfg.dt = cfg.dt;
  cfg.max_steps =
      static_cast<int>(std::ceil(2.0 * cfg.cr_cfg.t_lim / cfg.dt - 1e-9));
  return cfg;
}

EnvConfig EnvConfig::robot() {
  EnvConfig cfg;
  cfg.model = VehicleModel::kinematic_robot();
  cfg.scales = {6.0, 0.2, 40.0, 20.0};
  cfg.dt = 0.1;
  cfg.ranges = ScenarioRanges::robot();
  cfg.cr_cfg.t_lim = cfg.scales.t_scale;
  cfg.cr_cfg.dt = cfg.dt;
  cfg.max_steps =
      static_cast<int>(std::ceil(2.0 * cfg.cr_cfg.t_lim / cfg.dt - 1e-9));
  return cfg;
}

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Running: return "running";
    case Outcome::Collision: return "collision";
    case Outcome::Success: return "success";
    case Outcome::Truncated: return "truncated";
  }
  return "?";
}

namespace {

struct SlotInfo {
  double d, u_obst, theta, theta_obst, dcpa, tcpa;
  std::size_t id;
};

}  // namespace

std::vector<double> observe(const AgentState& agent,
                            std::span<const Obstacle> obstacles,
                            const EnvConfig& cfg) {
  std::vector<SlotInfo> slots;
  slots.reserve(obstacles.size());
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const Obstacle& ob = obstacles[i];
    SlotInfo s;
    s.id = i;
    s.d = std::hypot(agent.pose.x - ob.pose.x, agent.pose.y - ob.pose.y);
    s.u_obst = ob.speed;
    s.theta = wrap_angle(std::atan2(ob.pose.y - agent.pose.y,
                                    ob.pose.x - agent.pose.x) -
                         agent.pose.psi);
    s.theta_obst = wrap_angle(ob.pose.psi - agent.pose.psi);
    const CpaResult c =
        cpa(agent, ob, cfg.model, cfg.dt, 2.0 * cfg.cr_cfg.t_lim);
    s.dcpa = c.dcpa;
    s.tcpa = c.tcpa;
    slots.push_back(s);
  }
  std::sort(slots.begin(), slots.end(), [](const SlotInfo& a, const SlotInfo& b) {
    if (a.tcpa != b.tcpa) return a.tcpa < b.tcpa;
    if (a.d != b.d) return a.d < b.d;
    return a.id < b.id;
  });
  if (static_cast<int>(slots.size()) > cfg.n_slots) slots.resize(cfg.n_slots);

  std::vector<double> state;
  state.reserve(cfg.obs_dim());
  state.push_back(agent.vel.u / cfg.scales.u_scale);
  state.push_back(agent.vel.r / cfg.scales.r_scale);
  for (const SlotInfo& s : slots) {
    state.push_back(s.d / cfg.scales.d_scale);
    state.push_back(s.u_obst / cfg.scales.u_scale);
    state.push_back(s.theta / M_PI);
    state.push_back(s.theta_obst / M_PI);
    state.push_back(s.dcpa / cfg.scales.d_scale);
    state.push_back(s.tcpa / cfg.scales.t_scale);
  }
  // Far-dummy pad for unused slots.
  for (int k = static_cast<int>(slots.size()); k < cfg.n_slots; ++k) {
    state.insert(state.end(), {2.0, 0.0, 0.0, 0.0, 2.0, 2.0});
  }
  return state;
}

std::vector<double> noise_wrap(std::span<const double> state, double sigma_n,
                               Rng& rng) {
  std::vector<double> out(state.begin(), state.end());
  if (sigma_n <= 0.0) return out;
  for (double& v : out) v *= gaussian(rng, 1.0, sigma_n);
  return out;
}

ScenarioEnv::ScenarioEnv(EnvConfig cfg, ScenarioSource source)
    : cfg_(std::move(cfg)), source_(std::move(source)) {}

std::vector<double> ScenarioEnv::reset(Rng& rng) {
  if (!source_) throw std::logic_error("ScenarioEnv has no scenario source");
  return reset_to(source_(rng));
}

std::vector<double> ScenarioEnv::reset_to(const Scenario& scenario) {
  if (scenario.n_obst() > cfg_.n_slots) {
    throw SlotOverflowError("scenario has more obstacles than slots");
  }
  agent_ = AgentState{};
  agent_.vel.u = scenario.u0;
  agent_.vel.r = scenario.r0;
  obstacles_ = scenario.obstacles;
  anchors_ = scenario.obstacles;
  prev_dist_.resize(obstacles_.size());
  for (std::size_t i = 0; i < obstacles_.size(); ++i) {
    prev_dist_[i] = std::hypot(agent_.pose.x - obstacles_[i].pose.x,
                               agent_.pose.y - obstacles_[i].pose.y);
  }
  time_ = 0.0;
  steps_ = 0;
  done_ = false;
  return observe(agent_, obstacles_, cfg_);
}

StepResult ScenarioEnv::step(const Action& a) {
  if (done_) throw StepAfterDoneError("step() after episode end");
  const Control ctrl = action_to_control(a, cfg_.model);
  std::tie(agent_.pose, agent_.vel) =
      integrate_step(agent_.pose, agent_.vel, ctrl, cfg_.model, cfg_.dt);
  ++steps_;
  time_ = steps_ * cfg_.dt;

  bool collided = false;
  bool all_receding = true;
  for (std::size_t i = 0; i < obstacles_.size(); ++i) {
    // Positions come from the t=0 anchor so linear motion stays exact.
    obstacles_[i].pose = obstacle_position(anchors_[i], time_);
    const double d = std::hypot(agent_.pose.x - obstacles_[i].pose.x,
                                agent_.pose.y - obstacles_[i].pose.y);
    const double reach = cfg_.model.r_coll + obstacles_[i].r_coll;
    if (d < reach) collided = true;
    if (d <= prev_dist_[i]) all_receding = false;
    prev_dist_[i] = d;
  }

  StepResult res;
  if (collided) {
    res.reward = -1.0;
    res.outcome = Outcome::Collision;
  } else if (all_receding) {
    res.reward = 1.0;
    res.outcome = Outcome::Success;
  } else if (steps_ >= cfg_.max_steps) {
    // No collision occurred over the whole cap; counts as success.
    res.reward = 1.0;
    res.outcome = Outcome::Truncated;
  }
  res.done = res.outcome != Outcome::Running;
  done_ = res.done;
  res.state = observe(agent_, obstacles_, cfg_);
  return res;
}

BoxEnv::BoxEnv(EnvConfig cfg, double edge, int n_obstacles, int episode_len)
    : cfg_(std::move(cfg)),
      edge_(edge),
      n_obstacles_(n_obstacles),
      episode_len_(episode_len) {}

std::vector<double> BoxEnv::reset(Rng& rng) {
  agent_ = AgentState{};
  agent_.vel.u = uniform(rng, cfg_.ranges.u0_min, cfg_.ranges.u0_max);
  agent_.vel.r = uniform(rng, cfg_.ranges.r0_min, cfg_.ranges.r0_max);
  obstacles_.clear();
  for (int i = 0; i < n_obstacles_; ++i) {
    Obstacle ob;
    ob.pose.x = uniform(rng, -edge_ / 2.0, edge_ / 2.0);
    ob.pose.y = uniform(rng, -edge_ / 2.0, edge_ / 2.0);
    ob.pose.psi = uniform(rng, 0.0, 2.0 * M_PI);
    ob.speed = uniform(rng, cfg_.ranges.u_obst_min, cfg_.ranges.u_obst_max);
    ob.r_coll = cfg_.model.r_coll;
    obstacles_.push_back(ob);
  }
  steps_ = 0;
  done_ = false;
  return observe(agent_, obstacles_, cfg_);
}

StepResult BoxEnv::step(const Action& a) {
  if (done_) throw StepAfterDoneError("step() after episode end");
  const Control ctrl = action_to_control(a, cfg_.model);
  std::tie(agent_.pose, agent_.vel) =
      integrate_step(agent_.pose, agent_.vel, ctrl, cfg_.model, cfg_.dt);
  ++steps_;

  bool overlap = false;
  for (Obstacle& ob : obstacles_) {
    ob.pose.x += ob.speed * std::cos(ob.pose.psi) * cfg_.dt;
    ob.pose.y += ob.speed * std::sin(ob.pose.psi) * cfg_.dt;
    // The box is centered on the agent; a leaving obstacle is beamed to the
    // opposite side (point reflection through the center).
    if (std::abs(ob.pose.x - agent_.pose.x) > edge_ / 2.0 ||
        std::abs(ob.pose.y - agent_.pose.y) > edge_ / 2.0) {
      ob.pose.x = 2.0 * agent_.pose.x - ob.pose.x;
      ob.pose.y = 2.0 * agent_.pose.y - ob.pose.y;
    }
    const double d =
        std::hypot(agent_.pose.x - ob.pose.x, agent_.pose.y - ob.pose.y);
    if (d < cfg_.model.r_coll + ob.r_coll) overlap = true;
  }

  StepResult res;
  if (overlap) {
    res.reward = -1.0;
    res.outcome = Outcome::Collision;
  } else {
    res.reward = 0.01;
    if (steps_ >= episode_len_) res.outcome = Outcome::Truncated;
  }
  res.done = res.outcome != Outcome::Running;
  done_ = res.done;
  res.state = observe(agent_, obstacles_, cfg_);
  return res;
}

void write_episode_trace(const std::string& path,
                         std::span<const TraceRow> rows, int n_obst) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open trace file for writing: " + path);
  out << "t,x,y,psi,u,r,a0,a1";
  for (int i = 0; i < n_obst; ++i) {
    out << ",obst" << i + 1 << "_x,obst" << i + 1 << "_y";
  }
  out << ",reward,outcome\n";
  char buf[40];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (const TraceRow& row : rows) {
    put(row.t); out << ',';
    put(row.agent.pose.x); out << ',';
    put(row.agent.pose.y); out << ',';
    put(row.agent.pose.psi); out << ',';
    put(row.agent.vel.u); out << ',';
    put(row.agent.vel.r); out << ',';
    put(row.action.a_u); out << ',';
    put(row.action.a_r);
    for (int i = 0; i < n_obst; ++i) {
      out << ',';
      if (i < static_cast<int>(row.obstacle_poses.size())) {
        put(row.obstacle_poses[i].x); out << ',';
        put(row.obstacle_poses[i].y);
      } else {
        out << ',';
      }
    }
    out << ',';
    put(row.reward);
    out << ',' << outcome_name(row.outcome) << '\n';
  }
}

}  // namespace riskgym
