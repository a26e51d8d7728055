#include "riskgym/dynamics.hpp"

#include <cmath>
#include <tuple>
#include <stdexcept>

namespace riskgym {

VehicleModel VehicleModel::point_mass() {
  VehicleModel m;
  m.kind = ModelKind::PointMass;
  m.mass = 15.0;
  m.inertia = 30.0;
  m.tau_u_max = 1.0;
  m.tau_r_max = 1.0;
  m.r_coll = 3.0;
  return m;
}

VehicleModel VehicleModel::kinematic_robot() {
  VehicleModel m;
  m.kind = ModelKind::KinematicRobot;
  m.mass = 5.0;
  m.rear_axle = 1.0;
  m.wheelbase = 2.0;
  m.tau_u_max = 1.0;
  m.steer_max = 5.0 * M_PI / 180.0;
  m.r_coll = 6.0;
  return m;
}

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a > M_PI) a -= 2.0 * M_PI;
  if (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

Control action_to_control(const Action& a, const VehicleModel& model) {
  if (std::abs(a.a_u) > 1.0 || std::abs(a.a_r) > 1.0) {
    throw std::invalid_argument("action component outside [-1, 1]");
  }
  Control c;
  c.tau_u = model.tau_u_max * a.a_u;
  if (model.kind == ModelKind::PointMass) {
    c.tau_r = model.tau_r_max * a.a_r;
  } else {
    c.steer = model.steer_max * a.a_r;
  }
  return c;
}

namespace {

double robot_slip_angle(const Control& ctrl, const VehicleModel& model) {
  return std::atan(std::tan(ctrl.steer) * model.rear_axle / model.wheelbase);
}

}  // namespace

StateDeriv derivative(const Pose& pose, const Velocity& vel,
                      const Control& ctrl, const VehicleModel& model) {
  StateDeriv d;
  if (model.kind == ModelKind::PointMass) {
    d.pose_rate.x = vel.u * std::cos(pose.psi);
    d.pose_rate.y = vel.u * std::sin(pose.psi);
    d.pose_rate.psi = vel.r;
    d.vel_rate.u = ctrl.tau_u / model.mass;
    d.vel_rate.v = 0.0;
    d.vel_rate.r = ctrl.tau_r / model.inertia;
  } else {
    const double beta = robot_slip_angle(ctrl, model);
    d.pose_rate.x = vel.u * std::cos(pose.psi + beta);
    d.pose_rate.y = vel.u * std::sin(pose.psi + beta);
    d.pose_rate.psi = vel.u / model.rear_axle * std::sin(beta);
    d.vel_rate.u = ctrl.tau_u / model.mass;
    d.vel_rate.v = 0.0;
    d.vel_rate.r = 0.0;  // yaw rate is kinematic, not integrated
  }
  return d;
}

std::pair<Pose, Velocity> integrate_step(const Pose& pose, const Velocity& vel,
                                         const Control& ctrl,
                                         const VehicleModel& model, double dt) {
  Velocity vel1 = vel;
  Pose pose1 = pose;
  if (model.kind == ModelKind::PointMass) {
    vel1.u = vel.u + ctrl.tau_u / model.mass * dt;
    vel1.r = vel.r + ctrl.tau_r / model.inertia * dt;
    // Heading first, then position with rates at both endpoints.
    pose1.psi = pose.psi + 0.5 * (vel.r + vel1.r) * dt;
    const double xd0 = vel.u * std::cos(pose.psi);
    const double yd0 = vel.u * std::sin(pose.psi);
    const double xd1 = vel1.u * std::cos(pose1.psi);
    const double yd1 = vel1.u * std::sin(pose1.psi);
    pose1.x = pose.x + 0.5 * (xd0 + xd1) * dt;
    pose1.y = pose.y + 0.5 * (yd0 + yd1) * dt;
  } else {
    const double beta = robot_slip_angle(ctrl, model);
    const double sb = std::sin(beta);
    vel1.u = vel.u + ctrl.tau_u / model.mass * dt;
    const double r0 = vel.u / model.rear_axle * sb;
    const double r1 = vel1.u / model.rear_axle * sb;
    vel1.r = r1;
    pose1.psi = pose.psi + 0.5 * (r0 + r1) * dt;
    const double xd0 = vel.u * std::cos(pose.psi + beta);
    const double yd0 = vel.u * std::sin(pose.psi + beta);
    const double xd1 = vel1.u * std::cos(pose1.psi + beta);
    const double yd1 = vel1.u * std::sin(pose1.psi + beta);
    pose1.x = pose.x + 0.5 * (xd0 + xd1) * dt;
    pose1.y = pose.y + 0.5 * (yd0 + yd1) * dt;
  }
  return {pose1, vel1};
}

Pose obstacle_position(const Obstacle& obst, double t) {
  Pose p = obst.pose;
  p.x += obst.speed * std::cos(obst.pose.psi) * t;
  p.y += obst.speed * std::sin(obst.pose.psi) * t;
  return p;
}

std::size_t rollout_steps(double dt, double horizon) {
  const auto k = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
  return k == 0 ? 1 : k;
}

std::vector<Pose> rollout_constant_action(const AgentState& start,
                                          const Action& a,
                                          const VehicleModel& model, double dt,
                                          double horizon) {
  const Control ctrl = action_to_control(a, model);
  const std::size_t steps = rollout_steps(dt, horizon);
  std::vector<Pose> out;
  out.reserve(steps + 1);
  Pose pose = start.pose;
  Velocity vel = start.vel;
  out.push_back(pose);
  for (std::size_t k = 0; k < steps; ++k) {
    std::tie(pose, vel) = integrate_step(pose, vel, ctrl, model, dt);
    out.push_back(pose);
  }
  return out;
}

}  // namespace riskgym
