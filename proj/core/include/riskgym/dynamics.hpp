#ifndef RISKGYM_DYNAMICS_HPP_
#define RISKGYM_DYNAMICS_HPP_

#include <cstddef>
#include <utility>
#include <vector>

namespace riskgym {

/// Planar pose: position plus heading. Heading is stored unwrapped.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
};

/// Body-frame velocities: surge, sway, yaw rate. Sway is identically zero
/// for both vehicle models implemented here.
struct Velocity {
  double u = 0.0;
  double v = 0.0;
  double r = 0.0;
};

/// Control input. For the point mass, tau_u is a longitudinal force and
/// tau_r a torque. The kinematic robot steers instead of applying torque,
/// so it uses the steer field and leaves tau_r at zero.
struct Control {
  double tau_u = 0.0;
  double tau_v = 0.0;
  double tau_r = 0.0;
  double steer = 0.0;
};

/// Two-channel action in [-1, 1]^2, mapped linearly onto the control limits.
struct Action {
  double a_u = 0.0;
  double a_r = 0.0;
};

enum class ModelKind { PointMass, KinematicRobot };

struct VehicleModel {
  ModelKind kind = ModelKind::PointMass;
  double mass = 15.0;      // kg
  double inertia = 30.0;   // kg m^2, point mass only
  double rear_axle = 1.0;  // l_r, m, robot only
  double wheelbase = 2.0;  // L, m, robot only
  double tau_u_max = 1.0;  // N
  double tau_r_max = 1.0;  // N m, point mass only
  double steer_max = 0.0;  // rad, robot only
  double r_coll = 3.0;     // m

  static VehicleModel point_mass();
  static VehicleModel kinematic_robot();
};

/// Linearly moving obstacle. Heading and speed are fixed at construction;
/// the trajectory is a straight line for all time.
struct Obstacle {
  Pose pose;
  double speed = 0.0;   // m/s
  double r_coll = 3.0;  // m
};

struct AgentState {
  Pose pose;
  Velocity vel;
};

struct StateDeriv {
  Pose pose_rate;
  Velocity vel_rate;
};

/// Wrap an angle into (-pi, pi].
double wrap_angle(double a);

/// Map an action in [-1,1]^2 onto the model's control limits. Throws
/// std::invalid_argument if a component is outside [-1, 1].
Control action_to_control(const Action& a, const VehicleModel& model);

/// Continuous-time state derivative. For the robot, the yaw rate is
/// kinematic (determined by speed and steering), so its vel_rate.r is zero
/// and integrate_step recomputes r from the updated speed.
StateDeriv derivative(const Pose& pose, const Velocity& vel,
                      const Control& ctrl, const VehicleModel& model);

/// One simulation step: Euler on velocities, ballistic (trapezoidal) on the
/// pose with the rate re-evaluated at the updated velocity and heading.
std::pair<Pose, Velocity> integrate_step(const Pose& pose, const Velocity& vel,
                                         const Control& ctrl,
                                         const VehicleModel& model, double dt);

/// Obstacle position at absolute time t along its linear trajectory.
Pose obstacle_position(const Obstacle& obst, double t);

/// Number of integration steps covering a horizon: ceil(horizon / dt),
/// tolerant to horizon being an exact multiple of dt.
std::size_t rollout_steps(double dt, double horizon);

/// Simulate a fixed action for the whole horizon. Returns
/// rollout_steps(dt, horizon) + 1 poses including the start pose.
std::vector<Pose> rollout_constant_action(const AgentState& start,
                                          const Action& a,
                                          const VehicleModel& model, double dt,
                                          double horizon);

}  // namespace riskgym

#endif  // RISKGYM_DYNAMICS_HPP_
