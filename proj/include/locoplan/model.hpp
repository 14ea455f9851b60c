#pragma once

#include <Eigen/Core>

#include <array>
#include <vector>

namespace locoplan {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix63d = Eigen::Matrix<double, 6, 3>;

// Physical parameters of the lumped-mass model. The shipped defaults are
// plausible quadruped values, not measured ones; see the config files.
struct RobotParams {
  double mass = 30.0;                                    // kg
  Eigen::Matrix3d inertia =
      Eigen::Vector3d(0.9, 1.9, 2.1).asDiagonal();       // body frame, kg m^2
  Eigen::Vector3d gravity{0.0, 0.0, -9.81};              // m/s^2
  int leg_count = 4;
  // LF, RF, LH, RH in the base frame.
  std::vector<Eigen::Vector3d> nominal_foot_offsets{
      {0.34, 0.19, -0.42},
      {0.34, -0.19, -0.42},
      {-0.34, 0.19, -0.42},
      {-0.34, -0.19, -0.42}};
  Eigen::Vector3d kinematic_box_half_extents{0.28, 0.22, 0.25};  // m
  double max_force = 1000.0;         // N
  double friction_coefficient = 0.5;

  double stand_height() const { return -nominal_foot_offsets[0].z(); }
  void validate() const;  // throws std::invalid_argument
};

// Base pose and its derivatives. Orientation is roll-pitch-yaw with
// R = Rz(yaw) Ry(pitch) Rx(roll); angular velocity and acceleration are
// expressed in the world frame.
struct BaseState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d orientation = Eigen::Vector3d::Zero();  // roll, pitch, yaw
  Eigen::Vector3d linear_velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular_velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d linear_acceleration = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular_acceleration = Eigen::Vector3d::Zero();
};

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

// Rotation chart and its partials with respect to the Euler angles.
Eigen::Matrix3d euler_rotation(const Eigen::Vector3d& euler);
std::array<Eigen::Matrix3d, 3> euler_rotation_partials(
    const Eigen::Vector3d& euler);

// omega = euler_rate_map(euler) * euler_rate (world frame).
Eigen::Matrix3d euler_rate_map(const Eigen::Vector3d& euler);
std::array<Eigen::Matrix3d, 3> euler_rate_map_partials(
    const Eigen::Vector3d& euler);
std::array<std::array<Eigen::Matrix3d, 3>, 3> euler_rate_map_second_partials(
    const Eigen::Vector3d& euler);

// World angular velocity/acceleration from the Euler chart, with chain
// Jacobians for constraint assembly.
struct AngularKinematics {
  Eigen::Vector3d omega;
  Eigen::Vector3d omega_dot;
  Eigen::Matrix3d d_omega_d_euler;
  Eigen::Matrix3d d_omega_d_rate;
  Eigen::Matrix3d d_omega_dot_d_euler;
  Eigen::Matrix3d d_omega_dot_d_rate;
  Eigen::Matrix3d d_omega_dot_d_accel;
};
AngularKinematics angular_kinematics(const Eigen::Vector3d& euler,
                                     const Eigen::Vector3d& euler_rate,
                                     const Eigen::Vector3d& euler_accel);

// Newton-Euler balance of the single rigid body:
//   [ m (a - g) - sum f_i
//     I_w wdot + w x (I_w w) - sum (p_i - r) x f_i ]
// with I_w the body inertia rotated to the world frame.
Vector6d srbd_residual(const BaseState& state,
                       const std::vector<Eigen::Vector3d>& foot_positions,
                       const std::vector<Eigen::Vector3d>& forces,
                       const RobotParams& params);

struct SrbdJacobian {
  Matrix63d d_position;
  Matrix63d d_orientation;
  Matrix63d d_linear_acceleration;
  Matrix63d d_angular_velocity;
  Matrix63d d_angular_acceleration;
  std::vector<Matrix63d> d_foot_position;
  std::vector<Matrix63d> d_force;
};
SrbdJacobian srbd_residual_jacobian(
    const BaseState& state, const std::vector<Eigen::Vector3d>& foot_positions,
    const std::vector<Eigen::Vector3d>& forces, const RobotParams& params);

}  // namespace locoplan
