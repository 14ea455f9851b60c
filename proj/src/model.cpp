#include "locoplan/model.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace locoplan {

void RobotParams::validate() const {
  if (!(mass > 0.0)) throw std::invalid_argument("mass must be positive");
  if (!(friction_coefficient > 0.0))
    throw std::invalid_argument("friction coefficient must be positive");
  if (!(max_force > 0.0))
    throw std::invalid_argument("max_force must be positive");
  if (!(kinematic_box_half_extents.array() > 0.0).all())
    throw std::invalid_argument("box half extents must be positive");
  if (static_cast<int>(nominal_foot_offsets.size()) != leg_count)
    throw std::invalid_argument("foot offset count mismatch");
  if ((inertia - inertia.transpose()).norm() > 1e-9)
    throw std::invalid_argument("inertia must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(inertia);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("inertia must be positive definite");
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Matrix3d euler_rotation(const Eigen::Vector3d& e) {
  const double cr = std::cos(e[0]), sr = std::sin(e[0]);
  const double cp = std::cos(e[1]), sp = std::sin(e[1]);
  const double cy = std::cos(e[2]), sy = std::sin(e[2]);
  Eigen::Matrix3d rx, ry, rz;
  rx << 1, 0, 0, 0, cr, -sr, 0, sr, cr;
  ry << cp, 0, sp, 0, 1, 0, -sp, 0, cp;
  rz << cy, -sy, 0, sy, cy, 0, 0, 0, 1;
  return rz * ry * rx;
}

std::array<Eigen::Matrix3d, 3> euler_rotation_partials(
    const Eigen::Vector3d& e) {
  const double cr = std::cos(e[0]), sr = std::sin(e[0]);
  const double cp = std::cos(e[1]), sp = std::sin(e[1]);
  const double cy = std::cos(e[2]), sy = std::sin(e[2]);
  Eigen::Matrix3d rx, ry, rz, drx, dry, drz;
  rx << 1, 0, 0, 0, cr, -sr, 0, sr, cr;
  ry << cp, 0, sp, 0, 1, 0, -sp, 0, cp;
  rz << cy, -sy, 0, sy, cy, 0, 0, 0, 1;
  drx << 0, 0, 0, 0, -sr, -cr, 0, cr, -sr;
  dry << -sp, 0, cp, 0, 0, 0, -cp, 0, -sp;
  drz << -sy, -cy, 0, cy, -sy, 0, 0, 0, 0;
  return {rz * ry * drx, rz * dry * rx, drz * ry * rx};
}

Eigen::Matrix3d euler_rate_map(const Eigen::Vector3d& e) {
  const double cp = std::cos(e[1]), sp = std::sin(e[1]);
  const double cy = std::cos(e[2]), sy = std::sin(e[2]);
  Eigen::Matrix3d m;
  m << cy * cp, -sy, 0.0,
       sy * cp,  cy, 0.0,
       -sp,     0.0, 1.0;
  return m;
}

std::array<Eigen::Matrix3d, 3> euler_rate_map_partials(
    const Eigen::Vector3d& e) {
  const double cp = std::cos(e[1]), sp = std::sin(e[1]);
  const double cy = std::cos(e[2]), sy = std::sin(e[2]);
  Eigen::Matrix3d d_roll = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d d_pitch = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d d_yaw = Eigen::Matrix3d::Zero();
  d_pitch.col(0) = Eigen::Vector3d(-cy * sp, -sy * sp, -cp);
  d_yaw.col(0) = Eigen::Vector3d(-sy * cp, cy * cp, 0.0);
  d_yaw.col(1) = Eigen::Vector3d(-cy, -sy, 0.0);
  return {d_roll, d_pitch, d_yaw};
}

std::array<std::array<Eigen::Matrix3d, 3>, 3> euler_rate_map_second_partials(
    const Eigen::Vector3d& e) {
  const double cp = std::cos(e[1]), sp = std::sin(e[1]);
  const double cy = std::cos(e[2]), sy = std::sin(e[2]);
  std::array<std::array<Eigen::Matrix3d, 3>, 3> dd;
  for (auto& row : dd)
    for (auto& m : row) m = Eigen::Matrix3d::Zero();
  // d2E/dpitch2
  dd[1][1].col(0) = Eigen::Vector3d(-cy * cp, -sy * cp, sp);
  // d2E/dpitch dyaw (symmetric)
  dd[1][2].col(0) = Eigen::Vector3d(sy * sp, -cy * sp, 0.0);
  dd[2][1] = dd[1][2];
  // d2E/dyaw2
  dd[2][2].col(0) = Eigen::Vector3d(-cy * cp, -sy * cp, 0.0);
  dd[2][2].col(1) = Eigen::Vector3d(sy, -cy, 0.0);
  return dd;
}

AngularKinematics angular_kinematics(const Eigen::Vector3d& euler,
                                     const Eigen::Vector3d& rate,
                                     const Eigen::Vector3d& accel) {
  AngularKinematics k;
  const Eigen::Matrix3d e_map = euler_rate_map(euler);
  const auto de = euler_rate_map_partials(euler);
  const auto dde = euler_rate_map_second_partials(euler);

  Eigen::Matrix3d e_dot = Eigen::Matrix3d::Zero();
  for (int j = 0; j < 3; ++j) e_dot += de[j] * rate[j];

  k.omega = e_map * rate;
  k.omega_dot = e_map * accel + e_dot * rate;

  k.d_omega_d_rate = e_map;
  for (int j = 0; j < 3; ++j) k.d_omega_d_euler.col(j) = de[j] * rate;

  k.d_omega_dot_d_accel = e_map;
  for (int j = 0; j < 3; ++j) {
    k.d_omega_dot_d_rate.col(j) = de[j] * rate + e_dot.col(j);
    Eigen::Matrix3d d_e_dot = Eigen::Matrix3d::Zero();
    for (int m = 0; m < 3; ++m) d_e_dot += dde[m][j] * rate[m];
    k.d_omega_dot_d_euler.col(j) = de[j] * accel + d_e_dot * rate;
  }
  return k;
}

Vector6d srbd_residual(const BaseState& state,
                       const std::vector<Eigen::Vector3d>& feet,
                       const std::vector<Eigen::Vector3d>& forces,
                       const RobotParams& params) {
  const Eigen::Matrix3d r = euler_rotation(state.orientation);
  const Eigen::Matrix3d inertia_w = r * params.inertia * r.transpose();

  Eigen::Vector3d force_sum = Eigen::Vector3d::Zero();
  Eigen::Vector3d torque_sum = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < feet.size(); ++i) {
    force_sum += forces[i];
    torque_sum += (feet[i] - state.position).cross(forces[i]);
  }

  Vector6d res;
  res.head<3>() =
      params.mass * (state.linear_acceleration - params.gravity) - force_sum;
  res.tail<3>() = inertia_w * state.angular_acceleration +
                  state.angular_velocity.cross(
                      inertia_w * state.angular_velocity) -
                  torque_sum;
  return res;
}

SrbdJacobian srbd_residual_jacobian(
    const BaseState& state, const std::vector<Eigen::Vector3d>& feet,
    const std::vector<Eigen::Vector3d>& forces, const RobotParams& params) {
  const Eigen::Matrix3d r = euler_rotation(state.orientation);
  const auto dr = euler_rotation_partials(state.orientation);
  const Eigen::Matrix3d inertia_w = r * params.inertia * r.transpose();
  const Eigen::Vector3d& w = state.angular_velocity;
  const Eigen::Vector3d& wd = state.angular_acceleration;

  SrbdJacobian jac;
  jac.d_position.setZero();
  jac.d_orientation.setZero();
  jac.d_linear_acceleration.setZero();
  jac.d_angular_velocity.setZero();
  jac.d_angular_acceleration.setZero();

  jac.d_linear_acceleration.topRows<3>() =
      params.mass * Eigen::Matrix3d::Identity();

  for (int j = 0; j < 3; ++j) {
    const Eigen::Matrix3d d_iw = dr[j] * params.inertia * r.transpose() +
                                 r * params.inertia * dr[j].transpose();
    jac.d_orientation.bottomRows<3>().col(j) =
        d_iw * wd + w.cross(d_iw * w);
  }
  jac.d_angular_velocity.bottomRows<3>() =
      skew(w) * inertia_w - skew(inertia_w * w);
  jac.d_angular_acceleration.bottomRows<3>() = inertia_w;

  Eigen::Vector3d force_sum = Eigen::Vector3d::Zero();
  jac.d_foot_position.resize(feet.size());
  jac.d_force.resize(feet.size());
  for (size_t i = 0; i < feet.size(); ++i) {
    force_sum += forces[i];
    jac.d_foot_position[i].setZero();
    jac.d_foot_position[i].bottomRows<3>() = skew(forces[i]);
    jac.d_force[i].setZero();
    jac.d_force[i].topRows<3>() = -Eigen::Matrix3d::Identity();
    jac.d_force[i].bottomRows<3>() = -skew(feet[i] - state.position);
  }
  jac.d_position.bottomRows<3>() = -skew(force_sum);
  return jac;
}

}  // namespace locoplan
