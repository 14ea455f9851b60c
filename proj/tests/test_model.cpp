#include "locoplan/model.hpp"

#include <Eigen/Geometry>

#include <random>

#include "doctest.h"
#include "test_util.hpp"

using namespace locoplan;
using namespace locoplan::test;

namespace {

BaseState random_state(std::mt19937& rng) {
  BaseState s;
  s.position = random_vec(rng, 3);
  s.orientation = random_vec(rng, 3, -0.8, 0.8);
  s.linear_velocity = random_vec(rng, 3);
  s.angular_velocity = random_vec(rng, 3);
  s.linear_acceleration = random_vec(rng, 3);
  s.angular_acceleration = random_vec(rng, 3);
  return s;
}

// Independent Newton-Euler evaluation using Eigen's AngleAxis composition,
// sharing no helpers with the implementation under test.
Vector6d newton_euler_oracle(const BaseState& s,
                             const std::vector<Eigen::Vector3d>& feet,
                             const std::vector<Eigen::Vector3d>& forces,
                             const RobotParams& params) {
  const Eigen::Matrix3d rot =
      (Eigen::AngleAxisd(s.orientation[2], Eigen::Vector3d::UnitZ()) *
       Eigen::AngleAxisd(s.orientation[1], Eigen::Vector3d::UnitY()) *
       Eigen::AngleAxisd(s.orientation[0], Eigen::Vector3d::UnitX()))
          .toRotationMatrix();
  const Eigen::Matrix3d iw = rot * params.inertia * rot.transpose();
  Vector6d res;
  res.head<3>() = params.mass * (s.linear_acceleration - params.gravity);
  res.tail<3>() = iw * s.angular_acceleration +
                  s.angular_velocity.cross(iw * s.angular_velocity);
  for (size_t i = 0; i < feet.size(); ++i) {
    res.head<3>() -= forces[i];
    res.tail<3>() -= (feet[i] - s.position).cross(forces[i]);
  }
  return res;
}

}  // namespace

TEST_CASE("robot params defaults validate") {
  RobotParams p;
  CHECK_NOTHROW(p.validate());
  p.mass = -1.0;
  CHECK_THROWS(p.validate());
}

TEST_CASE("free fall has zero residual") {
  RobotParams params;
  BaseState s;
  s.linear_acceleration = params.gravity;
  std::vector<Eigen::Vector3d> feet(4, Eigen::Vector3d::Zero());
  std::vector<Eigen::Vector3d> forces(4, Eigen::Vector3d::Zero());
  CHECK(srbd_residual(s, feet, forces, params).norm() < 1e-12);
}

TEST_CASE("symmetric static stance has zero residual") {
  RobotParams params;
  BaseState s;
  s.position = {0.0, 0.0, 0.42};
  std::vector<Eigen::Vector3d> feet, forces;
  for (const auto& off : params.nominal_foot_offsets) {
    feet.push_back(s.position + off);
    forces.push_back({0.0, 0.0, params.mass * 9.81 / 4.0});
  }
  CHECK(srbd_residual(s, feet, forces, params).norm() < 1e-9);
}

TEST_CASE("residual matches an independent Newton-Euler evaluation") {
  RobotParams params;
  std::mt19937 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    BaseState s = random_state(rng);
    std::vector<Eigen::Vector3d> feet, forces;
    for (int i = 0; i < 4; ++i) {
      feet.push_back(random_vec(rng, 3));
      forces.push_back(random_vec(rng, 3, -50.0, 50.0));
    }
    const Vector6d a = srbd_residual(s, feet, forces, params);
    const Vector6d b = newton_euler_oracle(s, feet, forces, params);
    CHECK((a - b).norm() < 1e-10 * std::max(1.0, b.norm()));
  }
}

TEST_CASE("residual is linear in forces") {
  RobotParams params;
  std::mt19937 rng(43);
  BaseState s = random_state(rng);
  std::vector<Eigen::Vector3d> feet;
  std::vector<Eigen::Vector3d> f1, f2, zero, combo;
  const double alpha = 1.3, beta = -0.4;
  for (int i = 0; i < 4; ++i) {
    feet.push_back(random_vec(rng, 3));
    f1.push_back(random_vec(rng, 3, -40.0, 40.0));
    f2.push_back(random_vec(rng, 3, -40.0, 40.0));
    zero.push_back(Eigen::Vector3d::Zero());
    combo.push_back(alpha * f1.back() + beta * f2.back());
  }
  const Vector6d r1 = srbd_residual(s, feet, f1, params);
  const Vector6d r2 = srbd_residual(s, feet, f2, params);
  const Vector6d r0 = srbd_residual(s, feet, zero, params);
  const Vector6d rc = srbd_residual(s, feet, combo, params);
  const Vector6d expected = alpha * r1 + beta * r2 - (alpha + beta - 1.0) * r0;
  CHECK((rc - expected).norm() < 1e-10);
}

TEST_CASE("angular residual invariant to common translation") {
  RobotParams params;
  std::mt19937 rng(47);
  BaseState s = random_state(rng);
  std::vector<Eigen::Vector3d> feet, forces;
  for (int i = 0; i < 4; ++i) {
    feet.push_back(random_vec(rng, 3));
    forces.push_back(random_vec(rng, 3, -40.0, 40.0));
  }
  const Vector6d before = srbd_residual(s, feet, forces, params);
  const Eigen::Vector3d shift = random_vec(rng, 3);
  BaseState s2 = s;
  s2.position += shift;
  std::vector<Eigen::Vector3d> feet2;
  for (const auto& p : feet) feet2.push_back(p + shift);
  const Vector6d after = srbd_residual(s2, feet2, forces, params);
  CHECK((before.tail<3>() - after.tail<3>()).norm() < 1e-10);
}

TEST_CASE("force jacobian linear rows are minus identity") {
  RobotParams params;
  std::mt19937 rng(53);
  BaseState s = random_state(rng);
  std::vector<Eigen::Vector3d> feet(4, Eigen::Vector3d::Zero());
  std::vector<Eigen::Vector3d> forces(4, Eigen::Vector3d::Zero());
  const SrbdJacobian jac = srbd_residual_jacobian(s, feet, forces, params);
  for (int i = 0; i < 4; ++i) {
    CHECK((jac.d_force[i].topRows<3>() + Eigen::Matrix3d::Identity()).norm() <
          1e-12);
  }
}

TEST_CASE("srbd jacobian matches finite differences") {
  RobotParams params;
  std::mt19937 rng(59);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    BaseState s = random_state(rng);
    std::vector<Eigen::Vector3d> feet, forces;
    for (int i = 0; i < 4; ++i) {
      feet.push_back(random_vec(rng, 3));
      forces.push_back(random_vec(rng, 3, -40.0, 40.0));
    }
    const SrbdJacobian jac = srbd_residual_jacobian(s, feet, forces, params);

    auto fd_check = [&](const Matrix63d& analytic, auto mutate) {
      for (int j = 0; j < 3; ++j) {
        auto sp = s; auto sm = s;
        auto fp = feet; auto fm = feet;
        auto gp = forces; auto gm = forces;
        mutate(sp, fp, gp, j, h);
        mutate(sm, fm, gm, j, -h);
        const Vector6d rp = srbd_residual(sp, fp, gp, params);
        const Vector6d rm = srbd_residual(sm, fm, gm, params);
        const Vector6d fd = (rp - rm) / (2.0 * h);
        for (int row = 0; row < 6; ++row) {
          CHECK(rel_err(analytic(row, j), fd[row]) < 1e-5);
        }
      }
    };

    fd_check(jac.d_position, [](BaseState& st, auto&, auto&, int j, double d) {
      st.position[j] += d;
    });
    fd_check(jac.d_orientation,
             [](BaseState& st, auto&, auto&, int j, double d) {
               st.orientation[j] += d;
             });
    fd_check(jac.d_linear_acceleration,
             [](BaseState& st, auto&, auto&, int j, double d) {
               st.linear_acceleration[j] += d;
             });
    fd_check(jac.d_angular_velocity,
             [](BaseState& st, auto&, auto&, int j, double d) {
               st.angular_velocity[j] += d;
             });
    fd_check(jac.d_angular_acceleration,
             [](BaseState& st, auto&, auto&, int j, double d) {
               st.angular_acceleration[j] += d;
             });
    for (int i = 0; i < 4; ++i) {
      fd_check(jac.d_foot_position[i],
               [i](auto&, auto& ft, auto&, int j, double d) { ft[i][j] += d; });
      fd_check(jac.d_force[i],
               [i](auto&, auto&, auto& fo, int j, double d) { fo[i][j] += d; });
    }
  }
}

TEST_CASE("angular kinematics jacobians match finite differences") {
  std::mt19937 rng(61);
  const double h = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Vector3d e = random_vec(rng, 3, -1.0, 1.0);
    const Eigen::Vector3d ed = random_vec(rng, 3);
    const Eigen::Vector3d edd = random_vec(rng, 3);
    const AngularKinematics k = angular_kinematics(e, ed, edd);

    for (int j = 0; j < 3; ++j) {
      Eigen::Vector3d dp, dm;

      dp = e; dm = e; dp[j] += h; dm[j] -= h;
      const AngularKinematics kp = angular_kinematics(dp, ed, edd);
      const AngularKinematics km = angular_kinematics(dm, ed, edd);
      CHECK((k.d_omega_d_euler.col(j) - (kp.omega - km.omega) / (2 * h)).norm() <
            1e-6);
      CHECK((k.d_omega_dot_d_euler.col(j) -
             (kp.omega_dot - km.omega_dot) / (2 * h)).norm() < 1e-6);

      dp = ed; dm = ed; dp[j] += h; dm[j] -= h;
      const AngularKinematics kp2 = angular_kinematics(e, dp, edd);
      const AngularKinematics km2 = angular_kinematics(e, dm, edd);
      CHECK((k.d_omega_d_rate.col(j) - (kp2.omega - km2.omega) / (2 * h)).norm() <
            1e-6);
      CHECK((k.d_omega_dot_d_rate.col(j) -
             (kp2.omega_dot - km2.omega_dot) / (2 * h)).norm() < 1e-6);

      dp = edd; dm = edd; dp[j] += h; dm[j] -= h;
      const AngularKinematics kp3 = angular_kinematics(e, ed, dp);
      const AngularKinematics km3 = angular_kinematics(e, ed, dm);
      CHECK((k.d_omega_dot_d_accel.col(j) -
             (kp3.omega_dot - km3.omega_dot) / (2 * h)).norm() < 1e-6);
    }
  }
}
