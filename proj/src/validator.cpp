#include "locoplan/validator.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace locoplan {
namespace {

// Simulation state of the rigid body: position, velocity, Euler angles and
// world-frame angular velocity.
struct BodyState {
  Eigen::Vector3d r, v, e, w;
};

BodyState operator+(const BodyState& a, const BodyState& b) {
  return {a.r + b.r, a.v + b.v, a.e + b.e, a.w + b.w};
}
BodyState operator*(double s, const BodyState& a) {
  return {s * a.r, s * a.v, s * a.e, s * a.w};
}

// Newton-Euler time derivative under the planned contact forces. Forces and
// contact points come from the plan splines; the body state is simulated.
// Moment arms are taken about the planned base position so integration
// error does not feed back through the lever arms: the rollout measures
// plan consistency, not closed-loop stability (which would need the
// out-of-scope tracking controller).
BodyState dynamics(const BodyState& s, double t, const Reconstruction& rec,
                   const RobotParams& robot) {
  const Eigen::Vector3d base_plan = rec.base_linear().eval(t, 0);
  Eigen::Vector3d force_sum = Eigen::Vector3d::Zero();
  Eigen::Vector3d torque_sum = Eigen::Vector3d::Zero();
  for (size_t f = 0; f < rec.foot_force.size(); ++f) {
    const Eigen::Vector3d force = rec.foot_force[f].eval(t, 0);
    const Eigen::Vector3d p = rec.foot_motion[f].eval(t, 0);
    force_sum += force;
    torque_sum += (p - base_plan).cross(force);
  }
  const Eigen::Matrix3d rot = euler_rotation(s.e);
  const Eigen::Matrix3d inertia_w = rot * robot.inertia * rot.transpose();

  BodyState d;
  d.r = s.v;
  d.v = force_sum / robot.mass + robot.gravity;
  d.e = euler_rate_map(s.e).partialPivLu().solve(s.w);
  d.w = inertia_w.partialPivLu().solve(torque_sum -
                                       s.w.cross(inertia_w * s.w));
  return d;
}

double rotation_angle(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

void note(std::map<std::string, double>* audit, const std::string& key,
          double violation) {
  double& worst = (*audit)[key];
  worst = std::max(worst, violation);
}

}  // namespace

ValidationProfile ValidationProfile::Strict() { return {}; }

ValidationProfile ValidationProfile::Executable() {
  ValidationProfile p;
  p.position_drift_tol = 0.30;
  p.orientation_drift_tol = 0.60;
  p.audit_tol = 0.05;
  return p;
}

ValidationReport validate_plan(const NlpProblem& problem,
                               const Eigen::VectorXd& x,
                               const ValidationProfile& profile) {
  const Reconstruction rec = problem.reconstruct(x);
  const RobotParams& robot = problem.robot();
  const Terrain& terrain = problem.terrain();
  const double horizon = problem.config().horizon;

  ValidationReport report;

  // Open-loop RK4 rollout from the planned initial state.
  BodyState s;
  s.r = rec.base_linear().eval(0.0, 0);
  s.v = rec.base_linear().eval(0.0, 1);
  s.e = rec.base_angular().eval(0.0, 0);
  s.w = euler_rate_map(s.e) * rec.base_angular().eval(0.0, 1);

  const double h = profile.rollout_dt;
  const int steps = static_cast<int>(std::ceil(horizon / h));
  for (int i = 0; i < steps; ++i) {
    const double t = i * h;
    const double dt = std::min(h, horizon - t);
    const BodyState k1 = dynamics(s, t, rec, robot);
    const BodyState k2 = dynamics(s + (dt / 2) * k1, t + dt / 2, rec, robot);
    const BodyState k3 = dynamics(s + (dt / 2) * k2, t + dt / 2, rec, robot);
    const BodyState k4 = dynamics(s + dt * k3, t + dt, rec, robot);
    s = s + (dt / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    const double tn = t + dt;
    const double pos_err =
        (s.r - Eigen::Vector3d(rec.base_linear().eval(tn, 0))).norm();
    const double ang_err =
        rotation_angle(euler_rotation(s.e),
                       euler_rotation(rec.base_angular().eval(tn, 0)));
    report.position_drift = std::max(report.position_drift, pos_err);
    report.orientation_drift = std::max(report.orientation_drift, ang_err);
    if (!s.r.allFinite() || !s.e.allFinite()) {
      report.position_drift = std::numeric_limits<double>::infinity();
      break;
    }
  }
  report.rollout_ok = report.position_drift <= profile.position_drift_tol &&
                      report.orientation_drift <= profile.orientation_drift_tol;

  // Dense audit of the path constraints.
  const double dt_a = 1.0 / profile.audit_rate_hz;
  const double mu = robot.friction_coefficient;
  report.audit["friction"] = 0.0;
  report.audit["kinematic_box"] = 0.0;
  report.audit["stance_contact"] = 0.0;
  report.audit["base_clearance"] = 0.0;
  report.audit["swing_height"] = 0.0;
  for (double t = 0.0; t <= horizon + 1e-12; t += dt_a) {
    const double tc = std::min(t, horizon);
    const Eigen::Vector3d base = rec.base_linear().eval(tc, 0);
    const Eigen::Matrix3d rot = euler_rotation(rec.base_angular().eval(tc, 0));
    for (int f = 0; f < 4; ++f) {
      const Eigen::Vector3d p = rec.foot_motion[f].eval(tc, 0);
      const Eigen::Vector3d local =
          rot.transpose() * (p - base) - robot.nominal_foot_offsets[f];
      const Eigen::Vector3d excess =
          local.cwiseAbs() - robot.kinematic_box_half_extents;
      note(&report.audit, "kinematic_box", excess.maxCoeff());

      const double ground = terrain.height_at(p.x(), p.y());
      if (rec.schedules[f].in_stance(tc)) {
        const Eigen::Vector3d force = rec.foot_force[f].eval(tc, 0);
        note(&report.audit, "friction",
             std::max({-force.z(), force.z() - robot.max_force,
                       std::abs(force.x()) - mu * force.z(),
                       std::abs(force.y()) - mu * force.z()}));
        note(&report.audit, "stance_contact", std::abs(p.z() - ground));
        note(&report.audit, "base_clearance",
             problem.config().base_clearance - (base.z() - p.z()));
      } else {
        // Lift-off and touch-down sit exactly on the terrain, so the
        // clearance margin is only meaningful in the interior of the swing.
        const auto& phases = rec.schedules[f].phases;
        double t0 = 0.0;
        for (const auto& ph : phases) {
          const double t1 = t0 + ph.duration;
          if (!ph.is_stance && tc >= t0 && tc <= t1) {
            const double a = (tc - t0) / std::max(ph.duration, 1e-9);
            if (a > 0.15 && a < 0.85) {
              note(&report.audit, "swing_height",
                   ground + profile.swing_margin - p.z());
            }
            break;
          }
          t0 = t1;
        }
      }
    }
  }

  report.audit_ok = true;
  for (const auto& [key, violation] : report.audit) {
    if (violation > profile.audit_tol) {
      report.audit_ok = false;
      if (!report.failure_reason.empty()) report.failure_reason += ", ";
      report.failure_reason += "audit:" + key;
    }
  }
  if (!report.rollout_ok) {
    if (!report.failure_reason.empty()) report.failure_reason += ", ";
    report.failure_reason += "rollout drift";
  }
  report.passed = report.rollout_ok && report.audit_ok;
  return report;
}

}  // namespace locoplan
