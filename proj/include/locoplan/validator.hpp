#pragma once

#include <Eigen/Core>

#include <map>
#include <string>

#include "locoplan/transcription.hpp"

namespace locoplan {

// Thresholds for plan validation. Strict() checks dynamic consistency of a
// converged plan; Executable() is the looser profile used to judge whether
// a warm start would be usable with little or no further optimization.
struct ValidationProfile {
  double rollout_dt = 1e-3;            // s, RK4 step
  double position_drift_tol = 0.05;    // m
  double orientation_drift_tol = 0.5;  // rad
  double audit_rate_hz = 200.0;        // dense constraint sampling
  double audit_tol = 0.02;             // slack on audited constraints
  double swing_margin = 0.005;         // m, foot above terrain in swing

  static ValidationProfile Strict();
  static ValidationProfile Executable();
};

struct ValidationReport {
  bool passed = false;
  bool rollout_ok = false;
  bool audit_ok = false;
  double position_drift = 0.0;     // max base position error over horizon
  double orientation_drift = 0.0;  // max rotation angle error over horizon
  // Worst violation per audited check (friction, kinematic_box,
  // stance_contact, base_clearance, swing_height).
  std::map<std::string, double> audit;
  std::string failure_reason;
};

// Open-loop check of a plan: integrate the single-rigid-body dynamics with
// RK4 under the planned contact forces and compare against the planned base
// motion, then audit the path constraints on a dense time grid.
ValidationReport validate_plan(const NlpProblem& problem,
                               const Eigen::VectorXd& x,
                               const ValidationProfile& profile =
                                   ValidationProfile::Strict());

}  // namespace locoplan
