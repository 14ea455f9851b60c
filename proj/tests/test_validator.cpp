#include "locoplan/validator.hpp"

#include "doctest.h"
#include "locoplan/initializer.hpp"
#include "locoplan/solver.hpp"

using namespace locoplan;

namespace {

ProblemConfig small_config() {
  ProblemConfig c;
  c.horizon = 1.2;
  c.base_dt = 0.1;
  c.step_count = 2;
  c.gait = Gait::kTrot;
  return c;
}

Task small_task() {
  Task t;
  t.initial_base_position = {-0.6, 0.0, 0.42};
  t.goal_base_position = {-0.25, 0.05, 0.42};
  t.goal_yaw = 0.1;
  return t;
}

struct Solved {
  NlpProblem problem;
  Eigen::VectorXd x;
};

Solved solve_small() {
  const ProblemConfig cfg = small_config();
  const RobotParams robot;
  const Terrain terrain = Terrain::Flat();
  const Task task = small_task();
  NlpProblem p = build(cfg, terrain, robot, task);
  const PrimalGuess guess = heuristic_init(cfg, terrain, robot, task);
  SolveResult r = solve(p, guess.y);
  REQUIRE(r.converged);
  return {std::move(p), std::move(r.x)};
}

}  // namespace

TEST_CASE("a converged plan passes strict validation") {
  Solved s = solve_small();
  const ValidationReport report = validate_plan(s.problem, s.x);
  CHECK(report.rollout_ok);
  CHECK(report.audit_ok);
  CHECK(report.passed);
  CHECK(report.position_drift <= 0.05);
  CHECK(report.orientation_drift <= 0.5);
  CHECK(report.failure_reason.empty());
}

TEST_CASE("zeroing one force node breaks dynamic consistency") {
  Solved s = solve_small();
  const VariableLayout& l = s.problem.layout();
  // Foot 1 never swings in this config, so every force node carries load;
  // zero the one nearest mid-horizon.
  Eigen::VectorXd corrupted = s.x;
  const int node = l.force_var_node_count(1) / 2;
  for (int c = 0; c < 6; ++c) {
    corrupted[l.force_var(1, node, c)] = 0.0;
  }
  const ValidationReport report = validate_plan(s.problem, corrupted);
  CHECK_FALSE(report.rollout_ok);
  CHECK_FALSE(report.passed);
  CHECK(report.position_drift > 0.05);
}

TEST_CASE("the heuristic guess is not dynamically consistent") {
  const ProblemConfig cfg = small_config();
  const RobotParams robot;
  const Terrain terrain = Terrain::Flat();
  const Task task = small_task();
  NlpProblem p = build(cfg, terrain, robot, task);
  const PrimalGuess guess = heuristic_init(cfg, terrain, robot, task);
  const ValidationReport report = validate_plan(p, guess.y);
  CHECK_FALSE(report.passed);
}

TEST_CASE("executable profile is a relaxation of strict") {
  const ValidationProfile strict = ValidationProfile::Strict();
  const ValidationProfile exec = ValidationProfile::Executable();
  CHECK(exec.position_drift_tol > strict.position_drift_tol);
  CHECK(exec.orientation_drift_tol > strict.orientation_drift_tol);
  CHECK(exec.audit_tol > strict.audit_tol);

  Solved s = solve_small();
  const ValidationReport report = validate_plan(s.problem, s.x, exec);
  CHECK(report.passed);
}

TEST_CASE("audit reports every check") {
  Solved s = solve_small();
  const ValidationReport report = validate_plan(s.problem, s.x);
  for (const char* key : {"friction", "kinematic_box", "stance_contact",
                          "base_clearance", "swing_height"}) {
    CHECK(report.audit.count(key) == 1);
  }
}
