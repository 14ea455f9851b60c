#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "locoplan/transcription.hpp"

namespace locoplan {

struct SolveOptions {
  int max_iterations = 150;       // accepted line-search steps
  double constraint_tol = 1e-4;   // worst scaled row violation
  double optimality_tol = 1e-3;   // scaled reduced-gradient norm
  double initial_penalty = 100.0;
  double penalty_growth = 10.0;
  double max_penalty = 1e8;
  int inner_iterations = 25;      // accepted steps per multiplier update
  double armijo_slope = 1e-4;
  int max_line_search = 30;
  double initial_damping = 1e-4;
  // Fit multipliers at the starting point when its violation is below
  // this (warm starts); far starts keep the zero-multiplier schedule.
  double warm_start_viol = 0.05;
  bool feasibility_only = false;  // drop the cost, solve for a feasible point
  bool verbose = false;
};

struct IterationStat {
  double cost = 0.0;
  double violation = 0.0;
  double step_norm = 0.0;
  double wall_ms = 0.0;  // time spent producing this accepted step
  double step_scale = 0.0;  // accepted line-search fraction
};

struct SolveResult {
  bool converged = false;
  int iterations = 0;  // accepted line-search steps
  double cost = 0.0;
  double violation = 0.0;
  double wall_time_ms = 0.0;
  Eigen::VectorXd x;
  std::vector<IterationStat> trace;
  std::string message;
};

// Augmented-Lagrangian solve (PHR inequalities, damped Gauss-Newton inner
// steps, projected variable bounds). Deterministic for fixed inputs.
// Convergence requires the worst violation below constraint_tol and the
// least-squares multiplier fit of the reduced gradient below
// optimality_tol, so a primal point at the optimum terminates immediately.
SolveResult solve(const NlpProblem& problem, const Eigen::VectorXd& x0,
                  const SolveOptions& options = {});

enum class SolveVariant { kFull, kFixedPhase, kFixedPhaseAndFeet };

std::string variant_name(SolveVariant v);

struct VariantSolve {
  SolveResult result;
  NlpProblem problem;  // the problem actually solved (layout may differ)
  Eigen::VectorXd full_x;  // solution mapped back to the full layout
};

// Solve the task from a guess in the full layout under the given variant:
//   kFull              free phase durations (as configured)
//   kFixedPhase        durations baked from the guess, no duration variables
//   kFixedPhaseAndFeet additionally foot positions held by equality rows
VariantSolve solve_variant(const ProblemConfig& config, const Terrain& terrain,
                           const RobotParams& robot, const Task& task,
                           const Eigen::VectorXd& full_guess, SolveVariant v,
                           const SolveOptions& options = {});

}  // namespace locoplan
