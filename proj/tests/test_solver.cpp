#include "locoplan/solver.hpp"

#include <random>

#include "doctest.h"
#include "locoplan/initializer.hpp"

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

}  // namespace

TEST_CASE("feasibility-only solve converges from the heuristic guess") {
  const ProblemConfig cfg = small_config();
  const RobotParams robot;
  const Terrain terrain = Terrain::Flat();
  const Task task = small_task();
  NlpProblem p = build(cfg, terrain, robot, task);
  const PrimalGuess guess = heuristic_init(cfg, terrain, robot, task);
  REQUIRE(guess.layout_hash == p.layout().hash());

  SolveOptions opt;
  opt.feasibility_only = true;
  const SolveResult r = solve(p, guess.y, opt);
  CHECK(r.converged);
  CHECK(r.violation <= opt.constraint_tol);
  CHECK(r.iterations <= 50);
  CHECK(static_cast<int>(r.trace.size()) == r.iterations);
}

TEST_CASE("full solve converges and respects variable bounds") {
  const ProblemConfig cfg = small_config();
  const RobotParams robot;
  const Terrain terrain = Terrain::Flat();
  const Task task = small_task();
  NlpProblem p = build(cfg, terrain, robot, task);
  const PrimalGuess guess = heuristic_init(cfg, terrain, robot, task);

  const SolveResult r = solve(p, guess.y);
  CHECK(r.converged);
  CHECK(r.violation <= 1e-4);
  CHECK(r.cost == doctest::Approx(p.cost(r.x)));
  for (int i = 0; i < p.var_count(); ++i) {
    CHECK(r.x[i] >= p.lower_bounds()[i] - 1e-12);
    CHECK(r.x[i] <= p.upper_bounds()[i] + 1e-12);
  }

  // Boundary poses are pinned through the bounds.
  const VariableLayout& l = p.layout();
  for (int comp = 0; comp < 3; ++comp) {
    CHECK(r.x[l.base_lin_var(0, comp, false)] ==
          doctest::Approx(task.initial_base_position[comp]));
    CHECK(r.x[l.base_lin_var(l.base_node_count() - 1, comp, false)] ==
          doctest::Approx(task.goal_base_position[comp]));
  }
  CHECK(r.x[l.base_ang_var(l.base_node_count() - 1, 2, false)] ==
        doctest::Approx(task.goal_yaw));
}

TEST_CASE("restarting at the solution terminates immediately") {
  const ProblemConfig cfg = small_config();
  const RobotParams robot;
  const Terrain terrain = Terrain::Flat();
  const Task task = small_task();
  NlpProblem p = build(cfg, terrain, robot, task);
  const PrimalGuess guess = heuristic_init(cfg, terrain, robot, task);
  const SolveResult first = solve(p, guess.y);
  REQUIRE(first.converged);

  const SolveResult warm = solve(p, first.x);
  CHECK(warm.converged);
  CHECK(warm.iterations <= 2);
}

TEST_CASE("solves are deterministic") {
  const ProblemConfig cfg = small_config();
  const RobotParams robot;
  const Terrain terrain = Terrain::Flat();
  const Task task = small_task();
  NlpProblem p = build(cfg, terrain, robot, task);
  const PrimalGuess guess = heuristic_init(cfg, terrain, robot, task);
  const SolveResult a = solve(p, guess.y);
  const SolveResult b = solve(p, guess.y);
  CHECK(a.iterations == b.iterations);
  CHECK((a.x - b.x).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("iteration budget of zero only evaluates the guess") {
  const ProblemConfig cfg = small_config();
  const RobotParams robot;
  const Terrain terrain = Terrain::Flat();
  const Task task = small_task();
  NlpProblem p = build(cfg, terrain, robot, task);
  const PrimalGuess guess = heuristic_init(cfg, terrain, robot, task);

  SolveOptions opt;
  opt.max_iterations = 0;
  const SolveResult r = solve(p, guess.y, opt);
  CHECK(r.iterations == 0);
  CHECK_FALSE(r.converged);
  CHECK(r.violation == doctest::Approx(p.max_violation(guess.y)));
}

TEST_CASE("a wrong-sized initial point is rejected") {
  const ProblemConfig cfg = small_config();
  const RobotParams robot;
  NlpProblem p = build(cfg, Terrain::Flat(), robot, small_task());
  CHECK_THROWS_AS(solve(p, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("fixed-phase variant bakes the guessed durations") {
  const ProblemConfig cfg = small_config();
  const RobotParams robot;
  const Terrain terrain = Terrain::Flat();
  const Task task = small_task();
  const PrimalGuess guess = heuristic_init(cfg, terrain, robot, task);
  const VariableLayout full_layout = VariableLayout::Build(cfg);

  VariantSolve vs = solve_variant(cfg, terrain, robot, task, guess.y,
                                  SolveVariant::kFixedPhase);
  CHECK(vs.result.converged);
  CHECK(vs.problem.layout().duration_count() == 0);
  CHECK(vs.problem.var_count() < full_layout.total());
  CHECK(vs.full_x.size() == full_layout.total());

  // The returned full vector carries the same schedule as the guess.
  const auto guessed = schedules_from_vector(full_layout, cfg, guess.y);
  const auto returned = schedules_from_vector(full_layout, cfg, vs.full_x);
  for (int f = 0; f < 4; ++f) {
    REQUIRE(returned[f].phases.size() == guessed[f].phases.size());
    for (size_t i = 0; i < guessed[f].phases.size(); ++i) {
      CHECK(returned[f].phases[i].duration ==
            doctest::Approx(guessed[f].phases[i].duration));
    }
  }
}

TEST_CASE("fixed-phase-and-feet variant keeps footholds at guessed values") {
  const ProblemConfig cfg = small_config();
  const RobotParams robot;
  const Terrain terrain = Terrain::Flat();
  const Task task = small_task();
  const PrimalGuess guess = heuristic_init(cfg, terrain, robot, task);

  VariantSolve vs = solve_variant(cfg, terrain, robot, task, guess.y,
                                  SolveVariant::kFixedPhaseAndFeet);
  CHECK(vs.result.converged);

  const VariableLayout& full_layout = VariableLayout::Build(cfg);
  for (int f = 0; f < 4; ++f) {
    const int k = full_layout.feet()[f].swing_count;
    for (int s = 0; s <= k; ++s) {
      for (int c = 0; c < 3; ++c) {
        const int v = full_layout.stance_pos_var(f, s, c);
        // Footholds are held by equality rows, so they match the guess up
        // to the solver's constraint tolerance.
        CHECK(std::abs(vs.full_x[v] - guess.y[v]) <= 2e-4);
      }
    }
  }
}

TEST_CASE("full variant matches a plain solve") {
  const ProblemConfig cfg = small_config();
  const RobotParams robot;
  const Terrain terrain = Terrain::Flat();
  const Task task = small_task();
  const PrimalGuess guess = heuristic_init(cfg, terrain, robot, task);

  NlpProblem p = build(cfg, terrain, robot, task);
  const SolveResult plain = solve(p, guess.y);
  VariantSolve vs =
      solve_variant(cfg, terrain, robot, task, guess.y, SolveVariant::kFull);
  CHECK(vs.result.converged == plain.converged);
  CHECK((vs.full_x - plain.x).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("duration repair recovers from an oversubscribed schedule guess") {
  const ProblemConfig cfg = small_config();
  const RobotParams robot;
  const Terrain terrain = Terrain::Flat();
  const Task task = small_task();
  NlpProblem p = build(cfg, terrain, robot, task);
  PrimalGuess guess = heuristic_init(cfg, terrain, robot, task);

  // Inflate the swing durations so the dependent final stance would be
  // negative; the solver must still make progress.
  const VariableLayout& l = p.layout();
  Eigen::VectorXd bad = guess.y;
  for (int f = 0; f < 4; ++f) {
    const int k = l.feet()[f].swing_count;
    for (int j = 0; j < 2 * k; ++j) {
      bad[l.duration_var(f, j)] = cfg.duration_max;
    }
  }
  SolveOptions opts;
  opts.max_iterations = 400;  // the point of this test is recovery, not speed
  const SolveResult r = solve(p, bad, opts);
  CHECK(r.converged);
  CHECK(r.violation <= 1e-4);
}
