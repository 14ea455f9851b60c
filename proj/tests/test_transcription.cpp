#include "locoplan/transcription.hpp"

#include <Eigen/SparseCore>

#include <random>

#include "doctest.h"
#include "test_util.hpp"

using namespace locoplan;
using namespace locoplan::test;

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

// Rough hand-built primal point near a plausible trajectory, randomly
// perturbed so no residual sits at an exact zero.
Eigen::VectorXd nominal_point(const NlpProblem& p, std::mt19937& rng,
                              double noise) {
  const VariableLayout& l = p.layout();
  const ProblemConfig& c = p.config();
  const Task& task = p.task();
  const RobotParams& robot = p.robot();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p.var_count());

  const int nb = l.base_node_count();
  for (int i = 0; i < nb; ++i) {
    const double a = static_cast<double>(i) / (nb - 1);
    const Eigen::Vector3d pos = (1 - a) * task.initial_base_position +
                                a * task.goal_base_position;
    const double yaw = (1 - a) * task.initial_yaw + a * task.goal_yaw;
    for (int comp = 0; comp < 3; ++comp) {
      x[l.base_lin_var(i, comp, false)] = pos[comp];
      x[l.base_ang_var(i, comp, false)] = comp == 2 ? yaw : 0.0;
    }
  }
  for (int f = 0; f < 4; ++f) {
    const int k = l.feet()[f].swing_count;
    for (int s = 0; s <= k; ++s) {
      const double a = k > 0 ? static_cast<double>(s) / k : 0.5;
      const Eigen::Vector3d pos =
          (1 - a) * task.initial_base_position + a * task.goal_base_position +
          robot.nominal_foot_offsets[f];
      x[l.stance_pos_var(f, s, 0)] = pos.x();
      x[l.stance_pos_var(f, s, 1)] = pos.y();
      x[l.stance_pos_var(f, s, 2)] =
          p.terrain().height_at(pos.x(), pos.y());
    }
    for (int j = 0; j < k; ++j) {
      for (int comp = 0; comp < 2; ++comp) {
        x[l.apex_var(f, j, comp)] =
            0.5 * (x[l.stance_pos_var(f, j, comp)] +
                   x[l.stance_pos_var(f, j + 1, comp)]);
      }
      x[l.apex_var(f, j, 2)] =
          std::max(x[l.stance_pos_var(f, j, 2)],
                   x[l.stance_pos_var(f, j + 1, 2)]) +
          c.swing_clearance + 0.02;
    }
    for (int vn = 0; vn < l.force_var_node_count(f); ++vn) {
      x[l.force_var(f, vn, 2)] = robot.mass * 9.81 / 4.0;
    }
    const auto sched = default_schedules(c)[f];
    if (l.feet()[f].duration_start >= 0 && k > 0) {
      int j = 0;
      x[l.duration_var(f, j++)] = sched.phases[0].duration;
      for (int sw = 0; sw < k; ++sw) {
        x[l.duration_var(f, j++)] = sched.phases[2 * sw + 1].duration;
      }
      for (int m = 1; m < k; ++m) {
        x[l.duration_var(f, j++)] = sched.phases[2 * m].duration;
      }
    }
  }

  for (int i = 0; i < p.var_count(); ++i) {
    std::uniform_real_distribution<double> d(-noise, noise);
    const double scale =
        p.layout().category(i) == VarCategory::kDuration ? 0.1 : 1.0;
    x[i] += scale * d(rng);
  }
  return x;
}

Eigen::MatrixXd dense_from_triplets(
    const std::vector<Eigen::Triplet<double>>& trips, int rows, int cols) {
  Eigen::SparseMatrix<double> m(rows, cols);
  m.setFromTriplets(trips.begin(), trips.end());
  return Eigen::MatrixXd(m);
}

}  // namespace

TEST_CASE("variable count formula") {
  ProblemConfig c;  // trot, 3.5 s, 0.1 s, 14 steps, free phase durations
  CHECK(variable_count(c) == 848);
  c.optimize_phase_durations = false;
  CHECK(variable_count(c) == 820);
  c.optimize_phase_durations = true;
  c.gait = Gait::kWalk;
  c.step_count = 16;
  CHECK(variable_count(c) == 892);
}

TEST_CASE("layout size matches the count formula") {
  for (ProblemConfig c : {ProblemConfig{}, small_config()}) {
    CHECK(VariableLayout::Build(c).total() == variable_count(c));
    c.optimize_phase_durations = false;
    CHECK(VariableLayout::Build(c).total() == variable_count(c));
  }
}

TEST_CASE("config validation rejects inconsistent setups") {
  ProblemConfig c;
  c.horizon = 3.55;  // not a grid multiple
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = ProblemConfig{};
  c.step_count = 13;  // odd trot
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("default schedules cover the horizon and alternate phases") {
  for (const Gait g : {Gait::kTrot, Gait::kWalk}) {
    ProblemConfig c;
    c.gait = g;
    c.step_count = g == Gait::kTrot ? 14 : 16;
    const auto scheds = default_schedules(c);
    const auto counts = swing_counts(c);
    int total_swings = 0;
    for (int f = 0; f < 4; ++f) {
      CHECK(scheds[f].total() == doctest::Approx(c.horizon));
      CHECK(scheds[f].phases.front().is_stance);
      CHECK(scheds[f].phases.back().is_stance);
      int swings = 0;
      for (size_t i = 0; i < scheds[f].phases.size(); ++i) {
        CHECK(scheds[f].phases[i].is_stance == (i % 2 == 0));
        if (!scheds[f].phases[i].is_stance) ++swings;
      }
      CHECK(swings == counts[f]);
      total_swings += swings;
    }
    CHECK(total_swings == c.step_count);
  }
}

TEST_CASE("trot swings twice as long as full support") {
  ProblemConfig c;
  const auto scheds = default_schedules(c);
  // First stance of a first-slot foot is one support interval; its swing is
  // twice that.
  const double support = scheds[0].phases[0].duration;
  CHECK(scheds[0].phases[1].duration == doctest::Approx(2.0 * support));
}

TEST_CASE("build rejects unreachable goals") {
  ProblemConfig c = small_config();
  Task t = small_task();
  t.goal_base_position.x() += 10.0;
  CHECK_THROWS_AS(build(c, Terrain::Flat(), RobotParams{}, t),
                  std::runtime_error);
}

TEST_CASE("reconstruction respects the implicit phase structure") {
  const ProblemConfig c = small_config();
  NlpProblem p = build(c, Terrain::Flat(), RobotParams{}, small_task());
  std::mt19937 rng(71);
  const Eigen::VectorXd x = nominal_point(p, rng, 0.02);
  const Reconstruction rec = p.reconstruct(x);

  CHECK(rec.base_linear().total_duration() == doctest::Approx(c.horizon));
  for (int f = 0; f < 4; ++f) {
    CHECK(rec.foot_motion[f].total_duration() ==
          doctest::Approx(c.horizon).epsilon(1e-6));
    CHECK(rec.schedules[f].total() == doctest::Approx(c.horizon));
    // Feet hold still and forces vanish per the schedule encoded in x.
    for (double t = 1e-3; t < c.horizon; t += 0.011) {
      if (rec.schedules[f].in_stance(t)) {
        CHECK(rec.foot_motion[f].eval(t, 1).norm() < 1e-9);
      } else {
        CHECK(rec.foot_force[f].eval(t, 0).norm() < 1e-9);
      }
    }
  }
}

TEST_CASE("every variable appears in some derivative") {
  NlpProblem p =
      build(small_config(), Terrain::Flat(), RobotParams{}, small_task());
  std::mt19937 rng(73);
  const Eigen::VectorXd x = nominal_point(p, rng, 0.02);
  std::vector<Eigen::Triplet<double>> trips;
  p.constraint_jacobian(x, &trips);
  p.cost_jacobian(x, &trips);
  std::vector<bool> seen(p.var_count(), false);
  for (const auto& t : trips) seen[t.col()] = true;
  for (int i = 0; i < p.var_count(); ++i) {
    CAPTURE(i);
    CHECK(seen[i]);
  }
}

namespace {

void check_constraint_jacobian(const NlpProblem& p, const Eigen::VectorXd& x) {
  std::vector<Eigen::Triplet<double>> trips;
  p.constraint_jacobian(x, &trips);
  const Eigen::MatrixXd jac =
      dense_from_triplets(trips, p.constraint_count(), p.var_count());
  Eigen::VectorXd cp, cm;
  for (int j = 0; j < p.var_count(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    p.eval_constraints(xp, &cp);
    p.eval_constraints(xm, &cm);
    for (int i = 0; i < p.constraint_count(); ++i) {
      const double fd = (cp[i] - cm[i]) / (2.0 * h);
      CAPTURE(i);
      CAPTURE(j);
      CHECK(rel_err(jac(i, j), fd) < 1e-4);
    }
  }
}

void check_cost_jacobian(const NlpProblem& p, const Eigen::VectorXd& x) {
  std::vector<Eigen::Triplet<double>> trips;
  p.cost_jacobian(x, &trips);
  const Eigen::MatrixXd jac =
      dense_from_triplets(trips, p.cost_residual_count(), p.var_count());
  Eigen::VectorXd rp, rm;
  for (int j = 0; j < p.var_count(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    p.cost_residuals(xp, &rp);
    p.cost_residuals(xm, &rm);
    for (int i = 0; i < p.cost_residual_count(); ++i) {
      const double fd = (rp[i] - rm[i]) / (2.0 * h);
      CAPTURE(i);
      CAPTURE(j);
      CHECK(rel_err(jac(i, j), fd) < 1e-4);
    }
  }

  // Gradient identity: d(sum r^2) = 2 J^T r.
  Eigen::VectorXd grad;
  const double value = p.cost(x, &grad);
  Eigen::VectorXd r;
  p.cost_residuals(x, &r);
  CHECK(value == doctest::Approx(r.squaredNorm()));
  for (int j = 0; j < p.var_count(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const double fd = (p.cost(xp) - p.cost(xm)) / (2.0 * h);
    CHECK(rel_err(grad[j], fd) < 1e-4);
  }
}

}  // namespace

TEST_CASE("constraint jacobian matches finite differences on flat ground") {
  NlpProblem p =
      build(small_config(), Terrain::Flat(), RobotParams{}, small_task());
  std::mt19937 rng(79);
  check_constraint_jacobian(p, nominal_point(p, rng, 0.03));
}

TEST_CASE("cost jacobian and gradient match finite differences on flat") {
  NlpProblem p =
      build(small_config(), Terrain::Flat(), RobotParams{}, small_task());
  std::mt19937 rng(83);
  check_cost_jacobian(p, nominal_point(p, rng, 0.03));
}

TEST_CASE("jacobians match finite differences near a terrain step") {
  const Terrain terrain = Terrain::SinglePallet(-0.2);
  Task t = small_task();
  NlpProblem p = build(small_config(), terrain, RobotParams{}, t);
  std::mt19937 rng(89);
  const Eigen::VectorXd x = nominal_point(p, rng, 0.02);
  // The edge-distance field has kinks on equidistant loci; require the
  // sampled footholds to sit in its smooth region so differences converge.
  for (int f = 0; f < 4; ++f) {
    for (int s = 0; s <= p.layout().feet()[f].swing_count; ++s) {
      const double px = x[p.layout().stance_pos_var(f, s, 0)];
      const double py = x[p.layout().stance_pos_var(f, s, 1)];
      REQUIRE(std::abs(terrain.edge_distance(px, py).gradient.norm() - 1.0) <
              1e-9);
    }
  }
  check_constraint_jacobian(p, x);
  check_cost_jacobian(p, x);
}

TEST_CASE("violation is near zero for a statically consistent hover") {
  // Zero motion, symmetric stance: dynamics and contact rows must close.
  ProblemConfig c = small_config();
  Task t;
  t.initial_base_position = {0.0, 0.0, 0.42};
  t.goal_base_position = t.initial_base_position;
  NlpProblem p = build(c, Terrain::Flat(), RobotParams{}, t);
  std::mt19937 rng(97);
  Eigen::VectorXd x = nominal_point(p, rng, 0.0);
  // The hand-built point splits weight evenly at every node, which only
  // balances while all four feet are loaded; at this noise-free point the
  // residual should still be moderate, and exactly zero in the
  // full-support prefix before the first swing.
  Eigen::VectorXd cons;
  p.eval_constraints(x, &cons);
  const auto& infos = p.constraint_blocks();
  for (const auto& info : infos) {
    if (info.name != "dynamics") continue;
    CHECK(cons.segment(info.row_start, 6).norm() < 1e-8);  // t = 0
  }
}
