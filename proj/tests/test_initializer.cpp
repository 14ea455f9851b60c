#include "locoplan/initializer.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "locoplan/terrain.hpp"
#include "test_util.hpp"

using namespace locoplan;
using locoplan::test::random_vec;

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

InitializerNet tiny_net(uint64_t seed = 11) {
  return InitializerNet({3, 5, 4}, seed);
}

// Loss as a plain function of the flattened parameters, for finite
// differences against the backprop gradient.
double loss_at(InitializerNet net, const Eigen::VectorXd& xn,
               const Eigen::VectorXd& yn, const Eigen::VectorXd& w) {
  std::vector<Eigen::MatrixXd> dw;
  std::vector<Eigen::VectorXd> db;
  return net.sample_loss_gradient(xn, yn, w, &dw, &db);
}

}  // namespace

TEST_CASE("heuristic guess matches the layout and boundary poses") {
  const ProblemConfig cfg = small_config();
  const Terrain terrain = Terrain::Flat();
  const RobotParams robot;
  const Task task = small_task();
  const VariableLayout layout = VariableLayout::Build(cfg);
  const PrimalGuess g = heuristic_init(cfg, terrain, robot, task);

  CHECK(g.layout_hash == layout.hash());
  CHECK(g.y.size() == layout.total());
  for (int c = 0; c < 2; ++c) {
    CHECK(g.y[layout.base_lin_var(0, c, false)] ==
          doctest::Approx(task.initial_base_position[c]));
    CHECK(g.y[layout.base_lin_var(layout.base_node_count() - 1, c, false)] ==
          doctest::Approx(task.goal_base_position[c]));
  }
  CHECK(g.y[layout.base_ang_var(layout.base_node_count() - 1, 2, false)] ==
        doctest::Approx(task.goal_yaw));

  // Footholds on the terrain; initial vertical forces carry the weight.
  for (int f = 0; f < 4; ++f) {
    for (int s = 0; s <= layout.feet()[f].swing_count; ++s) {
      const double px = g.y[layout.stance_pos_var(f, s, 0)];
      const double py = g.y[layout.stance_pos_var(f, s, 1)];
      CHECK(g.y[layout.stance_pos_var(f, s, 2)] ==
            doctest::Approx(terrain.height_at(px, py)));
    }
  }
  double fz = 0.0;
  for (int f = 0; f < 4; ++f) fz += g.y[layout.force_var(f, 0, 2)];
  CHECK(fz == doctest::Approx(robot.mass * -robot.gravity.z()));
}

TEST_CASE("task features express the goal in the initial base frame") {
  const Terrain terrain = Terrain::Flat();
  Task t = small_task();
  t.initial_yaw = M_PI / 2.0;  // facing +y: a goal at +y is "forward"
  t.goal_base_position = t.initial_base_position + Eigen::Vector3d(0, 0.8, 0);
  const Eigen::VectorXd f = task_features(t, terrain);
  CHECK(f.size() == kTaskFeatureCount);
  CHECK(f[0] == doctest::Approx(0.8));
  CHECK(f[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(f[5] == doctest::Approx(M_PI / 2.0));
}

TEST_CASE("backprop gradient matches finite differences") {
  std::mt19937 rng(101);
  InitializerNet net = tiny_net();
  const Eigen::VectorXd xn = random_vec(rng, 3);
  const Eigen::VectorXd yn = random_vec(rng, 4);
  Eigen::VectorXd w(4);
  w << 1.0, 0.5, 2.0, 0.25;

  std::vector<Eigen::MatrixXd> dw;
  std::vector<Eigen::VectorXd> db;
  net.sample_loss_gradient(xn, yn, w, &dw, &db);

  const double h = 1e-6;
  for (size_t l = 0; l < net.weights().size(); ++l) {
    for (int i = 0; i < net.weights()[l].rows(); ++i) {
      for (int j = 0; j < net.weights()[l].cols(); ++j) {
        InitializerNet p = net, m = net;
        p.mutable_weights()[l](i, j) += h;
        m.mutable_weights()[l](i, j) -= h;
        const double fd =
            (loss_at(p, xn, yn, w) - loss_at(m, xn, yn, w)) / (2.0 * h);
        CHECK(std::abs(dw[l](i, j) - fd) < 1e-5);
      }
    }
    for (int i = 0; i < net.biases()[l].size(); ++i) {
      InitializerNet p = net, m = net;
      p.mutable_biases()[l][i] += h;
      m.mutable_biases()[l][i] -= h;
      const double fd =
          (loss_at(p, xn, yn, w) - loss_at(m, xn, yn, w)) / (2.0 * h);
      CHECK(std::abs(db[l][i] - fd) < 1e-5);
    }
  }
}

TEST_CASE("zero-weight output dimensions do not produce gradient") {
  std::mt19937 rng(103);
  InitializerNet net = tiny_net();
  const Eigen::VectorXd xn = random_vec(rng, 3);
  const Eigen::VectorXd yn = random_vec(rng, 4);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(4);
  w[2] = 0.0;
  std::vector<Eigen::MatrixXd> dw;
  std::vector<Eigen::VectorXd> db;
  net.sample_loss_gradient(xn, yn, w, &dw, &db);
  // Output row 2 of the last layer never receives error signal.
  CHECK(dw.back().row(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(db.back()[2] == 0.0);
}

TEST_CASE("training drives a small regression problem toward zero loss") {
  std::mt19937 rng(107);
  const int n = 8;
  Eigen::MatrixXd inputs(n, 3), targets(n, 4);
  for (int i = 0; i < n; ++i) {
    inputs.row(i) = random_vec(rng, 3).transpose();
    const Eigen::Vector3d x = inputs.row(i).transpose();
    targets.row(i) << std::sin(x[0]), x[1] * x[2], 0.3 * x[0] - x[2],
        x.squaredNorm();
  }
  InitializerNet net({3, 32, 4}, 13);
  InitializerNet::TrainOptions opt;
  opt.max_epochs = 3000;
  opt.patience = 3000;
  const auto stats = net.train(inputs, targets, Eigen::VectorXd::Ones(4), opt);
  CHECK(stats.train_loss < 1e-3);  // memorizes 8 samples
}

TEST_CASE("construction and training are deterministic per seed") {
  std::mt19937 rng(109);
  Eigen::MatrixXd inputs(6, 3), targets(6, 4);
  for (int i = 0; i < 6; ++i) {
    inputs.row(i) = random_vec(rng, 3).transpose();
    targets.row(i) = random_vec(rng, 4).transpose();
  }
  InitializerNet::TrainOptions opt;
  opt.max_epochs = 50;
  InitializerNet a({3, 8, 4}, 17), b({3, 8, 4}, 17);
  a.train(inputs, targets, Eigen::VectorXd::Ones(4), opt);
  b.train(inputs, targets, Eigen::VectorXd::Ones(4), opt);
  const Eigen::VectorXd probe = random_vec(rng, 3);
  CHECK((a.predict(probe) - b.predict(probe)).norm() == 0.0);
  InitializerNet c({3, 8, 4}, 18);
  CHECK((a.weights()[0] - c.weights()[0]).norm() != 0.0);
}

TEST_CASE("network save/load round trip is bit exact") {
  std::mt19937 rng(113);
  InitializerNet net = tiny_net(23);
  net.set_normalization(random_vec(rng, 3), random_vec(rng, 3, 0.5, 2.0),
                        random_vec(rng, 4), random_vec(rng, 4, 0.5, 2.0));
  std::stringstream ss;
  net.save(ss);
  const InitializerNet back = InitializerNet::load(ss);
  REQUIRE(back.layer_sizes() == net.layer_sizes());
  const Eigen::VectorXd probe = random_vec(rng, 3);
  CHECK((net.predict(probe) - back.predict(probe)).norm() == 0.0);
}

TEST_CASE("cost threshold keeps the retained fraction inside the window") {
  // A sharp knee: most costs near 1, a tail up to 100. The knee sits in
  // the tail, so the clamp pulls retention back into [0.15, 0.40].
  std::vector<double> costs;
  for (int i = 0; i < 80; ++i) costs.push_back(1.0 + 0.01 * i);
  for (int i = 0; i < 20; ++i) costs.push_back(10.0 + 4.0 * i);
  const FilterThreshold t = select_cost_threshold(costs);
  CHECK(t.retention >= 0.15);
  CHECK(t.retention <= 0.40);
  int kept = 0;
  for (const double c : costs) kept += c <= t.g_max ? 1 : 0;
  CHECK(kept == doctest::Approx(t.retention * costs.size()));

  // Degenerate inputs.
  CHECK(select_cost_threshold({}).retention == 0.0);
  CHECK(select_cost_threshold({5.0}).g_max == 5.0);
}

TEST_CASE("learned_init rejects a net of the wrong width") {
  const ProblemConfig cfg = small_config();
  const Terrain terrain = Terrain::Flat();
  const InitializerNet wrong({kTaskFeatureCount, 8, 10}, 3);
  CHECK_THROWS_AS(learned_init(wrong, cfg, terrain, small_task()),
                  std::invalid_argument);
}

TEST_CASE("learned_init clamps predicted durations to their bounds") {
  const ProblemConfig cfg = small_config();
  const Terrain terrain = Terrain::Flat();
  const VariableLayout layout = VariableLayout::Build(cfg);
  InitializerNet net({kTaskFeatureCount, 4, layout.total()}, 5);
  // Blow up the output scale so raw predictions are far outside bounds.
  net.set_normalization(Eigen::VectorXd::Zero(kTaskFeatureCount),
                        Eigen::VectorXd::Ones(kTaskFeatureCount),
                        Eigen::VectorXd::Zero(layout.total()),
                        Eigen::VectorXd::Constant(layout.total(), 50.0));
  const PrimalGuess g = learned_init(net, cfg, terrain, small_task());
  for (int f = 0; f < 4; ++f) {
    for (int j = 0; j < 2 * layout.feet()[f].swing_count; ++j) {
      const double d = g.y[layout.duration_var(f, j)];
      CHECK(d >= cfg.duration_min);
      CHECK(d <= cfg.duration_max);
    }
  }
}
