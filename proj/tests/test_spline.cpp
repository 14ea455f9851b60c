#include "locoplan/spline.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "test_util.hpp"

using namespace locoplan;
using namespace locoplan::test;

namespace {

Eigen::VectorXd scal(double v) {
  return Eigen::VectorXd::Constant(1, v);
}

Spline unit_step_spline() {
  std::vector<Node> nodes{Node(scal(0.0), scal(0.0)),
                          Node(scal(1.0), scal(0.0))};
  return Spline(std::move(nodes), {1.0});
}

// Flat parameter vector round trip used by finite-difference checks.
Eigen::VectorXd flatten(const Spline& s) {
  const int k = s.dim();
  Eigen::VectorXd p(flat_param_count(s));
  for (int i = 0; i < s.node_count(); ++i) {
    p.segment(2 * k * i, k) = s.nodes()[i].value;
    p.segment(2 * k * i + k, k) = s.nodes()[i].derivative;
  }
  for (int j = 0; j < s.segment_count(); ++j)
    p[2 * k * s.node_count() + j] = s.durations()[j];
  return p;
}

Spline unflatten(const Eigen::VectorXd& p, int dim, int segments) {
  std::vector<Node> nodes;
  for (int i = 0; i <= segments; ++i) {
    nodes.emplace_back(p.segment(2 * dim * i, dim),
                       p.segment(2 * dim * i + dim, dim));
  }
  std::vector<double> durations(segments);
  for (int j = 0; j < segments; ++j)
    durations[j] = p[2 * dim * (segments + 1) + j];
  return Spline(std::move(nodes), std::move(durations));
}

}  // namespace

TEST_CASE("hermite endpoint interpolation and midpoint symmetry") {
  Spline s = unit_step_spline();
  CHECK(s.eval(0.0)[0] == doctest::Approx(0.0));
  CHECK(s.eval(1.0)[0] == doctest::Approx(1.0));
  CHECK(s.eval(0.5)[0] == doctest::Approx(0.5));
}

TEST_CASE("eval rejects out-of-range times") {
  Spline s = unit_step_spline();
  CHECK_THROWS_AS(s.eval(-0.1), std::domain_error);
  CHECK_THROWS_AS(s.eval(1.1), std::domain_error);
}

TEST_CASE("velocity matches finite differences of values") {
  std::mt19937 rng(7);
  Spline s = random_spline(rng, 3, 4);
  std::uniform_real_distribution<double> td(1e-4, s.total_duration() - 1e-4);
  for (int trial = 0; trial < 50; ++trial) {
    const double t = td(rng);
    const Eigen::VectorXd v = s.eval(t, 1);
    for (int d = 0; d < 3; ++d) {
      const double fd = central_diff(
          [&](double tt) { return s.eval(tt, 0)[d]; }, t, 1e-6);
      CHECK(rel_err(v[d], fd) < 1e-6);
    }
  }
}

TEST_CASE("C1 continuity at interior nodes") {
  std::mt19937 rng(11);
  Spline s = random_spline(rng, 2, 5);
  double t = 0.0;
  for (int seg = 0; seg + 1 < s.segment_count(); ++seg) {
    t += s.durations()[seg];
    const double eps = 1e-13 * s.total_duration();
    for (int order : {0, 1}) {
      const Eigen::VectorXd left = s.eval(t - eps, order);
      const Eigen::VectorXd right = s.eval(t + eps, order);
      CHECK((left - right).norm() < 1e-9);
    }
  }
}

TEST_CASE("param jacobian at a node time is interpolation") {
  std::mt19937 rng(3);
  Spline s = random_spline(rng, 2, 3);
  const double t = s.segment_start(2);  // exactly at node 2
  const SplineJacobian jac = param_jacobian(s, t, 0);
  CHECK(jac.segment == 2);
  CHECK(jac.w_start_value == doctest::Approx(1.0));
  CHECK(jac.w_end_value == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(jac.w_start_deriv == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("constant spline has zero duration sensitivity for values") {
  std::vector<Node> nodes{Node(scal(2.5), scal(0.0)), Node(scal(2.5), scal(0.0)),
                          Node(scal(2.5), scal(0.0))};
  Spline s(std::move(nodes), {0.7, 1.3});
  const SplineJacobian jac = param_jacobian(s, 1.1, 0);
  CHECK(jac.d_duration.norm() < 1e-12);
}

TEST_CASE("param jacobian matches finite differences") {
  std::mt19937 rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 1 + trial % 3;
    const int segments = 2 + trial % 4;
    Spline s = random_spline(rng, dim, segments);
    std::uniform_real_distribution<double> td(1e-3,
                                              s.total_duration() - 1e-3);
    const double t = td(rng);
    const int order = trial % 3;
    const Eigen::MatrixXd jac = param_jacobian_dense(s, t, order);
    const Eigen::VectorXd p0 = flatten(s);
    for (int j = 0; j < p0.size(); ++j) {
      const double h = 1e-6;
      Eigen::VectorXd pp = p0, pm = p0;
      pp[j] += h;
      pm[j] -= h;
      // Keep t in range when shrinking a duration.
      const Eigen::VectorXd fp = unflatten(pp, dim, segments).eval(t, order);
      const Eigen::VectorXd fm = unflatten(pm, dim, segments).eval(t, order);
      for (int d = 0; d < dim; ++d) {
        CHECK(rel_err(jac(d, j), (fp[d] - fm[d]) / (2.0 * h)) < 1e-5);
      }
    }
  }
}

TEST_CASE("quadratic integral trivial cases") {
  SUBCASE("spline equal to constant reference gives zero") {
    std::vector<Node> nodes{Node(scal(3.0), scal(0.0)),
                            Node(scal(3.0), scal(0.0))};
    Spline s(std::move(nodes), {1.5});
    auto [value, grad] = quadratic_integral(s, scal(3.0), 0.0);
    CHECK(value == doctest::Approx(0.0));
    CHECK(grad.norm() < 1e-12);
  }
  SUBCASE("constant one against zero over two seconds gives two") {
    std::vector<Node> nodes{Node(scal(1.0), scal(0.0)),
                            Node(scal(1.0), scal(0.0))};
    Spline s(std::move(nodes), {2.0});
    auto [value, grad] = quadratic_integral(s, scal(0.0), 0.0);
    CHECK(value == doctest::Approx(2.0));
  }
}

TEST_CASE("quadratic integral matches dense Simpson quadrature") {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    Spline s = random_spline(rng, 2, 4);
    Spline ref = random_spline(rng, 2, 4);
    // Align the reference breakpoints with the primary spline.
    std::vector<Node> ref_nodes = ref.nodes();
    Spline ref_aligned(ref_nodes, s.durations());
    const double wd = 0.37;
    auto [value, grad] = quadratic_integral(s, ref_aligned, wd);
    const double oracle = simpson_segments(
        [&](double t) {
          const Eigen::VectorXd dev = s.eval(t) - ref_aligned.eval(t);
          const Eigen::VectorXd vel = s.eval(t, 1);
          return dev.squaredNorm() + wd * vel.squaredNorm();
        },
        s, 2500);
    CHECK(rel_err(value, oracle) < 1e-8);
    CHECK(value >= 0.0);

    // Node-parameter gradient against finite differences.
    const Eigen::VectorXd p0 = flatten(s);
    const int node_params = 2 * s.dim() * s.node_count();
    for (int j = 0; j < node_params; ++j) {
      const double h = 1e-6;
      Eigen::VectorXd pp = p0, pm = p0;
      pp[j] += h;
      pm[j] -= h;
      const double fp =
          quadratic_integral(unflatten(pp, 2, 4), ref_aligned, wd).first;
      const double fm =
          quadratic_integral(unflatten(pm, 2, 4), ref_aligned, wd).first;
      CHECK(rel_err(grad[j], (fp - fm) / (2.0 * h)) < 1e-5);
    }
  }
}

TEST_CASE("quadratic integral duration gradient matches finite differences") {
  std::mt19937 rng(29);
  Spline s = random_spline(rng, 2, 4);
  const Eigen::VectorXd ref = random_vec(rng, 2);
  const double wd = 0.21;
  auto [value, grad] = quadratic_integral(s, ref, wd);
  const Eigen::VectorXd p0 = flatten(s);
  for (int j = 0; j < s.segment_count(); ++j) {
    const int idx = 2 * s.dim() * s.node_count() + j;
    const double h = 1e-6;
    Eigen::VectorXd pp = p0, pm = p0;
    pp[idx] += h;
    pm[idx] -= h;
    const double fp = quadratic_integral(unflatten(pp, 2, 4), ref, wd).first;
    const double fm = quadratic_integral(unflatten(pm, 2, 4), ref, wd).first;
    CHECK(rel_err(grad[idx], (fp - fm) / (2.0 * h)) < 1e-5);
  }
}

TEST_CASE("duration scaling inversely scales the velocity integral") {
  std::mt19937 rng(31);
  Spline s = random_spline(rng, 1, 3);
  const double alpha = 1.7;
  std::vector<Node> scaled_nodes;
  for (const Node& n : s.nodes())
    scaled_nodes.emplace_back(n.value, n.derivative / alpha);
  std::vector<double> scaled_durations;
  for (double d : s.durations()) scaled_durations.push_back(d * alpha);
  Spline scaled(std::move(scaled_nodes), std::move(scaled_durations));

  QuadraticIntegralSpec spec;
  spec.order = 1;  // integrand is the squared velocity
  const double base = quadratic_integral(s, spec).value;
  const double after = quadratic_integral(scaled, spec).value;
  CHECK(rel_err(after, base / alpha) < 1e-10);

  const double oracle = simpson_segments(
      [&](double t) { return scaled.eval(t, 1).squaredNorm(); }, scaled, 2500);
  CHECK(rel_err(after, oracle) < 1e-8);
}
