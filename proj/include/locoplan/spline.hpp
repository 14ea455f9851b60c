#pragma once

#include <Eigen/Core>

#include <utility>
#include <vector>

namespace locoplan {

// One Hermite node: the value of the trajectory and its first time
// derivative, both of dimension k.
struct Node {
  Eigen::VectorXd value;
  Eigen::VectorXd derivative;

  Node() = default;
  Node(Eigen::VectorXd v, Eigen::VectorXd d)
      : value(std::move(v)), derivative(std::move(d)) {}
};

// A chain of cubic Hermite segments. Each segment is fully defined by its
// two bounding nodes and a positive duration, so the curve is C1 by
// construction. Node times are the cumulative sums of the durations.
class Spline {
 public:
  Spline(std::vector<Node> nodes, std::vector<double> durations);

  int dim() const { return dim_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }
  int segment_count() const { return static_cast<int>(durations_.size()); }
  double total_duration() const { return total_; }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<double>& durations() const { return durations_; }
  double segment_start(int seg) const { return starts_[seg]; }

  // Segment containing time t; t at an interior node belongs to the
  // right-hand segment. Fills the local coordinate s = t - t_start.
  int segment_at(double t, double* local) const;

  // Value (order 0), velocity (order 1) or acceleration (order 2) at t.
  // Throws std::domain_error outside [0, total_duration].
  Eigen::VectorXd eval(double t, int order = 0) const;

 private:
  std::vector<Node> nodes_;
  std::vector<double> durations_;
  std::vector<double> starts_;
  double total_ = 0.0;
  int dim_ = 0;
};

// Partial derivatives of eval(spline, t, order) with respect to the spline
// parameters. The Hermite basis weights are identical for every output
// dimension, so the node part is four scalars on the active segment.
// d_duration(:, j) is nonzero for the active segment (basis
// reparameterization) and for preceding segments (shift of the local
// coordinate).
struct SplineJacobian {
  int segment = 0;
  double w_start_value = 0.0;
  double w_start_deriv = 0.0;
  double w_end_value = 0.0;
  double w_end_deriv = 0.0;
  Eigen::MatrixXd d_duration;  // dim x segment_count
};

SplineJacobian param_jacobian(const Spline& spline, double t, int order);

// Flat parameter ordering used by dense Jacobians and gradients:
// [node0.value, node0.deriv, node1.value, ..., durations].
int flat_param_count(const Spline& spline);
Eigen::MatrixXd param_jacobian_dense(const Spline& spline, double t,
                                     int order);

// Weighted quadratic integral of a spline derivative against a piecewise
// constant reference:
//   sum_d w_d * Int ( (x_d^(order) - ref_d)^2 + wd * (x_d^(order+1))^2 ) dt
// evaluated segment by segment with 4-point Gauss-Legendre quadrature,
// which is exact for the polynomial integrand.
struct QuadraticIntegralSpec {
  int order = 0;
  Eigen::VectorXd dim_weights;                // empty => all ones
  double deriv_weight = 0.0;
  std::vector<Eigen::VectorXd> segment_refs;  // empty => zero reference
  std::vector<int> segments;                  // empty => all segments
};

struct QuadraticIntegralResult {
  double value = 0.0;
  Eigen::MatrixXd d_values;    // dim x node_count
  Eigen::MatrixXd d_derivs;    // dim x node_count
  Eigen::VectorXd d_durations; // segment_count
};

QuadraticIntegralResult quadratic_integral(const Spline& spline,
                                           const QuadraticIntegralSpec& spec);

// Spec-level convenience forms. The reference spline must share the
// breakpoints of the primary spline; it is held fixed when differentiating.
// The gradient follows the flat parameter ordering above.
std::pair<double, Eigen::VectorXd> quadratic_integral(
    const Spline& spline, const Spline& reference, double deriv_weight);
std::pair<double, Eigen::VectorXd> quadratic_integral(
    const Spline& spline, const Eigen::VectorXd& constant_reference,
    double deriv_weight);

}  // namespace locoplan
