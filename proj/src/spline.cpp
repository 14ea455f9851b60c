#include "locoplan/spline.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace locoplan {
namespace {

// 4-point Gauss-Legendre rule on [0, 1]; exact for degree <= 7.
constexpr int kQuadPoints = 4;
constexpr double kQuadXi[kQuadPoints] = {
    0.5 - 0.8611363115940526 / 2.0, 0.5 - 0.3399810435848563 / 2.0,
    0.5 + 0.3399810435848563 / 2.0, 0.5 + 0.8611363115940526 / 2.0};
constexpr double kQuadW[kQuadPoints] = {
    0.3478548451374538 / 2.0, 0.6521451548625461 / 2.0,
    0.6521451548625461 / 2.0, 0.3478548451374538 / 2.0};

struct BasisWeights {
  double p0, v0, p1, v1;
};

// Hermite basis weights for the given derivative order at local coordinate
// s within a segment of duration d. Order 3 is the (constant) jerk.
BasisWeights basis(double s, double d, int order) {
  const double d2 = d * d;
  const double d3 = d2 * d;
  const double s2 = s * s;
  const double s3 = s2 * s;
  switch (order) {
    case 0:
      return {1.0 - 3.0 * s2 / d2 + 2.0 * s3 / d3,
              s - 2.0 * s2 / d + s3 / d2,
              3.0 * s2 / d2 - 2.0 * s3 / d3,
              -s2 / d + s3 / d2};
    case 1:
      return {-6.0 * s / d2 + 6.0 * s2 / d3,
              1.0 - 4.0 * s / d + 3.0 * s2 / d2,
              6.0 * s / d2 - 6.0 * s2 / d3,
              -2.0 * s / d + 3.0 * s2 / d2};
    case 2:
      return {-6.0 / d2 + 12.0 * s / d3,
              -4.0 / d + 6.0 * s / d2,
              6.0 / d2 - 12.0 * s / d3,
              -2.0 / d + 6.0 * s / d2};
    case 3:
      return {12.0 / d3, 6.0 / d2, -12.0 / d3, 6.0 / d2};
    default:
      throw std::invalid_argument("spline eval order must be in [0, 3]");
  }
}

Eigen::VectorXd combine(const Node& a, const Node& b, const BasisWeights& w) {
  return w.p0 * a.value + w.v0 * a.derivative + w.p1 * b.value +
         w.v1 * b.derivative;
}

// Cubic coefficient partials with respect to the segment duration at fixed
// local coordinate: da2/dd and da3/dd, where
//   a2 = (-3 p0 - 2 v0 d + 3 p1 - v1 d) / d^2
//   a3 = ( 2 p0 +   v0 d - 2 p1 + v1 d) / d^3.
void coeff_duration_partials(const Node& a, const Node& b, double d,
                             Eigen::VectorXd* da2, Eigen::VectorXd* da3) {
  const double d2 = d * d;
  const double d3 = d2 * d;
  Eigen::VectorXd a2 =
      (-3.0 * a.value - 2.0 * d * a.derivative + 3.0 * b.value -
       d * b.derivative) / d2;
  Eigen::VectorXd a3 = (2.0 * a.value + d * a.derivative - 2.0 * b.value +
                        d * b.derivative) / d3;
  *da2 = (-2.0 * a.derivative - b.derivative) / d2 - 2.0 / d * a2;
  *da3 = (a.derivative + b.derivative) / d3 - 3.0 / d * a3;
}

// d(eval)/d(duration of the active segment) at fixed local coordinate.
Eigen::VectorXd eval_duration_partial(const Node& a, const Node& b, double d,
                                      double s, int order) {
  Eigen::VectorXd da2, da3;
  coeff_duration_partials(a, b, d, &da2, &da3);
  switch (order) {
    case 0:
      return s * s * da2 + s * s * s * da3;
    case 1:
      return 2.0 * s * da2 + 3.0 * s * s * da3;
    case 2:
      return 2.0 * da2 + 6.0 * s * da3;
    case 3:
      return 6.0 * da3;
    default:
      throw std::invalid_argument("spline eval order must be in [0, 3]");
  }
}

}  // namespace

Spline::Spline(std::vector<Node> nodes, std::vector<double> durations)
    : nodes_(std::move(nodes)), durations_(std::move(durations)) {
  if (nodes_.size() < 2 || durations_.size() != nodes_.size() - 1) {
    throw std::invalid_argument("spline needs n >= 2 nodes and n-1 durations");
  }
  dim_ = static_cast<int>(nodes_.front().value.size());
  if (dim_ < 1) throw std::invalid_argument("spline dimension must be >= 1");
  for (const Node& n : nodes_) {
    if (n.value.size() != dim_ || n.derivative.size() != dim_) {
      throw std::invalid_argument("inconsistent node dimensions");
    }
  }
  starts_.reserve(durations_.size());
  for (double d : durations_) {
    if (!(d > 0.0)) throw std::invalid_argument("durations must be positive");
    starts_.push_back(total_);
    total_ += d;
  }
}

int Spline::segment_at(double t, double* local) const {
  if (t < 0.0 || t > total_ + 1e-12 * std::max(1.0, total_)) {
    throw std::domain_error("spline evaluation time out of range");
  }
  int seg = segment_count() - 1;
  for (int i = 0; i < segment_count(); ++i) {
    if (t < starts_[i] + durations_[i]) {
      seg = i;
      break;
    }
  }
  if (local) *local = t - starts_[seg];
  return seg;
}

Eigen::VectorXd Spline::eval(double t, int order) const {
  double s = 0.0;
  const int seg = segment_at(t, &s);
  const BasisWeights w = basis(s, durations_[seg], order);
  return combine(nodes_[seg], nodes_[seg + 1], w);
}

SplineJacobian param_jacobian(const Spline& spline, double t, int order) {
  double s = 0.0;
  const int seg = spline.segment_at(t, &s);
  const double d = spline.durations()[seg];
  const Node& a = spline.nodes()[seg];
  const Node& b = spline.nodes()[seg + 1];

  SplineJacobian jac;
  jac.segment = seg;
  const BasisWeights w = basis(s, d, order);
  jac.w_start_value = w.p0;
  jac.w_start_deriv = w.v0;
  jac.w_end_value = w.p1;
  jac.w_end_deriv = w.v1;

  jac.d_duration.setZero(spline.dim(), spline.segment_count());
  // Preceding durations shift the local coordinate: d(eval)/d(dur_j) =
  // -d(eval)/ds.
  if (seg > 0) {
    const BasisWeights wn = basis(s, d, order + 1);
    const Eigen::VectorXd shift = -combine(a, b, wn);
    for (int j = 0; j < seg; ++j) jac.d_duration.col(j) = shift;
  }
  jac.d_duration.col(seg) = eval_duration_partial(a, b, d, s, order);
  return jac;
}

int flat_param_count(const Spline& spline) {
  return 2 * spline.dim() * spline.node_count() + spline.segment_count();
}

Eigen::MatrixXd param_jacobian_dense(const Spline& spline, double t,
                                     int order) {
  const SplineJacobian jac = param_jacobian(spline, t, order);
  const int k = spline.dim();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(k, flat_param_count(spline));
  const int off = 2 * k * jac.segment;
  for (int dd = 0; dd < k; ++dd) {
    out(dd, off + dd) = jac.w_start_value;
    out(dd, off + k + dd) = jac.w_start_deriv;
    out(dd, off + 2 * k + dd) = jac.w_end_value;
    out(dd, off + 3 * k + dd) = jac.w_end_deriv;
  }
  const int dur_off = 2 * k * spline.node_count();
  for (int j = 0; j < spline.segment_count(); ++j) {
    out.col(dur_off + j) = jac.d_duration.col(j);
  }
  return out;
}

namespace {

// Shared integrator; ref(seg, s) supplies the reference value at a
// quadrature point and is held fixed when differentiating.
QuadraticIntegralResult integrate(
    const Spline& spline, int order, const Eigen::VectorXd& dim_weights,
    double deriv_weight, const std::vector<int>& segments,
    const std::function<Eigen::VectorXd(int, double)>& ref) {
  const int k = spline.dim();
  const int n = spline.node_count();
  QuadraticIntegralResult res;
  res.d_values.setZero(k, n);
  res.d_derivs.setZero(k, n);
  res.d_durations.setZero(spline.segment_count());

  Eigen::VectorXd wd = dim_weights.size() == 0
                           ? Eigen::VectorXd::Ones(k)
                           : dim_weights;

  std::vector<int> segs = segments;
  if (segs.empty()) {
    segs.resize(spline.segment_count());
    for (int i = 0; i < spline.segment_count(); ++i) segs[i] = i;
  }

  for (int seg : segs) {
    const double d = spline.durations()[seg];
    const Node& a = spline.nodes()[seg];
    const Node& b = spline.nodes()[seg + 1];
    for (int q = 0; q < kQuadPoints; ++q) {
      const double s = kQuadXi[q] * d;
      const double wq = kQuadW[q] * d;

      const BasisWeights w0 = basis(s, d, order);
      const BasisWeights w1 = basis(s, d, order + 1);
      const Eigen::VectorXd x0 = combine(a, b, w0);
      const Eigen::VectorXd x1 = combine(a, b, w1);
      const Eigen::VectorXd dev = x0 - ref(seg, s);

      double g = 0.0;
      for (int dd = 0; dd < k; ++dd) {
        g += wd[dd] * (dev[dd] * dev[dd] +
                       deriv_weight * x1[dd] * x1[dd]);
      }
      res.value += wq * g;

      // Node parameter gradient.
      for (int dd = 0; dd < k; ++dd) {
        const double c0 = wq * 2.0 * wd[dd] * dev[dd];
        const double c1 = wq * 2.0 * wd[dd] * deriv_weight * x1[dd];
        res.d_values(dd, seg) += c0 * w0.p0 + c1 * w1.p0;
        res.d_derivs(dd, seg) += c0 * w0.v0 + c1 * w1.v0;
        res.d_values(dd, seg + 1) += c0 * w0.p1 + c1 * w1.p1;
        res.d_derivs(dd, seg + 1) += c0 * w0.v1 + c1 * w1.v1;
      }

      // Duration gradient of the active segment:
      //   dI/dd = sum_q w_q [ g + d * (g'(s) xi_q + dg/dd|_s) ].
      const BasisWeights w2 = basis(s, d, order + 2);
      const Eigen::VectorXd x2 = combine(a, b, w2);
      const Eigen::VectorXd dx0 = eval_duration_partial(a, b, d, s, order);
      const Eigen::VectorXd dx1 = eval_duration_partial(a, b, d, s, order + 1);
      double gp = 0.0;
      double gd = 0.0;
      for (int dd = 0; dd < k; ++dd) {
        gp += wd[dd] * 2.0 * (dev[dd] * x1[dd] +
                              deriv_weight * x1[dd] * x2[dd]);
        gd += wd[dd] * 2.0 * (dev[dd] * dx0[dd] +
                              deriv_weight * x1[dd] * dx1[dd]);
      }
      res.d_durations[seg] += kQuadW[q] * (g + d * (gp * kQuadXi[q] + gd));
    }
  }
  return res;
}

Eigen::VectorXd flatten_gradient(const Spline& spline,
                                 const QuadraticIntegralResult& res) {
  const int k = spline.dim();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(flat_param_count(spline));
  for (int i = 0; i < spline.node_count(); ++i) {
    g.segment(2 * k * i, k) = res.d_values.col(i);
    g.segment(2 * k * i + k, k) = res.d_derivs.col(i);
  }
  g.tail(spline.segment_count()) = res.d_durations;
  return g;
}

}  // namespace

QuadraticIntegralResult quadratic_integral(const Spline& spline,
                                           const QuadraticIntegralSpec& spec) {
  if (!spec.segment_refs.empty() &&
      static_cast<int>(spec.segment_refs.size()) != spline.segment_count()) {
    throw std::invalid_argument("segment_refs size mismatch");
  }
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(spline.dim());
  auto ref = [&](int seg, double) -> Eigen::VectorXd {
    if (spec.segment_refs.empty()) return zero;
    return spec.segment_refs[seg];
  };
  return integrate(spline, spec.order, spec.dim_weights, spec.deriv_weight,
                   spec.segments, ref);
}

std::pair<double, Eigen::VectorXd> quadratic_integral(const Spline& spline,
                                                      const Spline& reference,
                                                      double deriv_weight) {
  if (reference.segment_count() != spline.segment_count() ||
      reference.dim() != spline.dim()) {
    throw std::domain_error("reference spline domain mismatch");
  }
  for (int i = 0; i < spline.segment_count(); ++i) {
    if (std::abs(reference.durations()[i] - spline.durations()[i]) > 1e-12) {
      throw std::domain_error("reference spline breakpoints mismatch");
    }
  }
  auto ref = [&](int seg, double s) -> Eigen::VectorXd {
    return reference.eval(reference.segment_start(seg) + s);
  };
  QuadraticIntegralResult res =
      integrate(spline, 0, Eigen::VectorXd(), deriv_weight, {}, ref);
  return {res.value, flatten_gradient(spline, res)};
}

std::pair<double, Eigen::VectorXd> quadratic_integral(
    const Spline& spline, const Eigen::VectorXd& constant_reference,
    double deriv_weight) {
  if (constant_reference.size() != spline.dim()) {
    throw std::domain_error("constant reference dimension mismatch");
  }
  auto ref = [&](int, double) -> Eigen::VectorXd { return constant_reference; };
  QuadraticIntegralResult res =
      integrate(spline, 0, Eigen::VectorXd(), deriv_weight, {}, ref);
  return {res.value, flatten_gradient(spline, res)};
}

}  // namespace locoplan
