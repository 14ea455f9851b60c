#pragma once

#include <Eigen/Core>

#include <functional>
#include <random>

#include "locoplan/spline.hpp"

namespace locoplan::test {

inline Eigen::VectorXd random_vec(std::mt19937& rng, int n, double lo = -1.0,
                                  double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

inline Spline random_spline(std::mt19937& rng, int dim, int segments) {
  std::vector<Node> nodes;
  for (int i = 0; i <= segments; ++i) {
    nodes.emplace_back(random_vec(rng, dim), random_vec(rng, dim));
  }
  std::uniform_real_distribution<double> dur(0.3, 1.2);
  std::vector<double> durations;
  for (int i = 0; i < segments; ++i) durations.push_back(dur(rng));
  return Spline(std::move(nodes), std::move(durations));
}

// Central finite difference of a scalar function.
inline double central_diff(const std::function<double(double)>& f, double x,
                           double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Composite Simpson quadrature over [a, b] with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double a,
                      double b, int n) {
  const double h = (b - a) / n;
  double sum = f(a) + f(b);
  for (int i = 1; i < n; ++i) sum += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

inline double simpson(const std::function<double(double)>& f, double total,
                      int n) {
  return simpson(f, 0.0, total, n);
}

// Simpson panels aligned with the spline breakpoints (the integrand has
// derivative jumps there), n points per segment.
inline double simpson_segments(const std::function<double(double)>& f,
                               const Spline& s, int n_per_segment) {
  double sum = 0.0;
  for (int seg = 0; seg < s.segment_count(); ++seg) {
    const double a = s.segment_start(seg);
    sum += simpson(f, a, a + s.durations()[seg], n_per_segment);
  }
  return sum;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace locoplan::test
