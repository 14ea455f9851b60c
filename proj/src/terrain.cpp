#include "locoplan/terrain.hpp"

#include <algorithm>
#include <cmath>

namespace locoplan {
namespace {

// Signed inside distance to the plateau rectangle: positive inside,
// negative outside (axis gap, adequate for the smoothing band). The
// gradient is the axis-aligned unit direction of the binding edge.
double inside_distance(const Plateau& p, double x, double y,
                       Eigen::Vector2d* grad) {
  const double dx_lo = x - p.x_min;
  const double dx_hi = p.x_max - x;
  const double dy_lo = y - p.y_min;
  const double dy_hi = p.y_max - y;
  double d = dx_lo;
  Eigen::Vector2d g(1.0, 0.0);
  if (dx_hi < d) { d = dx_hi; g = {-1.0, 0.0}; }
  if (dy_lo < d) { d = dy_lo; g = {0.0, 1.0}; }
  if (dy_hi < d) { d = dy_hi; g = {0.0, -1.0}; }
  if (grad) *grad = g;
  return d;
}

double smoothstep(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return u * u * (3.0 - 2.0 * u);
}

double smoothstep_deriv(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return 6.0 * u * (1.0 - u);
}

}  // namespace

Terrain Terrain::Flat() {
  Terrain t;
  t.kind_ = TerrainKind::kFlat;
  return t;
}

Terrain Terrain::SinglePallet(double front_x, double height, double length_x,
                              double width_y) {
  Terrain t;
  t.kind_ = TerrainKind::kSinglePallet;
  t.plateaus_.push_back(
      {front_x, front_x + length_x, -width_y / 2.0, width_y / 2.0, height});
  return t;
}

Terrain Terrain::DoublePallet(double front_x, double height1, double height2,
                              double step_separation, double length_x,
                              double width_y) {
  Terrain t;
  t.kind_ = TerrainKind::kDoublePallet;
  t.plateaus_.push_back(
      {front_x, front_x + length_x, -width_y / 2.0, width_y / 2.0, height1});
  t.plateaus_.push_back({front_x + step_separation, front_x + length_x,
                         -width_y / 2.0, width_y / 2.0, height2});
  return t;
}

double Terrain::height_at(double x, double y) const {
  double h = 0.0;
  for (const Plateau& p : plateaus_) {
    h += p.rise * smoothstep(inside_distance(p, x, y, nullptr) / eps_);
  }
  return h;
}

Eigen::Vector2d Terrain::height_gradient(double x, double y) const {
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  for (const Plateau& p : plateaus_) {
    Eigen::Vector2d gd;
    const double d = inside_distance(p, x, y, &gd);
    g += p.rise * smoothstep_deriv(d / eps_) / eps_ * gd;
  }
  return g;
}

Terrain::EdgeDistance Terrain::edge_distance(double x, double y) const {
  EdgeDistance best;
  for (const Plateau& p : plateaus_) {
    Eigen::Vector2d gd;
    const double d = inside_distance(p, x, y, &gd);
    const double mag = std::abs(d);
    if (mag < best.distance) {
      best.distance = mag;
      best.gradient = (d >= 0.0 ? 1.0 : -1.0) * gd;
    }
  }
  return best;
}

std::string Terrain::name() const {
  switch (kind_) {
    case TerrainKind::kFlat: return "flat";
    case TerrainKind::kSinglePallet: return "single_pallet";
    case TerrainKind::kDoublePallet: return "double_pallet";
  }
  return "unknown";
}

}  // namespace locoplan
