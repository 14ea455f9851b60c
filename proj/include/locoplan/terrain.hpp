#pragma once

#include <Eigen/Core>

#include <limits>
#include <string>
#include <vector>

namespace locoplan {

enum class TerrainKind { kFlat, kSinglePallet, kDoublePallet };

// Axis-aligned raised plateau. Heights are per-step rises, so stacked
// plateaus accumulate.
struct Plateau {
  double x_min, x_max, y_min, y_max;
  double rise;
};

// Piecewise-constant height field with a smoothed C1 transition band of
// width smoothing_eps at every plateau edge. Plateau heights are exact at
// distance > smoothing_eps from the edges.
class Terrain {
 public:
  static Terrain Flat();
  // Pallet front edge at x = front_x, footprint length_x by width_y
  // centered on y = 0.
  static Terrain SinglePallet(double front_x = 0.0, double height = 0.165,
                              double length_x = 1.2, double width_y = 1.0);
  // Two stacked steps: rises 0.145 m and 0.165 m, second front edge
  // step_separation behind the first.
  static Terrain DoublePallet(double front_x = 0.0, double height1 = 0.145,
                              double height2 = 0.165,
                              double step_separation = 0.40,
                              double length_x = 1.6, double width_y = 1.0);

  TerrainKind kind() const { return kind_; }
  const std::vector<Plateau>& plateaus() const { return plateaus_; }
  double smoothing_eps() const { return eps_; }
  void set_smoothing_eps(double eps) { eps_ = eps; }

  double height_at(double x, double y) const;
  Eigen::Vector2d height_gradient(double x, double y) const;

  // Unsigned perpendicular distance to the nearest plateau edge and the
  // gradient of that distance (unit norm away from equidistant loci).
  // Flat terrain returns +infinity with a zero gradient.
  struct EdgeDistance {
    double distance = std::numeric_limits<double>::infinity();
    Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
  };
  EdgeDistance edge_distance(double x, double y) const;

  std::string name() const;

 private:
  TerrainKind kind_ = TerrainKind::kFlat;
  std::vector<Plateau> plateaus_;
  double eps_ = 0.03;
};

}  // namespace locoplan
