#pragma once

#include <array>
#include <vector>

#include "rhc/mesh_fem.hpp"

namespace rhc {

/// Axis-aligned open box (lower, upper) in the unit square.
struct Box {
  Point lower;
  Point upper;

  [[nodiscard]] double area() const { return (upper.x1 - lower.x1) * (upper.x2 - lower.x2); }
};

/// A parent rectangle and its uniform subdivision counts (d_1, d_2).
struct ActuatorRegion {
  Box parent;
  std::array<int, 2> subdivisions{1, 1};
};

/// Indicator actuators Phi_i = 1_{R_i} on a uniform partition of one or more
/// parent rectangles.
struct ActuatorSet {
  std::vector<Box> parents;
  /// Sub-rectangle R_i of every actuator, ordered parent by parent, x1 fastest.
  std::vector<Box> indicators;
  /// interior-dofs x N; column i holds (Phi_i, phi_j)_H. Empty until
  /// assemble_actuator_loads is called.
  Matrix load;
  /// N * max_i ||Phi_i||_H^2.
  double control_constant = 0.0;

  [[nodiscard]] int size() const { return static_cast<int>(indicators.size()); }
};

/// Throws std::invalid_argument if a parent leaves (0,1)^2, two parents
/// overlap, or a subdivision count is < 1.
ActuatorSet build_rectangular_actuators(const std::vector<ActuatorRegion>& regions);

/// Full-node load matrix (all nodes x N), entry (j,i) = int_{R_i} phi_j dx,
/// integrated exactly by clipping each triangle against R_i.
Matrix actuator_loads_full(const Mesh& mesh, const std::vector<Box>& indicators);

/// Returns a copy of `set` with `load` filled for the interior dofs of `mesh`.
ActuatorSet assemble_actuator_loads(const Mesh& mesh, ActuatorSet set);

/// sum_i area(R_i) / |Omega|.
double coverage_fraction(const ActuatorSet& set);

/// Shipped placements: four actuators on 8% of the domain, and thirteen on 13%.
std::vector<ActuatorRegion> example_two_parent_regions();
std::vector<ActuatorRegion> example_thirteen_regions();

}  // namespace rhc
