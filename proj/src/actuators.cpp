#include "rhc/actuators.hpp"

#include <algorithm>
#include <stdexcept>

namespace rhc {

namespace {

using Polygon = std::vector<Point>;

// Sutherland-Hodgman clip against the half-plane  sign*(coord - bound) >= 0.
Polygon clip(const Polygon& poly, int axis, double bound, double sign) {
  Polygon out;
  if (poly.empty()) return out;
  auto coord = [axis](const Point& p) { return axis == 0 ? p.x1 : p.x2; };
  auto inside = [&](const Point& p) { return sign * (coord(p) - bound) >= 0.0; };
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Point& cur = poly[k];
    const Point& prev = poly[(k + poly.size() - 1) % poly.size()];
    const bool cur_in = inside(cur);
    const bool prev_in = inside(prev);
    if (cur_in != prev_in) {
      const double s = (bound - coord(prev)) / (coord(cur) - coord(prev));
      out.push_back({prev.x1 + s * (cur.x1 - prev.x1), prev.x2 + s * (cur.x2 - prev.x2)});
    }
    if (cur_in) out.push_back(cur);
  }
  return out;
}

double tri_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b.x1 - a.x1) * (c.x2 - a.x2) - (c.x1 - a.x1) * (b.x2 - a.x2));
}

bool overlaps(const Box& a, const Box& b) {
  return a.lower.x1 < b.upper.x1 && b.lower.x1 < a.upper.x1 && a.lower.x2 < b.upper.x2 &&
         b.lower.x2 < a.upper.x2;
}

}  // namespace

ActuatorSet build_rectangular_actuators(const std::vector<ActuatorRegion>& regions) {
  ActuatorSet set;
  for (const auto& region : regions) {
    const Box& p = region.parent;
    if (!(p.lower.x1 >= 0.0 && p.lower.x2 >= 0.0 && p.upper.x1 <= 1.0 && p.upper.x2 <= 1.0 &&
          p.lower.x1 < p.upper.x1 && p.lower.x2 < p.upper.x2)) {
      throw std::invalid_argument("build_rectangular_actuators: parent rectangle outside the domain");
    }
    if (region.subdivisions[0] < 1 || region.subdivisions[1] < 1) {
      throw std::invalid_argument("build_rectangular_actuators: subdivisions must be >= 1");
    }
    for (const auto& other : set.parents) {
      if (overlaps(p, other)) {
        throw std::invalid_argument("build_rectangular_actuators: overlapping parent rectangles");
      }
    }
    set.parents.push_back(p);
    const int d1 = region.subdivisions[0];
    const int d2 = region.subdivisions[1];
    const double w1 = (p.upper.x1 - p.lower.x1) / d1;
    const double w2 = (p.upper.x2 - p.lower.x2) / d2;
    for (int k2 = 0; k2 < d2; ++k2) {
      for (int k1 = 0; k1 < d1; ++k1) {
        // The last cell snaps to the parent bound so the tiling is exact.
        Box r;
        r.lower = {p.lower.x1 + k1 * w1, p.lower.x2 + k2 * w2};
        r.upper = {k1 + 1 == d1 ? p.upper.x1 : p.lower.x1 + (k1 + 1) * w1,
                   k2 + 1 == d2 ? p.upper.x2 : p.lower.x2 + (k2 + 1) * w2};
        set.indicators.push_back(r);
      }
    }
  }
  double max_area = 0.0;
  for (const auto& r : set.indicators) max_area = std::max(max_area, r.area());
  set.control_constant = static_cast<double>(set.indicators.size()) * max_area;
  return set;
}

Matrix actuator_loads_full(const Mesh& mesh, const std::vector<Box>& indicators) {
  Matrix load = Matrix::Zero(mesh.node_count(), static_cast<Eigen::Index>(indicators.size()));
  for (const auto& tri : mesh.triangles) {
    const Point& p0 = mesh.nodes[tri[0]];
    const Point& p1 = mesh.nodes[tri[1]];
    const Point& p2 = mesh.nodes[tri[2]];
    const double area = tri_area(p0, p1, p2);
    const double tmin1 = std::min({p0.x1, p1.x1, p2.x1});
    const double tmax1 = std::max({p0.x1, p1.x1, p2.x1});
    const double tmin2 = std::min({p0.x2, p1.x2, p2.x2});
    const double tmax2 = std::max({p0.x2, p1.x2, p2.x2});
    // Barycentric coordinate of vertex a at point x.
    auto bary = [&](int a, const Point& x) {
      const Point& q1 = mesh.nodes[tri[(a + 1) % 3]];
      const Point& q2 = mesh.nodes[tri[(a + 2) % 3]];
      return tri_area(x, q1, q2) / area;
    };
    for (std::size_t i = 0; i < indicators.size(); ++i) {
      const Box& r = indicators[i];
      if (r.upper.x1 <= tmin1 || r.lower.x1 >= tmax1 || r.upper.x2 <= tmin2 ||
          r.lower.x2 >= tmax2) {
        continue;
      }
      Polygon poly{p0, p1, p2};
      poly = clip(poly, 0, r.lower.x1, 1.0);
      poly = clip(poly, 0, r.upper.x1, -1.0);
      poly = clip(poly, 1, r.lower.x2, 1.0);
      poly = clip(poly, 1, r.upper.x2, -1.0);
      if (poly.size() < 3) continue;
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        const double a = tri_area(poly[0], poly[k], poly[k + 1]);
        if (a <= 0.0) continue;
        for (int v = 0; v < 3; ++v) {
          const double mean =
              (bary(v, poly[0]) + bary(v, poly[k]) + bary(v, poly[k + 1])) / 3.0;
          load(tri[v], static_cast<Eigen::Index>(i)) += a * mean;
        }
      }
    }
  }
  return load;
}

ActuatorSet assemble_actuator_loads(const Mesh& mesh, ActuatorSet set) {
  const Matrix full = actuator_loads_full(mesh, set.indicators);
  set.load.resize(mesh.interior_count(), set.size());
  for (int k = 0; k < mesh.interior_count(); ++k) {
    set.load.row(k) = full.row(mesh.interior[k]);
  }
  return set;
}

double coverage_fraction(const ActuatorSet& set) {
  double total = 0.0;
  for (const auto& r : set.indicators) total += r.area();
  return total;
}

std::vector<ActuatorRegion> example_two_parent_regions() {
  return {
      {{{0.25, 0.25}, {0.45, 0.45}}, {2, 1}},
      {{{0.55, 0.55}, {0.75, 0.75}}, {2, 1}},
  };
}

std::vector<ActuatorRegion> example_thirteen_regions() {
  return {
      {{{0.2, 0.6}, {0.5, 0.8}}, {3, 2}},
      {{{0.15, 0.2}, {0.85, 0.3}}, {7, 1}},
  };
}

}  // namespace rhc
