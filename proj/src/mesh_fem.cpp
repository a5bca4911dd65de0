#include "rhc/mesh_fem.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rhc {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

struct ElementGeometry {
  double area;
  // Gradients of the three local P1 basis functions.
  std::array<std::array<double, 2>, 3> grad;
  // Edge midpoints m_{01}, m_{12}, m_{20}.
  std::array<Point, 3> midpoints;
};

ElementGeometry element_geometry(const Mesh& mesh, const std::array<int, 3>& tri) {
  const Point& p0 = mesh.nodes[tri[0]];
  const Point& p1 = mesh.nodes[tri[1]];
  const Point& p2 = mesh.nodes[tri[2]];
  const double det = (p1.x1 - p0.x1) * (p2.x2 - p0.x2) - (p2.x1 - p0.x1) * (p1.x2 - p0.x2);
  ElementGeometry g{};
  g.area = 0.5 * det;
  g.grad[0] = {(p1.x2 - p2.x2) / det, (p2.x1 - p1.x1) / det};
  g.grad[1] = {(p2.x2 - p0.x2) / det, (p0.x1 - p2.x1) / det};
  g.grad[2] = {(p0.x2 - p1.x2) / det, (p1.x1 - p0.x1) / det};
  g.midpoints[0] = {0.5 * (p0.x1 + p1.x1), 0.5 * (p0.x2 + p1.x2)};
  g.midpoints[1] = {0.5 * (p1.x1 + p2.x1), 0.5 * (p1.x2 + p2.x2)};
  g.midpoints[2] = {0.5 * (p2.x1 + p0.x1), 0.5 * (p2.x2 + p0.x2)};
  return g;
}

// Value of local basis function `a` at edge midpoint `q`.
constexpr double kMidpointBasis[3][3] = {
    // q = m01, m12, m20
    {0.5, 0.0, 0.5},  // phi_0
    {0.5, 0.5, 0.0},  // phi_1
    {0.0, 0.5, 0.5},  // phi_2
};

SparseMatrix from_triplets(int n, const Triplets& triplets) {
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw std::domain_error(std::string("non-finite ") + what + " coefficient at quadrature point");
  }
}

}  // namespace

double Mesh::signed_area(const std::array<int, 3>& tri) const {
  const Point& p0 = nodes[tri[0]];
  const Point& p1 = nodes[tri[1]];
  const Point& p2 = nodes[tri[2]];
  return 0.5 * ((p1.x1 - p0.x1) * (p2.x2 - p0.x2) - (p2.x1 - p0.x1) * (p1.x2 - p0.x2));
}

Mesh build_uniform_mesh(int nx, int ny) {
  if (nx < 2 || ny < 2) {
    throw std::invalid_argument("build_uniform_mesh: need at least 2 nodes per axis");
  }
  Mesh mesh;
  mesh.nx = nx;
  mesh.ny = ny;
  const int n = nx * ny;
  mesh.nodes.resize(n);
  mesh.boundary_mask.resize(n);
  mesh.dof_of_node.assign(n, -1);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int k = j * nx + i;
      mesh.nodes[k] = {static_cast<double>(i) / (nx - 1), static_cast<double>(j) / (ny - 1)};
      const bool boundary = i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
      mesh.boundary_mask[k] = boundary;
      if (!boundary) {
        mesh.dof_of_node[k] = static_cast<int>(mesh.interior.size());
        mesh.interior.push_back(k);
      }
    }
  }
  mesh.triangles.reserve(static_cast<std::size_t>(2 * (nx - 1) * (ny - 1)));
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const int ll = j * nx + i;
      const int lr = ll + 1;
      const int ul = ll + nx;
      const int ur = ul + 1;
      mesh.triangles.push_back({ll, lr, ur});
      mesh.triangles.push_back({ll, ur, ul});
    }
  }
  return mesh;
}

Coefficients paper_coefficients() {
  Coefficients c;
  c.nu = 0.1;
  c.reaction = [](double t, Point x) { return -2.8 - 0.8 * std::abs(std::sin(t + x.x1)); };
  c.convection = [](double t, Point x) {
    return std::array<double, 2>{-0.01 * (x.x1 + x.x2), 0.2 * x.x1 * x.x2 * std::cos(t)};
  };
  return c;
}

Coefficients heat_coefficients(double nu) {
  Coefficients c;
  c.nu = nu;
  c.reaction = [](double, Point) { return 0.0; };
  c.convection = [](double, Point) { return std::array<double, 2>{0.0, 0.0}; };
  return c;
}

SparseMatrix assemble_mass(const Mesh& mesh) {
  Triplets trip;
  trip.reserve(mesh.triangles.size() * 9);
  for (const auto& tri : mesh.triangles) {
    const double area = mesh.signed_area(tri);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        trip.emplace_back(tri[a], tri[b], area / 12.0 * (a == b ? 2.0 : 1.0));
      }
    }
  }
  return from_triplets(mesh.node_count(), trip);
}

SparseMatrix assemble_stiffness(const Mesh& mesh) {
  Triplets trip;
  trip.reserve(mesh.triangles.size() * 9);
  for (const auto& tri : mesh.triangles) {
    const ElementGeometry g = element_geometry(mesh, tri);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const double v = g.area * (g.grad[a][0] * g.grad[b][0] + g.grad[a][1] * g.grad[b][1]);
        trip.emplace_back(tri[a], tri[b], v);
      }
    }
  }
  return from_triplets(mesh.node_count(), trip);
}

SparseMatrix assemble_reaction(const Mesh& mesh, const ScalarField& a, double t) {
  Triplets trip;
  trip.reserve(mesh.triangles.size() * 9);
  for (const auto& tri : mesh.triangles) {
    const ElementGeometry g = element_geometry(mesh, tri);
    std::array<double, 3> aq{};
    for (int q = 0; q < 3; ++q) {
      aq[q] = a(t, g.midpoints[q]);
      require_finite(aq[q], "reaction");
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double v = 0.0;
        for (int q = 0; q < 3; ++q) {
          v += aq[q] * kMidpointBasis[i][q] * kMidpointBasis[j][q];
        }
        trip.emplace_back(tri[i], tri[j], g.area / 3.0 * v);
      }
    }
  }
  return from_triplets(mesh.node_count(), trip);
}

SparseMatrix assemble_convection(const Mesh& mesh, const VectorField& b, double t) {
  Triplets trip;
  trip.reserve(mesh.triangles.size() * 9);
  for (const auto& tri : mesh.triangles) {
    const ElementGeometry g = element_geometry(mesh, tri);
    std::array<std::array<double, 2>, 3> bq{};
    for (int q = 0; q < 3; ++q) {
      bq[q] = b(t, g.midpoints[q]);
      require_finite(bq[q][0], "convection");
      require_finite(bq[q][1], "convection");
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double v = 0.0;
        for (int q = 0; q < 3; ++q) {
          v += kMidpointBasis[j][q] * (bq[q][0] * g.grad[i][0] + bq[q][1] * g.grad[i][1]);
        }
        trip.emplace_back(tri[i], tri[j], -g.area / 3.0 * v);
      }
    }
  }
  return from_triplets(mesh.node_count(), trip);
}

SparseMatrix restrict_to_interior(const Mesh& mesh, const SparseMatrix& full) {
  Triplets trip;
  trip.reserve(static_cast<std::size_t>(full.nonZeros()));
  for (int row = 0; row < full.outerSize(); ++row) {
    const int ri = mesh.dof_of_node[row];
    if (ri < 0) continue;
    for (SparseMatrix::InnerIterator it(full, row); it; ++it) {
      const int ci = mesh.dof_of_node[it.col()];
      if (ci >= 0) trip.emplace_back(ri, ci, it.value());
    }
  }
  return from_triplets(mesh.interior_count(), trip);
}

Vector extend_to_nodes(const Mesh& mesh, const Vector& interior_values) {
  Vector full = Vector::Zero(mesh.node_count());
  for (int k = 0; k < mesh.interior_count(); ++k) {
    full[mesh.interior[k]] = interior_values[k];
  }
  return full;
}

SpatialOperators::SpatialOperators(Mesh mesh, Coefficients coefficients)
    : mesh_(std::move(mesh)), coefficients_(std::move(coefficients)) {
  if (!(coefficients_.nu > 0.0)) {
    throw std::invalid_argument("SpatialOperators: diffusion nu must be positive");
  }
  if (!coefficients_.reaction || !coefficients_.convection) {
    throw std::invalid_argument("SpatialOperators: coefficient functions must be set");
  }
  mass_full_ = assemble_mass(mesh_);
  stiffness_full_ = assemble_stiffness(mesh_);
  mass_ = restrict_to_interior(mesh_, mass_full_);
  stiffness_ = restrict_to_interior(mesh_, stiffness_full_);
  if (mesh_.interior_count() > 0) {
    stiffness_factor_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    stiffness_factor_->compute(Eigen::SparseMatrix<double>(stiffness_));
    if (stiffness_factor_->info() != Eigen::Success) {
      throw std::runtime_error("SpatialOperators: stiffness factorization failed");
    }
  }
}

SparseMatrix SpatialOperators::system_matrix(double t) const {
  SparseMatrix full = coefficients_.nu * stiffness_full_;
  full += assemble_reaction(mesh_, coefficients_.reaction, t);
  full += assemble_convection(mesh_, coefficients_.convection, t);
  return restrict_to_interior(mesh_, full);
}

Vector SpatialOperators::solve_stiffness(const Vector& f) const {
  if (!stiffness_factor_) return Vector::Zero(f.size());
  Vector x = stiffness_factor_->solve(f);
  if (stiffness_factor_->info() != Eigen::Success) {
    throw std::runtime_error("SpatialOperators: stiffness solve failed");
  }
  return x;
}

double sobolev_norm(const Vector& v, const SpatialOperators& ops, NormKind kind) {
  switch (kind) {
    case NormKind::H:
      return std::sqrt(std::max(0.0, v.dot(ops.mass() * v)));
    case NormKind::V:
      return std::sqrt(std::max(0.0, v.dot(ops.stiffness() * v)));
    case NormKind::Vprime: {
      const Vector f = ops.mass() * v;
      return std::sqrt(std::max(0.0, f.dot(ops.solve_stiffness(f))));
    }
  }
  return 0.0;
}

Vector project_function(const Mesh& mesh, const std::function<double(Point)>& f) {
  Vector v(mesh.interior_count());
  for (int k = 0; k < mesh.interior_count(); ++k) {
    v[k] = f(mesh.nodes[mesh.interior[k]]);
    if (!std::isfinite(v[k])) {
      throw std::domain_error("project_function: non-finite value at node " +
                              std::to_string(mesh.interior[k]));
    }
  }
  return v;
}

Vector project_function_nodes(const Mesh& mesh, const std::function<double(Point)>& f) {
  return extend_to_nodes(mesh, project_function(mesh, f));
}

}  // namespace rhc
