#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace rhc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Compressed sparse row storage.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Point {
  double x1 = 0.0;
  double x2 = 0.0;
};

/// Uniform P1 triangulation of the unit square. Every lattice cell is split
/// along its (lower-left, upper-right) diagonal.
struct Mesh {
  int nx = 0;
  int ny = 0;
  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<bool> boundary_mask;
  /// Node index of every interior (free) degree of freedom, ascending.
  std::vector<int> interior;
  /// Inverse of `interior`; -1 on Dirichlet nodes.
  std::vector<int> dof_of_node;

  [[nodiscard]] int node_count() const { return static_cast<int>(nodes.size()); }
  [[nodiscard]] int interior_count() const { return static_cast<int>(interior.size()); }
  [[nodiscard]] double hx() const { return 1.0 / (nx - 1); }
  [[nodiscard]] double hy() const { return 1.0 / (ny - 1); }
  [[nodiscard]] double signed_area(const std::array<int, 3>& tri) const;
};

/// Builds an nx-by-ny node lattice on (0,1)^2. Throws std::invalid_argument
/// unless nx, ny >= 2.
Mesh build_uniform_mesh(int nx, int ny);

using ScalarField = std::function<double(double t, Point x)>;
using VectorField = std::function<std::array<double, 2>(double t, Point x)>;

/// Coefficients of  y_t - nu*Lap(y) + a*y + div(b*y) = f.
struct Coefficients {
  double nu = 0.1;
  ScalarField reaction;
  VectorField convection;
};

/// a(t,x) = -2.8 - 0.8|sin(t+x1)|, b = (-0.01(x1+x2), 0.2 x1 x2 cos t), nu = 0.1.
Coefficients paper_coefficients();
/// a = 0, b = 0.
Coefficients heat_coefficients(double nu);

SparseMatrix assemble_mass(const Mesh& mesh);
SparseMatrix assemble_stiffness(const Mesh& mesh);

/// Entries int a(t,x) phi_j phi_i dx, edge-midpoint rule on every triangle.
/// Throws std::domain_error on a non-finite coefficient value.
SparseMatrix assemble_reaction(const Mesh& mesh, const ScalarField& a, double t);

/// Entries -int (b(t,x) phi_j) . grad(phi_i) dx (row i = test function),
/// edge-midpoint rule. Throws std::domain_error on non-finite values.
SparseMatrix assemble_convection(const Mesh& mesh, const VectorField& b, double t);

/// Restriction P A P^T onto the interior dofs.
SparseMatrix restrict_to_interior(const Mesh& mesh, const SparseMatrix& full);
/// Interior-dof vector extended by zeros to all nodes.
Vector extend_to_nodes(const Mesh& mesh, const Vector& interior_values);

/// Time-independent FEM operators plus the coefficient functions needed to
/// assemble A(t) = nu*K + A_reac(t) + A_conv(t). Immutable after construction.
class SpatialOperators {
 public:
  SpatialOperators(Mesh mesh, Coefficients coefficients);

  [[nodiscard]] const Mesh& mesh() const { return mesh_; }
  [[nodiscard]] const Coefficients& coefficients() const { return coefficients_; }
  [[nodiscard]] double nu() const { return coefficients_.nu; }

  /// Full-node matrices (boundary nodes included).
  [[nodiscard]] const SparseMatrix& mass_full() const { return mass_full_; }
  [[nodiscard]] const SparseMatrix& stiffness_full() const { return stiffness_full_; }
  /// Interior-dof matrices.
  [[nodiscard]] const SparseMatrix& mass() const { return mass_; }
  [[nodiscard]] const SparseMatrix& stiffness() const { return stiffness_; }
  [[nodiscard]] int dofs() const { return mesh_.interior_count(); }

  /// Interior restriction of nu*K + A_reac(t) + A_conv(t).
  [[nodiscard]] SparseMatrix system_matrix(double t) const;

  /// Solves K x = f on interior dofs.
  [[nodiscard]] Vector solve_stiffness(const Vector& f) const;

 private:
  Mesh mesh_;
  Coefficients coefficients_;
  SparseMatrix mass_full_;
  SparseMatrix stiffness_full_;
  SparseMatrix mass_;
  SparseMatrix stiffness_;
  std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> stiffness_factor_;
};

enum class NormKind { H, V, Vprime };

/// H: sqrt(v'Mv); V: sqrt(v'Kv); Vprime: sqrt(f'K^{-1}f) with f = Mv.
double sobolev_norm(const Vector& v, const SpatialOperators& ops, NormKind kind);

/// Nodal interpolation onto interior dofs (Dirichlet nodes dropped).
/// Throws std::domain_error on a non-finite value.
Vector project_function(const Mesh& mesh, const std::function<double(Point)>& f);

/// Same interpolation, but returned on all nodes with zero Dirichlet values.
Vector project_function_nodes(const Mesh& mesh, const std::function<double(Point)>& f);

}  // namespace rhc
