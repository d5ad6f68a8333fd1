#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include "hsie/linalg.hpp"

namespace hsie {

struct Material {
  double E = 1.0;
  double nu = 0.25;
  double rho = 1.0;

  double mu() const;
  double lambda() const;
};

// (mu, lambda) for plane strain
std::pair<double, double> lame_from(double E, double nu);

struct MeshBlock {
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  std::size_t nx = 1, ny = 1;
  std::size_t material = 0;
};

enum class BoundaryCondition { Neumann, Dirichlet, Port };

// Straight boundary piece: axis='x' tags the segment x=value, y in [lo,hi];
// axis='y' tags y=value, x in [lo,hi]. Untagged exterior edges are Neumann.
struct BoundarySegment {
  char axis = 'x';
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  BoundaryCondition bc = BoundaryCondition::Dirichlet;
  int port_id = -1;
};

// Closed interface chain: the boundary of an axis-aligned rectangle whose
// sides lie on mesh lines.
struct InterfaceRect {
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
};

struct BlockMesh {
  std::vector<MeshBlock> blocks;
  std::vector<Material> materials{Material{}};
  std::vector<BoundarySegment> boundary_overrides;
  std::vector<InterfaceRect> interfaces;
};

struct MeshElement {
  std::size_t block = 0;
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
  std::size_t material = 0;
  std::array<std::size_t, 4> corners{};  // (x0,y0), (x1,y0), (x0,y1), (x1,y1)
};

struct MeshEdge {
  std::size_t v0 = 0, v1 = 0;  // ascending coordinate
  bool horizontal = false;
  std::ptrdiff_t elem_lo = -1, elem_hi = -1;  // below/left, above/right
  BoundaryCondition bc = BoundaryCondition::Neumann;
  int port_id = -1;
  bool boundary = false;
};

class MeshTopology {
 public:
  explicit MeshTopology(const BlockMesh& spec);

  const BlockMesh& spec() const { return spec_; }
  const std::vector<std::array<double, 2>>& vertices() const { return vertices_; }
  const std::vector<MeshElement>& elements() const { return elements_; }
  const std::vector<MeshEdge>& edges() const { return edges_; }
  // bottom, top, left, right edge ids of element e
  const std::array<std::size_t, 4>& element_edges(std::size_t e) const { return element_edges_[e]; }
  const Material& material_of(const MeshElement& e) const;

  // Element containing (x,y); boundary-inclusive, error when outside.
  std::size_t locate(double x, double y) const;

 private:
  BlockMesh spec_;
  std::vector<std::array<double, 2>> vertices_;
  std::vector<MeshElement> elements_;
  std::vector<MeshEdge> edges_;
  std::vector<std::array<std::size_t, 4>> element_edges_;
  std::vector<std::size_t> block_elem_offset_;
};

// 1D hierarchical shape set on [-1,1]: index 0 = left vertex, 1 = right
// vertex, k >= 2 = integrated-Legendre bubble of degree k.
struct Shape1d {
  std::vector<double> value;
  std::vector<double> deriv;
};
Shape1d shape1d(std::size_t p, double t);

struct DofMap {
  std::size_t order = 1;
  std::size_t n_scalar = 0;
  std::size_t n_vertices = 0;
  // per element, (p+1)^2 scalar ids, local index iy*(p+1)+ix
  std::vector<std::vector<std::size_t>> element_scalars;
  // per edge, p-1 scalar ids
  std::vector<std::vector<std::size_t>> edge_scalars;
  std::vector<char> dirichlet;  // per scalar dof
};

DofMap build_dof_map(const MeshTopology& mesh, std::size_t p);

// Displacement unknown index of component c on scalar dof g.
inline std::size_t displacement_dof(std::size_t g, int c) { return 2 * g + static_cast<std::size_t>(c); }

struct InteriorSystem {
  SparseComplexMatrix a;  // elastic stiffness, symmetric
  SparseComplexMatrix b;  // mass, symmetric positive definite
};

InteriorSystem assemble_interior(const MeshTopology& mesh, const DofMap& dofs);

// alpha * integral over the interface chain of u.v
SparseComplexMatrix interface_mass(const MeshTopology& mesh, const DofMap& dofs,
                                   std::size_t interface_index, Complex alpha);

// Transverse (port cross-section) matrices over a subdivided interval.
// D has the derivative on the row index: D[l][m] = integral phi_l' phi_m.
// Dof order: vertices ascending, then per-segment bubbles.
struct TransverseMatrices {
  std::size_t n = 0;
  DenseComplexMatrix mass;
  DenseComplexMatrix drift;
  DenseComplexMatrix stiffness;
};

TransverseMatrices transverse_matrices(std::size_t p, const std::vector<double>& breakpoints);

// Scalar dofs along the straight mesh line (axis='x': x=value, y in [lo,hi]),
// ordered by traversal parameter; breaks[i] = distance of i-th mesh node from
// the traversal start. Bubble dofs of segment s sit between vertices; signs
// carry the parity flip (-1)^k when the traversal reverses the global edge
// orientation.
struct TraceLine {
  std::vector<double> breaks;
  std::vector<std::size_t> scalar_dofs;
  std::vector<double> signs;
};

TraceLine trace_line(const MeshTopology& mesh, const DofMap& dofs, char axis, double value,
                     double lo, double hi, bool reversed);

using VectorField = std::function<std::array<Complex, 2>(double, double)>;

// Interpolation (vertices) + edgewise L2 projection (bubbles) of the field on
// Dirichlet dofs; full-length displacement vector, zero elsewhere.
std::vector<Complex> project_dirichlet(const MeshTopology& mesh, const DofMap& dofs,
                                       const VectorField& field);

struct ReducedSystem {
  SparseComplexMatrix a;
  SparseComplexMatrix b;
  std::vector<std::size_t> to_full;      // reduced index -> full index
  std::vector<Complex> lift;             // full length
  std::vector<Complex> rhs_correction;   // reduced length, -(A lift) on kept dofs
};

ReducedSystem dirichlet_lift(const SparseComplexMatrix& a, const SparseComplexMatrix& b,
                             const std::vector<char>& fixed_displacement,
                             const std::vector<Complex>& values);

std::vector<Complex> expand_reduced(const ReducedSystem& sys, const std::vector<Complex>& reduced);

struct FieldSample {
  std::array<Complex, 2> u{};
  std::array<std::array<Complex, 2>, 2> grad{};  // grad[i][j] = d u_i / d x_j
};

FieldSample evaluate_displacement(const MeshTopology& mesh, const DofMap& dofs,
                                  const std::vector<Complex>& full_solution, double x, double y);

}  // namespace hsie
