#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include "hsie/curve.hpp"
#include "hsie/fem.hpp"
#include "hsie/hardy1d.hpp"
#include "hsie/linalg.hpp"

namespace hsie {

// Semi-infinite waveguide attached to a straight boundary segment. The port
// plane is axis=value with the exterior on the `outward` side; (lo,hi) is the
// transverse span. The port frame (e_xi, e_eta) is the proper rotation of
// (e_x, e_y) with e_xi pointing outward; eta runs over (-R, R), R=(hi-lo)/2.
struct WaveguidePort {
  int id = 0;
  char axis = 'x';
  double value = 0.0;
  double lo = 0.0, hi = 0.0;
  int outward = +1;
  Material material;
  PoleParams params;
  std::size_t n_long = 2;
};

// Exterior element matrices, flat index (i, j, l) -> (i*n_long + j)*n_t + l
// over component i, longitudinal layer j, transverse dof l.
std::pair<SparseComplexMatrix, SparseComplexMatrix> assemble_port(
    const Material& material, const LongitudinalMatrices& longitudinal,
    const TransverseMatrices& transverse);

struct PortLayout {
  WaveguidePort desc;
  TraceLine trace;
  std::vector<double> eta_breaks;          // centered transverse breakpoints
  std::array<int, 2> comp_index{};         // port component i = global component comp_index[i]
  std::array<double, 2> comp_sign{};       // ... times comp_sign[i]
  std::size_t n_t = 0;
  std::size_t order = 1;                   // transverse basis order (= interior p)
  std::size_t base = 0;                    // first global index of the j>=2 block
  LongitudinalMatrices long_mats;
  TransverseMatrices trans_mats;
  SparseComplexMatrix a_ext, b_ext;
  std::vector<std::size_t> global_index;   // port-local flat dof -> global dof
  std::vector<double> global_sign;
};

struct AssembledSystem {
  SparseComplexMatrix a;
  SparseComplexMatrix b;
  std::size_t n_interior = 0;  // leading displacement dofs (2 per interior scalar)
  std::vector<PortLayout> ports;
};

// Global pencil A - omega^2 B: interior + folded port elements (+ optional
// interface terms added to A). The j=1 longitudinal layer of every port is
// identified with the interior trace dofs on its segment.
AssembledSystem assemble_global(const MeshTopology& mesh, const DofMap& dofs,
                                const InteriorSystem& interior,
                                const std::vector<WaveguidePort>& ports,
                                const std::vector<SparseComplexMatrix>& interface_terms = {});

struct ScatteringSolution {
  std::vector<Complex> coefficients;
  double residual = 0.0;
};

// Direct solve of (A - omega^2 B) x = rhs, with optional Dirichlet data
// (fixed mask + values over the global dofs).
ScatteringSolution scattering_solve(const AssembledSystem& system, Complex omega,
                                    const std::vector<Complex>& rhs,
                                    const std::vector<char>& fixed = {},
                                    const std::vector<Complex>& fixed_values = {});

struct IncidentMode {
  ClassifiedWavenumber wavenumber;  // must be IncomingPropagating (port frame)
  Complex amplitude{1.0, 0.0};
  // (w1, w2, w1', w2') at eta, in the port frame at xi=0
  std::function<std::array<Complex, 4>(double)> shape;
};

// Total-field/scattered-field source terms for incident modes entering
// through one port: the load carries the incident Neumann trace on the port
// plane plus (A_ext - omega^2 B_ext) applied to the incident Dirichlet trace
// padding of the first longitudinal layer.
std::vector<Complex> incident_rhs(const AssembledSystem& system, std::size_t port_index,
                                  const std::vector<IncidentMode>& modes, Complex omega);

// Displacement evaluation that accepts global coefficient vectors (interior
// block leads; exterior coefficients are ignored).
FieldSample evaluate(const MeshTopology& mesh, const DofMap& dofs,
                     const std::vector<Complex>& coefficients, double x, double y);

// L2 norm over the region of the Frobenius norm of sigma(u).
double stress_norm(const MeshTopology& mesh, const DofMap& dofs,
                   const std::vector<Complex>& coefficients, const InterfaceRect& region);

struct FieldValue {
  std::array<Complex, 2> u{};
  std::array<std::array<Complex, 2>, 2> grad{};
};
using ReferenceField = std::function<FieldValue(double, double)>;

double h1_relative_error(const MeshTopology& mesh, const DofMap& dofs,
                         const std::vector<Complex>& coefficients, const ReferenceField& reference,
                         const InterfaceRect& region);

}  // namespace hsie
