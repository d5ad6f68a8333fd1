#pragma once

#include <cstddef>
#include <vector>

#include "hsie/curve.hpp"
#include "hsie/linalg.hpp"

namespace hsie {

// Longitudinal infinite-element matrices. All three are omega-independent,
// tridiagonal, and stored dense. M and S are complex-symmetric; D has zero
// diagonal except entry (1,1).
//
// Convention note: the assembled matrices are the Gram integrals of the
// time-domain basis, M = integral(phi_j phi_k), D = integral(phi_j' phi_k),
// S = integral(phi_j' phi_k'). Relative to the compact tridiagonal patterns
// these differ by a factor 1/2 on M and a sign on D(1,1); this is the unique
// choice that reproduces the exact 1D Dirichlet-to-Neumann value (the
// orientation arbiter), and it makes D + D^T = -e1 e1^T.
struct LongitudinalMatrices {
  std::size_t n = 0;
  DenseComplexMatrix mass;
  DenseComplexMatrix drift;
  DenseComplexMatrix stiffness;
};

struct HardyBasisSpec {
  PoleParams params{};
  std::size_t n = 1;
};

enum class PairingKind { Mass, Drift, Stiffness };

LongitudinalMatrices assemble_long(const PoleParams& p, std::size_t n);

// Time-domain basis value phi_j(x) by exact partial fractions of its
// transform; phi_1(x) = exp(s0 x), phi_j(0) = 0 for j >= 2.
Complex eval_basis(const PoleParams& p, std::size_t j, double x);

// Derivative phi_j'(x), same partial-fraction route.
Complex eval_basis_derivative(const PoleParams& p, std::size_t j, double x);

// Contour-quadrature pairing (-i/2pi) integral of F_j(s) G_k(-s) along the
// separating curve, with a rational tail model subtracted and reinstated in
// closed form. Truncation radius and panel count are both refined until a
// doubling changes the value by less than 1e-10.
Complex hardy_pairing_oracle(const PoleParams& p, std::size_t j, std::size_t k, PairingKind kind);

struct Convected1dSolution {
  std::vector<Complex> coefficients;
  Complex trace_value{};
};

// Galerkin solve of -u'' + u' - omega^2 u = 0 on (0,inf) with u'(0) given:
// (S + D - omega^2 M) U = (-u0', 0, ..., 0)^T; trace_value = U_1.
Convected1dSolution solve_convected_1d(const PoleParams& p, Complex omega, Complex neumann_datum,
                                       std::size_t n);

}  // namespace hsie
