#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "hsie/curve.hpp"
#include "hsie/fem.hpp"
#include "hsie/linalg.hpp"
#include "hsie/waveguide.hpp"

namespace hsie {

struct DispersionContext {
  Material material;
  double R = 1.0;
  double c_L = 0.0;  // longitudinal wave speed sqrt((lambda+2mu)/rho)
  double c_T = 0.0;  // transversal wave speed sqrt(mu/rho)
};

DispersionContext make_context(const Material& material, double half_width);

// Rayleigh-Lamb dispersion relations
//   F_S = 4 k^2 a b sin(aR) cos(bR) + (k^2-b^2)^2 cos(aR) sin(bR)
//   F_A = 4 k^2 a b cos(aR) sin(bR) + (k^2-b^2)^2 sin(aR) cos(bR)
// with a = sqrt(w^2/c_L^2 - k^2), b = sqrt(w^2/c_T^2 - k^2) (principal
// branch; the magnitude of F does not depend on the branch).
Complex dispersion_f(const DispersionContext& ctx, ModeBranch branch, Complex kappa,
                     Complex omega);

// Deflated counterpart: F_S = b * G_S and F_A = a * G_A with G entire in
// k^2 and sharing exactly the Lamb roots. Root counting and refinement run
// on G; F itself vanishes on the branch manifold b = 0 (resp. a = 0),
// which is a square-root branch point and not a mode.
Complex dispersion_g(const DispersionContext& ctx, ModeBranch branch, Complex kappa,
                     Complex omega);

struct SearchBox {
  double re_lo = 0.0;
  double re_hi = 0.0;
  double im_lo = 0.0;
  double im_hi = 0.0;
};

// All Lamb roots of both branches inside the box at real frequency omega,
// found by argument-principle counting on recursively subdivided rectangles
// and Newton refinement; closed under kappa -> -kappa within the box.
// Real roots carry the group velocity and are classified outgoing/incoming
// by its sign; complex roots by the sign of Im kappa. Sorted by ascending
// |Im kappa|, then |Re kappa|.
std::vector<ClassifiedWavenumber> lamb_roots(const DispersionContext& ctx, double omega,
                                             const SearchBox& box, std::size_t max_count = 64);

// d omega / d kappa on the real root path through (kappa, omega), via the
// implicit derivative of the dispersion relation.
double group_velocity(const DispersionContext& ctx, ModeBranch branch, double kappa,
                      double omega);

// Traction-free transverse mode profile (w1, w2) at eta, and its
// eta-derivative; field = exp(i kappa xi) w(eta). Meaningful when (kappa,
// omega) is a dispersion root of the stated branch.
std::array<Complex, 2> lamb_mode(const DispersionContext& ctx, ModeBranch branch, Complex kappa,
                                 double omega, double eta);
std::array<Complex, 2> lamb_mode_derivative(const DispersionContext& ctx, ModeBranch branch,
                                            Complex kappa, double omega, double eta);
std::array<Complex, 2> lamb_field(const DispersionContext& ctx, ModeBranch branch, Complex kappa,
                                  double omega, double xi, double eta);

struct ReferenceMode {
  ClassifiedWavenumber wavenumber;
  double norm = 1.0;  // L2(-R, R) norm of the profile w
};

// Sum of the first outgoing modes of each branch, each normalized by the
// L2 norm of its transverse profile; callable as a ReferenceField.
struct ReferenceFieldSum {
  DispersionContext ctx;
  double omega = 0.0;
  std::vector<ReferenceMode> modes;

  FieldValue operator()(double x, double y) const;
};

// The first n_symmetric + n_antisymmetric outgoing modes at omega
// (ascending |Im kappa|, then |Re kappa|).
ReferenceFieldSum reference_field(const DispersionContext& ctx, double omega,
                                  std::size_t n_symmetric = 5, std::size_t n_antisymmetric = 4);

// Fixed-kappa modal problem: generalized eigenvalues omega^2 of the
// transverse operator obtained from the exterior block structure by the
// substitution S_l -> k^2, D_l -> i k, D_l^T -> -i k, M_l -> 1.
std::vector<Complex> transverse_modal_evp(const TransverseMatrices& trans,
                                          const Material& material, Complex kappa);

struct EssentialCurve {
  std::vector<double> r;       // curve parameter samples, ascending
  std::vector<Complex> omega;  // one frequency sample per r
};

// Samples kappa = -i gamma(r) over n_samples points of [r_lo, r_hi], solves
// the modal problem at each, keeps principal square roots with
// 0 <= Re omega <= omega_re_max, and chains the samples into curves by
// nearest-neighbor continuation. Near r = 0 the curves pass through the
// cut-on frequencies kappa = 0.
std::vector<EssentialCurve> essential_spectrum(const PoleParams& params,
                                               const TransverseMatrices& trans,
                                               const Material& material, double r_lo, double r_hi,
                                               std::size_t n_samples, double omega_re_max);

enum class SpectrumLabel { ResonanceCandidate, EssentialCluster, Unclassified };

struct SpectrumResult {
  std::vector<Complex> eigenvalues;  // omega, principal square roots (Re >= 0)
  std::vector<double> residuals;
  std::vector<SpectrumLabel> classification;
  std::vector<EssentialCurve> essential;
};

// Shift-and-invert Arnoldi on the pencil (A, B) at each omega-plane shift
// (the pencil shift is shift^2), merged and de-duplicated within 1e-6
// relative. Deterministic: merging is by sorted order.
SpectrumResult resonances(const AssembledSystem& system, const std::vector<Complex>& shifts,
                          std::size_t krylov_dim, std::size_t n_wanted);

// Labels run_a's eigenvalues: within tol of an essential polyline of either
// run -> EssentialCluster; else present in both runs within tol ->
// ResonanceCandidate; else Unclassified.
SpectrumResult classify_spectrum(const SpectrumResult& run_a, const SpectrumResult& run_b,
                                 double tol);

// Frequencies in (omega_lo, omega_hi) where a real root pair of F_S or F_A
// coalesces or a real root reaches kappa = 0 (cut-on), refined to 1e-6.
std::vector<double> zero_group_velocity_frequencies(const DispersionContext& ctx, double omega_lo,
                                                    double omega_hi);

struct DirichletEigs {
  std::vector<double> omega;                  // ascending
  std::vector<std::vector<Complex>> vectors;  // full-length displacement vectors
};

// Smallest n_wanted eigenfrequencies of the fixed-boundary rectangle.
DirichletEigs dirichlet_eigenvalues(const MeshBlock& block, const Material& material,
                                    std::size_t p, std::size_t n_wanted);

}  // namespace hsie
