#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "hsie/linalg.hpp"

namespace hsie {

// Poles of the two-pole Hardy basis; the separating curve is the algebraic
// variety g_{s0,s1}(s) = 1.
struct PoleParams {
  Complex s0{};
  Complex s1{};
};

enum class CurveSide { Plus, On, Minus };

enum class ModeBranch { Symmetric, Antisymmetric };

enum class ModeClass {
  OutgoingPropagating,
  IncomingPropagating,
  OutgoingEvanescent,
  IncomingEvanescent,
};

struct ClassifiedWavenumber {
  Complex kappa{};
  ModeBranch branch = ModeBranch::Symmetric;
  ModeClass mode_class = ModeClass::OutgoingPropagating;
  std::optional<double> group_velocity;  // d omega / d kappa, propagating only
};

bool is_outgoing(ModeClass c);
bool is_propagating(ModeClass c);

// g_{s0,s1}(s) = |s-s0||s-s1| / (|s+s0||s+s1|); +inf at s = -s0, -s1.
double g_value(const PoleParams& p, Complex s);

CurveSide side_of_curve(const PoleParams& p, Complex s, double tol = 1e-9);

// Explicit parameterization of the curve, |gamma(r)| = |r|.
Complex gamma_point(const PoleParams& p, double r);

// Re(s0)<0, Re(s1)<0, Im(s0+s1)>0, |s0|^2 Im(s1) + |s1|^2 Im(s0) < 0.
bool admissible(const PoleParams& p);

// Modulus of the two imaginary-axis crossings +-i*zeta.
double zeta(const PoleParams& p);

// Equal poles along the requested direction; the curve is the straight line
// i(s0+s1)R with i(0,inf) on the Plus side.
PoleParams params_case1(double direction_real_part, double direction_imag_part);

// Homotopy from the seed toward (s0, conj(s0)), rescaled so zeta = theta at
// every step; stops at the first grid t that separates the spectrum.
PoleParams params_case2(double theta, const PoleParams& seed,
                        const std::vector<ClassifiedWavenumber>& spectrum);

// Midpoint of the backward-mode modulus and the smallest larger real
// outgoing modulus.
double choose_theta(const std::vector<ClassifiedWavenumber>& spectrum);

// ok iff every outgoing i*kappa lies strictly inside (g<1) and every incoming
// strictly outside (g>1); margin = min |g-1|.
std::pair<bool, double> separates(const PoleParams& p,
                                  const std::vector<ClassifiedWavenumber>& spectrum);

// g at i*kappa; the longitudinal approximation error behaves like this value
// to the power N_long.
double error_indicator(const PoleParams& p, Complex kappa);

}  // namespace hsie
