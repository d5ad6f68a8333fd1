#include "hsie/curve.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace hsie {

bool is_outgoing(ModeClass c) {
  return c == ModeClass::OutgoingPropagating || c == ModeClass::OutgoingEvanescent;
}

bool is_propagating(ModeClass c) {
  return c == ModeClass::OutgoingPropagating || c == ModeClass::IncomingPropagating;
}

double g_value(const PoleParams& p, Complex s) {
  double num = std::abs(s - p.s0) * std::abs(s - p.s1);
  double den = std::abs(s + p.s0) * std::abs(s + p.s1);
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return num / den;
}

CurveSide side_of_curve(const PoleParams& p, Complex s, double tol) {
  if (!(tol > 0.0)) throw std::runtime_error("side_of_curve: tolerance must be positive");
  double g = g_value(p, s);
  if (g < 1.0 - tol) return CurveSide::Plus;
  if (g > 1.0 + tol) return CurveSide::Minus;
  return CurveSide::On;
}

Complex gamma_point(const PoleParams& p, double r) {
  Complex sum = p.s0 + p.s1;
  Complex bracket = r * r * sum + std::norm(p.s0) * p.s1 + std::norm(p.s1) * p.s0;
  double scale = std::abs(p.s0) + std::abs(p.s1) + std::abs(r);
  if (std::abs(bracket) < 1e-300 * std::max(1.0, scale))
    throw std::runtime_error("gamma_point: degenerate parameterization, bracket vanishes");
  return Complex(0.0, -1.0) * r * bracket / std::abs(bracket);
}

bool admissible(const PoleParams& p) {
  if (!(p.s0.real() < 0.0 && p.s1.real() < 0.0)) return false;
  if (!((p.s0 + p.s1).imag() > 0.0)) return false;
  return std::norm(p.s0) * p.s1.imag() + std::norm(p.s1) * p.s0.imag() < 0.0;
}

double zeta(const PoleParams& p) {
  if (!admissible(p)) throw std::runtime_error("zeta: parameters not admissible");
  double num = -(std::norm(p.s0) * p.s1.imag() + std::norm(p.s1) * p.s0.imag());
  return std::sqrt(num / (p.s0 + p.s1).imag());
}

PoleParams params_case1(double direction_real_part, double direction_imag_part) {
  if (!(direction_real_part < 0.0))
    throw std::runtime_error("params_case1: direction must have negative real part");
  if (!(direction_imag_part > 0.0))
    throw std::runtime_error("params_case1: direction must have positive imaginary part");
  Complex d(direction_real_part, direction_imag_part);
  return PoleParams{d, d};
}

std::pair<bool, double> separates(const PoleParams& p,
                                  const std::vector<ClassifiedWavenumber>& spectrum) {
  bool ok = true;
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& cw : spectrum) {
    double g = g_value(p, Complex(0.0, 1.0) * cw.kappa);
    if (is_outgoing(cw.mode_class) ? !(g < 1.0) : !(g > 1.0)) ok = false;
    margin = std::min(margin, std::abs(g - 1.0));
  }
  return {ok, margin};
}

double choose_theta(const std::vector<ClassifiedWavenumber>& spectrum) {
  double backward = 0.0;
  double next_fwd = std::numeric_limits<double>::infinity();
  for (const auto& cw : spectrum) {
    if (!is_propagating(cw.mode_class) || !is_outgoing(cw.mode_class)) continue;
    double k = cw.kappa.real();
    if (k < 0.0)
      backward = std::max(backward, -k);
    else
      next_fwd = std::min(next_fwd, k);
  }
  if (!std::isfinite(next_fwd))
    throw std::runtime_error("choose_theta: no forward outgoing propagating wavenumber");
  if (backward >= next_fwd)
    throw std::runtime_error("choose_theta: backward modulus not below next outgoing modulus");
  return 0.5 * (backward + next_fwd);
}

PoleParams params_case2(double theta, const PoleParams& seed,
                        const std::vector<ClassifiedWavenumber>& spectrum) {
  if (!(theta > 0.0)) throw std::runtime_error("params_case2: theta must be positive");
  if (!admissible(seed)) throw std::runtime_error("params_case2: seed not admissible");
  const int grid = 64;
  PoleParams best{};
  double best_margin = -1.0;
  std::vector<ClassifiedWavenumber> best_violators;
  for (int step = 0; step < grid; ++step) {
    double t = static_cast<double>(step) / grid;
    Complex m = t * std::conj(seed.s0) + (1.0 - t) * seed.s1;
    PoleParams raw{seed.s0, m};
    if (!admissible(raw)) continue;
    double c = theta / zeta(raw);
    PoleParams scaled{raw.s0 * c, raw.s1 * c};
    auto [ok, margin] = separates(scaled, spectrum);
    if (ok && margin >= 1e-6) return scaled;
    if (margin > best_margin) {
      best_margin = margin;
      best = scaled;
      best_violators.clear();
      for (const auto& cw : spectrum) {
        double g = g_value(scaled, Complex(0.0, 1.0) * cw.kappa);
        if (is_outgoing(cw.mode_class) ? !(g < 1.0) : !(g > 1.0)) best_violators.push_back(cw);
      }
    }
  }
  std::ostringstream msg;
  msg << "params_case2: no homotopy step separates the spectrum; violating wavenumbers:";
  for (const auto& cw : best_violators)
    msg << " (" << cw.kappa.real() << (cw.kappa.imag() < 0 ? "-" : "+")
        << std::abs(cw.kappa.imag()) << "i)";
  throw std::runtime_error(msg.str());
}

double error_indicator(const PoleParams& p, Complex kappa) {
  return g_value(p, Complex(0.0, 1.0) * kappa);
}

}  // namespace hsie
