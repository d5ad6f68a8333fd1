#include "hsie/hardy1d.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hsie {

namespace {

double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

Complex ipow(Complex z, int e) {
  Complex r = 1.0;
  for (int i = 0; i < e; ++i) r *= z;
  return r;
}

struct BasisExponents {
  int a = 0;
  int b = 0;
};

BasisExponents exponents(std::size_t j) {
  int k = static_cast<int>(j) - 2;
  return {(k + 1) / 2, k / 2};
}

// phi_j(0), phi_j'(0), phi_j''(0), phi_j'''(0) from the large-s expansion of
// the transform.
struct InitialValues {
  Complex f0, f1, f2, f3;
};

InitialValues initial_values(const PoleParams& p, std::size_t j) {
  if (j == 1) return {1.0, p.s0, p.s0 * p.s0, p.s0 * p.s0 * p.s0};
  auto [a, b] = exponents(j);
  Complex sum = p.s0 + p.s1;
  Complex c1 = (2.0 * a + 1.0) * p.s0 + (2.0 * b + 1.0) * p.s1;
  return {0.0, sum, sum * c1, sum * (c1 * c1 + p.s0 * p.s0 + p.s1 * p.s1) / 2.0};
}

Complex transform(const PoleParams& p, std::size_t j, Complex s) {
  if (j == 1) return 1.0 / (s - p.s0);
  auto [a, b] = exponents(j);
  return (p.s0 + p.s1) * ipow(s + p.s0, a) * ipow(s + p.s1, b) /
         (ipow(s - p.s0, a + 1) * ipow(s - p.s1, b + 1));
}

Complex transform_derivative(const PoleParams& p, std::size_t j, Complex s) {
  if (j == 1) return p.s0 / (s - p.s0);
  return s * transform(p, j, s);
}

struct CurveSample {
  Complex point;
  Complex tangent;
};

CurveSample curve_sample(const PoleParams& p, double r) {
  Complex sum = p.s0 + p.s1;
  Complex q = std::norm(p.s0) * p.s1 + std::norm(p.s1) * p.s0;
  Complex w = r * r * sum + q;
  double aw = std::abs(w);
  if (aw == 0.0) throw std::runtime_error("hardy pairing: degenerate curve parameterization");
  Complex wp = 2.0 * r * sum;
  double dabs = (std::conj(w) * wp).real() / aw;
  Complex unit = w / aw;
  Complex mi(0.0, -1.0);
  return {mi * r * unit, mi * (unit + r * (wp - unit * dabs) / aw)};
}

}  // namespace

LongitudinalMatrices assemble_long(const PoleParams& p, std::size_t n) {
  if (n < 1) throw std::runtime_error("assemble_long: n must be at least 1");
  if (p.s0 == Complex(0.0) || p.s1 == Complex(0.0))
    throw std::runtime_error("assemble_long: poles must be nonzero");
  LongitudinalMatrices lm;
  lm.n = n;
  lm.mass = DenseComplexMatrix(n, n);
  lm.drift = DenseComplexMatrix(n, n);
  lm.stiffness = DenseComplexMatrix(n, n);
  Complex sum = p.s0 + p.s1;
  Complex mf = -1.0 / (2.0 * p.s0 * p.s1);
  lm.mass(0, 0) = mf * p.s1;
  lm.stiffness(0, 0) = -0.5 * p.s0;
  lm.drift(0, 0) = -0.5;
  for (std::size_t i = 1; i < n; ++i) {
    lm.mass(i, i) = mf * sum;
    lm.stiffness(i, i) = -0.5 * sum;
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    Complex moff = mf * -(i % 2 == 0 ? p.s1 : p.s0);
    Complex soff = -0.5 * (i % 2 == 0 ? p.s0 : p.s1);
    lm.mass(i, i + 1) = moff;
    lm.mass(i + 1, i) = moff;
    lm.stiffness(i, i + 1) = soff;
    lm.stiffness(i + 1, i) = soff;
    lm.drift(i, i + 1) = 0.5;
    lm.drift(i + 1, i) = -0.5;
  }
  return lm;
}

namespace {

struct PartialFractions {
  Complex pole0{};
  std::vector<Complex> coef0;  // coef0[m-1] multiplies 1/(s-pole0)^m
  Complex pole1{};
  std::vector<Complex> coef1;  // empty when the poles coincide
};

using Series = std::vector<Complex>;

Series series_mul(const Series& x, const Series& y, std::size_t len) {
  Series z(len, 0.0);
  for (std::size_t i = 0; i < std::min(len, x.size()); ++i)
    for (std::size_t j = 0; i + j < len && j < y.size(); ++j) z[i + j] += x[i] * y[j];
  return z;
}

// (u + alpha)^a as a series in u
Series series_shifted_power(Complex alpha, int a, std::size_t len) {
  Series s(len, 0.0);
  for (std::size_t m = 0; m < len && static_cast<int>(m) <= a; ++m)
    s[m] = binom(a, static_cast<int>(m)) * ipow(alpha, a - static_cast<int>(m));
  return s;
}

// (u + beta)^{-q} as a series in u, beta nonzero
Series series_shifted_inverse_power(Complex beta, int q, std::size_t len) {
  Series s(len, 0.0);
  Complex base = 1.0 / ipow(beta, q);
  for (std::size_t m = 0; m < len; ++m) {
    double sign = (m % 2 == 0) ? 1.0 : -1.0;
    s[m] = base * sign * binom(q - 1 + static_cast<int>(m), static_cast<int>(m)) /
           ipow(beta, static_cast<int>(m));
  }
  return s;
}

PartialFractions partial_fractions(const PoleParams& p, std::size_t j) {
  PartialFractions pf;
  if (j == 1) {
    pf.pole0 = p.s0;
    pf.coef0 = {1.0};
    return pf;
  }
  auto [a, b] = exponents(j);
  Complex sum = p.s0 + p.s1;
  if (p.s0 == p.s1) {
    int order = a + b + 2;
    std::size_t len = static_cast<std::size_t>(order);
    Series h = series_shifted_power(2.0 * p.s0, a + b, len);
    pf.pole0 = p.s0;
    pf.coef0.resize(len);
    for (int m = 1; m <= order; ++m) pf.coef0[m - 1] = sum * h[order - m];
    return pf;
  }
  int p0 = a + 1, q = b + 1;
  Complex d = p.s1 - p.s0;
  {
    std::size_t len = static_cast<std::size_t>(p0);
    Series h = series_mul(series_shifted_power(2.0 * p.s0, a, len),
                          series_shifted_power(sum, b, len), len);
    // 1/(s-s1)^q = 1/(u-d)^q = (-1)^q (d-u)^{-q}
    Series inv = series_shifted_inverse_power(-d, q, len);
    h = series_mul(h, inv, len);
    pf.pole0 = p.s0;
    pf.coef0.resize(len);
    for (int m = 1; m <= p0; ++m) pf.coef0[m - 1] = sum * h[p0 - m];
  }
  {
    std::size_t len = static_cast<std::size_t>(q);
    Series h = series_mul(series_shifted_power(sum, a, len),
                          series_shifted_power(2.0 * p.s1, b, len), len);
    Series inv = series_shifted_inverse_power(d, p0, len);
    h = series_mul(h, inv, len);
    pf.pole1 = p.s1;
    pf.coef1.resize(len);
    for (int m = 1; m <= q; ++m) pf.coef1[m - 1] = sum * h[q - m];
  }
  return pf;
}

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

Complex pf_value(const std::vector<Complex>& coef, Complex pole, double x) {
  Complex acc = 0.0;
  for (std::size_t m = 1; m <= coef.size(); ++m)
    acc += coef[m - 1] * std::pow(x, static_cast<double>(m - 1)) /
           factorial(static_cast<int>(m) - 1);
  return acc * std::exp(pole * x);
}

Complex pf_derivative(const std::vector<Complex>& coef, Complex pole, double x) {
  Complex acc = 0.0;
  for (std::size_t m = 1; m <= coef.size(); ++m) {
    Complex term = pole * std::pow(x, static_cast<double>(m - 1)) /
                   factorial(static_cast<int>(m) - 1);
    if (m >= 2)
      term += std::pow(x, static_cast<double>(m - 2)) / factorial(static_cast<int>(m) - 2);
    acc += coef[m - 1] * term;
  }
  return acc * std::exp(pole * x);
}

}  // namespace

Complex eval_basis(const PoleParams& p, std::size_t j, double x) {
  if (j < 1) throw std::runtime_error("eval_basis: index starts at 1");
  PartialFractions pf = partial_fractions(p, j);
  Complex v = pf_value(pf.coef0, pf.pole0, x);
  if (!pf.coef1.empty()) v += pf_value(pf.coef1, pf.pole1, x);
  return v;
}

Complex eval_basis_derivative(const PoleParams& p, std::size_t j, double x) {
  if (j < 1) throw std::runtime_error("eval_basis_derivative: index starts at 1");
  PartialFractions pf = partial_fractions(p, j);
  Complex v = pf_derivative(pf.coef0, pf.pole0, x);
  if (!pf.coef1.empty()) v += pf_derivative(pf.coef1, pf.pole1, x);
  return v;
}

Complex hardy_pairing_oracle(const PoleParams& p, std::size_t j, std::size_t k, PairingKind kind) {
  if (j < 1 || k < 1) throw std::runtime_error("hardy_pairing_oracle: indices start at 1");
  const bool drow = (kind != PairingKind::Mass);
  const bool dcol = (kind == PairingKind::Stiffness);

  InitialValues ivj = initial_values(p, j);
  InitialValues ivk = initial_values(p, k);
  Complex f0 = drow ? ivj.f1 : ivj.f0, f1 = drow ? ivj.f2 : ivj.f1, f2 = drow ? ivj.f3 : ivj.f2;
  Complex g0 = dcol ? ivk.f1 : ivk.f0, g1 = dcol ? ivk.f2 : ivk.f1, g2 = dcol ? ivk.f3 : ivk.f2;

  // Tail model matching the 1/s^2..1/s^4 terms of F(s) G(-s); subtracted on
  // the contour and reinstated by its closed-contour value.
  Complex c2 = -f0 * g0;
  Complex c3 = f0 * g1 - f1 * g0;
  Complex c4 = -f0 * g2 + f1 * g1 - f2 * g0;
  Complex w = 0.5 * (p.s0 + p.s1);
  if (w == Complex(0.0)) throw std::runtime_error("hardy_pairing_oracle: s0 + s1 vanishes");
  Complex c4p = c4 - c2 * w * w;
  Complex two_pi_i(0.0, 2.0 * M_PI);
  Complex model_integral = two_pi_i * (c2 / (2.0 * w) - c4p / (4.0 * w * w * w));

  auto fval = [&](Complex s) {
    return drow ? transform_derivative(p, j, s) : transform(p, j, s);
  };
  auto gval = [&](Complex s) {
    return dcol ? transform_derivative(p, k, s) : transform(p, k, s);
  };
  auto integrand = [&](double r) {
    CurveSample cs = curve_sample(p, r);
    Complex s = cs.point;
    Complex s2 = s * s - w * w;
    Complex model = c2 / s2 + c3 * s / (s2 * s2) + c4p / (s2 * s2);
    return (fval(s) * gval(-s) - model) * cs.tangent;
  };

  double radius_scale = std::max(std::abs(p.s0), std::abs(p.s1));
  double radius = (kind == PairingKind::Drift ? 2000.0 : 200.0) * radius_scale;

  auto line_integral = [&](double R, bool& ok) {
    std::size_t n_panels = 256;
    double h = 2.0 * R / static_cast<double>(n_panels);
    Complex sum = 0.5 * (integrand(-R) + integrand(R));
    for (std::size_t i = 1; i < n_panels; ++i) sum += integrand(-R + h * static_cast<double>(i));
    Complex prev = sum * h;
    ok = false;
    while (n_panels < (1u << 19)) {
      n_panels *= 2;
      h = 2.0 * R / static_cast<double>(n_panels);
      for (std::size_t i = 1; i < n_panels; i += 2) sum += integrand(-R + h * static_cast<double>(i));
      Complex cur = sum * h;
      if (std::abs(cur - prev) < 1e-10) {
        ok = true;
        return cur;
      }
      prev = cur;
    }
    return prev;
  };

  bool ok1 = false, ok2 = false;
  Complex i1 = line_integral(radius, ok1);
  Complex i2 = line_integral(2.0 * radius, ok2);
  int rounds = 0;
  while ((!ok1 || !ok2 || std::abs(i2 - i1) >= 1e-10) && rounds < 3) {
    i1 = i2;
    ok1 = ok2;
    radius *= 2.0;
    i2 = line_integral(2.0 * radius, ok2);
    ++rounds;
  }
  Complex prefactor(0.0, -1.0 / (2.0 * M_PI));
  Complex result = prefactor * (i2 + model_integral);
  if (!ok1 || !ok2 || std::abs(i2 - i1) >= 1e-10) {
    std::ostringstream msg;
    msg << "hardy_pairing_oracle: quadrature failed to settle below 1e-10; achieved estimate ("
        << result.real() << "," << result.imag() << ") with doubling gap " << std::abs(i2 - i1);
    throw std::runtime_error(msg.str());
  }
  return result;
}

Convected1dSolution solve_convected_1d(const PoleParams& p, Complex omega, Complex neumann_datum,
                                       std::size_t n) {
  if (n < 2) throw std::runtime_error("solve_convected_1d: n must be at least 2");
  LongitudinalMatrices lm = assemble_long(p, n);
  DenseComplexMatrix k(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < n; ++c)
      k(i, c) = lm.stiffness(i, c) + lm.drift(i, c) - omega * omega * lm.mass(i, c);
  DenseComplexMatrix rhs(n, 1);
  rhs(0, 0) = -neumann_datum;
  DenseComplexMatrix x = dense_lu_solve(k, rhs);
  double resid = 0.0, scale = std::abs(neumann_datum) + 1e-300;
  for (std::size_t i = 0; i < n; ++i) {
    Complex acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) acc += k(i, c) * x(c, 0);
    resid += std::norm(acc - rhs(i, 0));
  }
  if (std::sqrt(resid) / scale > 1e-6)
    throw std::runtime_error("solve_convected_1d: system is singular at this frequency");
  Convected1dSolution sol;
  sol.coefficients.resize(n);
  for (std::size_t i = 0; i < n; ++i) sol.coefficients[i] = x(i, 0);
  sol.trace_value = sol.coefficients[0];
  return sol;
}

}  // namespace hsie
