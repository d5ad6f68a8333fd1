#include "hsie/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>

namespace hsie {

namespace {

constexpr double kPi = 3.14159265358979323846;

Complex csinc(Complex z) {
  if (std::abs(z) < 1e-4) {
    const Complex z2 = z * z;
    return 1.0 - z2 / 6.0 + z2 * z2 / 120.0;
  }
  return std::sin(z) / z;
}

struct GParts {
  Complex value{};
  double scale = 0.0;  // sum of term magnitudes, for relative residuals
};

// Deflated dispersion function G with F_S = beta G_S and F_A = alpha G_A.
// Written in quantities even in alpha and beta, so the square-root branch
// never enters and G is entire in kappa^2.
GParts g_parts(const DispersionContext& ctx, ModeBranch branch, Complex kappa, Complex omega) {
  const Complex k2 = kappa * kappa;
  const Complex a2 = omega * omega / (ctx.c_L * ctx.c_L) - k2;
  const Complex b2 = omega * omega / (ctx.c_T * ctx.c_T) - k2;
  const Complex a = std::sqrt(a2);
  const Complex b = std::sqrt(b2);
  const double R = ctx.R;
  const Complex q = k2 - b2;
  Complex t1, t2;
  if (branch == ModeBranch::Symmetric) {
    t1 = 4.0 * k2 * a2 * R * csinc(a * R) * std::cos(b * R);
    t2 = q * q * std::cos(a * R) * (R * csinc(b * R));
  } else {
    t1 = 4.0 * k2 * b2 * R * csinc(b * R) * std::cos(a * R);
    t2 = q * q * std::cos(b * R) * (R * csinc(a * R));
  }
  return {t1 + t2, std::abs(t1) + std::abs(t2)};
}

Complex g_dk(const DispersionContext& ctx, ModeBranch branch, Complex kappa, Complex omega) {
  const double h = 1e-6 * (1.0 + std::abs(kappa));
  return (g_parts(ctx, branch, kappa + h, omega).value -
          g_parts(ctx, branch, kappa - h, omega).value) /
         (2.0 * h);
}

Complex g_dw(const DispersionContext& ctx, ModeBranch branch, Complex kappa, Complex omega) {
  const double h = 1e-6 * (1.0 + std::abs(omega));
  return (g_parts(ctx, branch, kappa, omega + h).value -
          g_parts(ctx, branch, kappa, omega - h).value) /
         (2.0 * h);
}

bool newton_refine(const DispersionContext& ctx, ModeBranch branch, Complex omega,
                   Complex& kappa) {
  Complex z = kappa;
  for (int it = 0; it < 80; ++it) {
    const GParts g = g_parts(ctx, branch, z, omega);
    const Complex dk = g_dk(ctx, branch, z, omega);
    if (dk == Complex(0.0, 0.0)) break;
    const Complex step = g.value / dk;
    z -= step;
    if (std::abs(step) <= 1e-14 * (1.0 + std::abs(z))) break;
  }
  const GParts fin = g_parts(ctx, branch, z, omega);
  if (!(fin.scale > 0.0) || std::abs(fin.value) > 1e-11 * fin.scale) return false;
  kappa = z;
  return true;
}

const QuadratureRule& side_rule() {
  static const QuadratureRule rule = gauss_legendre(64, 0.0, 1.0);
  return rule;
}

// (1 / 2 pi i) contour integral of G'/G over the rectangle boundary,
// with each side split into panels of length ~1 so roots a short distance
// off the contour stay resolvable.
Complex winding_integral(const DispersionContext& ctx, ModeBranch branch, Complex omega,
                         const SearchBox& box) {
  const Complex c0(box.re_lo, box.im_lo), c1(box.re_hi, box.im_lo);
  const Complex c2(box.re_hi, box.im_hi), c3(box.re_lo, box.im_hi);
  const std::array<std::pair<Complex, Complex>, 4> sides{
      std::pair{c0, c1}, std::pair{c1, c2}, std::pair{c2, c3}, std::pair{c3, c0}};
  const QuadratureRule& q = side_rule();
  Complex total(0.0, 0.0);
  for (const auto& [za, zb] : sides) {
    const double len = std::abs(zb - za);
    const std::size_t panels = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(len)), 1, 16);
    for (std::size_t s = 0; s < panels; ++s) {
      const Complex pa = za + (zb - za) * (static_cast<double>(s) / panels);
      const Complex dz = (zb - za) / static_cast<double>(panels);
      for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        const Complex z = pa + q.nodes[i] * dz;
        const Complex g = g_parts(ctx, branch, z, omega).value;
        if (g == Complex(0.0, 0.0)) return Complex(1e9, 1e9);
        total += q.weights[i] * (g_dk(ctx, branch, z, omega) / g) * dz;
      }
    }
  }
  return total / Complex(0.0, 2.0 * kPi);
}

struct RootSearch {
  const DispersionContext& ctx;
  ModeBranch branch;
  Complex omega;
  std::vector<Complex> found;
  std::size_t boxes = 0;

  int count_with_retries(const SearchBox& box, SearchBox& used) {
    used = box;
    for (int attempt = 0; attempt < 5; ++attempt) {
      const Complex w = winding_integral(ctx, branch, omega, used);
      const double n = std::round(w.real());
      if (std::abs(w - n) <= 1e-3 && n >= -0.25) return static_cast<int>(n);
      const double px = 1.9e-2 * (attempt + 1) * (box.re_hi - box.re_lo) + 1e-9;
      const double py = 2.7e-2 * (attempt + 1) * (box.im_hi - box.im_lo) + 1e-9;
      used = SearchBox{box.re_lo - px, box.re_hi + px, box.im_lo - py, box.im_hi + py};
    }
    throw std::runtime_error(
        "argument-principle contour failed after 5 box perturbations near [" +
        std::to_string(box.re_lo) + ", " + std::to_string(box.re_hi) + "] x [" +
        std::to_string(box.im_lo) + ", " + std::to_string(box.im_hi) + "]");
  }

  void run(const SearchBox& box) {
    if (++boxes > 20000)
      throw std::runtime_error("argument-principle subdivision budget exceeded");
    SearchBox use;
    const int n = count_with_retries(box, use);
    if (n == 0) return;
    const double diag = std::max(use.re_hi - use.re_lo, use.im_hi - use.im_lo);
    if (n == 1 || diag < 2e-4) {
      Complex z(0.5 * (use.re_lo + use.re_hi), 0.5 * (use.im_lo + use.im_hi));
      const Complex center = z;
      const bool ok = newton_refine(ctx, branch, omega, z);
      const double slack = 0.05 * diag + 1e-9;
      const bool inside = z.real() >= use.re_lo - slack && z.real() <= use.re_hi + slack &&
                          z.imag() >= use.im_lo - slack && z.imag() <= use.im_hi + slack;
      if (ok && inside) {
        found.push_back(z);
        return;
      }
      if (diag < 2e-4) {
        if (ok && std::abs(z - center) < 1e-2) {
          found.push_back(z);
          return;
        }
        throw std::runtime_error(
            "root isolation failed on a minimal box; the frequency may support a "
            "zero-group-velocity mode");
      }
    }
    // cut fractions chosen off-center so the cut lines avoid the real and
    // imaginary axes, where roots concentrate; elongated boxes are split only
    // along the long direction, otherwise repeated transverse cuts creep
    // toward the real axis and put the contour on top of the real roots
    const double rw = use.re_hi - use.re_lo;
    const double ih = use.im_hi - use.im_lo;
    const double rm = use.re_lo + 0.5370 * rw;
    const double im = use.im_lo + 0.4630 * ih;
    if (rw > 2.0 * ih) {
      run(SearchBox{use.re_lo, rm, use.im_lo, use.im_hi});
      run(SearchBox{rm, use.re_hi, use.im_lo, use.im_hi});
    } else if (ih > 2.0 * rw) {
      run(SearchBox{use.re_lo, use.re_hi, use.im_lo, im});
      run(SearchBox{use.re_lo, use.re_hi, im, use.im_hi});
    } else {
      run(SearchBox{use.re_lo, rm, use.im_lo, im});
      run(SearchBox{rm, use.re_hi, use.im_lo, im});
      run(SearchBox{use.re_lo, rm, im, use.im_hi});
      run(SearchBox{rm, use.re_hi, im, use.im_hi});
    }
  }
};

bool in_box(Complex z, const SearchBox& box) {
  return z.real() >= box.re_lo && z.real() <= box.re_hi && z.imag() >= box.im_lo &&
         z.imag() <= box.im_hi;
}

ClassifiedWavenumber classify_root(const DispersionContext& ctx, ModeBranch branch, Complex kappa,
                                   double omega) {
  ClassifiedWavenumber out;
  out.branch = branch;
  const double mag = 1.0 + std::abs(kappa);
  if (std::abs(kappa.imag()) <= 1e-8 * mag) {
    const double k = kappa.real();
    double vg;
    try {
      vg = group_velocity(ctx, branch, k, omega);
    } catch (const std::exception& e) {
      throw std::runtime_error("degenerate frequency omega = " + std::to_string(omega) + ": " +
                               e.what());
    }
    out.kappa = Complex(k, 0.0);
    out.group_velocity = vg;
    out.mode_class = vg > 0.0 ? ModeClass::OutgoingPropagating : ModeClass::IncomingPropagating;
    return out;
  }
  if (std::abs(kappa.real()) <= 1e-8 * mag) kappa = Complex(0.0, kappa.imag());
  out.kappa = kappa;
  out.mode_class =
      kappa.imag() > 0.0 ? ModeClass::OutgoingEvanescent : ModeClass::IncomingEvanescent;
  return out;
}

double dist_to_segment(Complex p, Complex a, Complex b) {
  const Complex d = b - a;
  const double len2 = std::norm(d);
  if (len2 == 0.0) return std::abs(p - a);
  const double t = std::clamp(((p - a) * std::conj(d)).real() / len2, 0.0, 1.0);
  return std::abs(p - (a + t * d));
}

double dist_to_curves(Complex p, const std::vector<EssentialCurve>& curves) {
  double best = std::numeric_limits<double>::infinity();
  for (const EssentialCurve& c : curves) {
    if (c.omega.size() == 1) best = std::min(best, std::abs(p - c.omega[0]));
    for (std::size_t i = 0; i + 1 < c.omega.size(); ++i)
      best = std::min(best, dist_to_segment(p, c.omega[i], c.omega[i + 1]));
  }
  return best;
}

struct ModeTerms {
  Complex a, b;    // alpha, beta (principal branch)
  Complex c1, c2;  // coefficients of the two partial waves
};

ModeTerms mode_terms(const DispersionContext& ctx, ModeBranch branch, Complex kappa,
                     double omega) {
  const Complex k2 = kappa * kappa;
  const Complex a = std::sqrt(omega * omega / (ctx.c_L * ctx.c_L) - k2);
  const Complex b = std::sqrt(omega * omega / (ctx.c_T * ctx.c_T) - k2);
  const Complex q = k2 - b * b;
  const double R = ctx.R;
  ModeTerms t;
  t.a = a;
  t.b = b;
  if (branch == ModeBranch::Symmetric) {
    t.c1 = q * std::sin(b * R);
    t.c2 = 2.0 * std::sin(a * R);
  } else {
    t.c1 = q * std::cos(b * R);
    t.c2 = 2.0 * std::cos(a * R);
  }
  return t;
}

double profile_norm(const DispersionContext& ctx, ModeBranch branch, Complex kappa,
                    double omega) {
  const std::size_t panels = 8;
  const QuadratureRule base = gauss_legendre(16, 0.0, 1.0);
  double acc = 0.0;
  const double R = ctx.R;
  for (std::size_t s = 0; s < panels; ++s) {
    const double y0 = -R + 2.0 * R * static_cast<double>(s) / panels;
    const double h = 2.0 * R / panels;
    for (std::size_t i = 0; i < base.nodes.size(); ++i) {
      const auto w = lamb_mode(ctx, branch, kappa, omega, y0 + h * base.nodes[i]);
      acc += h * base.weights[i] * (std::norm(w[0]) + std::norm(w[1]));
    }
  }
  return std::sqrt(acc);
}

}  // namespace

DispersionContext make_context(const Material& material, double half_width) {
  if (!(half_width > 0.0)) throw std::invalid_argument("half width must be positive");
  DispersionContext ctx;
  ctx.material = material;
  ctx.R = half_width;
  ctx.c_L = std::sqrt((material.lambda() + 2.0 * material.mu()) / material.rho);
  ctx.c_T = std::sqrt(material.mu() / material.rho);
  if (!(ctx.c_L > ctx.c_T)) throw std::invalid_argument("wave speeds require c_L > c_T");
  return ctx;
}

Complex dispersion_g(const DispersionContext& ctx, ModeBranch branch, Complex kappa,
                     Complex omega) {
  return g_parts(ctx, branch, kappa, omega).value;
}

Complex dispersion_f(const DispersionContext& ctx, ModeBranch branch, Complex kappa,
                     Complex omega) {
  const Complex k2 = kappa * kappa;
  const Complex a = std::sqrt(omega * omega / (ctx.c_L * ctx.c_L) - k2);
  const Complex b = std::sqrt(omega * omega / (ctx.c_T * ctx.c_T) - k2);
  return (branch == ModeBranch::Symmetric ? b : a) * g_parts(ctx, branch, kappa, omega).value;
}

double group_velocity(const DispersionContext& ctx, ModeBranch branch, double kappa,
                      double omega) {
  const Complex k(kappa, 0.0), w(omega, 0.0);
  const GParts at = g_parts(ctx, branch, k, w);
  const Complex gk = g_dk(ctx, branch, k, w);
  const Complex gw = g_dw(ctx, branch, k, w);
  const double rel = std::abs(gk) * (1.0 + std::abs(kappa)) / (at.scale + 1e-300);
  if (rel <= 1e-4)
    throw std::runtime_error("degenerate root: group velocity vanishes at kappa = " +
                             std::to_string(kappa) + ", omega = " + std::to_string(omega));
  if (gw == Complex(0.0, 0.0))
    throw std::runtime_error("degenerate root: dispersion relation stationary in omega");
  return -(gk / gw).real();
}

std::vector<ClassifiedWavenumber> lamb_roots(const DispersionContext& ctx, double omega,
                                             const SearchBox& box, std::size_t max_count) {
  if (!(omega > 0.0)) throw std::invalid_argument("lamb_roots: omega must be positive");
  if (!(box.re_hi > box.re_lo) || !(box.im_hi > box.im_lo))
    throw std::invalid_argument("lamb_roots: empty search box");

  std::vector<ClassifiedWavenumber> out;
  for (ModeBranch branch : {ModeBranch::Symmetric, ModeBranch::Antisymmetric}) {
    RootSearch search{ctx, branch, Complex(omega, 0.0), {}, 0};
    search.run(box);

    std::vector<Complex> roots;
    for (Complex z : search.found) {
      bool dup = false;
      for (Complex r : roots)
        if (std::abs(z - r) <= 1e-7 * (1.0 + std::abs(z))) dup = true;
      if (!dup) roots.push_back(z);
    }
    // even in kappa: add mirrored roots the box also contains
    const std::size_t base = roots.size();
    for (std::size_t i = 0; i < base; ++i) {
      Complex m = -roots[i];
      if (!in_box(m, box)) continue;
      bool present = false;
      for (Complex r : roots)
        if (std::abs(m - r) <= 1e-7 * (1.0 + std::abs(m))) present = true;
      if (!present && newton_refine(ctx, branch, Complex(omega, 0.0), m) && in_box(m, box))
        roots.push_back(m);
    }
    for (Complex z : roots)
      if (in_box(z, box)) out.push_back(classify_root(ctx, branch, z, omega));
  }

  std::sort(out.begin(), out.end(),
            [](const ClassifiedWavenumber& x, const ClassifiedWavenumber& y) {
              const auto key = [](const ClassifiedWavenumber& c) {
                return std::tuple(std::abs(c.kappa.imag()), std::abs(c.kappa.real()),
                                  c.kappa.real(), c.kappa.imag(), static_cast<int>(c.branch));
              };
              return key(x) < key(y);
            });
  if (out.size() > max_count) out.resize(max_count);
  return out;
}

std::array<Complex, 2> lamb_mode(const DispersionContext& ctx, ModeBranch branch, Complex kappa,
                                 double omega, double eta) {
  const Complex I(0.0, 1.0);
  const ModeTerms t = mode_terms(ctx, branch, kappa, omega);
  const Complex a = t.a, b = t.b;
  if (branch == ModeBranch::Symmetric) {
    return {I * kappa * t.c1 * std::cos(a * eta) + I * kappa * a * b * t.c2 * std::cos(b * eta),
            -a * t.c1 * std::sin(a * eta) + kappa * kappa * a * t.c2 * std::sin(b * eta)};
  }
  return {I * kappa * t.c1 * std::sin(a * eta) + I * kappa * a * b * t.c2 * std::sin(b * eta),
          a * t.c1 * std::cos(a * eta) - kappa * kappa * a * t.c2 * std::cos(b * eta)};
}

std::array<Complex, 2> lamb_mode_derivative(const DispersionContext& ctx, ModeBranch branch,
                                            Complex kappa, double omega, double eta) {
  const Complex I(0.0, 1.0);
  const ModeTerms t = mode_terms(ctx, branch, kappa, omega);
  const Complex a = t.a, b = t.b;
  if (branch == ModeBranch::Symmetric) {
    return {-I * kappa * a * t.c1 * std::sin(a * eta) -
                I * kappa * a * b * b * t.c2 * std::sin(b * eta),
            -a * a * t.c1 * std::cos(a * eta) + kappa * kappa * a * b * t.c2 * std::cos(b * eta)};
  }
  return {I * kappa * a * t.c1 * std::cos(a * eta) +
              I * kappa * a * b * b * t.c2 * std::cos(b * eta),
          -a * a * t.c1 * std::sin(a * eta) + kappa * kappa * a * b * t.c2 * std::sin(b * eta)};
}

std::array<Complex, 2> lamb_field(const DispersionContext& ctx, ModeBranch branch, Complex kappa,
                                  double omega, double xi, double eta) {
  const Complex ph = std::exp(Complex(0.0, 1.0) * kappa * xi);
  const auto w = lamb_mode(ctx, branch, kappa, omega, eta);
  return {w[0] * ph, w[1] * ph};
}

FieldValue ReferenceFieldSum::operator()(double x, double y) const {
  const Complex I(0.0, 1.0);
  FieldValue f;
  for (const ReferenceMode& m : modes) {
    const Complex k = m.wavenumber.kappa;
    const ModeBranch br = m.wavenumber.branch;
    const auto w = lamb_mode(ctx, br, k, omega, y);
    const auto wd = lamb_mode_derivative(ctx, br, k, omega, y);
    const Complex c = std::exp(I * k * x) / m.norm;
    f.u[0] += w[0] * c;
    f.u[1] += w[1] * c;
    f.grad[0][0] += I * k * w[0] * c;
    f.grad[0][1] += wd[0] * c;
    f.grad[1][0] += I * k * w[1] * c;
    f.grad[1][1] += wd[1] * c;
  }
  return f;
}

ReferenceFieldSum reference_field(const DispersionContext& ctx, double omega,
                                  std::size_t n_symmetric, std::size_t n_antisymmetric) {
  if (!(omega > 0.0)) throw std::invalid_argument("reference_field: omega must be positive");
  const double re_ext = 1.6 * omega / ctx.c_T + 3.0;
  const SearchBox box{-re_ext, re_ext, -6.5, 6.5};
  const auto roots = lamb_roots(ctx, omega, box, 400);

  ReferenceFieldSum sum;
  sum.ctx = ctx;
  sum.omega = omega;
  const std::array<std::pair<ModeBranch, std::size_t>, 2> wanted{
      std::pair{ModeBranch::Symmetric, n_symmetric},
      std::pair{ModeBranch::Antisymmetric, n_antisymmetric}};
  for (const auto& [branch, want] : wanted) {
    std::size_t got = 0;
    for (const ClassifiedWavenumber& r : roots) {
      if (r.branch != branch || !is_outgoing(r.mode_class) || got == want) continue;
      ReferenceMode m;
      m.wavenumber = r;
      m.norm = profile_norm(ctx, branch, r.kappa, omega);
      if (!(m.norm > 0.0) || !std::isfinite(m.norm))
        throw std::runtime_error("reference_field: degenerate mode profile norm");
      sum.modes.push_back(m);
      ++got;
    }
    if (got < want)
      throw std::runtime_error("reference_field: only " + std::to_string(got) + " of " +
                               std::to_string(want) + " outgoing modes found on branch " +
                               (branch == ModeBranch::Symmetric ? "S" : "A"));
  }
  return sum;
}

std::vector<Complex> transverse_modal_evp(const TransverseMatrices& trans,
                                          const Material& material, Complex kappa) {
  const std::size_t n = trans.n;
  if (n == 0) throw std::invalid_argument("transverse_modal_evp: empty transverse basis");
  const double mu = material.mu();
  const double la = material.lambda();
  const double mpl = 2.0 * mu + la;
  const Complex I(0.0, 1.0);
  const Complex k2 = kappa * kappa;

  DenseComplexMatrix a(2 * n, 2 * n), b(2 * n, 2 * n);
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t lp = 0; lp < n; ++lp) {
      const Complex mt = trans.mass(l, lp);
      const Complex st = trans.stiffness(l, lp);
      const Complex dt = trans.drift(l, lp);
      const Complex dtt = trans.drift(lp, l);
      a(l, lp) = mpl * k2 * mt + mu * st;
      a(l, n + lp) = I * kappa * (la * dtt - mu * dt);
      a(n + l, lp) = I * kappa * (mu * dtt - la * dt);
      a(n + l, n + lp) = mpl * st + mu * k2 * mt;
      b(l, lp) = material.rho * mt;
      b(n + l, n + lp) = material.rho * mt;
    }
  }
  DenseEigResult eig = dense_eig(dense_lu_solve(b, a), false);
  std::sort(eig.values.begin(), eig.values.end(), [](Complex x, Complex y) {
    return std::tuple(x.real(), x.imag()) < std::tuple(y.real(), y.imag());
  });
  return eig.values;
}

std::vector<EssentialCurve> essential_spectrum(const PoleParams& params,
                                               const TransverseMatrices& trans,
                                               const Material& material, double r_lo, double r_hi,
                                               std::size_t n_samples, double omega_re_max) {
  if (!(r_hi > r_lo)) throw std::invalid_argument("essential_spectrum: empty r range");
  if (n_samples < 2) throw std::invalid_argument("essential_spectrum: need at least 2 samples");
  if (!(omega_re_max > 0.0))
    throw std::invalid_argument("essential_spectrum: omega window must be positive");

  struct Chain {
    std::vector<double> r;
    std::vector<Complex> w;
    std::size_t last_step = 0;
  };
  std::vector<Chain> chains;
  const double dr = (r_hi - r_lo) / static_cast<double>(n_samples - 1);
  const double jump_tol = std::max(0.08, 10.0 * dr);

  for (std::size_t i = 0; i < n_samples; ++i) {
    const double r = r_lo + dr * static_cast<double>(i);
    const Complex kappa = Complex(0.0, -1.0) * gamma_point(params, r);
    std::vector<Complex> omegas;
    for (Complex v : transverse_modal_evp(trans, material, kappa)) {
      const Complex w = std::sqrt(v);
      if (!std::isfinite(w.real()) || !std::isfinite(w.imag())) continue;
      if (w.real() <= omega_re_max) omegas.push_back(w);
    }
    std::sort(omegas.begin(), omegas.end(), [](Complex x, Complex y) {
      return std::tuple(x.real(), x.imag()) < std::tuple(y.real(), y.imag());
    });

    std::vector<char> used(chains.size(), 0);
    for (Complex w : omegas) {
      std::size_t best = chains.size();
      double best_d = jump_tol;
      if (i > 0) {
        for (std::size_t c = 0; c < chains.size(); ++c) {
          if (used[c] || chains[c].last_step + 1 != i) continue;
          const double d = std::abs(w - chains[c].w.back());
          if (d < best_d) {
            best_d = d;
            best = c;
          }
        }
      }
      if (best < chains.size()) {
        chains[best].r.push_back(r);
        chains[best].w.push_back(w);
        chains[best].last_step = i;
        used[best] = 1;
      } else {
        chains.push_back(Chain{{r}, {w}, i});
        used.push_back(1);
      }
    }
  }

  std::vector<EssentialCurve> out;
  out.reserve(chains.size());
  for (Chain& c : chains) out.push_back(EssentialCurve{std::move(c.r), std::move(c.w)});
  return out;
}

SpectrumResult resonances(const AssembledSystem& system, const std::vector<Complex>& shifts,
                          std::size_t krylov_dim, std::size_t n_wanted) {
  if (shifts.empty()) throw std::invalid_argument("resonances: need at least one shift");
  struct Item {
    Complex w;
    double res;
  };
  std::vector<Item> items;
  for (Complex shift : shifts) {
    const ArnoldiResult ar =
        arnoldi_shift_invert(system.a, system.b, shift * shift, krylov_dim, n_wanted);
    for (const RitzPair& p : ar.pairs) {
      Complex w = std::sqrt(p.value);
      if (w.real() < 0.0) w = -w;
      items.push_back({w, p.residual});
    }
  }
  std::sort(items.begin(), items.end(), [](const Item& x, const Item& y) {
    return std::tuple(x.w.real(), x.w.imag(), x.res) < std::tuple(y.w.real(), y.w.imag(), y.res);
  });

  SpectrumResult out;
  for (const Item& it : items) {
    if (!out.eigenvalues.empty()) {
      const Complex prev = out.eigenvalues.back();
      if (std::abs(it.w - prev) <= 1e-6 * std::max(1.0, std::abs(prev))) {
        if (it.res < out.residuals.back()) {
          out.eigenvalues.back() = it.w;
          out.residuals.back() = it.res;
        }
        continue;
      }
    }
    out.eigenvalues.push_back(it.w);
    out.residuals.push_back(it.res);
    out.classification.push_back(SpectrumLabel::Unclassified);
  }
  return out;
}

SpectrumResult classify_spectrum(const SpectrumResult& run_a, const SpectrumResult& run_b,
                                 double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("classify_spectrum: tolerance must be positive");
  SpectrumResult out = run_a;
  out.classification.assign(out.eigenvalues.size(), SpectrumLabel::Unclassified);
  for (std::size_t i = 0; i < out.eigenvalues.size(); ++i) {
    const Complex w = out.eigenvalues[i];
    const double d_ess =
        std::min(dist_to_curves(w, run_a.essential), dist_to_curves(w, run_b.essential));
    if (d_ess <= tol) {
      out.classification[i] = SpectrumLabel::EssentialCluster;
      continue;
    }
    bool matched = false;
    for (Complex wb : run_b.eigenvalues)
      if (std::abs(w - wb) <= tol) matched = true;
    if (matched) out.classification[i] = SpectrumLabel::ResonanceCandidate;
  }
  return out;
}

namespace {

double g_real(const DispersionContext& ctx, ModeBranch branch, double kappa, double omega) {
  return g_parts(ctx, branch, Complex(kappa, 0.0), Complex(omega, 0.0)).value.real();
}

// Sign-change scan of G over real kappa in (k_eps, k_max); returns bracket
// midpoints at grid resolution, without refinement.
std::vector<double> real_root_scan(const DispersionContext& ctx, ModeBranch branch, double omega,
                                   double k_max, std::size_t m) {
  std::vector<double> roots;
  const double k_eps = 1e-6;
  double prev_k = k_eps;
  double prev = g_real(ctx, branch, prev_k, omega);
  for (std::size_t j = 1; j <= m; ++j) {
    const double k = k_eps + (k_max - k_eps) * static_cast<double>(j) / static_cast<double>(m);
    const double cur = g_real(ctx, branch, k, omega);
    if (prev == 0.0)
      roots.push_back(prev_k);
    else if (prev * cur < 0.0)
      roots.push_back(0.5 * (prev_k + k));
    prev = cur;
    prev_k = k;
  }
  return roots;
}

// 2x2 Newton for the coalescence system (G, dG/dkappa) = 0 over real (k, w).
bool newton_coalescence(const DispersionContext& ctx, ModeBranch branch, double& k, double& w) {
  for (int it = 0; it < 60; ++it) {
    const double hk = 1e-6 * (1.0 + std::abs(k));
    const double hw = 1e-6 * (1.0 + std::abs(w));
    const auto gk_at = [&](double kk, double ww) {
      return (g_real(ctx, branch, kk + hk, ww) - g_real(ctx, branch, kk - hk, ww)) / (2.0 * hk);
    };
    const double f1 = g_real(ctx, branch, k, w);
    const double f2 = gk_at(k, w);
    const double j11 = f2;
    const double j12 =
        (g_real(ctx, branch, k, w + hw) - g_real(ctx, branch, k, w - hw)) / (2.0 * hw);
    const double j21 = (gk_at(k + hk, w) - gk_at(k - hk, w)) / (2.0 * hk);
    const double j22 = (gk_at(k, w + hw) - gk_at(k, w - hw)) / (2.0 * hw);
    const double det = j11 * j22 - j12 * j21;
    if (det == 0.0) return false;
    const double dk = (f1 * j22 - f2 * j12) / det;
    const double dw = (j11 * f2 - j21 * f1) / det;
    k -= dk;
    w -= dw;
    if (std::abs(dk) + std::abs(dw) <= 1e-13 * (1.0 + std::abs(k) + std::abs(w))) break;
  }
  const GParts at = g_parts(ctx, branch, Complex(k, 0.0), Complex(w, 0.0));
  const double sc = at.scale + 1e-300;
  if (std::abs(at.value) > 1e-9 * sc) return false;
  const double hk = 1e-6 * (1.0 + std::abs(k));
  const double gk = (g_real(ctx, branch, k + hk, w) - g_real(ctx, branch, k - hk, w)) / (2.0 * hk);
  return std::abs(gk) * (1.0 + std::abs(k)) <= 1e-6 * sc;
}

// Roots of `rich` without a partner in `poor` (within tol).
std::vector<double> unmatched_pair(const std::vector<double>& rich,
                                   const std::vector<double>& poor, double tol) {
  std::vector<double> un;
  for (double k : rich) {
    double best = std::numeric_limits<double>::infinity();
    for (double q : poor) best = std::min(best, std::abs(k - q));
    if (best > tol) un.push_back(k);
  }
  return un;
}

}  // namespace

std::vector<double> zero_group_velocity_frequencies(const DispersionContext& ctx, double omega_lo,
                                                    double omega_hi) {
  if (!(omega_lo > 0.0) || !(omega_hi > omega_lo) || !std::isfinite(omega_hi))
    throw std::invalid_argument("zero_group_velocity_frequencies: bad omega range");

  std::vector<double> out;
  const std::size_t n_w = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil((omega_hi - omega_lo) / 5e-4)), 64, 4000);
  const double dw = (omega_hi - omega_lo) / static_cast<double>(n_w);

  for (ModeBranch branch : {ModeBranch::Symmetric, ModeBranch::Antisymmetric}) {
    // cut-ons: zeros of G(0, omega), a real function of omega
    {
      double prev_w = omega_lo;
      double prev = g_real(ctx, branch, 0.0, prev_w);
      for (std::size_t i = 1; i <= n_w; ++i) {
        const double w = omega_lo + dw * static_cast<double>(i);
        const double cur = g_real(ctx, branch, 0.0, w);
        if (prev * cur < 0.0) {
          double a = prev_w, b = w;
          double ga = prev;
          for (int it = 0; it < 60 && b - a > 1e-8; ++it) {
            const double mid = 0.5 * (a + b);
            const double gm = g_real(ctx, branch, 0.0, mid);
            if (gm == 0.0) {
              a = b = mid;
            } else if (ga * gm < 0.0) {
              b = mid;
            } else {
              a = mid;
              ga = gm;
            }
          }
          out.push_back(0.5 * (a + b));
        }
        prev = cur;
        prev_w = w;
      }
    }

    // coalescences: even jumps of the real-root count
    const double k_max = 1.45 * omega_hi / ctx.c_T + 1.0;
    const std::size_t m =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(k_max / 2e-3)), 600, 6000);
    const double grid = k_max / static_cast<double>(m);
    const double match_tol = 3.0 * grid;

    std::vector<double> prev_roots = real_root_scan(ctx, branch, omega_lo, k_max, m);
    for (std::size_t i = 1; i <= n_w; ++i) {
      const double w0 = omega_lo + dw * static_cast<double>(i - 1);
      const double w1 = omega_lo + dw * static_cast<double>(i);
      const std::vector<double> cur_roots = real_root_scan(ctx, branch, w1, k_max, m);
      const int delta = static_cast<int>(cur_roots.size()) - static_cast<int>(prev_roots.size());
      if (delta != 0 && delta % 2 == 0) {
        const bool rich_left = delta < 0;
        const std::vector<double>& rich = rich_left ? prev_roots : cur_roots;
        const std::vector<double>& poor = rich_left ? cur_roots : prev_roots;
        const std::vector<double> pair = unmatched_pair(rich, poor, match_tol);
        bool reported = false;
        if (pair.size() >= 2) {
          double k = 0.5 * (pair[0] + pair[1]);
          double w = rich_left ? w0 : w1;
          if (newton_coalescence(ctx, branch, k, w) && w > omega_lo - 1e-6 &&
              w < omega_hi + 1e-6 && std::abs(w - w0) < 10.0 * dw && k > 0.0) {
            out.push_back(w);
            reported = true;
          }
        }
        if (!reported) {
          // fallback: bisection on the root count
          double a = w0, b = w1;
          const std::size_t ca = prev_roots.size();
          for (int it = 0; it < 40 && b - a > 1e-6; ++it) {
            const double mid = 0.5 * (a + b);
            const std::size_t cm = real_root_scan(ctx, branch, mid, k_max, m).size();
            if (cm == ca)
              a = mid;
            else
              b = mid;
          }
          out.push_back(0.5 * (a + b));
        }
      }
      prev_roots = cur_roots;
    }
  }

  std::sort(out.begin(), out.end());
  std::vector<double> dedup;
  for (double w : out)
    if (dedup.empty() || w - dedup.back() > 2e-6) dedup.push_back(w);
  return dedup;
}

DirichletEigs dirichlet_eigenvalues(const MeshBlock& block, const Material& material,
                                    std::size_t p, std::size_t n_wanted) {
  if (n_wanted == 0) return {};
  BlockMesh bm;
  MeshBlock b = block;
  b.material = 0;
  bm.blocks = {b};
  bm.materials = {material};
  bm.boundary_overrides = {
      BoundarySegment{'x', b.x0, b.y0, b.y1, BoundaryCondition::Dirichlet, -1},
      BoundarySegment{'x', b.x1, b.y0, b.y1, BoundaryCondition::Dirichlet, -1},
      BoundarySegment{'y', b.y0, b.x0, b.x1, BoundaryCondition::Dirichlet, -1},
      BoundarySegment{'y', b.y1, b.x0, b.x1, BoundaryCondition::Dirichlet, -1}};
  const MeshTopology mesh(bm);
  const DofMap dofs = build_dof_map(mesh, p);
  const InteriorSystem sys = assemble_interior(mesh, dofs);

  std::vector<char> fixed(2 * dofs.n_scalar, 0);
  for (std::size_t s = 0; s < dofs.n_scalar; ++s)
    if (dofs.dirichlet[s]) fixed[2 * s] = fixed[2 * s + 1] = 1;
  const ReducedSystem red =
      dirichlet_lift(sys.a, sys.b, fixed, std::vector<Complex>(2 * dofs.n_scalar));
  if (red.a.n_rows == 0)
    throw std::runtime_error("dirichlet_eigenvalues: no free degrees of freedom");

  const std::size_t krylov =
      std::min<std::size_t>(red.a.n_rows, std::max<std::size_t>(60, 2 * n_wanted + 30));
  const ArnoldiResult ar = arnoldi_shift_invert(red.a, red.b, Complex(0.0, 0.0), krylov,
                                                std::min(n_wanted, krylov), 1e-9);

  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < ar.pairs.size(); ++i) {
    const double lam = ar.pairs[i].value.real();
    if (lam > 0.0) order.emplace_back(lam, i);
  }
  std::sort(order.begin(), order.end());

  DirichletEigs out;
  for (const auto& [lam, idx] : order) {
    if (out.omega.size() == n_wanted) break;
    out.omega.push_back(std::sqrt(lam));
    out.vectors.push_back(expand_reduced(red, ar.pairs[idx].vector));
  }
  return out;
}

}  // namespace hsie
