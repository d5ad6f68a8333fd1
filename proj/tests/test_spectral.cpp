#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <tuple>
#include <vector>

#include "hsie/spectral.hpp"
#include "hsie/waveguide.hpp"

using hsie::ClassifiedWavenumber;
using hsie::Complex;
using hsie::DispersionContext;
using hsie::Material;
using hsie::ModeBranch;
using hsie::ModeClass;
using hsie::SearchBox;

namespace {

constexpr double kPi = 3.14159265358979323846;

DispersionContext ctx25() {
  Material m;
  m.E = 1.0;
  m.nu = 0.25;
  m.rho = 1.0;
  return hsie::make_context(m, 1.0);
}

// printed dispersion relations with alpha, beta passed explicitly (R = 1)
Complex printed_f(ModeBranch branch, Complex a, Complex b, Complex k) {
  const Complex k2 = k * k;
  const Complex q = (k2 - b * b) * (k2 - b * b);
  if (branch == ModeBranch::Symmetric)
    return 4.0 * k2 * a * b * std::sin(a) * std::cos(b) + q * std::cos(a) * std::sin(b);
  return 4.0 * k2 * a * b * std::cos(a) * std::sin(b) + q * std::sin(a) * std::cos(b);
}

// same evaluation order as the library: the frequency term stays real, so
// for kappa past a bulk cut-on the zero imaginary part of the radicand keeps
// the sign produced by real-minus-complex lowering and both sides land on
// the same side of the square-root cut
Complex alpha_of(const DispersionContext& ctx, Complex k, double om) {
  return std::sqrt(om * om / (ctx.c_L * ctx.c_L) - k * k);
}
Complex beta_of(const DispersionContext& ctx, Complex k, double om) {
  return std::sqrt(om * om / (ctx.c_T * ctx.c_T) - k * k);
}

// independent Newton iteration on the deflated relation, for root
// continuation oracles
Complex continue_root(const DispersionContext& ctx, ModeBranch br, Complex om, Complex k0) {
  Complex z = k0;
  for (int i = 0; i < 60; ++i) {
    const double h = 1e-7 * (1.0 + std::abs(z));
    const Complex g = hsie::dispersion_g(ctx, br, z, om);
    const Complex d =
        (hsie::dispersion_g(ctx, br, z + h, om) - hsie::dispersion_g(ctx, br, z - h, om)) /
        (2.0 * h);
    if (d == Complex(0.0, 0.0)) break;
    const Complex step = g / d;
    z -= step;
    if (std::abs(step) < 1e-14 * (1.0 + std::abs(z))) break;
  }
  return z;
}

// winding number of the deflated relation around a rectangle, by phase
// accumulation along a dense perimeter sampling
int phase_winding(const DispersionContext& ctx, ModeBranch br, double om, const SearchBox& box,
                  std::size_t n_side) {
  std::vector<Complex> corners{Complex(box.re_lo, box.im_lo), Complex(box.re_hi, box.im_lo),
                               Complex(box.re_hi, box.im_hi), Complex(box.re_lo, box.im_hi),
                               Complex(box.re_lo, box.im_lo)};
  double total = 0.0;
  Complex prev = hsie::dispersion_g(ctx, br, corners[0], Complex(om, 0.0));
  for (std::size_t s = 0; s < 4; ++s) {
    for (std::size_t i = 1; i <= n_side; ++i) {
      const Complex z =
          corners[s] + (corners[s + 1] - corners[s]) * (static_cast<double>(i) / n_side);
      const Complex cur = hsie::dispersion_g(ctx, br, z, Complex(om, 0.0));
      total += std::arg(cur / prev);
      prev = cur;
    }
  }
  return static_cast<int>(std::lround(total / (2.0 * kPi)));
}

struct ModeEval {
  Complex w1, w2, d1, d2, dd1, dd2;
};

// transverse profile with analytic first and second derivatives (oracle)
ModeEval eval_mode(const DispersionContext& ctx, ModeBranch br, Complex k, double om,
                   double eta) {
  const Complex I(0.0, 1.0);
  const Complex a = alpha_of(ctx, k, om);
  const Complex b = beta_of(ctx, k, om);
  const Complex q = k * k - b * b;
  const double R = ctx.R;
  ModeEval e;
  if (br == ModeBranch::Symmetric) {
    const Complex c1 = q * std::sin(b * R);
    const Complex c2 = 2.0 * std::sin(a * R);
    const Complex t11 = I * k * c1 * std::cos(a * eta);
    const Complex t12 = I * k * a * b * c2 * std::cos(b * eta);
    const Complex t21 = -a * c1 * std::sin(a * eta);
    const Complex t22 = k * k * a * c2 * std::sin(b * eta);
    e.w1 = t11 + t12;
    e.w2 = t21 + t22;
    e.d1 = -a * I * k * c1 * std::sin(a * eta) - b * I * k * a * b * c2 * std::sin(b * eta);
    e.d2 = a * (-a * c1) * std::cos(a * eta) + b * k * k * a * c2 * std::cos(b * eta);
    e.dd1 = -a * a * t11 - b * b * t12;
    e.dd2 = -a * a * t21 - b * b * t22;
  } else {
    const Complex c1 = q * std::cos(b * R);
    const Complex c2 = 2.0 * std::cos(a * R);
    const Complex t11 = I * k * c1 * std::sin(a * eta);
    const Complex t12 = I * k * a * b * c2 * std::sin(b * eta);
    const Complex t21 = a * c1 * std::cos(a * eta);
    const Complex t22 = -k * k * a * c2 * std::cos(b * eta);
    e.w1 = t11 + t12;
    e.w2 = t21 + t22;
    e.d1 = a * I * k * c1 * std::cos(a * eta) + b * I * k * a * b * c2 * std::cos(b * eta);
    e.d2 = -a * (a * c1) * std::sin(a * eta) + b * k * k * a * c2 * std::sin(b * eta);
    e.dd1 = -a * a * t11 - b * b * t12;
    e.dd2 = -a * a * t21 - b * b * t22;
  }
  return e;
}

// strong-form elastic residual of u = exp(i kappa xi) w(eta) and the
// traction on the free walls
void check_mode_pde(const DispersionContext& ctx, ModeBranch br, Complex k, double om,
                    bool at_root) {
  const Complex I(0.0, 1.0);
  const double mu = ctx.material.mu();
  const double la = ctx.material.lambda();
  const double rho = ctx.material.rho;
  std::mt19937 rng(4211);
  std::uniform_real_distribution<double> dist(-0.99, 0.99);
  for (int s = 0; s < 20; ++s) {
    const double eta = dist(rng);
    const ModeEval e = eval_mode(ctx, br, k, om, eta);

    const auto lib_w = hsie::lamb_mode(ctx, br, k, om, eta);
    const auto lib_d = hsie::lamb_mode_derivative(ctx, br, k, om, eta);
    const double wmag = std::abs(e.w1) + std::abs(e.w2) + 1e-300;
    CHECK(std::abs(lib_w[0] - e.w1) <= 1e-12 * wmag);
    CHECK(std::abs(lib_w[1] - e.w2) <= 1e-12 * wmag);
    const double dmag = std::abs(e.d1) + std::abs(e.d2) + 1e-300;
    CHECK(std::abs(lib_d[0] - e.d1) <= 1e-12 * dmag);
    CHECK(std::abs(lib_d[1] - e.d2) <= 1e-12 * dmag);

    const Complex k2 = k * k;
    const Complex r1 =
        -mu * (-k2 * e.w1 + e.dd1) - (la + mu) * (-k2 * e.w1 + I * k * e.d2) - rho * om * om * e.w1;
    const Complex r2 =
        -mu * (-k2 * e.w2 + e.dd2) - (la + mu) * (I * k * e.d1 + e.dd2) - rho * om * om * e.w2;
    const double sc1 = mu * (std::abs(k2 * e.w1) + std::abs(e.dd1)) +
                       (la + mu) * (std::abs(k2 * e.w1) + std::abs(k * e.d2)) +
                       rho * om * om * std::abs(e.w1) + 1e-300;
    const double sc2 = mu * (std::abs(k2 * e.w2) + std::abs(e.dd2)) +
                       (la + mu) * (std::abs(k * e.d1) + std::abs(e.dd2)) +
                       rho * om * om * std::abs(e.w2) + 1e-300;
    CHECK(std::abs(r1) <= 1e-8 * sc1);
    CHECK(std::abs(r2) <= 1e-8 * sc2);
  }
  if (at_root) {
    for (double eta : {-ctx.R, ctx.R}) {
      const ModeEval e = eval_mode(ctx, br, k, om, eta);
      const Complex s12 = mu * (e.d1 + I * k * e.w2);
      const Complex s22 = la * I * k * e.w1 + (la + 2.0 * mu) * e.d2;
      const double sc = mu * (std::abs(e.d1) + std::abs(k * e.w2)) +
                        la * std::abs(k * e.w1) + (la + 2.0 * mu) * std::abs(e.d2) + 1e-300;
      CHECK(std::abs(s12) <= 1e-8 * sc);
      CHECK(std::abs(s22) <= 1e-8 * sc);
    }
  }
}

struct FrozenRoot {
  ModeBranch branch;
  double kappa;  // positive representative
  double vg;     // group velocity at +kappa
};

const ClassifiedWavenumber* find_root(const std::vector<ClassifiedWavenumber>& roots,
                                      ModeBranch br, Complex k, double tol) {
  for (const auto& r : roots)
    if (r.branch == br && std::abs(r.kappa - k) <= tol) return &r;
  return nullptr;
}

}  // namespace

TEST_CASE("dispersion relation: closed forms at kappa=0 and cut-on zeros") {
  const DispersionContext ctx = ctx25();
  for (double om : {0.7, 1.3, 1.9}) {
    const Complex al(om / ctx.c_L, 0.0), be(om / ctx.c_T, 0.0);
    const Complex expect_s = be * be * be * be * std::cos(al) * std::sin(be);
    const Complex got_s = hsie::dispersion_f(ctx, ModeBranch::Symmetric, Complex(0.0, 0.0), om);
    CHECK(std::abs(got_s - expect_s) <= 1e-12 * std::abs(expect_s));
    const Complex expect_a = be * be * be * be * std::sin(al) * std::cos(be);
    const Complex got_a =
        hsie::dispersion_f(ctx, ModeBranch::Antisymmetric, Complex(0.0, 0.0), om);
    CHECK(std::abs(got_a - expect_a) <= 1e-12 * std::abs(expect_a));
  }
  const double om_s = ctx.c_L * kPi / 2.0;
  CHECK(std::abs(om_s - 1.72072116286) < 1e-10);
  const double sc_s = std::pow(om_s / ctx.c_T, 4.0);
  CHECK(std::abs(hsie::dispersion_f(ctx, ModeBranch::Symmetric, Complex(0.0, 0.0), om_s)) <=
        1e-12 * sc_s);
  const double om_a = ctx.c_T * kPi / 2.0;
  CHECK(std::abs(om_a - 0.99345882657) < 1e-10);
  const double sc_a = std::pow(om_a / ctx.c_T, 4.0);
  CHECK(std::abs(hsie::dispersion_f(ctx, ModeBranch::Antisymmetric, Complex(0.0, 0.0), om_a)) <=
        1e-12 * sc_a);
}

TEST_CASE("dispersion relation: kappa parity and square-root branch invariance") {
  const DispersionContext ctx = ctx25();
  const double om = 1.66;
  for (Complex k : {Complex(0.8, 0.3), Complex(-2.1, 1.7), Complex(0.0, 2.4), Complex(3.3, 0.0)}) {
    for (ModeBranch br : {ModeBranch::Symmetric, ModeBranch::Antisymmetric}) {
      const Complex fp = hsie::dispersion_f(ctx, br, k, om);
      const Complex fm = hsie::dispersion_f(ctx, br, -k, om);
      CHECK(fp == fm);

      // the printed formulas are even in one root and odd in the other, so
      // |F| is independent of either branch choice
      const Complex a = alpha_of(ctx, k, om);
      const Complex b = beta_of(ctx, k, om);
      const Complex f0 = printed_f(br, a, b, k);
      const double mag = std::abs(f0) + 1e-300;
      if (br == ModeBranch::Symmetric) {
        CHECK(std::abs(printed_f(br, -a, b, k) - f0) <= 1e-12 * mag);
        CHECK(std::abs(printed_f(br, a, -b, k) + f0) <= 1e-12 * mag);
      } else {
        CHECK(std::abs(printed_f(br, a, -b, k) - f0) <= 1e-12 * mag);
        CHECK(std::abs(printed_f(br, -a, b, k) + f0) <= 1e-12 * mag);
      }
      CHECK(std::abs(std::abs(fp) - std::abs(f0)) <= 1e-10 * mag);
    }
  }
}

TEST_CASE("lamb_roots: frozen propagating roots, classification, determinism") {
  const DispersionContext ctx = ctx25();
  const SearchBox box{-6.0, 6.0, -6.0, 6.0};

  struct Entry {
    double omega;
    std::vector<FrozenRoot> frozen;
    std::size_t n_real;
  };
  const std::vector<Entry> table{
      {1.7,
       {{ModeBranch::Symmetric, 0.241685334267, -0.1476101174},
        {ModeBranch::Symmetric, 1.3121446845, 0.3979041042},
        {ModeBranch::Symmetric, 2.40597750067, 0.3666818376},
        {ModeBranch::Antisymmetric, 1.33245586551, 0.7425039585},
        {ModeBranch::Antisymmetric, 3.07174849412, 0.6195947621}},
       10},
      {1.6,
       {{ModeBranch::Symmetric, 2.12021178095, 0.335435237},
        {ModeBranch::Antisymmetric, 1.19719601906, 0.7348997108},
        {ModeBranch::Antisymmetric, 2.91062628389, 0.6217051705}},
       6},
      {1.66,
       {{ModeBranch::Symmetric, 0.49372384457, -0.1499307574},
        {ModeBranch::Symmetric, 1.18708651026, 0.2464426461},
        {ModeBranch::Symmetric, 2.29479898511, 0.3530471287},
        {ModeBranch::Antisymmetric, 1.27851292435, 0.7403541464},
        {ModeBranch::Antisymmetric, 3.00723386792, 0.6204352755}},
       10}};

  for (const Entry& entry : table) {
    CAPTURE(entry.omega);
    const auto roots = hsie::lamb_roots(ctx, entry.omega, box, 64);

    std::size_t n_real = 0;
    for (const auto& r : roots) {
      if (r.kappa.imag() == 0.0) ++n_real;
      // every root satisfies the printed relation to the residual contract
      const Complex k = r.kappa;
      const Complex a = alpha_of(ctx, k, entry.omega);
      const Complex b = beta_of(ctx, k, entry.omega);
      const Complex k2 = k * k;
      const Complex q2 = (k2 - b * b) * (k2 - b * b);
      const double scale =
          (r.branch == ModeBranch::Symmetric
               ? std::abs(4.0 * k2 * a * b * std::sin(a) * std::cos(b)) +
                     std::abs(q2 * std::cos(a) * std::sin(b))
               : std::abs(4.0 * k2 * a * b * std::cos(a) * std::sin(b)) +
                     std::abs(q2 * std::sin(a) * std::cos(b))) +
          1e-300;
      CHECK(std::abs(hsie::dispersion_f(ctx, r.branch, k, entry.omega)) <= 1e-11 * scale);
      // set closed under negation
      CHECK(find_root(roots, r.branch, -r.kappa, 1e-9 * (1.0 + std::abs(r.kappa))) != nullptr);
    }
    CHECK(n_real == entry.n_real);

    for (const FrozenRoot& f : entry.frozen) {
      const auto* plus = find_root(roots, f.branch, Complex(f.kappa, 0.0), 1e-9);
      REQUIRE(plus != nullptr);
      REQUIRE(plus->group_velocity.has_value());
      CHECK(std::abs(*plus->group_velocity - f.vg) <= 5e-8);
      CHECK(plus->mode_class ==
            (f.vg > 0.0 ? ModeClass::OutgoingPropagating : ModeClass::IncomingPropagating));
      const auto* minus = find_root(roots, f.branch, Complex(-f.kappa, 0.0), 1e-9);
      REQUIRE(minus != nullptr);
      REQUIRE(minus->group_velocity.has_value());
      CHECK(std::abs(*minus->group_velocity + f.vg) <= 5e-8);
    }

    // sorted by (|Im|, |Re|, Re, Im, branch)
    for (std::size_t i = 0; i + 1 < roots.size(); ++i) {
      const auto key = [](const ClassifiedWavenumber& c) {
        return std::tuple(std::abs(c.kappa.imag()), std::abs(c.kappa.real()), c.kappa.real(),
                          c.kappa.imag(), static_cast<int>(c.branch));
      };
      CHECK(key(roots[i]) <= key(roots[i + 1]));
    }

    // byte-level determinism
    const auto again = hsie::lamb_roots(ctx, entry.omega, box, 64);
    REQUIRE(again.size() == roots.size());
    for (std::size_t i = 0; i < roots.size(); ++i) {
      CHECK(again[i].kappa == roots[i].kappa);
      CHECK(again[i].branch == roots[i].branch);
    }
  }

  // backward mode at 1.66: the outgoing real root with negative kappa
  const auto roots = hsie::lamb_roots(ctx, 1.66, box, 64);
  const auto* back = find_root(roots, ModeBranch::Symmetric, Complex(-0.49372384457, 0.0), 1e-9);
  REQUIRE(back != nullptr);
  CHECK(back->mode_class == ModeClass::OutgoingPropagating);
  CHECK(back->kappa.real() * back->group_velocity.value() < 0.0);

  // truncation
  const auto few = hsie::lamb_roots(ctx, 1.66, box, 4);
  CHECK(few.size() == 4);
}

TEST_CASE("lamb_roots: nine outgoing modes and argument-principle count") {
  Material m;
  m.E = 1.0;
  m.nu = 0.2;
  m.rho = 1.0;
  const DispersionContext ctx = hsie::make_context(m, 1.0);
  const auto all = hsie::lamb_roots(ctx, 1.615, SearchBox{-6.0, 6.0, -7.0, 7.0}, 256);
  REQUIRE(!all.empty());

  // place the test contour well away from every root so the phase winding
  // is unambiguous
  const auto pick_edge = [&](double want, bool is_re) {
    double best = want, best_dist = -1.0;
    for (int i = -40; i <= 40; ++i) {
      const double cand = want + 0.01 * i;
      double dmin = 1e9;
      for (const auto& r : all)
        dmin = std::min(dmin, std::abs((is_re ? r.kappa.real() : r.kappa.imag()) - cand));
      if (dmin > best_dist) {
        best_dist = dmin;
        best = cand;
      }
    }
    CHECK(best_dist > 0.05);
    return best;
  };
  const SearchBox box{pick_edge(-4.5, true), pick_edge(4.5, true), pick_edge(-5.1, false),
                      pick_edge(5.1, false)};

  std::size_t outgoing = 0, incoming = 0;
  std::size_t n_s = 0, n_a = 0;
  for (const auto& r : all) {
    if (r.kappa.real() < box.re_lo || r.kappa.real() > box.re_hi ||
        r.kappa.imag() < box.im_lo || r.kappa.imag() > box.im_hi)
      continue;
    if (hsie::is_outgoing(r.mode_class))
      ++outgoing;
    else
      ++incoming;
    (r.branch == ModeBranch::Symmetric ? n_s : n_a) += 1;
  }
  CHECK(outgoing >= 9);
  CHECK(outgoing == incoming);

  CHECK(phase_winding(ctx, ModeBranch::Symmetric, 1.615, box, 6000) == static_cast<int>(n_s));
  CHECK(phase_winding(ctx, ModeBranch::Antisymmetric, 1.615, box, 6000) ==
        static_cast<int>(n_a));
}

TEST_CASE("lamb_roots: input validation and degenerate frequencies") {
  const DispersionContext ctx = ctx25();
  const SearchBox box{-6.0, 6.0, -6.0, 6.0};
  CHECK_THROWS_AS(hsie::lamb_roots(ctx, -1.0, box, 8), std::invalid_argument);
  CHECK_THROWS_AS(hsie::lamb_roots(ctx, 1.7, SearchBox{1.0, -1.0, 0.0, 1.0}, 8),
                  std::invalid_argument);
  // zero-group-velocity frequency: the pair of real roots coalesces
  CHECK_THROWS_AS(hsie::lamb_roots(ctx, 1.62636894319, box, 64), std::runtime_error);
  CHECK_THROWS_AS(hsie::make_context(ctx.material, 0.0), std::invalid_argument);
}

TEST_CASE("group_velocity: finite-difference oracle on the root path") {
  const DispersionContext ctx = ctx25();
  struct Probe {
    ModeBranch br;
    double kappa, omega;
  };
  for (const Probe& p : {Probe{ModeBranch::Symmetric, 1.3121446845, 1.7},
                         Probe{ModeBranch::Symmetric, 0.241685334267, 1.7},
                         Probe{ModeBranch::Antisymmetric, 1.33245586551, 1.7},
                         Probe{ModeBranch::Symmetric, 2.29479898511, 1.66}}) {
    const double vg = hsie::group_velocity(ctx, p.br, p.kappa, p.omega);
    const double h = 1e-5;
    const Complex kp = continue_root(ctx, p.br, Complex(p.omega + h, 0.0), Complex(p.kappa, 0.0));
    const Complex km = continue_root(ctx, p.br, Complex(p.omega - h, 0.0), Complex(p.kappa, 0.0));
    const double vg_fd = (2.0 * h / (kp - km)).real();
    CHECK(std::abs(vg - vg_fd) <= 1e-6 * std::abs(vg));
  }

  // fundamental symmetric branch at small frequency moves forward
  const auto roots = hsie::lamb_roots(ctx, 0.5, SearchBox{-3.0, 3.0, -1.0, 1.0}, 16);
  bool fundamental_forward = false;
  for (const auto& r : roots)
    if (r.branch == ModeBranch::Symmetric && r.kappa.imag() == 0.0 && r.kappa.real() > 0.0 &&
        r.group_velocity.value_or(-1.0) > 0.0)
      fundamental_forward = true;
  CHECK(fundamental_forward);

  // vanishing group velocity raises the degenerate-root error
  CHECK_THROWS_AS(hsie::group_velocity(ctx, ModeBranch::Symmetric, 0.881339025771, 1.62636894319),
                  std::runtime_error);
}

TEST_CASE("lamb_mode: parity, Navier residual, free-wall traction") {
  const DispersionContext ctx = ctx25();

  // parity of the printed profiles
  for (double eta : {0.13, 0.62, 0.98}) {
    const Complex k(1.3121446845, 0.0);
    const auto sp = hsie::lamb_mode(ctx, ModeBranch::Symmetric, k, 1.7, eta);
    const auto sm = hsie::lamb_mode(ctx, ModeBranch::Symmetric, k, 1.7, -eta);
    const double smag = std::abs(sp[0]) + std::abs(sp[1]) + 1e-300;
    CHECK(std::abs(sp[0] - sm[0]) <= 1e-13 * smag);  // w1 even
    CHECK(std::abs(sp[1] + sm[1]) <= 1e-13 * smag);  // w2 odd
    const auto ap = hsie::lamb_mode(ctx, ModeBranch::Antisymmetric, k, 1.7, eta);
    const auto am = hsie::lamb_mode(ctx, ModeBranch::Antisymmetric, k, 1.7, -eta);
    const double amag = std::abs(ap[0]) + std::abs(ap[1]) + 1e-300;
    CHECK(std::abs(ap[0] + am[0]) <= 1e-13 * amag);  // w1 odd
    CHECK(std::abs(ap[1] - am[1]) <= 1e-13 * amag);  // w2 even
  }

  // interior residual vanishes for any (kappa, omega); traction only at roots
  check_mode_pde(ctx, ModeBranch::Symmetric, Complex(2.29479898511, 0.0), 1.66, true);
  check_mode_pde(ctx, ModeBranch::Symmetric, Complex(-0.49372384457, 0.0), 1.66, true);
  check_mode_pde(ctx, ModeBranch::Antisymmetric, Complex(1.27851292435, 0.0), 1.66, true);
  check_mode_pde(ctx, ModeBranch::Symmetric, Complex(0.9, 1.4), 1.66, false);

  // field is the profile modulated along the axis
  const Complex k(2.29479898511, 0.0);
  const auto w = hsie::lamb_mode(ctx, ModeBranch::Symmetric, k, 1.66, 0.37);
  const auto f = hsie::lamb_field(ctx, ModeBranch::Symmetric, k, 1.66, 1.9, 0.37);
  const Complex ph = std::exp(Complex(0.0, 1.0) * k * 1.9);
  CHECK(std::abs(f[0] - ph * w[0]) <= 1e-13 * std::abs(w[0]));
  CHECK(std::abs(f[1] - ph * w[1]) <= 1e-13 * std::abs(w[1]));
}

TEST_CASE("limiting absorption: outgoing roots move to the upper half-plane") {
  const DispersionContext ctx = ctx25();
  const SearchBox box{-6.0, 6.0, -6.0, 6.0};
  const double eps = 1e-4;
  for (double om : {1.7, 1.66}) {
    const auto roots = hsie::lamb_roots(ctx, om, box, 64);
    for (const auto& r : roots) {
      if (r.kappa.imag() != 0.0) continue;
      const Complex shifted = continue_root(ctx, r.branch, Complex(om, eps), r.kappa);
      CAPTURE(om);
      CAPTURE(r.kappa.real());
      if (r.mode_class == ModeClass::OutgoingPropagating) {
        CHECK((Complex(0.0, 1.0) * shifted).real() < 0.0);
      } else {
        CHECK((Complex(0.0, 1.0) * shifted).real() > 0.0);
      }
    }
  }
}

TEST_CASE("reference_field: nine normalized outgoing modes at omega=1.66") {
  const DispersionContext ctx = ctx25();
  const auto rf = hsie::reference_field(ctx, 1.66);
  REQUIRE(rf.modes.size() == 9);

  std::size_t n_s = 0, n_a = 0;
  bool has_backward = false;
  for (const auto& m : rf.modes) {
    CHECK(hsie::is_outgoing(m.wavenumber.mode_class));
    CHECK(m.norm > 0.0);
    (m.wavenumber.branch == ModeBranch::Symmetric ? n_s : n_a) += 1;
    if (std::abs(m.wavenumber.kappa - Complex(-0.49372384457, 0.0)) < 1e-8) has_backward = true;
    // every summand is a homogeneous solution
    check_mode_pde(ctx, m.wavenumber.branch, m.wavenumber.kappa, 1.66, true);
  }
  CHECK(n_s == 5);
  CHECK(n_a == 4);
  CHECK(has_backward);

  // L2 norm over the cross-section of a sum of nine unit-norm profiles
  const hsie::QuadratureRule q = hsie::gauss_legendre(16, 0.0, 1.0);
  double acc = 0.0;
  for (int s = 0; s < 8; ++s) {
    const double y0 = -1.0 + 0.25 * s;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
      const hsie::FieldValue f = rf(0.0, y0 + 0.25 * q.nodes[i]);
      acc += 0.25 * q.weights[i] * (std::norm(f.u[0]) + std::norm(f.u[1]));
    }
  }
  CHECK(std::sqrt(acc) <= 9.0 + 1e-9);

  // gradient entries match the modal structure: d/dx multiplies by i kappa
  const hsie::FieldValue f = rf(0.7, 0.21);
  const double h = 1e-6;
  const hsie::FieldValue fp = rf(0.7 + h, 0.21);
  const hsie::FieldValue fm = rf(0.7 - h, 0.21);
  for (int c = 0; c < 2; ++c) {
    const Complex fd = (fp.u[c] - fm.u[c]) / (2.0 * h);
    CHECK(std::abs(fd - f.grad[c][0]) <= 1e-5 * (std::abs(f.grad[c][0]) + 1.0));
  }
  const hsie::FieldValue gp = rf(0.7, 0.21 + h);
  const hsie::FieldValue gm = rf(0.7, 0.21 - h);
  for (int c = 0; c < 2; ++c) {
    const Complex fd = (gp.u[c] - gm.u[c]) / (2.0 * h);
    CHECK(std::abs(fd - f.grad[c][1]) <= 1e-5 * (std::abs(f.grad[c][1]) + 1.0));
  }

  // determinism and failure propagation
  const auto rf2 = hsie::reference_field(ctx, 1.66);
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(rf2.modes[i].wavenumber.kappa == rf.modes[i].wavenumber.kappa);
    CHECK(rf2.modes[i].norm == rf.modes[i].norm);
  }
  CHECK_THROWS_AS(hsie::reference_field(ctx, 1.66, 50, 0), std::runtime_error);
}

TEST_CASE("transverse_modal_evp: cut-on families and dispersion duality") {
  const DispersionContext ctx = ctx25();
  const hsie::TransverseMatrices tm = hsie::transverse_matrices(12, {-1.0, 1.0});

  // kappa = 0: eigenvalues decouple into the two cut-on families
  const auto at0 = hsie::transverse_modal_evp(tm, ctx.material, Complex(0.0, 0.0));
  CHECK(at0.size() == 2 * tm.n);
  const std::vector<double> cutons{ctx.c_T * kPi / 2.0, ctx.c_L * kPi / 2.0, ctx.c_T * kPi,
                                   ctx.c_T * 1.5 * kPi, ctx.c_L * kPi};
  for (double w : cutons) {
    double best = 1e9;
    for (Complex v : at0) best = std::min(best, std::abs(v - Complex(w * w, 0.0)));
    CAPTURE(w);
    CHECK(best <= 1e-8 * (1.0 + w * w));
  }

  // spectrum is invariant under kappa -> -kappa (transposed block structure)
  for (Complex k : {Complex(0.9, 0.4), Complex(2.1, -1.3)}) {
    const auto vp = hsie::transverse_modal_evp(tm, ctx.material, k);
    const auto vm = hsie::transverse_modal_evp(tm, ctx.material, -k);
    REQUIRE(vp.size() == vm.size());
    for (std::size_t i = 0; i < vp.size(); ++i)
      CHECK(std::abs(vp[i] - vm[i]) <= 1e-9 * (1.0 + std::abs(vp[i])));
  }

  // duality: omega^2 of each Lamb root appears in the fixed-kappa spectrum
  const SearchBox box{-4.2, 4.2, -3.6, 3.6};
  for (int i = 1; i <= 10; ++i) {
    const double om = 0.8 + (2.0 - 0.8) * static_cast<double>(i) / 11.0;
    const auto roots = hsie::lamb_roots(ctx, om, box, 64);
    CHECK(!roots.empty());
    for (const auto& r : roots) {
      const auto vals = hsie::transverse_modal_evp(tm, ctx.material, r.kappa);
      double best = 1e9;
      for (Complex v : vals) best = std::min(best, std::abs(v - Complex(om * om, 0.0)));
      CAPTURE(om);
      CAPTURE(r.kappa.real());
      CAPTURE(r.kappa.imag());
      CHECK(best <= 1e-8 * (1.0 + om * om));
    }
  }

  CHECK_THROWS_AS(hsie::transverse_modal_evp(hsie::TransverseMatrices{}, ctx.material,
                                             Complex(1.0, 0.0)),
                  std::invalid_argument);
}

TEST_CASE("essential_spectrum: cut-on endpoints, point symmetry, backward window") {
  const DispersionContext ctx = ctx25();
  const hsie::TransverseMatrices tm = hsie::transverse_matrices(12, {-1.0, 1.0});
  const hsie::PoleParams line{Complex(-1.0, 0.2), Complex(-1.0, 0.2)};

  const auto curves = hsie::essential_spectrum(line, tm, ctx.material, -5.0, 0.0, 300, 2.2);
  CHECK(curves.size() >= 4);

  // curves reaching r=0 terminate at a frequency with a vanishing wavenumber
  const std::vector<double> cutons{0.0, ctx.c_T * kPi / 2.0, ctx.c_L * kPi / 2.0,
                                   ctx.c_T * kPi, ctx.c_T * 1.5 * kPi};
  std::size_t ended_at_cuton = 0;
  for (const auto& c : curves) {
    REQUIRE(!c.r.empty());
    REQUIRE(c.r.size() == c.omega.size());
    CHECK(std::is_sorted(c.r.begin(), c.r.end()));
    if (c.r.back() == 0.0) {
      double best = 1e9;
      for (double w : cutons) best = std::min(best, std::abs(c.omega.back() - Complex(w, 0.0)));
      CHECK(best <= 1e-6);
      ++ended_at_cuton;
    }
  }
  CHECK(ended_at_cuton >= 4);

  // a curve passes through {Re in (1.58,1.65), Im > 0}: backward-mode window
  bool enters = false;
  double max_im_equiv = -1.0;
  for (const auto& c : curves)
    for (Complex w : c.omega) {
      if (w.real() > 1.58 && w.real() < 1.65 && w.imag() > 0.0) enters = true;
      if (w.real() > 0.8 && w.real() < 1.57) max_im_equiv = std::max(max_im_equiv, w.imag());
    }
  CHECK(enters);
  CHECK(max_im_equiv <= 1e-12);

  // gamma is odd in r, so mirrored parameters give identical omega sets
  for (double r : {-2.3, -0.7}) {
    CHECK(hsie::gamma_point(line, -r) == -hsie::gamma_point(line, r));
    const Complex kp = Complex(0.0, -1.0) * hsie::gamma_point(line, r);
    const auto vp = hsie::transverse_modal_evp(tm, ctx.material, kp);
    const auto vm = hsie::transverse_modal_evp(tm, ctx.material, -kp);
    for (std::size_t i = 0; i < vp.size(); ++i)
      CHECK(std::abs(vp[i] - vm[i]) <= 1e-9 * (1.0 + std::abs(vp[i])));
  }

  CHECK_THROWS_AS(hsie::essential_spectrum(line, tm, ctx.material, 1.0, -1.0, 10, 2.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(hsie::essential_spectrum(line, tm, ctx.material, -5.0, 0.0, 1, 2.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(hsie::essential_spectrum(line, tm, ctx.material, -5.0, 0.0, 10, 0.0),
                  std::invalid_argument);
}

TEST_CASE("resonances: closed Dirichlet box matches the dense oracle") {
  Material m;
  m.E = 1.0;
  m.nu = 0.25;
  m.rho = 1.0;
  hsie::BlockMesh bm;
  bm.blocks.push_back({0.0, 1.0, 0.0, 1.0, 3, 3, 0});
  bm.materials = {m};
  bm.boundary_overrides = {
      hsie::BoundarySegment{'x', 0.0, 0.0, 1.0, hsie::BoundaryCondition::Dirichlet, -1},
      hsie::BoundarySegment{'x', 1.0, 0.0, 1.0, hsie::BoundaryCondition::Dirichlet, -1},
      hsie::BoundarySegment{'y', 0.0, 0.0, 1.0, hsie::BoundaryCondition::Dirichlet, -1},
      hsie::BoundarySegment{'y', 1.0, 0.0, 1.0, hsie::BoundaryCondition::Dirichlet, -1}};
  const hsie::MeshTopology mesh(bm);
  const hsie::DofMap dofs = hsie::build_dof_map(mesh, 4);
  const hsie::InteriorSystem sys = hsie::assemble_interior(mesh, dofs);
  std::vector<char> fixed(2 * dofs.n_scalar, 0);
  for (std::size_t s = 0; s < dofs.n_scalar; ++s)
    if (dofs.dirichlet[s]) fixed[2 * s] = fixed[2 * s + 1] = 1;
  const hsie::ReducedSystem red =
      hsie::dirichlet_lift(sys.a, sys.b, fixed, std::vector<Complex>(2 * dofs.n_scalar));

  hsie::AssembledSystem system;
  system.a = red.a;
  system.b = red.b;
  system.n_interior = red.a.n_rows;

  const std::vector<Complex> shifts{Complex(2.0, 0.0), Complex(3.5, 0.0)};
  const hsie::SpectrumResult res = hsie::resonances(system, shifts, 80, 6);
  REQUIRE(!res.eigenvalues.empty());
  REQUIRE(res.eigenvalues.size() == res.residuals.size());
  REQUIRE(res.eigenvalues.size() == res.classification.size());

  // dense generalized eigenvalues as the oracle
  const hsie::DenseComplexMatrix c =
      hsie::dense_lu_solve(hsie::to_dense(red.b), hsie::to_dense(red.a));
  const hsie::DenseEigResult oracle = hsie::dense_eig(c, false);

  for (std::size_t i = 0; i < res.eigenvalues.size(); ++i) {
    const Complex w = res.eigenvalues[i];
    CHECK(w.real() >= 0.0);
    CHECK(std::abs(w.imag()) <= 1e-7 * (1.0 + w.real()));
    CHECK(res.residuals[i] <= 1e-8);
    CHECK(res.classification[i] == hsie::SpectrumLabel::Unclassified);
    double best = 1e9;
    for (Complex lam : oracle.values) best = std::min(best, std::abs(w * w - lam));
    CHECK(best <= 1e-7 * (1.0 + std::norm(w)));
  }
  CHECK(std::is_sorted(res.eigenvalues.begin(), res.eigenvalues.end(),
                       [](Complex x, Complex y) {
                         return std::tuple(x.real(), x.imag()) < std::tuple(y.real(), y.imag());
                       }));

  // determinism across repeated runs
  const hsie::SpectrumResult res2 = hsie::resonances(system, shifts, 80, 6);
  REQUIRE(res2.eigenvalues.size() == res.eigenvalues.size());
  for (std::size_t i = 0; i < res.eigenvalues.size(); ++i) {
    CHECK(res2.eigenvalues[i] == res.eigenvalues[i]);
    CHECK(res2.residuals[i] == res.residuals[i]);
  }

  CHECK_THROWS_AS(hsie::resonances(system, {}, 80, 6), std::invalid_argument);
}

TEST_CASE("classify_spectrum: matching and essential-proximity rules") {
  hsie::SpectrumResult a;
  a.eigenvalues = {Complex(1.0, -0.1), Complex(2.0, 0.0005), Complex(3.0, -0.4)};
  a.residuals = {1e-9, 1e-9, 1e-9};
  a.classification.assign(3, hsie::SpectrumLabel::Unclassified);
  a.essential = {hsie::EssentialCurve{{0.0, 1.0}, {Complex(2.0, 0.0), Complex(2.0, 0.1)}}};

  hsie::SpectrumResult b;
  b.eigenvalues = {Complex(1.0, -0.1000000001), Complex(5.0, 0.0)};
  b.residuals = {1e-9, 1e-9};
  b.classification.assign(2, hsie::SpectrumLabel::Unclassified);
  b.essential = {hsie::EssentialCurve{{0.0, 1.0}, {Complex(4.0, 0.0), Complex(4.0, 0.1)}}};

  const hsie::SpectrumResult out = hsie::classify_spectrum(a, b, 1e-3);
  REQUIRE(out.classification.size() == 3);
  CHECK(out.classification[0] == hsie::SpectrumLabel::ResonanceCandidate);
  CHECK(out.classification[1] == hsie::SpectrumLabel::EssentialCluster);
  CHECK(out.classification[2] == hsie::SpectrumLabel::Unclassified);
  std::size_t candidates = 0;
  for (auto lbl : out.classification)
    if (lbl == hsie::SpectrumLabel::ResonanceCandidate) ++candidates;
  CHECK(candidates == 1);

  // proximity to the perturbed run's essential curve also labels as cluster
  hsie::SpectrumResult a2 = a;
  a2.eigenvalues[2] = Complex(4.0, 0.05);
  const hsie::SpectrumResult out2 = hsie::classify_spectrum(a2, b, 1e-3);
  CHECK(out2.classification[2] == hsie::SpectrumLabel::EssentialCluster);

  CHECK_THROWS_AS(hsie::classify_spectrum(a, b, 0.0), std::invalid_argument);
}

TEST_CASE("zero_group_velocity_frequencies: coalescence and cut-on catalogue") {
  const DispersionContext ctx = ctx25();
  const auto zgv = hsie::zero_group_velocity_frequencies(ctx, 1.5, 1.8);
  REQUIRE(zgv.size() == 2);
  CHECK(std::abs(zgv[0] - 1.62636894319) <= 2e-6);
  CHECK(std::abs(zgv[1] - ctx.c_L * kPi / 2.0) <= 1e-6);
  CHECK(std::is_sorted(zgv.begin(), zgv.end()));

  const auto low = hsie::zero_group_velocity_frequencies(ctx, 0.9, 1.1);
  bool has_cuton = false;
  for (double w : low)
    if (std::abs(w - ctx.c_T * kPi / 2.0) <= 1e-6) has_cuton = true;
  CHECK(has_cuton);

  CHECK_THROWS_AS(hsie::zero_group_velocity_frequencies(ctx, 1.8, 1.5), std::invalid_argument);
}

TEST_CASE("dirichlet_eigenvalues: double eigenvalue and rotation symmetry") {
  Material m;
  m.E = 1.0;
  m.nu = 0.2;
  m.rho = 4.0;
  hsie::MeshBlock blk;
  blk.x0 = -0.5;
  blk.x1 = 0.5;
  blk.y0 = -0.5;
  blk.y1 = 0.5;
  blk.nx = 4;
  blk.ny = 4;

  const auto eigs = hsie::dirichlet_eigenvalues(blk, m, 6, 6);
  REQUIRE(eigs.omega.size() == 6);
  REQUIRE(eigs.vectors.size() == 6);
  CHECK(std::is_sorted(eigs.omega.begin(), eigs.omega.end()));
  for (double w : eigs.omega) CHECK(w > 0.0);

  // lowest eigenvalue is two-fold, close to the limit value 1.89
  CHECK(std::abs(eigs.omega[0] - eigs.omega[1]) <= 1e-5);
  CHECK(std::abs(eigs.omega[0] - 1.89) <= 0.02);
  CHECK(std::abs(eigs.omega[0] - 1.897250) <= 2e-5);
  CHECK(eigs.omega[2] - eigs.omega[1] > 0.1);

  // p-refinement gives conforming upper bounds
  const double w3 = hsie::dirichlet_eigenvalues(blk, m, 3, 1).omega[0];
  const double w4 = hsie::dirichlet_eigenvalues(blk, m, 4, 1).omega[0];
  const double w5 = hsie::dirichlet_eigenvalues(blk, m, 5, 1).omega[0];
  CHECK(w3 >= w4 - 1e-12);
  CHECK(w4 >= w5 - 1e-12);
  CHECK(w5 >= eigs.omega[0] - 1e-9);

  // the rotated eigenfunction stays inside the two-dimensional eigenspace
  hsie::BlockMesh bm;
  hsie::MeshBlock b0 = blk;
  b0.material = 0;
  bm.blocks = {b0};
  bm.materials = {m};
  bm.boundary_overrides = {
      hsie::BoundarySegment{'x', -0.5, -0.5, 0.5, hsie::BoundaryCondition::Dirichlet, -1},
      hsie::BoundarySegment{'x', 0.5, -0.5, 0.5, hsie::BoundaryCondition::Dirichlet, -1},
      hsie::BoundarySegment{'y', -0.5, -0.5, 0.5, hsie::BoundaryCondition::Dirichlet, -1},
      hsie::BoundarySegment{'y', 0.5, -0.5, 0.5, hsie::BoundaryCondition::Dirichlet, -1}};
  const hsie::MeshTopology mesh(bm);
  const hsie::DofMap dofs = hsie::build_dof_map(mesh, 6);
  REQUIRE(eigs.vectors[0].size() == 2 * dofs.n_scalar);

  std::mt19937 rng(911);
  std::uniform_real_distribution<double> dist(-0.45, 0.45);
  std::vector<std::array<double, 2>> pts;
  for (int i = 0; i < 30; ++i) pts.push_back({dist(rng), dist(rng)});

  // v_rot(x,y) = Q v(Q^T (x,y)) with Q the quarter-turn rotation
  std::vector<Complex> rot(2 * pts.size()), e1(2 * pts.size()), e2(2 * pts.size());
  double scale = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto s1 = hsie::evaluate_displacement(mesh, dofs, eigs.vectors[0], pts[i][0], pts[i][1]);
    const auto s2 = hsie::evaluate_displacement(mesh, dofs, eigs.vectors[1], pts[i][0], pts[i][1]);
    const auto sr =
        hsie::evaluate_displacement(mesh, dofs, eigs.vectors[0], pts[i][1], -pts[i][0]);
    e1[2 * i] = s1.u[0];
    e1[2 * i + 1] = s1.u[1];
    e2[2 * i] = s2.u[0];
    e2[2 * i + 1] = s2.u[1];
    rot[2 * i] = -sr.u[1];
    rot[2 * i + 1] = sr.u[0];
    scale = std::max(scale, std::abs(rot[2 * i]) + std::abs(rot[2 * i + 1]));
  }
  // least squares of rot against span{e1, e2}
  Complex g11 = 0, g12 = 0, g22 = 0, r1 = 0, r2 = 0;
  for (std::size_t i = 0; i < rot.size(); ++i) {
    g11 += std::conj(e1[i]) * e1[i];
    g12 += std::conj(e1[i]) * e2[i];
    g22 += std::conj(e2[i]) * e2[i];
    r1 += std::conj(e1[i]) * rot[i];
    r2 += std::conj(e2[i]) * rot[i];
  }
  const Complex det = g11 * g22 - g12 * std::conj(g12);
  REQUIRE(std::abs(det) > 0.0);
  const Complex ca = (r1 * g22 - g12 * r2) / det;
  const Complex cb = (g11 * r2 - std::conj(g12) * r1) / det;
  double worst = 0.0;
  for (std::size_t i = 0; i < rot.size(); ++i)
    worst = std::max(worst, std::abs(rot[i] - ca * e1[i] - cb * e2[i]));
  CHECK(worst <= 1e-6 * scale);

  CHECK(hsie::dirichlet_eigenvalues(blk, m, 4, 0).omega.empty());
}
